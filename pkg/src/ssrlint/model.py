"""Staking model: role-tagged storage paths plus one dependency graph per token transfer."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import AmbiguousPath, DepthExceeded
from .extract.info import FUNC_ROLES, StakingInfo
from .graphs import CallGraph
from .ingest import ir
from .paths import THIS, Scope, VariablePath, key_shape_of, strip_conversions
from .transfers import Transfer, find_transfers

DEPTH_BOUND = 16
TIME_SPECIALS = ("block.timestamp", "block.number")

ROLE_KIND = {
    "UserStakeAmount": "amount",
    "UserStakeReward": "reward",
    "UserStakeTime": "time",
    "StakeTokenAddress": "stake_token",
    "RewardTokenAddress": "reward_token",
}


# --- nodes and graph -----------------------------------------------------------

@dataclass(frozen=True, order=True)
class CdgNode:
    kind: str  # state | local | param | balance | external | constant | special | selfsupply
    name: str
    fn: str = ""
    detail: str = ""
    path: VariablePath | None = field(default=None, compare=False, hash=False)
    target: str = field(default="", compare=False, hash=False)  # receiver's static type for external nodes

    @property
    def id(self) -> str:
        parts = [self.kind, self.name]
        if self.fn:
            parts.append(self.fn)
        if self.detail:
            parts.append(self.detail)
        return ":".join(parts)

    @property
    def label(self) -> str:
        if self.kind == "external":
            return f"{self.name}.{self.detail}()"
        if self.kind == "balance":
            return "this.balance" if self.name == "native" else f"{self.name}.balanceOf(this)"
        return self.name

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True, order=True)
class CdgEdge:
    src: CdgNode
    dst: CdgNode
    kind: str  # Cal | Con


@dataclass
class Cdg:
    root: CdgNode
    nodes: list[CdgNode] = field(default_factory=list)
    edges: list[CdgEdge] = field(default_factory=list)
    transfer: Transfer | None = None
    role: str | None = None
    partial: bool = False
    diagnostics: list[str] = field(default_factory=list)
    # node id -> where the node's value or guard was found
    sites: dict[str, list[ir.Loc]] = field(default_factory=dict)
    low_level: bool = False
    unanalyzed: bool = False
    state_dep: set[VariablePath] = field(default_factory=set)
    depends_on_balance: bool = False
    balance_kinds: set[str] = field(default_factory=set)
    pool_sources: set[CdgNode] = field(default_factory=set)
    time_dep: bool = False
    time_evidence: list[CdgNode] = field(default_factory=list)

    def has_node(self, n: CdgNode) -> bool:
        return n in self._node_set()

    def _node_set(self) -> set[CdgNode]:
        return set(self.nodes)

    def cal_targets(self, include_constants: bool = False) -> set[CdgNode]:
        return {e.dst for e in self.edges if e.kind == "Cal" and (include_constants or e.dst.kind != "constant")}

    def con_targets(self) -> set[CdgNode]:
        return {e.dst for e in self.edges if e.kind == "Con"}

    def reachable_from(self, start: CdgNode, kinds: tuple[str, ...] = ("Cal", "Con")) -> set[CdgNode]:
        seen = {start}
        todo = deque([start])
        while todo:
            n = todo.popleft()
            for e in self.edges:
                if e.src == n and e.kind in kinds and e.dst not in seen:
                    seen.add(e.dst)
                    todo.append(e.dst)
        return seen

    def path_to(self, target: CdgNode) -> list[CdgEdge]:
        """Shortest edge chain from the root to ``target`` (empty if target is the root)."""
        prev: dict[CdgNode, CdgEdge] = {}
        todo = deque([self.root])
        seen = {self.root}
        while todo:
            n = todo.popleft()
            if n == target:
                break
            for e in self.edges:
                if e.src == n and e.dst not in seen:
                    seen.add(e.dst)
                    prev[e.dst] = e
                    todo.append(e.dst)
        chain = []
        cur = target
        while cur in prev:
            chain.append(prev[cur])
            cur = prev[cur].src
        return list(reversed(chain))

    def state_nodes(self) -> list[CdgNode]:
        return [n for n in self.nodes if n.kind == "state"]

    def to_dot(self) -> str:
        lines = [f'digraph "cdg {self.root.label}" {{', "  node [fontname=monospace];"]
        ids = {n: f"n{i}" for i, n in enumerate(self.nodes)}
        for n, i in ids.items():
            shape = "doublecircle" if n == self.root else "box"
            lines.append(f'  {i} [label="{n.kind}: {n.label}" shape={shape}];')
        for e in self.edges:
            style = "" if e.kind == "Cal" else " style=dashed"
            lines.append(f'  {ids[e.src]} -> {ids[e.dst]} [label="{e.kind}"{style}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


# --- dependency extraction --------------------------------------------------------

@dataclass
class _Frame:
    """Expression context: the function whose scope interprets names, plus parameter bindings."""

    fn: ir.FunctionIR | None
    scope: Scope
    bindings: dict[str, tuple[ir.Expr, _Frame]] = field(default_factory=dict)
    depth: int = 0
    ctx: str = ""  # call sites that entered this frame, so helper locals stay per call


class CdgBuilder:
    def __init__(self, contract: ir.ContractIR, cg: CallGraph, depth_bound: int = DEPTH_BOUND):
        self.contract = contract
        self.cg = cg
        self.depth_bound = depth_bound
        self.fns = [f for f in contract.functions if f in cg.cfgs]
        self.consts = {v.name for v in contract.state_vars if v.is_constant_or_immutable}
        self.contract_scope = Scope(contract)
        self.partial = False
        self.low_level = False
        self.unanalyzed = False
        self.diagnostics: list[str] = []
        self.frames: dict[CdgNode, _Frame] = {}

    # nodes ------------------------------------------------------------------
    def state_node(self, path: VariablePath) -> CdgNode:
        if path.base in self.consts and path.member is None:
            return CdgNode("constant", path.base)
        return CdgNode("state", str(path), path=path)

    def deps(self, e: ir.Expr | None, fr: _Frame) -> list[CdgNode]:
        """Nodes whose values flow into ``e`` (index keys excluded)."""
        out: list[CdgNode] = []
        self._deps(e, fr, out)
        seen = set()
        uniq = []
        for n in out:
            if n not in seen:
                seen.add(n)
                uniq.append(n)
        return uniq

    def _deps(self, e: ir.Expr | None, fr: _Frame, out: list[CdgNode]) -> None:
        if e is None:
            return
        if isinstance(e, ir.Literal):
            out.append(CdgNode("constant", e.value))
            return
        if isinstance(e, ir.SpecialRef):
            if e.name == "this.balance":
                out.append(CdgNode("balance", "native"))
            else:
                out.append(CdgNode("special", e.name))
            return
        if isinstance(e, ir.Identifier):
            if e.kind == "param" and e.name in fr.bindings:
                arg, afr = fr.bindings[e.name]
                self._deps(arg, afr, out)
                return
            acc = fr.scope.access(e)
            if acc is not None:
                out.append(self.state_node(acc.path))
                return
            if e.kind == "local":
                if e.name in fr.scope.aliases:  # untraced storage pointer
                    self.diagnostics.append(f"{e.loc}: dependency through untraced storage pointer {e.name!r}")
                    self.partial = True
                node = CdgNode("local", e.name, self._fn_name(fr), fr.ctx)
                if fr.ctx:
                    self.frames[node] = fr
                out.append(node)
            elif e.kind == "param":
                out.append(CdgNode("param", e.name, self._fn_name(fr)))
            elif e.kind == "state":
                out.append(self.state_node(VariablePath(e.name)))
            return
        if isinstance(e, (ir.IndexAccess, ir.MemberAccess)):
            acc = fr.scope.access(e)
            if acc is not None:
                out.append(self.state_node(acc.path))
                return
            if isinstance(e, ir.MemberAccess):
                self._deps(e.base, fr, out)
            else:
                self._deps(e.base, fr, out)
            return
        if isinstance(e, ir.Call):
            self._call_deps(e, fr, out)
            return
        if isinstance(e, ir.AssignExpr):
            self._deps(e.value, fr, out)
            return
        for c in e.children():
            self._deps(c, fr, out)

    def _fn_name(self, fr: _Frame) -> str:
        return (fr.fn.name or fr.fn.kind) if fr.fn else ""

    def _call_deps(self, call: ir.Call, fr: _Frame, out: list[CdgNode]) -> None:
        c = call.callee
        # conversions
        stripped = strip_conversions(call)
        if stripped is not call:
            self._deps(stripped, fr, out)
            return
        name = call.callee_name
        # token balance of this contract
        if isinstance(c, ir.MemberAccess) and c.member == "balanceOf" and len(call.args) == 1:
            if fr.scope.classify(call.args[0]) == THIS:
                recv = strip_conversions(c.base)
                key = self._receiver_key(recv, fr)
                out.append(CdgNode("balance", key, detail="token"))
                return
        target = self._internal_target(call, fr)
        if target is not None:
            self._descend(target, call, fr, out)
            return
        if isinstance(c, ir.Identifier) and c.kind == "function":
            # declared without a body (abstract / interface)
            if name == "totalSupply":
                out.append(CdgNode("selfsupply", "totalSupply()"))
            else:
                out.append(CdgNode("external", "self", detail=name))
            return
        if isinstance(c, ir.Identifier) and c.name == "totalSupply" and c.kind == "unresolved":
            out.append(CdgNode("selfsupply", "totalSupply()"))
            return
        if isinstance(c, ir.MemberAccess):
            base = c.base
            if isinstance(base, ir.Identifier) and base.kind in ("contract", "unresolved") and base.name[:1].isupper():
                # library helper: value flows from the arguments
                for a in call.args:
                    self._deps(a, fr, out)
                return
            t = fr.scope.type_of(base)
            if t.kind == "contract":
                key = self._receiver_key(strip_conversions(base), fr)
                out.append(CdgNode("external", key, detail=c.member, target=t.name))
                return
            if c.member in ("call", "delegatecall", "staticcall"):
                self.low_level = True
            # using-for arithmetic and friends: receiver and arguments both flow in
            self._deps(base, fr, out)
            for a in call.args:
                self._deps(a, fr, out)
            return
        if isinstance(c, ir.Identifier) and c.kind in ("builtin", "unresolved"):
            for a in call.args:
                self._deps(a, fr, out)
            return
        for a in call.args:
            self._deps(a, fr, out)

    def _receiver_key(self, recv: ir.Expr | None, fr: _Frame) -> str:
        if isinstance(recv, ir.Identifier) and recv.kind == "param" and recv.name in fr.bindings:
            arg, afr = fr.bindings[recv.name]
            return self._receiver_key(strip_conversions(arg), afr)
        acc = fr.scope.access(recv) if recv is not None else None
        if acc is not None:
            return str(acc.path)
        if isinstance(recv, ir.Identifier):
            return recv.name
        if isinstance(recv, ir.SpecialRef):
            return recv.name
        return "?"

    def _internal_target(self, call: ir.Call, fr: _Frame) -> ir.FunctionIR | None:
        for e in self.cg.edges:
            if e.call is call and e.kind == "internal" and e.callee is not None:
                return e.callee
        return None

    def _descend(self, target: ir.FunctionIR, call: ir.Call, fr: _Frame, out: list[CdgNode]) -> None:
        if fr.depth + 1 > self.depth_bound:
            self.partial = True
            self.diagnostics.append(f"{call.loc}: call depth bound {self.depth_bound} exceeded at {target.name!r}")
            return
        if target.body is None:
            out.append(CdgNode("external", "self", detail=target.name))
            return
        scope = self.cg.defuse[target].scope
        binds = {p.name: (a, fr) for p, a in zip(target.params, call.args)}
        sub = _Frame(target, scope, binds, fr.depth + 1, f"{fr.ctx}@{call.loc.line}:{call.loc.col}")
        for ret in self.return_exprs(target, sub):
            self._deps(ret, sub, out)

    def return_exprs(self, f: ir.FunctionIR, fr: _Frame) -> list[ir.Expr]:
        """Returned values, with bare-local carriers replaced by their definitions."""
        named = [p.name for p in f.returns if p.name]
        exprs: list[ir.Expr] = []
        for s in self.cg.cfgs[f].stmts:
            if isinstance(s, ir.Return) and s.value is not None:
                exprs.extend(self._collapse(s.value, fr, f))
        if named:
            for n in named:
                for d in self.local_defs(n, f):
                    exprs.extend(self._collapse(d, fr, f))
        return exprs

    def _collapse(self, e: ir.Expr, fr: _Frame, f: ir.FunctionIR, _depth: int = 0) -> list[ir.Expr]:
        if isinstance(e, ir.TupleExpr):
            return [x for it in e.items if it is not None for x in self._collapse(it, fr, f, _depth)]
        if isinstance(e, ir.Identifier) and e.kind == "local" and e.name not in fr.scope.aliases and _depth < 4:
            defs = self.local_defs(e.name, f)
            if defs:
                return [x for d in defs for x in self._collapse(d, fr, f, _depth + 1)]
        return [e]

    def local_defs(self, name: str, f: ir.FunctionIR) -> list[ir.Expr]:
        out: list[ir.Expr] = []
        for s, val in self.def_sites_local(name, f):
            if val is not None:
                out.append(val)
        return out

    def def_sites_local(self, name: str, f: ir.FunctionIR) -> list[tuple[ir.Stmt, ir.Expr | None]]:
        sites: list[tuple[ir.Stmt, ir.Expr | None]] = []
        for s in self.cg.cfgs[f].stmts:
            if isinstance(s, ir.Declare):
                for i, v in enumerate(s.vars):
                    if v is not None and v.name == name:
                        val = s.value
                        if len(s.vars) > 1:
                            val = self._tuple_part(s.value, i)
                        sites.append((s, val))
            elif isinstance(s, ir.Assign):
                for t, val in self._assign_parts(s):
                    if isinstance(t, ir.Identifier) and t.name == name and t.kind in ("local", "param"):
                        sites.append((s, val))
            for e in s.exprs():
                for x in ir.walk_expr(e):
                    if isinstance(x, ir.AssignExpr) and isinstance(x.target, ir.Identifier) and x.target.name == name:
                        sites.append((s, x.value))
        return sites

    def _tuple_part(self, value: ir.Expr | None, i: int) -> ir.Expr | None:
        if isinstance(value, ir.TupleExpr):
            return value.items[i] if i < len(value.items) else None
        # destructuring a call: the whole call stands in for each component
        return value

    def _assign_parts(self, s: ir.Assign) -> list[tuple[ir.Expr, ir.Expr | None]]:
        if s.op in ("++", "--"):
            return [(s.target, ir.Literal(s.loc, "number", "1"))]
        if s.op == "delete":
            return [(s.target, ir.Literal(s.loc, "number", "0"))]
        if isinstance(s.target, ir.TupleExpr):
            return [(t, self._tuple_part(s.value, i)) for i, t in enumerate(s.target.items) if t is not None]
        return [(s.target, s.value)]

    # definitions of state paths -------------------------------------------------
    def state_defs(self, path: VariablePath) -> list[tuple[ir.FunctionIR | None, ir.Stmt | None, ir.Expr | None]]:
        out = []
        decl = self.contract.state_var(path.base)
        if decl is not None and decl.value is not None and path.member is None:
            out.append((None, None, decl.value))
        for f in self.fns:
            du = self.cg.defuse[f]
            for ws in du.write_sites:
                if ws.path.base != path.base:
                    continue
                if path.member is not None and ws.path.member not in (None, path.member):
                    continue
                s = ws.stmt
                if isinstance(s, ir.Assign) and s.target is ws.expr:
                    for _t, val in self._assign_parts(s):
                        out.append((f, s, val))
                elif isinstance(s, ir.Assign) and isinstance(s.target, ir.TupleExpr):
                    for t, val in self._assign_parts(s):
                        if t is ws.expr:
                            out.append((f, s, val))
                else:
                    # nested assignment or push: find the expression that carries the value
                    val = None
                    for e in s.exprs():
                        for x in ir.walk_expr(e):
                            if isinstance(x, ir.AssignExpr) and x.target is ws.expr:
                                val = x.value
                            elif isinstance(x, ir.Call) and isinstance(x.callee, ir.MemberAccess) and x.callee.base is ws.expr:
                                val = x.args[0] if x.args else None
                    out.append((f, s, val))
        return out

    def param_bindings(self, name: str, fn_name: str) -> list[tuple[ir.Expr, _Frame]]:
        out = []
        for e in self.cg.edges:
            if e.kind == "internal" and e.callee is not None and (e.callee.name or e.callee.kind) == fn_name:
                idx = next((i for i, p in enumerate(e.callee.params) if p.name == name), None)
                if idx is not None and idx < len(e.call.args) and e.caller in self.cg.defuse:
                    out.append((e.call.args[idx], _Frame(e.caller, self.cg.defuse[e.caller].scope)))
        return out

    def fn_named(self, name: str) -> ir.FunctionIR | None:
        for f in self.fns:
            if (f.name or f.kind) == name:
                return f
        return None

    def guard_deps(self, f: ir.FunctionIR, sids: list[int], fr: _Frame) -> list[tuple[CdgNode, ir.Loc]]:
        cfg = self.cg.cfgs[f]
        out = []
        for sid in sids:
            for g in cfg.guards_for(sid):
                if g.condition is None:
                    continue
                for n in self.deps(g.condition, fr):
                    out.append((n, g.loc))
        return out

    # Algorithm: worklist over variables with a visited set -----------------------
    def build(self, root_expr: ir.Expr | None, transfer: Transfer | None, fn: ir.FunctionIR | None, role: str | None = None) -> Cdg:
        self.partial = False
        self.low_level = bool(transfer and transfer.low_level)
        self.unanalyzed = False
        self.diagnostics = []
        self.frames = {}
        fr0 = self._root_frame(transfer, fn)
        root = self._root_node(root_expr, fr0)
        cdg = Cdg(root=root, transfer=transfer, role=role)
        visited = {root}
        order = [root]
        queue = deque([(root, fr0, root_expr)])
        edge_set: set[CdgEdge] = set()

        def add_edge(a: CdgNode, b: CdgNode, kind: str, loc: ir.Loc | None) -> None:
            if a == b:
                return
            e = CdgEdge(a, b, kind)
            if e not in edge_set:
                edge_set.add(e)
                cdg.edges.append(e)
            if loc is not None:
                cdg.sites.setdefault(b.id, [])
                if loc not in cdg.sites[b.id]:
                    cdg.sites[b.id].append(loc)
            if b not in visited:
                visited.add(b)
                order.append(b)
                queue.append((b, None, None))

        first = True
        while queue:
            cur, fr, expr = queue.popleft()
            if first:
                first = False
                self._expand_root(cur, expr, fr0, transfer, fn, add_edge)
                continue
            self._expand(cur, add_edge)
        cdg.nodes = order
        cdg.partial = self.partial
        cdg.low_level = self.low_level
        cdg.diagnostics = list(self.diagnostics)
        cdg.unanalyzed = self.unanalyzed or any(
            isinstance(s, ir.Opaque) for f in ([fn] if fn else []) for s in self.cg.cfgs[f].stmts
        )
        return cdg

    def _root_frame(self, transfer: Transfer | None, fn: ir.FunctionIR | None) -> _Frame:
        if transfer is None:
            f = fn
            return _Frame(f, self.cg.defuse[f].scope if f else self.contract_scope)
        # bind helper parameters along the call chain from the entry point
        frame = _Frame(transfer.anchor, self.cg.defuse[transfer.anchor].scope)
        for edge in transfer.chain:
            callee = edge.callee
            binds = {p.name: (a, frame) for p, a in zip(callee.params, edge.call.args)}
            frame = _Frame(callee, self.cg.defuse[callee].scope, binds, frame.depth)
        return frame

    def _root_node(self, e: ir.Expr | None, fr: _Frame) -> CdgNode:
        inner = strip_conversions(e)
        if isinstance(inner, ir.Identifier) and inner.kind == "param" and inner.name in fr.bindings:
            arg, afr = fr.bindings[inner.name]
            return self._root_node(arg, afr)
        if isinstance(inner, (ir.Identifier, ir.IndexAccess, ir.MemberAccess, ir.Literal, ir.SpecialRef)):
            ds = self.deps(inner, fr)
            if len(ds) == 1:
                return ds[0]
        line = e.loc.line if e is not None else 0
        return CdgNode("local", f"<amount@{line}>", self._fn_name(fr))

    def _expand_root(self, root, expr, fr0, transfer, fn, add_edge) -> None:
        # value of the root
        inner = strip_conversions(expr)
        bound_fr = fr0
        while isinstance(inner, ir.Identifier) and inner.kind == "param" and inner.name in bound_fr.bindings:
            arg, bound_fr = bound_fr.bindings[inner.name]
            inner = strip_conversions(arg)
        if root.kind == "local" and root.name.startswith("<amount@"):
            for n in self.deps(expr, fr0):
                add_edge(root, n, "Cal", expr.loc if expr is not None else None)
        else:
            self._expand(root, add_edge, frame=bound_fr)
        # guards on the transfer and on every call leading to it
        if transfer is not None:
            frames = [(transfer.anchor, [e.stmt.sid for e in transfer.chain[:1]])]
            for i, edge in enumerate(transfer.chain):
                nxt = transfer.chain[i + 1].stmt.sid if i + 1 < len(transfer.chain) else None
                if nxt is not None:
                    frames.append((edge.callee, [nxt]))
            frames.append((transfer.fn, [transfer.stmt.sid]))
            for f, sids in frames:
                fr = fr0 if f is transfer.fn else _Frame(f, self.cg.defuse[f].scope)
                for n, loc in self.guard_deps(f, sids, fr):
                    if n.kind != "constant":
                        add_edge(root, n, "Con", loc)
        elif fn is not None:
            pass

    def _expand(self, cur: CdgNode, add_edge, frame: _Frame | None = None) -> None:
        if cur.kind == "state":
            for f, s, val in self.state_defs(cur.path):
                fr = _Frame(f, self.cg.defuse[f].scope) if f else _Frame(None, self.contract_scope)
                for n in self.deps(val, fr):
                    add_edge(cur, n, "Cal", s.loc if s else None)
                if f is not None and s is not None:
                    if isinstance(s, ir.Assign) and s.op not in ("=", "delete"):
                        pass  # compound update: the variable depends on itself
                    for n, loc in self.guard_deps(f, [s.sid], fr):
                        if n.kind != "constant":
                            add_edge(cur, n, "Con", loc)
        elif cur.kind == "local":
            frame = frame or self.frames.get(cur)
            f = self.fn_named(cur.fn) if frame is None or frame.fn is None else frame.fn
            if f is None:
                return
            fr = frame if frame is not None else _Frame(f, self.cg.defuse[f].scope)
            for s, val in self.def_sites_local(cur.name, f):
                for n in self.deps(val, fr):
                    add_edge(cur, n, "Cal", s.loc)
                for n, loc in self.guard_deps(f, [s.sid], fr):
                    if n.kind != "constant":
                        add_edge(cur, n, "Con", loc)
        elif cur.kind == "param":
            f = self.fn_named(cur.fn)
            if f is not None and f.is_public:
                return  # supplied by the caller of an entry point
            for arg, fr in self.param_bindings(cur.name, cur.fn):
                for n in self.deps(arg, fr):
                    add_edge(cur, n, "Cal", arg.loc)
        elif cur.kind == "external":
            if cur.name not in ("self", "?"):
                base = cur.name.split("[")[0].split(".")[0]
                if self.contract.state_var(base) is not None:
                    path = self._path_from_key(cur.name)
                    add_edge(cur, self.state_node(path), "Cal", None)
        elif cur.kind == "balance" and cur.detail == "token":
            base = cur.name.split("[")[0].split(".")[0]
            if self.contract.state_var(base) is not None:
                add_edge(cur, self.state_node(self._path_from_key(cur.name)), "Cal", None)

    def _path_from_key(self, key: str) -> VariablePath:
        base = key.split("[")[0].split(".")[0]
        member = key.split(".", 1)[1] if "." in key else None
        decl = self.contract.state_var(base)
        shape = key_shape_of(decl.type_desc) if decl is not None and "[" in key else "none"
        return VariablePath(base, member, shape)


def derive_sets(cdg: Cdg, time_paths: set[VariablePath] | None = None, pool_check=None) -> Cdg:
    """Fill the derived dependency sets of a built graph."""
    time_paths = time_paths or set()
    cdg.state_dep = {n.path for n in cdg.nodes if n.kind == "state" and n.path is not None}
    cdg.balance_kinds = {("native" if n.name == "native" else "token") for n in cdg.nodes if n.kind == "balance"}
    cdg.depends_on_balance = bool(cdg.balance_kinds)
    ev = [n for n in cdg.nodes if n.kind == "special" and n.name in TIME_SPECIALS]
    ev += [n for n in cdg.nodes if n.kind == "state" and n.path is not None and any(_covers(t, n.path) for t in time_paths)]
    cdg.time_evidence = ev
    cdg.time_dep = bool(ev)
    if pool_check is not None:
        cdg.pool_sources = {n for n in cdg.nodes if n.kind == "external" and pool_check(n)}
    return cdg


def _covers(role_path: VariablePath, p: VariablePath) -> bool:
    return role_path.base == p.base and (role_path.member is None or role_path.member == p.member)


def build_cdg(
    amount: ir.Expr | None,
    contract: ir.ContractIR,
    graphs: CallGraph,
    fn: ir.FunctionIR | None = None,
    transfer: Transfer | None = None,
    depth_bound: int = DEPTH_BOUND,
    strict: bool = False,
) -> Cdg:
    """Dependency graph of the value ``amount`` as computed in ``fn`` (or at ``transfer``)."""
    b = CdgBuilder(contract, graphs, depth_bound)
    cdg = b.build(amount, transfer, fn if transfer is None else transfer.fn)
    derive_sets(cdg)
    if strict and cdg.partial:
        raise DepthExceeded("; ".join(cdg.diagnostics) or "dependency graph incomplete")
    return cdg


def depends_on_balance(cdg: Cdg) -> bool:
    return cdg.depends_on_balance


# --- staking model ----------------------------------------------------------------

@dataclass
class StakingModel:
    contract: ir.ContractIR
    info: StakingInfo
    rewards: set[VariablePath] = field(default_factory=set)
    stake_times: set[VariablePath] = field(default_factory=set)
    amounts: set[VariablePath] = field(default_factory=set)
    stake_token: list[VariablePath] = field(default_factory=list)
    reward_token: list[VariablePath] = field(default_factory=list)
    stake_funcs: dict[str, list[Transfer]] = field(default_factory=dict)
    getreward_funcs: dict[str, list[Transfer]] = field(default_factory=dict)
    unstake_funcs: dict[str, list[Transfer]] = field(default_factory=dict)
    cdgs: dict[str, Cdg] = field(default_factory=dict)
    transfers: list[Transfer] = field(default_factory=list)
    ambiguous: set[VariablePath] = field(default_factory=set)
    diagnostics: list[str] = field(default_factory=list)

    # Table-II style predicates ----------------------------------------------
    def role_paths(self) -> dict[str, set[VariablePath]]:
        return {"reward": self.rewards, "time": self.stake_times, "amount": self.amounts}

    def _is(self, paths: set[VariablePath], var) -> bool:
        p = _as_path(var)
        return p is not None and any(_covers(r, p) for r in paths)

    def Reward(self, var) -> bool:  # noqa: N802 - predicate names mirror the rule vocabulary
        return self._is(self.rewards, var)

    def Amount(self, var) -> bool:  # noqa: N802
        return self._is(self.amounts, var)

    def StakeTime(self, var) -> bool:  # noqa: N802
        if isinstance(var, str) and var in TIME_SPECIALS:
            return True
        if isinstance(var, CdgNode) and var.kind == "special" and var.name in TIME_SPECIALS:
            return True
        return self._is(self.stake_times, var)

    def unStake(self, func: str) -> bool:  # noqa: N802
        return func in self.unstake_funcs

    def CalDepend(self, var1, var2) -> bool:  # noqa: N802
        for cdg in self.cdgs.values():
            starts = [n for n in cdg.nodes if _node_matches(n, var1)]
            for s in starts:
                if any(_node_matches(n, var2) for n in cdg.reachable_from(s)):
                    return True
        return False

    def DependonBalance(self, var) -> bool:  # noqa: N802
        for cdg in self.cdgs.values():
            starts = [n for n in cdg.nodes if _node_matches(n, var)]
            for s in starts:
                if any(n.kind == "balance" for n in cdg.reachable_from(s)):
                    return True
        return False

    def role_functions(self, role: str) -> dict[str, list[Transfer]]:
        return {"Stake": self.stake_funcs, "GetReward": self.getreward_funcs, "UnStake": self.unstake_funcs}[role]

    def cdgs_for(self, role: str | None = None) -> list[Cdg]:
        return [c for _, c in sorted(self.cdgs.items()) if role is None or c.role == role]


def _as_path(var) -> VariablePath | None:
    if isinstance(var, VariablePath):
        return var
    if isinstance(var, CdgNode):
        return var.path
    if isinstance(var, str):
        base, _, member = var.replace("[*]", "").partition(".")
        return VariablePath(base, member or None)
    return None


def _node_matches(n: CdgNode, var) -> bool:
    if isinstance(var, CdgNode):
        return n == var
    if isinstance(var, VariablePath):
        return n.path is not None and _covers(var, n.path)
    if isinstance(var, str):
        if n.name == var or n.label == var:
            return True
        if n.path is not None:
            return n.path.dotted == var or n.path.base == var or str(n.path) == var
    return False


def resolve_name(name: str, contract: ir.ContractIR) -> list[VariablePath]:
    """Every storage path a role name may denote."""
    base, _, member = name.partition(".")
    v = contract.state_var(base)
    if v is not None:
        if member:
            leaf = v.type_desc.leaf()
            if leaf.kind == "struct" and leaf.member(member) is not None:
                return [VariablePath(base, member, key_shape_of(v.type_desc))]
            return []
        return [VariablePath(base, None, key_shape_of(v.type_desc))]
    if member:
        return []
    # bare member name: look through struct-valued state vars
    out = []
    for sv in contract.state_vars:
        leaf = sv.type_desc.leaf()
        if leaf.kind == "struct" and leaf.member(name) is not None:
            out.append(VariablePath(sv.name, name, key_shape_of(sv.type_desc)))
    return out


def resolve_paths(info: StakingInfo, contract: ir.ContractIR) -> StakingModel:
    model = StakingModel(contract=contract, info=info)
    for role, names in info.var_roles.items():
        kind = ROLE_KIND[role]
        for n in names:
            cands = resolve_name(n, contract)
            if not cands:
                model.diagnostics.append(f"dropped {role} name {n!r}: no matching declaration")
                continue
            if len(cands) > 1:
                err = AmbiguousPath(n, cands)
                model.diagnostics.append(str(err))
                model.ambiguous.update(cands)
            for p in cands:
                p = p.with_role(role)
                if kind == "reward":
                    model.rewards.add(p)
                elif kind == "time":
                    model.stake_times.add(p)
                elif kind == "amount":
                    model.amounts.add(p)
                elif kind == "stake_token":
                    model.stake_token.append(p)
                else:
                    model.reward_token.append(p)
    return model


def build_model(contract: ir.ContractIR, info: StakingInfo, graphs: CallGraph, pool_check=None) -> StakingModel:
    model = resolve_paths(info, contract)
    transfers = find_transfers(contract, graphs)
    model.transfers = transfers
    role_lines: dict[tuple[str, int], str] = {}
    for role in FUNC_ROLES:
        for fr in info.func_roles[role]:
            role_lines[(fr.function, fr.line)] = role
            model.role_functions(role).setdefault(fr.function, [])
    for t in transfers:
        role = role_lines.get((t.anchor.name, t.stmt.loc.line))
        if role is not None:
            model.role_functions(role)[t.anchor.name].append(t)
    builder = CdgBuilder(contract, graphs)
    for t in transfers:
        role = role_lines.get((t.anchor.name, t.stmt.loc.line)) or info.role_of_function(t.anchor.name)
        cdg = builder.build(t.amount_expr, t, t.fn, role)
        derive_sets(cdg, model.stake_times, pool_check)
        key = f"{t.anchor.name}@{t.stmt.loc.line}:{t.callee_name}"
        n = 2
        base_key = key
        while key in model.cdgs:
            key = f"{base_key}#{n}"
            n += 1
        model.cdgs[key] = cdg
        model.diagnostics.extend(cdg.diagnostics)
    return model

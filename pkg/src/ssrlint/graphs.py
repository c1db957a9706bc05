"""Per-function control flow and def-use facts, plus the call graph with external reachability."""

from __future__ import annotations

import copy
import itertools
from collections import deque
from dataclasses import dataclass, field

from .ingest import ir
from .paths import AddrClass, Scope, VariablePath

LOW_LEVEL = {"call", "delegatecall", "staticcall", "send", "transfer"}
ARITHMETIC = {"add", "sub", "mul", "div", "mod", "pow", "min", "max", "tryAdd", "trySub", "tryMul", "tryDiv", "sqrt"}


# --- control flow ----------------------------------------------------------

@dataclass
class Block:
    id: int
    stmts: list[ir.Stmt] = field(default_factory=list)
    dead: bool = False


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    kind: str  # fallthrough | true | false | loop-back


@dataclass
class GuardNode:
    stmt: ir.Stmt
    condition: ir.Expr | None
    origin: str  # require | modifier | if | loop
    block: int
    dominated_stmts: set[int] = field(default_factory=set)
    via: dict[int, str] = field(default_factory=dict)  # sid -> edge kind whose removal cuts it off
    modifier: str | None = None

    @property
    def loc(self) -> ir.Loc:
        return self.stmt.loc


@dataclass
class Cfg:
    function: ir.FunctionIR
    blocks: list[Block]
    edges: list[Edge]
    guards: list[GuardNode]
    entry: int
    exit: int
    body: list[ir.Stmt]
    stmts: list[ir.Stmt]
    modifier_origin: dict[int, str] = field(default_factory=dict)
    unresolved_modifiers: list[str] = field(default_factory=list)
    stmt_block: dict[int, int] = field(default_factory=dict)

    def block(self, bid: int) -> Block:
        for b in self.blocks:
            if b.id == bid:
                return b
        raise KeyError(bid)

    def successors(self, bid: int) -> list[Edge]:
        return [e for e in self.edges if e.src == bid]

    def reachable(self, skip: Edge | None = None) -> set[int]:
        seen = {self.entry}
        todo = deque([self.entry])
        while todo:
            b = todo.popleft()
            for e in self.edges:
                if e.src == b and e != skip and e.dst not in seen:
                    seen.add(e.dst)
                    todo.append(e.dst)
        return seen

    def guards_for(self, sid: int) -> list[GuardNode]:
        return [g for g in self.guards if sid in g.dominated_stmts]

    def stmt(self, sid: int) -> ir.Stmt | None:
        for s in self.stmts:
            if s.sid == sid:
                return s
        return None


def _params_to_locals(stmts: list[ir.Stmt], names: set[str]) -> None:
    """Inlined modifier parameters become locals bound by their argument declarations."""
    for s in ir.iter_stmts(stmts):
        for e in s.exprs():
            for x in ir.walk_expr(e):
                if isinstance(x, ir.Identifier) and x.kind == "param" and x.name in names:
                    x.kind = "local"


def inline_modifiers(f: ir.FunctionIR, contract: ir.ContractIR | None) -> tuple[list[ir.Stmt], dict[int, str], list[str]]:
    """Function body wrapped by copies of its modifiers, outermost first."""
    inner: list[ir.Stmt] = list(f.body or [])
    origin: dict[int, str] = {}
    unresolved: list[str] = []
    counter = itertools.count(-1, -1)

    def renumber(stmts: list[ir.Stmt], name: str) -> None:
        for s in ir.iter_stmts(stmts):
            s.sid = next(counter)
            origin[s.sid] = name

    for mc in reversed(f.modifiers_applied):
        m = contract.modifier(mc.name) if contract else None
        if m is None or m.body is None:
            unresolved.append(mc.name)
            continue
        body = copy.deepcopy(m.body)
        renumber(body, m.name)
        _params_to_locals(body, {p.name for p in m.params})
        binds: list[ir.Stmt] = []
        for p, arg in zip(m.params, mc.args):
            d = ir.Declare(next(counter), mc.loc, [ir.LocalVar(p.name, p.type_desc, "default", mc.loc)], arg)
            origin[d.sid] = m.name
            binds.append(d)
        used = [False]
        current_inner = inner

        def subst(stmts: list[ir.Stmt]) -> list[ir.Stmt]:
            out: list[ir.Stmt] = []
            for s in stmts:
                if isinstance(s, ir.Placeholder):
                    if not used[0]:
                        used[0] = True
                        out.extend(current_inner)
                    else:
                        dup = copy.deepcopy(current_inner)
                        renumber(dup, m.name)
                        out.extend(dup)
                    continue
                if isinstance(s, ir.If):
                    s.then = subst(s.then)
                    s.orelse = subst(s.orelse)
                elif isinstance(s, ir.Loop):
                    s.body = subst(s.body)
                out.append(s)
            return out

        inner = binds + subst(body)
    return inner, origin, unresolved


class _CfgBuilder:
    def __init__(self) -> None:
        self.blocks: dict[int, Block] = {}
        self.edges: list[Edge] = []
        self.order: list[ir.Stmt] = []
        self.stmt_block: dict[int, int] = {}
        self.guard_stmts: list[tuple[ir.Stmt, int]] = []
        self._ids = itertools.count()
        self.entry = self.new()
        self.exit = self.new()

    def new(self) -> int:
        bid = next(self._ids)
        self.blocks[bid] = Block(bid)
        return bid

    def edge(self, a: int, b: int, kind: str = "fallthrough") -> None:
        e = Edge(a, b, kind)
        if e not in self.edges:
            self.edges.append(e)

    def place(self, s: ir.Stmt, bid: int) -> None:
        self.blocks[bid].stmts.append(s)
        self.stmt_block[s.sid] = bid
        self.order.append(s)

    def build(self, stmts: list[ir.Stmt], cur: int | None, loops: list[tuple[int, int]]) -> int | None:
        for s in stmts:
            if cur is None:
                cur = self.new()  # code after a terminator: unreachable
            if isinstance(s, ir.Require):
                self.place(s, cur)
                self.guard_stmts.append((s, cur))
                nxt = self.new()
                self.edge(cur, nxt, "true")
                self.edge(cur, self.exit, "false")
                cur = nxt
            elif isinstance(s, ir.If):
                self.place(s, cur)
                self.guard_stmts.append((s, cur))
                join = self.new()
                tb = self.new()
                self.edge(cur, tb, "true")
                end_t = self.build(s.then, tb, loops)
                if end_t is not None:
                    self.edge(end_t, join)
                if s.orelse:
                    fb = self.new()
                    self.edge(cur, fb, "false")
                    end_f = self.build(s.orelse, fb, loops)
                    if end_f is not None:
                        self.edge(end_f, join)
                else:
                    self.edge(cur, join, "false")
                cur = join
            elif isinstance(s, ir.Loop):
                if s.init is not None:
                    self.place(s.init, cur)
                head = self.new()
                self.edge(cur, head)
                self.place(s, head)
                self.guard_stmts.append((s, head))
                after = self.new()
                body = self.new()
                self.edge(head, body, "true")
                self.edge(head, after, "false")
                end_b = self.build(s.body, body, loops + [(head, after)])
                if end_b is not None:
                    if s.step is not None:
                        self.place(s.step, end_b)
                    self.edge(end_b, head, "loop-back")
                elif s.step is not None:
                    self.place(s.step, self.new())
                cur = after
            elif isinstance(s, (ir.Return, ir.Revert)):
                self.place(s, cur)
                self.edge(cur, self.exit)
                cur = None
            elif isinstance(s, ir.Jump):
                self.place(s, cur)
                if loops:
                    head, after = loops[-1]
                    self.edge(cur, after if s.kind == "break" else head, "fallthrough" if s.kind == "break" else "loop-back")
                cur = None
            else:
                self.place(s, cur)
        return cur

    def simplify(self) -> None:
        changed = True
        while changed:
            changed = False
            for bid in list(self.blocks):
                if bid in (self.entry, self.exit) or self.blocks[bid].stmts:
                    continue
                outs = [e for e in self.edges if e.src == bid]
                ins = [e for e in self.edges if e.dst == bid]
                if len(outs) == 1 and outs[0].dst != bid:
                    dst = outs[0].dst
                    self.edges = [e for e in self.edges if e.src != bid and e.dst != bid]
                    for e in ins:
                        self.edge(e.src, dst, e.kind)
                    del self.blocks[bid]
                    changed = True
                elif not outs and not ins:
                    del self.blocks[bid]
                    changed = True


def build_cfg(f: ir.FunctionIR, contract: ir.ContractIR | None = None) -> Cfg:
    body, origin, unresolved = inline_modifiers(f, contract)
    b = _CfgBuilder()
    end = b.build(body, b.entry, [])
    if end is not None:
        b.edge(end, b.exit)
    b.simplify()
    # compact ids: entry first, exit last
    ids = [i for i in sorted(b.blocks) if i != b.exit] + [b.exit]
    remap = {old: new for new, old in enumerate(ids)}
    blocks = []
    for old in ids:
        blk = b.blocks[old]
        blk.id = remap[old]
        blocks.append(blk)
    edges = [Edge(remap[e.src], remap[e.dst], e.kind) for e in b.edges]
    stmt_block = {sid: remap[bid] for sid, bid in b.stmt_block.items() if bid in remap}
    cfg = Cfg(
        function=f,
        blocks=blocks,
        edges=edges,
        guards=[],
        entry=remap[b.entry],
        exit=remap[b.exit],
        body=body,
        stmts=b.order,
        modifier_origin=origin,
        unresolved_modifiers=unresolved,
        stmt_block=stmt_block,
    )
    live = cfg.reachable()
    for blk in cfg.blocks:
        blk.dead = blk.id not in live
    for s, _old in b.guard_stmts:
        bid = stmt_block[s.sid]
        cond = s.cond
        kind = {ir.Require: "require", ir.If: "if", ir.Loop: "loop"}[type(s)]
        mod = origin.get(s.sid)
        g = GuardNode(s, cond, "modifier" if mod else kind, bid, modifier=mod)
        for e in cfg.successors(bid):
            if e.kind not in ("true", "false"):
                continue
            if kind in ("require", "loop") and e.kind != "true":
                continue
            cut = live - cfg.reachable(skip=e)
            for blk in cfg.blocks:
                if blk.id in cut:
                    for st in blk.stmts:
                        if st.sid not in g.dominated_stmts:
                            g.dominated_stmts.add(st.sid)
                            g.via[st.sid] = e.kind
        cfg.guards.append(g)
    return cfg


def cfg_to_dot(cfg: Cfg) -> str:
    f = cfg.function
    lines = [f'digraph "{f.contract}.{f.name or f.kind}" {{', "  node [shape=box fontname=monospace];"]
    for blk in cfg.blocks:
        if blk.id == cfg.exit:
            label = "EXIT"
        else:
            parts = [f"{type(s).__name__} @{s.loc}" for s in blk.stmts] or ["(empty)"]
            label = ("ENTRY\\n" if blk.id == cfg.entry else "") + "\\n".join(parts)
        style = ' style=dashed' if blk.dead else ""
        lines.append(f'  b{blk.id} [label="{label}"{style}];')
    for e in cfg.edges:
        lines.append(f'  b{e.src} -> b{e.dst} [label="{e.kind}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# --- def-use -----------------------------------------------------------------

VarKey = tuple  # ("state", name) | ("local", fn, name) | ("param", fn, name)


@dataclass(frozen=True)
class WriteSite:
    path: VariablePath
    stmt: ir.Stmt
    key_class: AddrClass | None
    expr: ir.Expr
    op: str = "="


@dataclass(frozen=True)
class ReadSite:
    path: VariablePath
    stmt: ir.Stmt
    expr: ir.Expr


@dataclass
class DefUse:
    function: ir.FunctionIR
    defs: set[tuple[VarKey, int]] = field(default_factory=set)
    uses: set[tuple[VarKey, int]] = field(default_factory=set)
    state_reads: set[VariablePath] = field(default_factory=set)
    state_writes: set[VariablePath] = field(default_factory=set)
    write_sites: list[WriteSite] = field(default_factory=list)
    read_sites: list[ReadSite] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)
    scope: Scope | None = None

    def defined_vars(self) -> set[VarKey]:
        return {k for k, _ in self.defs}

    def used_vars(self) -> set[VarKey]:
        return {k for k, _ in self.uses}


def var_key(e: ir.Identifier, fn_name: str) -> VarKey | None:
    if e.kind == "state":
        return ("state", e.name)
    if e.kind in ("local", "param"):
        return (e.kind, e.owner or fn_name, e.name)
    return None


def _idents(e: ir.Expr | None):
    for x in ir.walk_expr(e):
        if isinstance(x, ir.Identifier):
            yield x


def build_defuse(f: ir.FunctionIR, cfg: Cfg, contract: ir.ContractIR) -> DefUse:
    scope = Scope(contract, f, cfg.body)
    du = DefUse(function=f, scope=scope)
    du.diagnostics.extend(scope.diagnostics)
    fn = f.name or f.kind

    def use_expr(e: ir.Expr | None, s: ir.Stmt) -> None:
        for x in _idents(e):
            k = var_key(x, fn)
            if k is not None:
                du.uses.add((k, s.sid))
        for acc, ex in scope.accesses(e):
            du.state_reads.add(acc.path)
            du.read_sites.append(ReadSite(acc.path, s, ex))

    def write_target(t: ir.Expr | None, s: ir.Stmt, op: str) -> None:
        if t is None:
            return
        if isinstance(t, ir.TupleExpr):
            for item in t.items:
                write_target(item, s, op)
            return
        compound = op not in ("=", "delete")
        acc = scope.access(t)
        if acc is not None:
            du.state_writes.add(acc.path)
            du.write_sites.append(WriteSite(acc.path, s, scope.key_class(acc), t, op))
            root = t
            while isinstance(root, (ir.IndexAccess, ir.MemberAccess)):
                root = root.base
            if isinstance(root, ir.Identifier):
                k = var_key(root, fn)
                if k is not None:
                    du.defs.add((k, s.sid))
            for k_expr in acc.keys:
                use_expr(k_expr, s)
            if compound:
                du.state_reads.add(acc.path)
                du.read_sites.append(ReadSite(acc.path, s, t))
                if isinstance(root, ir.Identifier) and var_key(root, fn):
                    du.uses.add((var_key(root, fn), s.sid))
            return
        if isinstance(t, ir.Identifier):
            k = var_key(t, fn)
            if k is not None:
                du.defs.add((k, s.sid))
                if compound:
                    du.uses.add((k, s.sid))
            return
        # writes through untraceable storage (unknown alias, memory struct): record uses only
        root = t
        while isinstance(root, (ir.IndexAccess, ir.MemberAccess)):
            if isinstance(root, ir.IndexAccess):
                use_expr(root.index, s)
            root = root.base
        if isinstance(root, ir.Identifier):
            k = var_key(root, fn)
            if k is not None:
                du.defs.add((k, s.sid))
                if compound:
                    du.uses.add((k, s.sid))
            if root.kind == "local" and root.name in scope.aliases and scope.aliases[root.name] is None:
                du.diagnostics.append(f"{s.loc}: write through untraced storage pointer {root.name!r}")

    def nested_writes(e: ir.Expr | None, s: ir.Stmt) -> None:
        for x in ir.walk_expr(e):
            if isinstance(x, ir.AssignExpr):
                write_target(x.target, s, x.op)
            elif isinstance(x, ir.UnaryOp) and x.op in ("++", "--", "delete"):
                write_target(x.operand, s, x.op)
            elif isinstance(x, ir.Call) and isinstance(x.callee, ir.MemberAccess) and x.callee.member in ("push", "pop"):
                acc = scope.access(x.callee.base)
                if acc is not None:
                    write_target(x.callee.base, s, "+=" if x.callee.member == "push" else "-=")

    for s in cfg.stmts:
        if isinstance(s, ir.Assign):
            write_target(s.target, s, s.op)
            if s.value is not None:
                use_expr(s.value, s)
                nested_writes(s.value, s)
        elif isinstance(s, ir.Declare):
            for v in s.vars:
                if v is not None and v.name:
                    du.defs.add((("local", fn, v.name), s.sid))
            use_expr(s.value, s)
            nested_writes(s.value, s)
        else:
            for e in s.exprs():
                use_expr(e, s)
                nested_writes(e, s)
    return du


# --- call graph --------------------------------------------------------------

@dataclass
class CallEdge:
    caller: ir.FunctionIR
    callee: ir.FunctionIR | None
    kind: str  # internal | external | low-level | library
    callee_name: str
    call: ir.Call
    stmt: ir.Stmt
    target_type: str | None = None
    receiver: ir.Expr | None = None

    def __repr__(self) -> str:
        tgt = self.callee.name if self.callee else self.callee_name
        extra = f"({self.target_type})" if self.target_type else ""
        return f"<{self.kind}{extra} {self.caller.name} -> {tgt}>"


@dataclass
class CallGraph:
    nodes: list[ir.FunctionIR] = field(default_factory=list)
    edges: list[CallEdge] = field(default_factory=list)
    ext_reachable: set[ir.FunctionIR] = field(default_factory=set)
    cfgs: dict[ir.FunctionIR, Cfg] = field(default_factory=dict)
    defuse: dict[ir.FunctionIR, DefUse] = field(default_factory=dict)
    contract_of: dict[ir.FunctionIR, ir.ContractIR] = field(default_factory=dict)
    shadowed: set[ir.FunctionIR] = field(default_factory=set)

    def callees(self, f: ir.FunctionIR, kind: str | None = "internal") -> list[CallEdge]:
        return [e for e in self.edges if e.caller is f and (kind is None or e.kind == kind)]

    def callers(self, f: ir.FunctionIR) -> list[CallEdge]:
        return [e for e in self.edges if e.callee is f and e.kind == "internal"]

    def internal_closure(self, f: ir.FunctionIR) -> list[ir.FunctionIR]:
        """``f`` and every function it reaches through internal calls, in discovery order."""
        out = [f]
        seen = {f}
        i = 0
        while i < len(out):
            for e in self.callees(out[i]):
                if e.callee is not None and e.callee not in seen:
                    seen.add(e.callee)
                    out.append(e.callee)
            i += 1
        return out

    def wrappers(self, f: ir.FunctionIR) -> list[ir.FunctionIR]:
        """Externally reachable functions whose internal closure contains ``f``."""
        return [g for g in self.nodes if g in self.ext_reachable and g.is_public and f in self.internal_closure(g)]

    def by_name(self, name: str, contract: str | None = None) -> list[ir.FunctionIR]:
        return [f for f in self.nodes if f.name == name and (contract is None or self.contract_of[f].name == contract)]

    def recompute_reachability(self) -> None:
        # overridden bodies are entered only through `super`, never directly
        roots = [
            f for f in self.nodes if f not in self.shadowed and (f.is_public or f.kind in ("fallback", "receive"))
        ]
        reach: set[ir.FunctionIR] = set()
        todo = deque(roots)
        while todo:
            f = todo.popleft()
            if f in reach:
                continue
            reach.add(f)
            for e in self.callees(f):
                if e.callee is not None and e.callee not in reach:
                    todo.append(e.callee)
        self.ext_reachable = reach
        for f in self.nodes:
            f.is_externally_reachable = f in reach


def _pick_overload(cands: list[ir.FunctionIR], nargs: int) -> ir.FunctionIR | None:
    fitting = [c for c in cands if len(c.params) == nargs] or cands
    impl = [c for c in fitting if c.body is not None]
    return (impl or fitting or [None])[0]


def classify_call(
    call: ir.Call, contract: ir.ContractIR, scope: Scope, caller: ir.FunctionIR, library_names: set[str]
) -> tuple[str, ir.FunctionIR | None, str | None, ir.Expr | None] | None:
    """Return ``(kind, callee, target_type, receiver)`` or None for non-calls (conversions, events, builtins)."""
    c = call.callee
    nargs = len(call.args)
    if isinstance(c, ir.Identifier):
        if c.kind == "function":
            return "internal", _pick_overload(contract.functions_named(c.name), nargs), None, None
        return None
    if isinstance(c, ir.MemberAccess):
        base = c.base
        if isinstance(base, ir.SpecialRef) and base.name in ("this", "address(this)"):
            target = _pick_overload(contract.functions_named(c.member), nargs)
            if target is not None:
                return "internal", target, None, None
            if c.member in LOW_LEVEL:
                return "low-level", None, None, base
            return "external", None, contract.name, base
        if isinstance(base, ir.Identifier) and base.name == "super":
            cands = [s for s in contract.shadowed if s.name == c.member and s.contract != caller.contract]
            cands = cands or [s for s in contract.shadowed if s.name == c.member]
            return "internal", _pick_overload(cands, nargs), None, None
        if isinstance(base, ir.Identifier) and base.kind in ("contract", "unresolved") and base.name[:1].isupper():
            if base.name in library_names or base.kind == "unresolved":
                return "library", None, base.name, None
            return "external", None, base.name, base
        t = scope.type_of(base)
        if t.kind == "contract":
            return "external", None, t.name, base
        if c.member in LOW_LEVEL and (t.is_address or t.kind == "unknown"):
            return "low-level", None, None, base
        if c.member in ARITHMETIC or t.kind == "elementary":
            return "library", None, None, base
        return "external", None, None, base
    return None


def build_contract_graphs(contract: ir.ContractIR, library_names: set[str] | None = None) -> CallGraph:
    libs = set(library_names or ())
    cg = CallGraph()
    fns = list(contract.functions) + list(contract.shadowed)
    cg.shadowed = set(contract.shadowed)
    for f in fns:
        cg.nodes.append(f)
        cg.contract_of[f] = contract
        cfg = build_cfg(f, contract)
        cg.cfgs[f] = cfg
        cg.defuse[f] = build_defuse(f, cfg, contract)
    for f in fns:
        cfg = cg.cfgs[f]
        scope = cg.defuse[f].scope
        for s in cfg.stmts:
            for e in s.exprs():
                for x in ir.walk_expr(e):
                    if not isinstance(x, ir.Call):
                        continue
                    r = classify_call(x, contract, scope, f, libs)
                    if r is None:
                        continue
                    kind, callee, tt, recv = r
                    cg.edges.append(CallEdge(f, callee, kind, x.callee_name, x, s, tt, recv))
    cg.recompute_reachability()
    return cg


def build_callgraph(unit: ir.SourceUnit) -> CallGraph:
    """Call graph over every flattened contract of the unit (edges never cross contracts)."""
    libs = {c.name for c in unit.contracts if c.kind == "library"}
    merged = CallGraph()
    for c in unit.contracts:
        g = build_contract_graphs(c, libs)
        merged.nodes.extend(g.nodes)
        merged.edges.extend(g.edges)
        merged.cfgs.update(g.cfgs)
        merged.defuse.update(g.defuse)
        merged.contract_of.update(g.contract_of)
        merged.ext_reachable |= g.ext_reachable
        merged.shadowed |= g.shadowed
    return merged


"""Per-contract fact base that the defect rules are evaluated against."""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .graphs import CallEdge, CallGraph, GuardNode
from .ingest import ir
from .paths import CALLER, THIS, AddrClass, Scope, VariablePath, strip_conversions
from .transfers import Transfer

if TYPE_CHECKING:
    from .model import CdgNode, StakingModel

# Patterns used for permission analysis, kept together for auditability.
OWNER_LIKE = re.compile(r"owner|admin|governance|gov$|operator|manager|controller|minter|keeper|dev|treasury", re.I)
ROLE_CALLS = re.compile(r"^(hasrole|isowner|isadmin|isoperator|isauthori[sz]ed|iswhitelisted|_?checkrole|_?checkowner|_?onlyowner|_?onlyrole|_?isapprovedorowner)$", re.I)
AUTH_MODIFIERS = re.compile(r"^(only[A-Za-z0-9_]*|auth|requiresauth|restricted|isauthorized|whenowner|ownerOnly|adminOnly)$")
ALLOWANCE_CALLS = re.compile(r"^_?(spendallowance|useallowance|decreaseallowance)$", re.I)
ALLOWANCE_VARS = re.compile(r"allowance|allowed|approval|approved", re.I)
STATUS_MEMBER = re.compile(r"unstake|withdrawn|claimed|active|ended|closed|redeemed|exited|released|status", re.I)

POOL_NAME_HINT = re.compile(r"pair|pool|lp", re.I)


@dataclass(frozen=True, order=True)
class WriteFact:
    function: str
    path: VariablePath
    line: int
    key_class: AddrClass | None
    op: str
    via: str = ""  # function holding the write when it is reached through a call
    value_kind: str = "derived"  # param (caller-supplied) | const | derived (from state, time, balances)

    @property
    def self_keyed(self) -> bool:
        return self.key_class == CALLER


@dataclass(frozen=True, order=True)
class PermFact:
    function: str
    who: AddrClass
    line: int
    pattern: str  # caller-eq | role | modifier | allowance | origin


@dataclass(frozen=True, order=True)
class TransferFact:
    function: str
    frm: AddrClass
    to: AddrClass
    line: int
    locator: str


@dataclass
class FactBase:
    contract: str
    lp_pools: dict[str, str] = field(default_factory=dict)  # receiver key -> type name
    writes: list[WriteFact] = field(default_factory=list)
    verify: dict[tuple[str, VariablePath], list[int]] = field(default_factory=dict)
    na_trans: list[TransferFact] = field(default_factory=list)
    reward_trans: list[TransferFact] = field(default_factory=list)
    perms: list[PermFact] = field(default_factory=list)
    advisories: list[str] = field(default_factory=list)
    guard_reads: dict[str, set[VariablePath]] = field(default_factory=dict)
    guard_locals: dict[str, set[str]] = field(default_factory=dict)

    @property
    def modify(self) -> set[tuple[str, VariablePath]]:
        return {(w.function, w.path) for w in self.writes}

    @property
    def self_keyed_writes(self) -> set[tuple[str, VariablePath, int]]:
        return {(w.function, w.path, w.line) for w in self.writes if w.self_keyed}

    @property
    def perm_checks(self) -> set[tuple[str, AddrClass]]:
        return {(p.function, p.who) for p in self.perms}

    def modifies(self, fn: str, path: VariablePath) -> list[WriteFact]:
        """Writes in ``fn`` to ``path``; a whole-record write counts for each of its members."""
        return [
            w for w in self.writes
            if w.function == fn and w.path.base == path.base
            and (path.member is None or w.path.member in (None, path.member))
        ]

    def verifies(self, fn: str, path: VariablePath) -> bool:
        return any(f == fn and _covers(path, p) for (f, p) in self.verify)

    def has_perm(self, fn: str, who: AddrClass | None = None) -> bool:
        return any(p.function == fn and (who is None or p.who == who) for p in self.perms)

    def to_lines(self) -> list[str]:
        rows = []
        for k, t in sorted(self.lp_pools.items()):
            rows.append({"fact": "lpPool", "target": k, "type": t})
        for w in sorted(self.writes):
            rows.append({"fact": "ModifyVar", "function": w.function, "var": str(w.path), "line": w.line,
                         "key": str(w.key_class) if w.key_class else None, "self_keyed": w.self_keyed})
        for (fn, p), lines in sorted(self.verify.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
            rows.append({"fact": "VerifyVar", "function": fn, "var": str(p), "lines": sorted(lines)})
        for t in sorted(self.na_trans):
            rows.append({"fact": "NaTokenTrans", "function": t.function, "to": str(t.to), "line": t.line})
        for t in sorted(self.reward_trans):
            rows.append({"fact": "RewardTrans", "function": t.function, "from": str(t.frm), "to": str(t.to), "line": t.line})
        for p in sorted(self.perms):
            rows.append({"fact": "permissCheck", "function": p.function, "address": str(p.who), "line": p.line, "pattern": p.pattern})
        return [json.dumps({"contract": self.contract, **r}, sort_keys=False) for r in rows]


def _covers(role_path: VariablePath, p: VariablePath) -> bool:
    return role_path.base == p.base and (role_path.member is None or role_path.member == p.member)


# --- helpers -----------------------------------------------------------------------

def entry_points(contract: ir.ContractIR, cg: CallGraph) -> list[ir.FunctionIR]:
    return [
        f for f in contract.functions
        if f in cg.ext_reachable and f not in cg.shadowed and (f.is_public or f.kind in ("fallback", "receive"))
    ]


def fn_label(f: ir.FunctionIR) -> str:
    return f.name or f.kind


def closure_chains(f: ir.FunctionIR, cg: CallGraph) -> list[tuple[ir.FunctionIR, list[CallEdge]]]:
    """Functions reached from ``f`` through internal calls, each with the first call chain found."""
    out = [(f, [])]
    seen = {f}
    todo = deque(out)
    while todo:
        g, chain = todo.popleft()
        for e in cg.callees(g):
            if e.callee is not None and e.callee not in seen and e.callee in cg.defuse:
                seen.add(e.callee)
                item = (e.callee, chain + [e])
                out.append(item)
                todo.append(item)
    return out


def bind_class(cls: AddrClass | None, chain: list[CallEdge], cg: CallGraph) -> AddrClass | None:
    """Re-express a helper-parameter address class in terms of the entry point's view."""
    for edge in reversed(chain):
        if cls is None or cls.kind != "param":
            break
        idx = next((i for i, p in enumerate(edge.callee.params) if p.name == cls.name), None)
        if idx is None:
            break
        if idx >= len(edge.call.args):
            return AddrClass("unknown")
        cls = cg.defuse[edge.caller].scope.classify(edge.call.args[idx])
    return cls


def guard_state_reads(cond: ir.Expr | None, scope: Scope, contract: ir.ContractIR, cg: CallGraph,
                      fn: ir.FunctionIR, _depth: int = 0) -> set[VariablePath]:
    """Storage paths a guard condition reads, following locals and internal getters."""
    out: set[VariablePath] = set()
    if cond is None or _depth > 3:
        return out
    for acc, _e in scope.accesses(cond):
        out.add(acc.path)
    for x in ir.walk_expr(cond):
        if isinstance(x, ir.Identifier) and x.kind == "local" and x.name not in scope.aliases:
            for d in scope.local_defs.get(x.name, []):
                out |= guard_state_reads(d, scope, contract, cg, fn, _depth + 1)
        elif isinstance(x, ir.Call):
            for e in cg.callees(fn):
                if e.call is x and e.callee is not None and e.callee.body and e.callee in cg.defuse:
                    sub = cg.defuse[e.callee].scope
                    for s in cg.cfgs[e.callee].stmts:
                        if isinstance(s, ir.Return):
                            out |= guard_state_reads(s.value, sub, contract, cg, e.callee, _depth + 1)
    return out


def write_value_kind(ws, g: ir.FunctionIR, chain: list[CallEdge], cg: CallGraph) -> str:
    """Classify the stored value as caller-chosen (param), literal (const) or computed from state (derived)."""
    s = ws.stmt
    if ws.op in ("delete", "++", "--"):
        return "const"
    value = None
    if isinstance(s, ir.Assign) and s.target is ws.expr:
        value = s.value
    else:
        for e in s.exprs():
            for x in ir.walk_expr(e):
                if isinstance(x, ir.AssignExpr) and x.target is ws.expr:
                    value = x.value
                elif isinstance(x, ir.Call) and isinstance(x.callee, ir.MemberAccess) and x.callee.base is ws.expr and x.args:
                    value = x.args[0]
    if value is None:
        return "derived"
    if _param_fed(value, g, chain, cg, 0):
        return "param"
    if isinstance(strip_conversions(value), ir.Literal):
        return "const"
    return "derived"


def _param_fed(e: ir.Expr | None, g: ir.FunctionIR, chain: list[CallEdge], cg: CallGraph, depth: int) -> bool:
    if e is None or depth > 4:
        return False
    scope = cg.defuse[g].scope
    for x in ir.walk_expr(e):
        if isinstance(x, ir.SpecialRef) and x.name == "msg.value":
            return True
        if not isinstance(x, ir.Identifier):
            continue
        if x.kind == "param":
            if not chain:
                return True
            edge = chain[-1]
            idx = next((i for i, p in enumerate(edge.callee.params) if p.name == x.name), None)
            if idx is not None and idx < len(edge.call.args):
                if _param_fed(edge.call.args[idx], edge.caller, chain[:-1], cg, depth + 1):
                    return True
            elif idx is None:
                # a modifier parameter bound by a synthetic declaration
                for d in scope.local_defs.get(x.name, []):
                    if _param_fed(d, g, chain, cg, depth + 1):
                        return True
        elif x.kind == "local" and x.name not in scope.aliases:
            for d in scope.local_defs.get(x.name, []):
                if _param_fed(d, g, chain, cg, depth + 1):
                    return True
    return False


def _guard_locals(cond: ir.Expr | None) -> set[str]:
    return {x.name for x in ir.walk_expr(cond) if isinstance(x, ir.Identifier) and x.kind in ("local", "param")}


# --- lpPool ------------------------------------------------------------------------

def detect_lp_pool(target: ir.ContractIR | str | None, unit: ir.SourceUnit | None = None,
                   observed: set[str] | None = None) -> bool:
    """A pair-like contract: exposes getReserves, or mint and burn plus a two-token accessor."""
    names: set[str] = set(observed or ())
    if isinstance(target, ir.ContractIR):
        names |= target.function_names()
    elif isinstance(target, str) and unit is not None:
        c = unit.contract(target)
        if c is not None:
            names |= c.function_names()
    if "getReserves" in names:
        return True
    return {"mint", "burn"} <= names and bool(names & {"token0", "token1", "getReserves"})


def pool_hint(type_name: str) -> bool:
    return bool(POOL_NAME_HINT.search(type_name or ""))


def observed_members(contract: ir.ContractIR, cg: CallGraph) -> dict[str, set[str]]:
    """Members called on each contract-typed receiver, keyed by the receiver's static type."""
    out: dict[str, set[str]] = {}
    for f in contract.functions:
        for e in cg.callees(f, kind="external"):
            if e.target_type:
                out.setdefault(e.target_type, set()).add(e.callee_name)
    return out


def make_pool_check(contract: ir.ContractIR, cg: CallGraph, unit: ir.SourceUnit | None):
    seen = observed_members(contract, cg)

    def check(node: CdgNode) -> bool:
        if node.kind != "external":
            return False
        return detect_lp_pool(node.target or None, unit, seen.get(node.target, set()) | {node.detail})

    return check


# --- derivations ---------------------------------------------------------------------

def derive_modify_verify(contract: ir.ContractIR, cg: CallGraph, fb: FactBase | None = None) -> FactBase:
    fb = fb or FactBase(contract.name)
    for f in entry_points(contract, cg):
        name = fn_label(f)
        reads: set[VariablePath] = set()
        locals_: set[str] = set()
        for g, chain in closure_chains(f, cg):
            du = cg.defuse[g]
            for ws in du.write_sites:
                kc = bind_class(ws.key_class, chain, cg)
                vk = write_value_kind(ws, g, chain, cg)
                fb.writes.append(WriteFact(name, ws.path, ws.stmt.loc.line, kc, ws.op, "" if g is f else fn_label(g), vk))
            for guard in cg.cfgs[g].guards:
                if guard.condition is None or guard.origin == "loop":
                    continue
                for p in guard_state_reads(guard.condition, du.scope, contract, cg, g):
                    fb.verify.setdefault((name, p), [])
                    if guard.loc.line not in fb.verify[(name, p)]:
                        fb.verify[(name, p)].append(guard.loc.line)
                    reads.add(p)
                if g is f:
                    locals_ |= _guard_locals(guard.condition)
        fb.guard_reads[name] = reads
        fb.guard_locals[name] = locals_
    fb.writes = sorted(set(fb.writes))
    return fb


def _perm_from_cond(cond: ir.Expr, scope: Scope, contract: ir.ContractIR) -> list[tuple[AddrClass, str]]:
    found: list[tuple[AddrClass, str]] = []
    for x in ir.walk_expr(cond):
        if isinstance(x, ir.BinaryOp) and x.op in ("==", "!="):
            a, b = scope.classify(x.left), scope.classify(x.right)
            for mine, other in ((a, b), (b, a)):
                if mine == CALLER and other != CALLER:
                    if other.kind == "unknown":
                        side = strip_conversions(x.right if mine is a else x.left)
                        if not (isinstance(side, ir.Call) and OWNER_LIKE.search(side.callee_name or "")):
                            continue
                        other = AddrClass("state", side.callee_name)
                    if x.op == "!=" and other.kind == "constant":
                        continue  # zero-address style sanity checks
                    found.append((other, "caller-eq"))
                if mine.kind == "origin" and other.kind not in ("origin", "caller", "unknown", "constant"):
                    found.append((other, "origin"))
        elif isinstance(x, ir.IndexAccess):
            acc = scope.access(x)
            if acc is None or not acc.keys:
                continue
            leaf = acc.type
            classes = [scope.classify(k) for k in acc.keys]
            if ALLOWANCE_VARS.search(acc.path.base) and len(classes) >= 2 and CALLER in classes[1:]:
                found.append((classes[0], "allowance"))
            elif leaf.is_bool and CALLER in classes:
                found.append((AddrClass("state", acc.path.base), "role"))
        elif isinstance(x, ir.Call):
            name = x.callee_name
            if ROLE_CALLS.match(name or ""):
                found.append((AddrClass("state", name), "role"))
            elif name == "allowance" and len(x.args) == 2 and scope.classify(x.args[1]) == CALLER:
                found.append((scope.classify(x.args[0]), "allowance"))
    return found


def derive_perm_checks(contract: ir.ContractIR, cg: CallGraph, fb: FactBase | None = None) -> FactBase:
    fb = fb or FactBase(contract.name)
    for f in entry_points(contract, cg):
        name = fn_label(f)
        perms: set[PermFact] = set()
        for g, chain in closure_chains(f, cg):
            cfg = cg.cfgs[g]
            scope = cg.defuse[g].scope
            guards: list[GuardNode] = [x for x in cfg.guards if x.condition is not None and x.origin != "loop"]
            for guard in guards:
                for who, pattern in _perm_from_cond(guard.condition, scope, contract):
                    who = bind_class(who, chain, cg)
                    perms.add(PermFact(name, who, guard.loc.line, pattern))
                    if pattern == "origin":
                        fb.advisories.append(f"{contract.name}.{name}: authorization via tx.origin at line {guard.loc.line}")
            for s in cfg.stmts:
                # authorization helpers called for effect: _checkOwner(), _spendAllowance(from, msg.sender, amt)
                for e in s.exprs() if isinstance(s, ir.ExprStmt) else ():
                    if isinstance(e, ir.Call):
                        n = e.callee_name or ""
                        is_internal = any(ce.call is e and ce.callee is not None and ce.callee.body for ce in cg.callees(g))
                        if ROLE_CALLS.match(n) and not is_internal:
                            perms.add(PermFact(name, AddrClass("state", n), s.loc.line, "role"))
                        elif ALLOWANCE_CALLS.match(n) and len(e.args) >= 2 and scope.classify(e.args[1]) == CALLER:
                            who = bind_class(scope.classify(e.args[0]), chain, cg)
                            perms.add(PermFact(name, who, s.loc.line, "allowance"))
            for m in cfg.unresolved_modifiers:
                if AUTH_MODIFIERS.match(m):
                    perms.add(PermFact(name, AddrClass("state", m), f.loc.line, "modifier"))
        fb.perms.extend(sorted(perms))
    fb.perms = sorted(set(fb.perms))
    fb.advisories = sorted(set(fb.advisories))
    return fb


def _write_is_debit(ws, scope: Scope) -> bool:
    s = ws.stmt
    if ws.op in ("-=", "delete", "--"):
        return True
    if isinstance(s, ir.Assign) and s.op == "=" and s.value is not None:
        v = s.value
        if isinstance(v, ir.Literal) and v.value in ("0", "false"):
            return True
        for x in ir.walk_expr(v):
            if isinstance(x, ir.BinaryOp) and x.op == "-":
                return True
            if isinstance(x, ir.Call) and x.callee_name in ("sub", "trySub", "safeSub"):
                return True
    return False


def derive_transfers(contract: ir.ContractIR, model: StakingModel, cg: CallGraph, fb: FactBase | None = None) -> FactBase:
    fb = fb or FactBase(contract.name)
    role_paths = sorted(model.rewards | model.amounts, key=str)
    reward_tokens = {p.base for p in model.reward_token} | {p.base for p in model.stake_token}
    cdg_by_transfer = {id(c.transfer): c for c in model.cdgs.values() if c.transfer is not None}
    entries = {fn_label(f): f for f in entry_points(contract, cg)}
    for t in model.transfers:
        fname = fn_label(t.anchor)
        if fname not in entries:
            continue
        if t.native:
            fb.na_trans.append(TransferFact(fname, t.from_class, t.to_class, t.site.line, t.locator))
        cdg = cdg_by_transfer.get(id(t))
        touches_role = cdg is not None and any(_covers(p, q) for p in role_paths for q in cdg.state_dep)
        debit_classes = _debit_classes(t.anchor, role_paths, cg)
        if not (touches_role or debit_classes or t.token_key in reward_tokens):
            continue
        froms: list[AddrClass] = []
        if debit_classes:
            froms = debit_classes
        elif cdg is not None:
            froms = _read_key_classes(t.anchor, [q for q in cdg.state_dep if any(_covers(p, q) for p in role_paths)], cg)
        if not froms:
            froms = [t.from_class if t.from_class not in (THIS,) and t.direction == "move" else THIS]
        if t.direction == "move" and t.from_class not in froms and t.from_class.kind != "unknown":
            froms.append(t.from_class)
        for frm in froms:
            fb.reward_trans.append(TransferFact(fname, frm, t.to_class, t.site.line, t.locator))
    fb.na_trans = sorted(set(fb.na_trans))
    fb.reward_trans = sorted(set(fb.reward_trans))
    return fb


def _debit_classes(f: ir.FunctionIR, role_paths: list[VariablePath], cg: CallGraph) -> list[AddrClass]:
    out: list[AddrClass] = []
    for g, chain in closure_chains(f, cg):
        du = cg.defuse[g]
        for ws in du.write_sites:
            if any(_covers(p, ws.path) for p in role_paths) and _write_is_debit(ws, du.scope):
                kc = bind_class(ws.key_class, chain, cg)
                if kc is not None and kc not in out:
                    out.append(kc)
    return out


def _read_key_classes(f: ir.FunctionIR, paths: list[VariablePath], cg: CallGraph) -> list[AddrClass]:
    out: list[AddrClass] = []
    for g, chain in closure_chains(f, cg):
        du = cg.defuse[g]
        for rs in du.read_sites:
            if any(_covers(p, rs.path) for p in paths):
                acc = du.scope.access(rs.expr)
                kc = du.scope.key_class(acc) if acc is not None else None
                kc = bind_class(kc, chain, cg)
                if kc is not None and kc not in out:
                    out.append(kc)
    return out


def build_facts(contract: ir.ContractIR, model: StakingModel, cg: CallGraph, unit: ir.SourceUnit | None = None) -> FactBase:
    fb = FactBase(contract.name)
    for cdg in model.cdgs.values():
        for n in cdg.pool_sources:
            fb.lp_pools[n.name] = n.target
    for v in contract.state_vars:
        if v.type_desc.kind == "contract" and detect_lp_pool(v.type_desc.name, unit, observed_members(contract, cg).get(v.type_desc.name)):
            fb.lp_pools.setdefault(v.name, v.type_desc.name)
    derive_modify_verify(contract, cg, fb)
    derive_perm_checks(contract, cg, fb)
    derive_transfers(contract, model, cg, fb)
    return fb

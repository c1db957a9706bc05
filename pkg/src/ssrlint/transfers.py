"""Recognize token-moving calls and anchor them to externally reachable functions."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import NotATransfer
from .graphs import CallEdge, CallGraph
from .ingest import ir
from .paths import THIS, AddrClass, Scope, strip_conversions

_NOT_TOKEN_MOVES = ("ownership", "admin", "owner", "governance", "role")
_NATIVE_HELPERS = {"sendvalue", "safetransfereth", "safetransfernative", "transfereth"}
_MINTS = {"mint", "safemint"}
_BURNS = {"burn", "burnfrom"}


@dataclass
class Transfer:
    """One token movement, seen from the externally reachable function that triggers it."""

    anchor: ir.FunctionIR  # function the chain starts from (after re-anchoring)
    fn: ir.FunctionIR  # function whose body holds the call
    stmt: ir.Stmt
    call: ir.Call
    kind: str  # token | native | mint | burn
    callee_name: str
    token_key: str  # state var name of the token, "self", "native", or "?"
    from_expr: ir.Expr | None
    to_expr: ir.Expr | None
    amount_expr: ir.Expr | None
    from_class: AddrClass
    to_class: AddrClass
    chain: list[CallEdge] = field(default_factory=list)
    low_level: bool = False

    @property
    def direction(self) -> str:
        if self.kind == "mint":
            return "in" if self.to_class == THIS else "out"
        if self.kind == "burn":
            return "in"
        if self.to_class == THIS:
            return "in"
        if self.from_class == THIS:
            return "out"
        return "move"

    @property
    def native(self) -> bool:
        return self.kind == "native"

    @property
    def loc(self) -> ir.Loc:
        return self.stmt.loc

    @property
    def site(self) -> ir.Loc:
        """Where the anchor function starts the move: the helper call site when chained."""
        return self.chain[0].stmt.loc if self.chain else self.stmt.loc

    @property
    def locator(self) -> str:
        return f"{self.anchor.name}@{self.stmt.loc.line}"

    def __repr__(self) -> str:
        return (
            f"<Transfer {self.anchor.name}@{self.stmt.loc.line} {self.kind} {self.token_key} "
            f"{self.from_class}->{self.to_class} {self.direction}>"
        )


def transfer_name(name: str) -> str | None:
    """Classify a callee name by ERC naming convention; None when it does not move tokens."""
    n = name.lower().lstrip("_")
    if not n:
        return None
    if any(x in n for x in _NOT_TOKEN_MOVES):
        return None
    if n in _NATIVE_HELPERS:
        return "native"
    if n in _MINTS:
        return "mint"
    if n in _BURNS:
        return "burn"
    if "transfer" in n:
        return "token"
    return None


@dataclass
class CallShape:
    kind: str
    token: ir.Expr | None
    token_key: str
    from_expr: ir.Expr | None
    to_expr: ir.Expr | None
    amount: ir.Expr | None
    low_level: bool = False


def _token_key(e: ir.Expr | None, scope: Scope) -> str:
    e = strip_conversions(e)
    if isinstance(e, ir.Identifier) and e.kind == "state":
        return e.name
    if isinstance(e, ir.SpecialRef) and e.name in ("this", "address(this)"):
        return "self"
    a = scope.access(e) if e is not None else None
    if a is not None:
        return str(a.path)
    return "?"


def shape_call(call: ir.Call, scope: Scope, contract: ir.ContractIR) -> CallShape | None:
    """Read the token and the moved amount off a call by ERC argument conventions."""
    c = call.callee
    args = call.args
    if "value" in call.options:
        recv = c.base if isinstance(c, ir.MemberAccess) else None
        return CallShape("native", None, "native", ir.SpecialRef(call.loc, "this"), recv, call.options["value"], True)
    name = call.callee_name
    kind = transfer_name(name)
    if isinstance(c, ir.MemberAccess) and c.member in ("transfer", "send") and len(args) == 1:
        t = scope.type_of(c.base)
        if t.kind != "contract":
            return CallShape("native", None, "native", ir.SpecialRef(call.loc, "this"), c.base, args[0], c.member == "send")
    if kind is None:
        return None
    if kind == "native":
        if len(args) >= 2:
            return CallShape("native", None, "native", ir.SpecialRef(call.loc, "this"), args[0], args[1])
        return None
    token: ir.Expr | None = None
    token_key = "self"
    if isinstance(c, ir.MemberAccess):
        base = c.base
        if isinstance(base, ir.Identifier) and base.kind in ("contract", "unresolved") and base.name[:1].isupper():
            # static library call: SafeERC20.safeTransfer(token, to, amount)
            if not args:
                return None
            token, args = args[0], args[1:]
        else:
            token = base
        token_key = _token_key(token, scope)
    this = ir.SpecialRef(call.loc, "this")
    n = len(args)
    if n == 0:
        return None
    if kind == "mint":
        to = args[0] if n >= 2 else None
        return CallShape("mint", token, token_key, None, to, args[1] if n >= 2 else args[0])
    if kind == "burn":
        frm = args[0] if n >= 2 else this
        return CallShape("burn", token, token_key, frm, None, args[1] if n >= 2 else args[0])
    if n >= 3:
        return CallShape("token", token, token_key, args[0], args[1], args[2])
    if n == 2:
        return CallShape("token", token, token_key, this, args[0], args[1])
    return None


def locate_transfer_amount(stmt: ir.Stmt, scope: Scope, contract: ir.ContractIR) -> ir.Expr:
    """Amount argument of the token-moving call in ``stmt``; raises NotATransfer otherwise."""
    for e in stmt.exprs():
        for x in ir.walk_expr(e):
            if isinstance(x, ir.Call):
                shape = shape_call(x, scope, contract)
                if shape is not None and shape.amount is not None:
                    return shape.amount
    raise NotATransfer(f"{stmt.loc}: no token transfer in statement")


def _calls_in(stmt: ir.Stmt):
    for e in stmt.exprs():
        for x in ir.walk_expr(e):
            if isinstance(x, ir.Call):
                yield x


def direct_transfers(
    f: ir.FunctionIR, cg: CallGraph, _seen: frozenset = frozenset()
) -> list[tuple[ir.Stmt, ir.Call, CallShape]]:
    """Token moves written in ``f`` itself (including its inlined modifiers)."""
    contract = cg.contract_of[f]
    scope = cg.defuse[f].scope
    out = []
    helpers = {id(e.call) for e in cg.callees(f) if _is_helper(e, cg, _seen | {f})}
    for s in cg.cfgs[f].stmts:
        for x in _calls_in(s):
            if id(x) in helpers:
                continue
            shape = shape_call(x, scope, contract)
            if shape is None:
                continue
            if shape.token is None and shape.kind != "native" and isinstance(x.callee, ir.Identifier):
                shape.token_key = _helper_token(x, f, cg, _seen | {f})
            out.append((s, x, shape))
    return out


def _helper_token(call: ir.Call, caller: ir.FunctionIR, cg: CallGraph, seen: frozenset) -> str:
    """Token moved by an internal transfer helper, when its body names a single one."""
    for e in cg.callees(caller):
        if e.call is call and e.callee is not None and e.callee not in seen:
            keys = {sh.token_key for _s, _x, sh in direct_transfers(e.callee, cg, seen)}
            keys.discard("?")
            if len(keys) == 1:
                return keys.pop()
    return "self"


def _is_helper(edge: CallEdge, cg: CallGraph, seen: frozenset = frozenset()) -> bool:
    """Internal function with a body that performs its own token moves.

    Such calls are descended into rather than read by ERC argument order, so a
    helper like ``_safeTransfer(token, to, amount)`` is not mistaken for
    ``transferFrom(from, to, amount)``.
    """
    f = edge.callee
    if edge.kind != "internal" or f is None or not f.body or f not in cg.cfgs or f in seen:
        return False
    return bool(direct_transfers(f, cg, seen))


def is_transfer_call(edge: CallEdge, cg: CallGraph | None = None) -> bool:
    if cg is not None and _is_helper(edge, cg):
        return False
    return transfer_name(edge.callee_name) is not None or "value" in edge.call.options


def effective_callees(f: ir.FunctionIR, cg: CallGraph) -> list[CallEdge]:
    """Internal call edges out of ``f`` that are not themselves recognized transfers."""
    return [e for e in cg.callees(f) if e.callee is not None and not is_transfer_call(e, cg)]


def effective_closure(f: ir.FunctionIR, cg: CallGraph) -> list[ir.FunctionIR]:
    out = [f]
    seen = {f}
    i = 0
    while i < len(out):
        for e in effective_callees(out[i], cg):
            if e.callee not in seen:
                seen.add(e.callee)
                out.append(e.callee)
        i += 1
    return out


def bind(expr: ir.Expr | None, chain: list[CallEdge]) -> tuple[ir.Expr | None, int]:
    """Substitute callee parameters by call-site arguments, walking the chain backwards.

    Returns the bound expression and the chain depth whose scope interprets it
    (``len(chain)`` means the innermost function).
    """
    depth = len(chain)
    e = expr
    while depth > 0:
        inner = strip_conversions(e)
        if not (isinstance(inner, ir.Identifier) and inner.kind == "param"):
            break
        edge = chain[depth - 1]
        callee = edge.callee
        idx = next((i for i, p in enumerate(callee.params) if p.name == inner.name), None)
        if idx is None or idx >= len(edge.call.args):
            break
        e = edge.call.args[idx]
        depth -= 1
    return e, depth


def find_transfers(contract: ir.ContractIR, cg: CallGraph, anchors_only: bool = True) -> list[Transfer]:
    """Every transfer reachable from each externally reachable public entry point.

    Transfers inside internal helpers are re-anchored to each public caller with
    parameters bound to the caller's arguments. Calls recognized as transfers are
    not descended into.
    """
    fns = [f for f in contract.functions if f in cg.contract_of]
    if anchors_only:
        roots = [f for f in fns if f in cg.ext_reachable and (f.is_public or f.kind in ("fallback", "receive"))]
    else:
        roots = fns
    out: list[Transfer] = []
    for root in roots:
        stack: list[tuple[ir.FunctionIR, list[CallEdge]]] = [(root, [])]
        visited = set()
        while stack:
            f, chain = stack.pop(0)
            if f in visited:
                continue
            visited.add(f)
            for s, x, shape in direct_transfers(f, cg):
                frames = [chain_scope(root, chain, cg, d) for d in range(len(chain) + 1)]
                fe, fd = bind(shape.from_expr, chain)
                te, td = bind(shape.to_expr, chain)
                out.append(
                    Transfer(
                        anchor=root,
                        fn=f,
                        stmt=s,
                        call=x,
                        kind=shape.kind,
                        callee_name=x.callee_name,
                        token_key=_bound_token(shape, chain, frames, cg),
                        from_expr=fe,
                        to_expr=te,
                        amount_expr=shape.amount,
                        from_class=frames[fd].classify(fe) if fe is not None else AddrClass("unknown", "mint"),
                        to_class=frames[td].classify(te) if te is not None else AddrClass("unknown", "burn"),
                        chain=list(chain),
                        low_level=shape.low_level,
                    )
                )
            for e in effective_callees(f, cg):
                stack.append((e.callee, chain + [e]))
    out.sort(key=lambda t: (t.anchor.loc, t.stmt.loc, t.callee_name))
    return out


def chain_scope(root: ir.FunctionIR, chain: list[CallEdge], cg: CallGraph, depth: int) -> Scope:
    f = root if depth == 0 else chain[depth - 1].callee
    return cg.defuse[f].scope


def _bound_token(shape: CallShape, chain: list[CallEdge], frames: list[Scope], cg: CallGraph) -> str:
    if shape.token is None:
        return shape.token_key
    te, td = bind(shape.token, chain)
    k = _token_key(te, frames[td])
    return k if k != "?" else shape.token_key

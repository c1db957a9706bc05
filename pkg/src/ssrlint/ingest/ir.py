"""Normalized contract representation consumed by every later stage.

Expressions and statements compare by identity; analyses key them by object or
by ``Stmt.sid``. Source locations ride on every node so findings can cite
``file:line``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator


@dataclass(frozen=True, order=True)
class Loc:
    file: str
    line: int
    col: int = 0

    def __str__(self) -> str:
        return f"{self.file}:{self.line}"


NOWHERE = Loc("<unknown>", 0)


@dataclass(frozen=True)
class TypeDesc:
    kind: str  # elementary | mapping | struct | array | contract | enum | function | unknown
    name: str = ""
    key: TypeDesc | None = None
    value: TypeDesc | None = None
    members: tuple[tuple[str, TypeDesc], ...] = ()

    @property
    def is_address(self) -> bool:
        return self.kind == "elementary" and self.name.startswith("address")

    @property
    def is_uint(self) -> bool:
        return self.kind == "elementary" and (self.name.startswith("uint") or self.name.startswith("int"))

    @property
    def is_bool(self) -> bool:
        return self.kind == "elementary" and self.name == "bool"

    def member(self, name: str) -> TypeDesc | None:
        for m, t in self.members:
            if m == name:
                return t
        return None

    def leaf(self) -> TypeDesc:
        """Strip mapping/array layers down to the stored element type."""
        t = self
        while t.kind in ("mapping", "array") and t.value is not None:
            t = t.value
        return t

    def __str__(self) -> str:
        if self.kind == "mapping":
            return f"mapping({self.key} => {self.value})"
        if self.kind == "array":
            return f"{self.value}[]"
        return self.name or self.kind


UNKNOWN_TYPE = TypeDesc("unknown")


# --- expressions -----------------------------------------------------------

@dataclass(eq=False)
class Expr:
    loc: Loc

    def children(self) -> Iterator[Expr]:
        return iter(())


@dataclass(eq=False)
class Identifier(Expr):
    name: str
    # state | local | param | function | modifier | contract | struct | enum
    # | event | error | builtin | unresolved
    kind: str = "unresolved"
    owner: str = ""


@dataclass(eq=False)
class MemberAccess(Expr):
    base: Expr
    member: str

    def children(self):
        yield self.base


@dataclass(eq=False)
class IndexAccess(Expr):
    base: Expr
    index: Expr | None

    def children(self):
        yield self.base
        if self.index is not None:
            yield self.index


@dataclass(eq=False)
class BinaryOp(Expr):
    op: str
    left: Expr
    right: Expr

    def children(self):
        yield self.left
        yield self.right


@dataclass(eq=False)
class UnaryOp(Expr):
    op: str
    operand: Expr
    prefix: bool = True

    def children(self):
        yield self.operand


@dataclass(eq=False)
class Call(Expr):
    callee: Expr
    args: list[Expr]
    names: list[str] = field(default_factory=list)
    options: dict[str, Expr] = field(default_factory=dict)

    def children(self):
        yield self.callee
        yield from self.args
        yield from self.options.values()

    @property
    def callee_name(self) -> str:
        c = self.callee
        if isinstance(c, Identifier):
            return c.name
        if isinstance(c, MemberAccess):
            return c.member
        if isinstance(c, TypeRef):
            return c.name
        return ""


@dataclass(eq=False)
class Literal(Expr):
    kind: str
    value: str


@dataclass(eq=False)
class SpecialRef(Expr):
    name: str  # msg.sender, block.timestamp, this.balance, address(this), this, tx.origin, msg.value, ...


@dataclass(eq=False)
class TupleExpr(Expr):
    items: list[Expr | None]

    def children(self):
        return (i for i in self.items if i is not None)


@dataclass(eq=False)
class Conditional(Expr):
    cond: Expr
    if_true: Expr
    if_false: Expr

    def children(self):
        yield self.cond
        yield self.if_true
        yield self.if_false


@dataclass(eq=False)
class TypeRef(Expr):
    """Elementary type used as an expression, e.g. the callee of ``address(x)``."""

    name: str


@dataclass(eq=False)
class NewExpr(Expr):
    type_name: str


@dataclass(eq=False)
class AssignExpr(Expr):
    """Assignment nested inside a larger expression."""

    target: Expr
    op: str
    value: Expr

    def children(self):
        yield self.target
        yield self.value


def walk_expr(e: Expr | None) -> Iterator[Expr]:
    if e is None:
        return
    stack = [e]
    while stack:
        cur = stack.pop()
        yield cur
        stack.extend(reversed(list(cur.children())))


# --- statements ------------------------------------------------------------

@dataclass
class LocalVar:
    name: str
    type_desc: TypeDesc
    storage: str = ""
    loc: Loc = NOWHERE


@dataclass(eq=False)
class Stmt:
    sid: int
    loc: Loc

    def exprs(self) -> Iterator[Expr]:
        return iter(())

    def substatements(self) -> Iterator[Stmt]:
        return iter(())


@dataclass(eq=False)
class Assign(Stmt):
    target: Expr
    op: str  # "=", "+=", ..., "++", "--", "delete"
    value: Expr | None

    def exprs(self):
        yield self.target
        if self.value is not None:
            yield self.value


@dataclass(eq=False)
class Declare(Stmt):
    vars: list[LocalVar | None]
    value: Expr | None

    def exprs(self):
        if self.value is not None:
            yield self.value


@dataclass(eq=False)
class Require(Stmt):
    cond: Expr
    message: Expr | None = None
    kind: str = "require"

    def exprs(self):
        yield self.cond


@dataclass(eq=False)
class Revert(Stmt):
    call: Expr | None = None

    def exprs(self):
        if self.call is not None:
            yield self.call


@dataclass(eq=False)
class If(Stmt):
    cond: Expr
    then: list[Stmt]
    orelse: list[Stmt]

    def exprs(self):
        yield self.cond

    def substatements(self):
        yield from self.then
        yield from self.orelse


@dataclass(eq=False)
class Loop(Stmt):
    kind: str  # for | while | do
    cond: Expr | None
    body: list[Stmt]
    init: Stmt | None = None
    step: Stmt | None = None

    def exprs(self):
        if self.cond is not None:
            yield self.cond

    def substatements(self):
        if self.init is not None:
            yield self.init
        yield from self.body
        if self.step is not None:
            yield self.step


@dataclass(eq=False)
class Return(Stmt):
    value: Expr | None

    def exprs(self):
        if self.value is not None:
            yield self.value


@dataclass(eq=False)
class Emit(Stmt):
    call: Expr

    def exprs(self):
        yield self.call


@dataclass(eq=False)
class ExprStmt(Stmt):
    expr: Expr

    def exprs(self):
        yield self.expr


@dataclass(eq=False)
class Jump(Stmt):
    kind: str  # break | continue


@dataclass(eq=False)
class Placeholder(Stmt):
    pass


@dataclass(eq=False)
class Opaque(Stmt):
    """Region outside the analyzable subset (inline assembly, try/catch)."""

    kind: str
    inner: Expr | None = None
    unanalyzed: bool = True

    def exprs(self):
        if self.inner is not None:
            yield self.inner


def iter_stmts(stmts: list[Stmt] | None) -> Iterator[Stmt]:
    """Pre-order walk over a statement list, descending into compound statements."""
    for s in stmts or ():
        yield s
        yield from iter_stmts(list(s.substatements()))


# --- declarations ----------------------------------------------------------

@dataclass
class StateVarDecl:
    name: str
    type_desc: TypeDesc
    visibility: str = "internal"
    is_constant_or_immutable: bool = False
    value: Expr | None = None
    loc: Loc = NOWHERE
    contract: str = ""


@dataclass
class ModifierCall:
    name: str
    args: list[Expr]
    loc: Loc = NOWHERE


@dataclass(eq=False)
class FunctionIR:
    name: str
    kind: str = "function"  # function | constructor | fallback | receive
    params: list[LocalVar] = field(default_factory=list)
    returns: list[LocalVar] = field(default_factory=list)
    visibility: str = "public"
    mutability: str = "nonpayable"
    modifiers_applied: list[ModifierCall] = field(default_factory=list)
    body: list[Stmt] | None = None
    loc: Loc = NOWHERE
    contract: str = ""
    is_externally_reachable: bool = False

    @property
    def signature(self) -> str:
        label = self.name or self.kind
        return f"{label}({','.join(str(p.type_desc) for p in self.params)})"

    @property
    def is_public(self) -> bool:
        return self.visibility in ("public", "external") and self.kind != "constructor"

    def __repr__(self) -> str:
        return f"<FunctionIR {self.contract}.{self.signature}>"


@dataclass(eq=False)
class ModifierIR:
    name: str
    params: list[LocalVar] = field(default_factory=list)
    body: list[Stmt] | None = None
    loc: Loc = NOWHERE
    contract: str = ""


@dataclass(eq=False)
class ContractIR:
    name: str
    kind: str = "contract"  # contract | interface | library
    bases: list[str] = field(default_factory=list)
    state_vars: list[StateVarDecl] = field(default_factory=list)
    functions: list[FunctionIR] = field(default_factory=list)
    modifiers: list[ModifierIR] = field(default_factory=list)
    structs: dict[str, TypeDesc] = field(default_factory=dict)
    enums: dict[str, list[str]] = field(default_factory=dict)
    events: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    abstract: bool = False
    loc: Loc = NOWHERE
    linearization: list[str] = field(default_factory=list)
    shadowed: list[FunctionIR] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    flattened: bool = False

    def state_var(self, name: str) -> StateVarDecl | None:
        for v in self.state_vars:
            if v.name == name:
                return v
        return None

    def functions_named(self, name: str) -> list[FunctionIR]:
        return [f for f in self.functions if f.name == name]

    def modifier(self, name: str) -> ModifierIR | None:
        for m in self.modifiers:
            if m.name == name:
                return m
        return None

    def function_names(self) -> set[str]:
        return {f.name for f in self.functions}


@dataclass(eq=False)
class SourceUnit:
    path: str
    contracts: list[ContractIR]
    pragma: str = ""
    source_hash: str = ""
    files: list[str] = field(default_factory=list)
    sources: dict[str, str] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def contract(self, name: str) -> ContractIR | None:
        for c in self.contracts:
            if c.name == name:
                return c
        return None

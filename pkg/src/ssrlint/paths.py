"""Storage paths and address classes shared by the analysis layers."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .ingest import ir

SENDER_FUNCS = {"_msgSender", "msgSender", "_sender"}


@dataclass(frozen=True, order=True)
class VariablePath:
    """A state variable, optionally narrowed to one struct member behind mapping/array keys."""

    base: str
    member: str | None = None
    key_shape: str = "none"  # none | address-keyed | id-keyed
    role: str | None = field(default=None, compare=False, hash=False)

    def __str__(self) -> str:
        s = self.base
        if self.key_shape != "none":
            s += "[*]"
        if self.member:
            s += "." + self.member
        return s

    @property
    def dotted(self) -> str:
        """``base.member`` form used by extractor output and labels."""
        return f"{self.base}.{self.member}" if self.member else self.base

    def with_role(self, role: str | None) -> VariablePath:
        return replace(self, role=role)

    @property
    def root(self) -> VariablePath:
        return VariablePath(self.base, None, self.key_shape)


@dataclass(frozen=True, order=True)
class AddrClass:
    kind: str  # caller | param | constant | state | this | origin | unknown
    name: str = ""

    def __str__(self) -> str:
        label = {
            "caller": "Caller",
            "param": "Param",
            "constant": "Constant",
            "state": "StateRef",
            "this": "This",
            "origin": "Origin",
            "unknown": "Unknown",
        }[self.kind]
        return f"{label}({self.name})" if self.name else label


CALLER = AddrClass("caller")
THIS = AddrClass("this")
UNKNOWN = AddrClass("unknown")


@dataclass
class Access:
    """A resolved storage access with the key expressions met on the way to it."""

    path: VariablePath
    keys: list[ir.Expr]
    type: ir.TypeDesc
    via_alias: str | None = None


def strip_conversions(e: ir.Expr | None) -> ir.Expr | None:
    """``address(x)``, ``payable(x)``, ``uint256(x)`` and ``IERC20(x)``-style wrappers."""
    while isinstance(e, ir.Call) and len(e.args) == 1 and not e.options:
        c = e.callee
        if isinstance(c, ir.TypeRef) or (isinstance(c, ir.Identifier) and c.kind in ("contract", "unresolved") and c.name[:1].isupper()):
            e = e.args[0]
        else:
            break
    return e


def key_shape_of(t: ir.TypeDesc) -> str:
    if t.kind == "mapping":
        return "address-keyed" if t.key is not None and (t.key.is_address or t.key.kind == "contract") else "id-keyed"
    if t.kind == "array":
        return "id-keyed"
    return "none"


class Scope:
    """Name and type context for one function (or a contract-level expression)."""

    def __init__(self, contract: ir.ContractIR, fn: ir.FunctionIR | None = None, stmts: list[ir.Stmt] | None = None):
        self.contract = contract
        self.fn = fn
        self.fn_name = (fn.name or fn.kind) if fn else ""
        self.state_types = {v.name: v.type_desc for v in contract.state_vars}
        self.local_types: dict[str, ir.TypeDesc] = {}
        self.local_defs: dict[str, list[ir.Expr | None]] = {}
        self.aliases: dict[str, Access | None] = {}
        self.diagnostics: list[str] = []
        if fn is not None:
            for p in fn.params + fn.returns:
                self.local_types[p.name] = p.type_desc
        body = stmts if stmts is not None else (fn.body if fn else None)
        self._scan(body or [])

    def _scan(self, stmts: list[ir.Stmt]) -> None:
        flat = list(ir.iter_stmts(stmts))
        storage_locals = set()
        for s in flat:
            if isinstance(s, ir.Declare):
                for i, v in enumerate(s.vars):
                    if v is None or not v.name:
                        continue
                    self.local_types[v.name] = v.type_desc
                    value = s.value
                    if isinstance(value, ir.TupleExpr) and len(s.vars) > 1:
                        value = value.items[i] if i < len(value.items) else None
                    elif len(s.vars) > 1:
                        value = None
                    self.local_defs.setdefault(v.name, []).append(value)
                    if v.storage == "storage":
                        storage_locals.add(v.name)
            elif isinstance(s, ir.Assign) and isinstance(s.target, ir.Identifier) and s.target.kind in ("local", "param"):
                self.local_defs.setdefault(s.target.name, []).append(s.value if s.op == "=" else None)
        for s in flat:
            if isinstance(s, ir.Declare) and len(s.vars) == 1 and s.vars[0] is not None and s.vars[0].name in storage_locals:
                self._bind_alias(s.vars[0].name, s.value)
            elif (
                isinstance(s, ir.Assign)
                and s.op == "="
                and isinstance(s.target, ir.Identifier)
                and s.target.name in storage_locals
            ):
                self._bind_alias(s.target.name, s.value)

    def _bind_alias(self, name: str, value: ir.Expr | None) -> None:
        base = value
        while isinstance(base, (ir.IndexAccess, ir.MemberAccess)):
            base = base.base
        if isinstance(base, ir.Identifier) and base.name in self.aliases and base.name != name:
            self.diagnostics.append(
                f"{value.loc if value else ''}: storage pointer {name!r} aliases another pointer {base.name!r}; path unknown"
            )
            self.aliases[name] = None
            return
        acc = self.access(value) if value is not None else None
        if acc is None:
            if value is not None:
                self.diagnostics.append(f"{value.loc}: cannot trace storage pointer {name!r}; path unknown")
            self.aliases[name] = None
            return
        prev = self.aliases.get(name)
        if prev is not None and prev.path != acc.path:
            self.diagnostics.append(f"{value.loc}: storage pointer {name!r} rebound to a different path; path unknown")
            self.aliases[name] = None
            return
        self.aliases[name] = Access(acc.path, list(acc.keys), acc.type, via_alias=name)

    # -- storage paths --------------------------------------------------
    def access(self, e: ir.Expr | None) -> Access | None:
        if isinstance(e, ir.Identifier):
            if e.kind == "state":
                t = self.state_types.get(e.name, ir.UNKNOWN_TYPE)
                return Access(VariablePath(e.name), [], t)
            if e.kind == "local" and e.name in self.aliases:
                a = self.aliases[e.name]
                return Access(a.path, list(a.keys), a.type, via_alias=e.name) if a else None
            return None
        if isinstance(e, ir.IndexAccess):
            a = self.access(e.base)
            if a is None:
                return None
            path = a.path
            if not a.keys and path.member is None:
                path = VariablePath(path.base, None, key_shape_of(a.type))
            nt = a.type.value if a.type.kind in ("mapping", "array") and a.type.value else ir.UNKNOWN_TYPE
            return Access(path, a.keys + ([e.index] if e.index is not None else []), nt, a.via_alias)
        if isinstance(e, ir.MemberAccess):
            a = self.access(e.base)
            if a is None:
                return None
            t = a.type
            if t.kind == "struct" and t.member(e.member) is not None:
                if a.path.member is None:
                    path = VariablePath(a.path.base, e.member, a.path.key_shape)
                else:
                    path = a.path
                return Access(path, a.keys, t.member(e.member) or ir.UNKNOWN_TYPE, a.via_alias)
            return None
        return None

    def accesses(self, e: ir.Expr | None):
        """Yield ``(Access, expr)`` for each maximal storage access inside ``e``."""
        if e is None:
            return
        a = self.access(e)
        if a is not None:
            yield a, e
            for k in a.keys:
                yield from self.accesses(k)
            return
        for c in e.children():
            yield from self.accesses(c)

    def type_of(self, e: ir.Expr | None) -> ir.TypeDesc:
        e2 = e
        if isinstance(e2, ir.Call) and len(e2.args) == 1:
            c = e2.callee
            if isinstance(c, ir.TypeRef):
                return ir.TypeDesc("elementary", "address" if c.name == "payable" else c.name)
            if isinstance(c, ir.Identifier) and c.kind in ("contract", "unresolved") and c.name[:1].isupper():
                return ir.TypeDesc("contract", c.name)
        if isinstance(e2, ir.Identifier):
            if e2.kind in ("local", "param") and e2.name in self.local_types:
                return self.local_types[e2.name]
            if e2.kind == "state":
                return self.state_types.get(e2.name, ir.UNKNOWN_TYPE)
        if isinstance(e2, ir.SpecialRef):
            if e2.name in ("msg.sender", "tx.origin", "address(this)", "this"):
                return ir.TypeDesc("elementary", "address")
            return ir.TypeDesc("elementary", "uint256")
        a = self.access(e2)
        if a is not None:
            return a.type
        return ir.UNKNOWN_TYPE

    # -- addresses ------------------------------------------------------
    def is_sender_call(self, e: ir.Expr) -> bool:
        if not (isinstance(e, ir.Call) and not e.args and isinstance(e.callee, ir.Identifier)):
            return False
        name = e.callee.name
        for f in self.contract.functions_named(name):
            if f.body and len(f.body) == 1 and isinstance(f.body[0], ir.Return):
                v = f.body[0].value
                return isinstance(v, ir.SpecialRef) and v.name == "msg.sender" or (
                    isinstance(v, ir.Call) and self.is_sender_call(v) and v is not e
                )
        return name in SENDER_FUNCS

    def classify(self, e: ir.Expr | None, _depth: int = 0) -> AddrClass:
        e = strip_conversions(e)
        if e is None:
            return UNKNOWN
        if isinstance(e, ir.SpecialRef):
            if e.name == "msg.sender":
                return CALLER
            if e.name == "tx.origin":
                return AddrClass("origin")
            if e.name in ("this", "address(this)"):
                return THIS
            return UNKNOWN
        if isinstance(e, ir.Call) and self.is_sender_call(e):
            return CALLER
        if isinstance(e, ir.Literal):
            return AddrClass("constant", e.value)
        if isinstance(e, ir.Identifier):
            if e.kind == "param":
                return AddrClass("param", e.name)
            if e.kind == "state":
                return AddrClass("state", e.name)
            if e.kind == "local":
                defs = self.local_defs.get(e.name, [])
                if len(defs) == 1 and defs[0] is not None and _depth < 2:
                    return self.classify(defs[0], _depth + 1)
                if self.fn is not None and any(p.name == e.name for p in self.fn.params):
                    return AddrClass("param", e.name)
            return UNKNOWN
        a = self.access(e)
        if a is not None:
            return AddrClass("state", str(a.path))
        return UNKNOWN

    def key_class(self, acc: Access) -> AddrClass | None:
        """Class of the account key on a keyed access (the address-typed key when there is one)."""
        if not acc.keys:
            return None
        classes = [self.classify(k) for k in acc.keys]
        if any(c == CALLER for c in classes):
            return CALLER
        for k, c in zip(acc.keys, classes):
            if self.type_of(k).is_address:
                return c
        for c in classes:
            if c.kind != "unknown":
                return c
        return classes[0]

"""Inheritance flattening (C3 order) and identifier resolution."""

from __future__ import annotations

import copy

from ..errors import CyclicInheritance
from . import ir

BUILTINS = {
    "require", "assert", "revert", "keccak256", "sha256", "ripemd160", "ecrecover",
    "addmod", "mulmod", "abi", "type", "super", "gasleft", "blockhash", "selfdestruct",
    "suicide", "msg", "block", "tx", "now", "this", "bytes", "string", "address",
}


def _check_cycles(by_name: dict[str, ir.ContractIR]) -> None:
    state: dict[str, int] = {}

    def visit(name: str, stack: list[str]) -> None:
        if state.get(name) == 2:
            return
        if state.get(name) == 1:
            raise CyclicInheritance(stack[stack.index(name):] + [name])
        state[name] = 1
        for b in by_name[name].bases:
            if b in by_name:
                visit(b, stack + [name])
        state[name] = 2

    for name in by_name:
        visit(name, [])


def linearize(name: str, by_name: dict[str, ir.ContractIR], _memo: dict | None = None) -> list[str]:
    """C3 linearization, most-derived first. ``is A, B`` treats B as more derived than A."""
    memo = {} if _memo is None else _memo
    if name in memo:
        return memo[name]
    bases = [b for b in by_name[name].bases if b in by_name]
    seqs = [list(linearize(b, by_name, memo)) for b in reversed(bases)]
    seqs.append(list(reversed(bases)))
    out = [name]
    while True:
        seqs = [s for s in seqs if s]
        if not seqs:
            break
        for s in seqs:
            head = s[0]
            if not any(head in t[1:] for t in seqs):
                break
        else:
            raise CyclicInheritance([name] + [s[0] for s in seqs])
        out.append(head)
        for s in seqs:
            if s[0] == head:
                del s[0]
    memo[name] = out
    return out


def _param_sig(f: ir.FunctionIR) -> tuple:
    return (f.name or f.kind, tuple(str(p.type_desc) for p in f.params))


def flatten_inheritance(unit: ir.SourceUnit) -> ir.SourceUnit:
    """Return a new unit whose contracts carry every inherited member.

    Functions of more-derived contracts override base functions with the same
    name and parameter types; overridden bodies are kept in ``shadowed`` so
    ``super`` calls can still be followed.
    """
    by_name = {c.name: c for c in unit.contracts}
    _check_cycles(by_name)
    memo: dict = {}
    flat: list[ir.ContractIR] = []
    for c in unit.contracts:
        order = linearize(c.name, by_name, memo)
        out = ir.ContractIR(
            name=c.name,
            kind=c.kind,
            bases=list(c.bases),
            abstract=c.abstract,
            loc=c.loc,
            linearization=order,
            flattened=True,
        )
        missing = sorted({b for n in order for b in by_name[n].bases if b not in by_name})
        for b in missing:
            out.notes.append(f"unresolved-base: {b}")
        seen_vars: set[str] = set()
        for n in reversed(order):
            for v in by_name[n].state_vars:
                if v.name not in seen_vars:
                    seen_vars.add(v.name)
                    out.state_vars.append(copy.deepcopy(v))
        seen_fn: dict[tuple, ir.FunctionIR] = {}
        for n in order:
            src = by_name[n]
            for f in src.functions:
                key = _param_sig(f)
                if f.kind == "constructor":
                    if n != c.name:
                        continue
                have = seen_fn.get(key)
                if have is None:
                    fc = copy.deepcopy(f)
                    seen_fn[key] = fc
                    out.functions.append(fc)
                elif have.body is None and f.body is not None:
                    # an interface/abstract declaration lost to a base implementation
                    fc = copy.deepcopy(f)
                    idx = out.functions.index(have)
                    out.functions[idx] = fc
                    seen_fn[key] = fc
                else:
                    if f.body is not None:
                        out.shadowed.append(copy.deepcopy(f))
            for m in src.modifiers:
                if out.modifier(m.name) is None:
                    out.modifiers.append(copy.deepcopy(m))
            for k, t in src.structs.items():
                out.structs.setdefault(k, t)
            for k, vals in src.enums.items():
                out.enums.setdefault(k, list(vals))
            for e in src.events:
                if e not in out.events:
                    out.events.append(e)
            for e in src.errors:
                if e not in out.errors:
                    out.errors.append(e)
        resolve_identifiers(out, set(by_name))
        flat.append(out)
    return ir.SourceUnit(
        path=unit.path,
        contracts=flat,
        pragma=unit.pragma,
        source_hash=unit.source_hash,
        files=list(unit.files),
        sources=unit.sources,
        notes=list(unit.notes),
    )


def _declared_locals(body: list[ir.Stmt] | None) -> set[str]:
    names = set()
    for s in ir.iter_stmts(body):
        if isinstance(s, ir.Declare):
            names.update(v.name for v in s.vars if v is not None and v.name)
    return names


def resolve_identifiers(c: ir.ContractIR, contract_names: set[str]) -> None:
    state = {v.name: v.contract or c.name for v in c.state_vars}
    fnames = c.function_names() | {f.name for f in c.shadowed}
    mods = {m.name for m in c.modifiers}
    structs = set(c.structs)
    enums = set(c.enums)
    events = set(c.events)
    errors = set(c.errors)

    def kind_of(name: str, params: set[str], locals_: set[str]) -> str:
        if name in locals_:
            return "local"
        if name in params:
            return "param"
        if name in state:
            return "state"
        if name in fnames:
            return "function"
        if name in mods:
            return "modifier"
        if name in contract_names:
            return "contract"
        if name in structs:
            return "struct"
        if name in enums:
            return "enum"
        if name in events:
            return "event"
        if name in errors:
            return "error"
        if name in BUILTINS:
            return "builtin"
        return "unresolved"

    def fix_expr(e: ir.Expr | None, owner: str, params: set[str], locals_: set[str]) -> None:
        for x in ir.walk_expr(e):
            if isinstance(x, ir.Identifier):
                x.kind = kind_of(x.name, params, locals_)
                if x.kind in ("local", "param"):
                    x.owner = owner
                elif x.kind == "state":
                    x.owner = state[x.name]

    def fix_body(body, owner: str, params: set[str], extra_exprs=()) -> None:
        locals_ = _declared_locals(body) - set()
        for s in ir.iter_stmts(body):
            for e in s.exprs():
                fix_expr(e, owner, params, locals_)
        for e in extra_exprs:
            fix_expr(e, owner, params, locals_)

    for f in list(c.functions) + list(c.shadowed):
        params = {p.name for p in f.params} | {p.name for p in f.returns if p.name}
        fix_body(f.body, f.name or f.kind, params, [a for m in f.modifiers_applied for a in m.args])
    for m in c.modifiers:
        fix_body(m.body, m.name, {p.name for p in m.params})
    for v in c.state_vars:
        fix_expr(v.value, "", set(), set())

"""Move roles onto externally reachable entry points and re-anchor transfer lines."""

from __future__ import annotations

from ..graphs import CallGraph
from ..ingest import ir
from ..transfers import Transfer, effective_closure, find_transfers
from .info import FUNC_ROLES, FuncRole, StakingInfo

_DIRECTION = {"Stake": "in", "GetReward": "out", "UnStake": "out"}


def _wrappers(f: ir.FunctionIR, entries: list[ir.FunctionIR], cg: CallGraph) -> list[ir.FunctionIR]:
    return [g for g in entries if g is not f and f in effective_closure(g, cg)]


def refine_roles(info: StakingInfo, graphs: CallGraph, contract: ir.ContractIR) -> StakingInfo:
    transfers = find_transfers(contract, graphs)
    by_anchor: dict[str, list[Transfer]] = {}
    for t in transfers:
        by_anchor.setdefault(t.anchor.name, []).append(t)
    entries = [f for f in contract.functions if f in graphs.ext_reachable and (f.is_public or f.kind in ("fallback", "receive"))]
    out = StakingInfo(
        var_roles={r: list(v) for r, v in info.var_roles.items()},
        provenance=info.provenance,
        diagnostics=list(info.diagnostics),
        scores=dict(info.scores),
    )
    claimed: dict[str, str] = {}
    for role in FUNC_ROLES:
        for fr in info.func_roles[role]:
            fns = contract.functions_named(fr.function)
            if not fns:
                out.diagnostics.append(f"dropped {role} function {fr.function!r}: not declared")
                continue
            targets: list[ir.FunctionIR] = []
            for f in fns:
                if f in entries:
                    targets.append(f)
                else:
                    wr = _wrappers(f, entries, graphs)
                    if wr:
                        out.diagnostics.append(
                            f"{role} moved from internal {f.name!r} to " + ", ".join(repr(w.name) for w in wr)
                        )
                    targets.extend(wr)
            if not targets:
                out.diagnostics.append(f"dropped {role} function {fr.function!r}: not externally reachable")
                continue
            for g in targets:
                if claimed.get(g.name, role) != role:
                    out.diagnostics.append(f"{g.name!r} already carries {claimed[g.name]}; {role} not added")
                    continue
                ts = [t for t in by_anchor.get(g.name, []) if t.direction == _DIRECTION[role]]
                lines = _anchor_lines(fr, ts)
                if not lines:
                    out.diagnostics.append(f"{role} function {g.name!r}: no matching token transfer found")
                    lines = [0]
                for ln in lines:
                    item = FuncRole(g.name, ln)
                    if item not in out.func_roles[role]:
                        out.func_roles[role].append(item)
                claimed[g.name] = role
    return out


def _anchor_lines(fr: FuncRole, ts: list[Transfer]) -> list[int]:
    """Transfer lines for a role entry: the stated line if it moves tokens, else what that statement reaches."""
    if not ts:
        return []
    if fr.line:
        direct = sorted({t.stmt.loc.line for t in ts if t.stmt.loc.line == fr.line})
        if direct:
            return direct
        via = sorted({t.stmt.loc.line for t in ts if t.chain and t.chain[0].stmt.loc.line == fr.line})
        if via:
            return via
    return sorted({t.stmt.loc.line for t in ts})

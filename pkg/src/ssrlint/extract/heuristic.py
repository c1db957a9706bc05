"""Offline role extraction by scoring names against a lexicon and checking how each variable is used."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..graphs import CallGraph
from ..ingest import ir
from ..transfers import Transfer, effective_closure, find_transfers
from .info import FUNC_ROLES, VAR_ROLES, FuncRole, StakingInfo

# (positive pattern, negative pattern) per role, matched on the lowercased
# identifier with underscores removed. Kept in one table for auditability.
VAR_LEXICON = {
    "UserStakeAmount": (
        r"stak|deposit|balance|amount|shares|locked|principal",
        r"reward|time|date|block|rate|total|debt|paid|claimed|duration|period|index|last|start|end|fee|count|length|limit|max|min|token",
    ),
    "UserStakeReward": (
        r"reward|earn|pending|claimable|accru|bonus|dividend|interest|yield|profit",
        r"rate|pertoken|paid|debt|claimed|time|date|block|last|duration|period|token|total|index|multiplier",
    ),
    "UserStakeTime": (
        r"time|timestamp|date|since|start|duration|period|lastclaim|lastupdate|unlock|lockend|until|deadline",
        r"amount|rate|balance|reward(?!.*time)",
    ),
    "StakeTokenAddress": (r"(stak|lp|deposit|want|underlying).*token|lptoken|stakingtoken|staketoken", r"reward"),
    "RewardTokenAddress": (r"reward.*token|rewardtoken|token.*reward", r"^$"),
}

FUNC_LEXICON = {
    "Stake": (r"stake|deposit|lock|enter|join|bond|supply|farm", r"unstake|withdraw|unlock|exit|leave|unbond|claim|reward"),
    "GetReward": (r"claim|harvest|reward|collect|earn", r"unstake|withdraw|exit|leave|unbond"),
    "UnStake": (r"unstake|withdraw|exit|leave|unbond|unlock|redeem|emergency", r"^$"),
}

THRESHOLD = 2


def _norm(name: str) -> str:
    return name.lower().replace("_", "")


def name_matches(table: dict, role: str, name: str) -> bool:
    pos, neg = table[role]
    n = _norm(name)
    return bool(re.search(pos, n)) and not re.search(neg, n)


@dataclass
class _Candidate:
    name: str  # var or var.member
    base: str
    member: str | None
    leaf: ir.TypeDesc
    keyed: bool
    order: int


def _candidates(contract: ir.ContractIR) -> list[_Candidate]:
    out = []
    i = 0
    for v in contract.state_vars:
        if v.is_constant_or_immutable and not (v.type_desc.kind == "contract" or v.type_desc.is_address):
            continue
        t = v.type_desc
        leaf = t.leaf()
        keyed = t.kind in ("mapping", "array")
        if leaf.kind == "struct" and leaf.members:
            for m, mt in leaf.members:
                out.append(_Candidate(f"{v.name}.{m}", v.name, m, mt.leaf(), keyed, i))
                i += 1
        else:
            out.append(_Candidate(v.name, v.name, None, leaf, keyed, i))
            i += 1
    return out


class _Usage:
    """Usage facts computed once per contract."""

    def __init__(self, contract: ir.ContractIR, cg: CallGraph, transfers: list[Transfer]):
        self.contract = contract
        self.cg = cg
        self.transfers = transfers
        self.by_anchor: dict[ir.FunctionIR, list[Transfer]] = {}
        for t in transfers:
            self.by_anchor.setdefault(t.anchor, []).append(t)
        self.written_in: dict[ir.FunctionIR, set[str]] = {}
        self.touched_in: dict[ir.FunctionIR, set[str]] = {}
        for f in self.by_anchor:
            w: set[str] = set()
            r: set[str] = set()
            for g in effective_closure(f, cg):
                du = cg.defuse[g]
                for ws in du.write_sites:
                    w.add(ws.path.dotted)
                    w.add(ws.path.base)
                for rs in du.read_sites:
                    r.add(rs.path.dotted)
                    r.add(rs.path.base)
            self.written_in[f] = w
            self.touched_in[f] = w | r
        self.timestamp_assigned: set[str] = set()
        for f in contract.functions:
            if f not in cg.defuse:
                continue
            du = cg.defuse[f]
            for ws in du.write_sites:
                s = ws.stmt
                if isinstance(s, ir.Assign) and s.value is not None and _mentions_time(s.value, du.scope):
                    self.timestamp_assigned.add(ws.path.dotted)
        # storage moved by the contract's own token primitive (e.g. _transfer writing _balances)
        self.token_ledger: set[str] = set()
        for t in transfers:
            if t.token_key != "self":
                continue
            for g in contract.functions_named(t.callee_name):
                if g in cg.defuse:
                    self.token_ledger |= {ws.path.dotted for ws in cg.defuse[g].write_sites}
        self.in_tokens = {t.token_key for t in transfers if t.direction == "in"}
        self.out_tokens = {t.token_key for t in transfers if t.direction == "out"}

    def anchors(self, direction: str) -> list[ir.FunctionIR]:
        return [f for f, ts in self.by_anchor.items() if any(t.direction == direction for t in ts)]


def _mentions_time(e: ir.Expr, scope) -> bool:
    for x in ir.walk_expr(e):
        if isinstance(x, ir.SpecialRef) and x.name in ("block.timestamp", "block.number"):
            return True
        if isinstance(x, ir.Identifier) and x.kind == "local":
            for d in scope.local_defs.get(x.name, []):
                if d is not None and any(
                    isinstance(y, ir.SpecialRef) and y.name in ("block.timestamp", "block.number") for y in ir.walk_expr(d)
                ):
                    return True
    return False


def _score_var(role: str, c: _Candidate, u: _Usage) -> int:
    if not name_matches(VAR_LEXICON, role, c.member or c.name):
        return 0
    if c.name in u.token_ledger:
        return 0
    score = 1
    if role in ("UserStakeAmount", "UserStakeReward", "UserStakeTime"):
        if c.keyed and c.leaf.is_uint:
            score += 1
        else:
            return 0
        if role == "UserStakeAmount":
            if any(c.name in u.written_in[f] for f in u.anchors("in")):
                score += 1
        elif role == "UserStakeReward":
            if any(c.name in u.touched_in[f] for f in u.anchors("out")):
                score += 1
        elif c.name in u.timestamp_assigned:
            score += 1
    else:
        if not c.keyed and (c.leaf.kind == "contract" or c.leaf.is_address):
            score += 1
        else:
            return 0
        if role == "StakeTokenAddress" and c.name in u.in_tokens:
            score += 1
        if role == "RewardTokenAddress" and c.name in u.out_tokens:
            score += 1
    return score


def _score_fn(role: str, f: ir.FunctionIR, ts: list[Transfer], var_roles: dict[str, list[str]], u: _Usage) -> tuple[int, list[Transfer]]:
    want = "in" if role == "Stake" else "out"
    moving = [t for t in ts if t.direction == want]
    if not moving:
        return 0, []
    score = 1
    if name_matches(FUNC_LEXICON, role, f.name):
        score += 1
    written = u.written_in.get(f, set())
    touched = u.touched_in.get(f, set())
    if role == "Stake":
        if any(v in written for v in var_roles["UserStakeAmount"]):
            score += 1
        toks = var_roles["StakeTokenAddress"]
    elif role == "GetReward":
        keys = var_roles["UserStakeReward"] + var_roles["UserStakeTime"]
        if any(v in touched for v in keys) or any(t.token_key in var_roles["RewardTokenAddress"] for t in moving):
            score += 1
        toks = var_roles["RewardTokenAddress"]
    else:
        if any(v in written for v in var_roles["UserStakeAmount"]):
            score += 1
        toks = var_roles["StakeTokenAddress"]
    preferred = [t for t in moving if t.token_key in toks]
    return score, (preferred or moving)


def extract_heuristic(contract: ir.ContractIR, graphs: CallGraph) -> StakingInfo:
    transfers = find_transfers(contract, graphs)
    u = _Usage(contract, graphs, transfers)
    info = StakingInfo(provenance="heuristic")
    best: dict[str, tuple[str, int]] = {}
    for c in _candidates(contract):
        scored = [(r, _score_var(r, c, u)) for r in VAR_ROLES]
        scored = [(r, s) for r, s in scored if s >= THRESHOLD]
        if not scored:
            continue
        top = max(s for _, s in scored)
        role = next(r for r, s in scored if s == top)
        best[c.name] = (role, top)
        info.scores[c.name] = dict(scored)
    for r in VAR_ROLES:
        members = [(n, s) for n, (role, s) in best.items() if role == r]
        if not members:
            continue
        top = max(s for _, s in members)
        info.var_roles[r] = [n for n, s in members if s == top]

    for f in [f for f in contract.functions if f in u.by_anchor]:
        ts = u.by_anchor[f]
        scored = []
        for r in FUNC_ROLES:
            s, picked = _score_fn(r, f, ts, info.var_roles, u)
            if s >= THRESHOLD and (s > THRESHOLD or name_matches(FUNC_LEXICON, r, f.name)):
                scored.append((s, r, picked))
        if not scored:
            continue
        top = max(s for s, _, _ in scored)
        s, role, picked = next(x for x in scored if x[0] == top)
        info.scores[f.name] = {r: sc for sc, r, _ in scored}
        for t in picked:
            fr = FuncRole(f.name, t.stmt.loc.line)
            if fr not in info.func_roles[role]:
                info.func_roles[role].append(fr)
    if not any(info.func_roles.values()):
        # Without a single staking operation the variable roles describe a plain token ledger.
        return StakingInfo(provenance="heuristic", diagnostics=["no staking functions found"], scores=info.scores)
    return info

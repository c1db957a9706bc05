"""StakingInfo: role-tagged variable and function names produced by an extractor."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from ..ingest import ir

log = logging.getLogger(__name__)

VAR_ROLES = ("UserStakeAmount", "UserStakeReward", "UserStakeTime", "StakeTokenAddress", "RewardTokenAddress")
FUNC_ROLES = ("Stake", "GetReward", "UnStake")

# labels used in prompts and LLM answers
VAR_LABELS = {
    "UserStakeAmount": "User Stake Amount",
    "UserStakeReward": "User Stake Reward",
    "UserStakeTime": "User Stake Time",
    "StakeTokenAddress": "Stake Token Address",
    "RewardTokenAddress": "Reward Token Address",
}
FUNC_LABELS = {"Stake": "Stake", "GetReward": "getReward", "UnStake": "unStake"}


@dataclass(frozen=True, order=True)
class FuncRole:
    function: str
    line: int = 0  # line of the statement executing the transfer; 0 when unknown


@dataclass
class StakingInfo:
    var_roles: dict[str, list[str]] = field(default_factory=lambda: {r: [] for r in VAR_ROLES})
    func_roles: dict[str, list[FuncRole]] = field(default_factory=lambda: {r: [] for r in FUNC_ROLES})
    provenance: str = field(default="heuristic", compare=False)
    diagnostics: list[str] = field(default_factory=list, compare=False)
    scores: dict[str, dict[str, int]] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        for r in VAR_ROLES:
            self.var_roles.setdefault(r, [])
        for r in FUNC_ROLES:
            self.func_roles.setdefault(r, [])

    @property
    def empty(self) -> bool:
        return not any(self.var_roles.values()) and not any(self.func_roles.values())

    def role_of_function(self, name: str) -> str | None:
        for r in FUNC_ROLES:
            if any(fr.function == name for fr in self.func_roles[r]):
                return r
        return None

    def functions(self, role: str) -> list[str]:
        seen: list[str] = []
        for fr in self.func_roles[role]:
            if fr.function not in seen:
                seen.append(fr.function)
        return seen

    def to_json(self) -> dict:
        return {
            "provenance": self.provenance,
            "variables": {r: list(self.var_roles[r]) for r in VAR_ROLES},
            "functions": {r: [{"function": f.function, "line": f.line} for f in self.func_roles[r]] for r in FUNC_ROLES},
        }


def resolves(name: str, contract: ir.ContractIR) -> bool:
    """``var`` or ``mappingVar.structMember`` naming a state variable of the contract."""
    base, _, member = name.partition(".")
    v = contract.state_var(base)
    if v is None:
        return False
    if not member:
        return True
    leaf = v.type_desc.leaf()
    return leaf.kind == "struct" and leaf.member(member) is not None


def validate(info: StakingInfo, contract: ir.ContractIR) -> StakingInfo:
    """Drop names that do not exist in the contract, one diagnostic each."""
    out = StakingInfo(provenance=info.provenance, diagnostics=list(info.diagnostics), scores=dict(info.scores))
    fnames = contract.function_names()
    for r in VAR_ROLES:
        for n in info.var_roles.get(r, []):
            if resolves(n, contract):
                if n not in out.var_roles[r]:
                    out.var_roles[r].append(n)
            else:
                out.diagnostics.append(f"dropped {r} variable {n!r}: not declared in {contract.name}")
    for r in FUNC_ROLES:
        for fr in info.func_roles.get(r, []):
            if fr.function in fnames:
                if fr not in out.func_roles[r]:
                    out.func_roles[r].append(fr)
            else:
                out.diagnostics.append(f"dropped {r} function {fr.function!r}: not declared in {contract.name}")
    for d in out.diagnostics[len(info.diagnostics):]:
        log.info(d)
    return out

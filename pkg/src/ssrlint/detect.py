"""Defect rules over the staking model and fact base."""

from __future__ import annotations

from dataclasses import dataclass, field

from .facts import STATUS_MEMBER, FactBase, TransferFact, WriteFact, _covers, closure_chains, fn_label
from .graphs import CallGraph
from .ingest import ir
from .model import Cdg, CdgNode, StakingModel
from .paths import CALLER, THIS, VariablePath

DEFECTS = ("SVM", "RT", "SLR", "OSU", "UV", "UAA")
CONFIDENCE_ORDER = {"low": 0, "normal": 1, "high": 2}

DEFECT_NAMES = {
    "SVM": "Staking Logical Variables Manipulation",
    "RT": "Rewards without Timedelay",
    "SLR": "Single Liquidity Pool Reliance",
    "OSU": "Omission in Status Update",
    "UV": "Unsafe Verification",
    "UAA": "Unauthorized Staking Asset Access",
}

# rule id -> base confidence before evidence flags are applied
BASE_CONFIDENCE = {
    "R1": "high",
    "R2": "high",
    "R3": "normal",
    "R4": "normal",
    "R5": "high",
    "R5-time": "normal",
    "R6-A": "normal",
    "R6-B": "normal",
    "R6-C": "low",
    "R7": "high",
    "R8": "high",
}


@dataclass
class Finding:
    defect: str
    rule_id: str
    contract: str
    function: str
    variables: list[str]
    file: str
    line: int
    locations: list[str] = field(default_factory=list)
    evidence: list[str] = field(default_factory=list)
    confidence: str = "normal"
    message: str = ""
    binding: dict[str, str] = field(default_factory=dict)

    @property
    def sort_key(self) -> tuple:
        return (self.file, DEFECTS.index(self.defect), self.line, self.contract, self.function, self.rule_id,
                tuple(self.variables))

    def to_json(self) -> dict:
        return {
            "defect": self.defect,
            "rule_id": self.rule_id,
            "contract": self.contract,
            "function": self.function,
            "variables": list(self.variables),
            "file": self.file,
            "line": self.line,
            "locations": list(self.locations),
            "evidence": list(self.evidence),
            "confidence": self.confidence,
            "message": self.message,
            "binding": dict(sorted(self.binding.items())),
        }

    @classmethod
    def from_json(cls, d: dict) -> Finding:
        return cls(**{k: d[k] for k in (
            "defect", "rule_id", "contract", "function", "variables", "file", "line",
            "locations", "evidence", "confidence", "message", "binding")})


def _loc(contract: ir.ContractIR, line: int, file: str | None = None) -> str:
    return f"{file or contract.loc.file}:{line}"


class Detector:
    def __init__(self, contract: ir.ContractIR, model: StakingModel, facts: FactBase, cg: CallGraph):
        self.contract = contract
        self.model = model
        self.facts = facts
        self.cg = cg
        self.findings: dict[tuple, Finding] = {}
        self.role_fns = set(model.stake_funcs) | set(model.getreward_funcs) | set(model.unstake_funcs)
        # native deposits credit the caller's entry without any transfer call
        self.staking_ops = self.role_fns | {
            w.function for w in facts.writes if w.self_keyed and any(_covers(a, w.path) for a in model.amounts)
        }

    # bookkeeping ------------------------------------------------------------------
    def _flags(self, cdg: Cdg | None, paths: list[VariablePath] = ()) -> list[str]:
        flags = []
        if cdg is not None:
            if cdg.unanalyzed:
                flags.append("unanalyzed region on the transfer path")
            if cdg.low_level:
                flags.append("low-level call")
            if cdg.partial:
                flags.append("dependency graph truncated")
        for p in paths:
            if p in self.model.ambiguous:
                flags.append(f"ambiguous role path {p}")
        return flags

    def emit(self, key: tuple, defect: str, rule: str, fn: str, variables: list[str], line: int,
             evidence: list[str], binding: dict[str, str], message: str, flags: list[str], file: str | None = None) -> None:
        conf = "low" if flags else BASE_CONFIDENCE[rule]
        ev = evidence + [f"flag: {x}" for x in flags]
        if key in self.findings:
            f = self.findings[key]
            for e in ev:
                if e not in f.evidence:
                    f.evidence.append(e)
            loc = _loc(self.contract, line, file)
            if loc not in f.locations:
                f.locations.append(loc)
            if CONFIDENCE_ORDER[conf] < CONFIDENCE_ORDER[f.confidence]:
                f.confidence = conf
            return
        self.findings[key] = Finding(
            defect=defect,
            rule_id=rule,
            contract=self.contract.name,
            function=fn,
            variables=variables,
            file=file or self.contract.loc.file,
            line=line,
            locations=[_loc(self.contract, line, file)],
            evidence=ev,
            confidence=conf,
            message=message,
            binding=binding,
        )

    def _cdg_key(self, cdg: Cdg) -> str:
        for k, v in self.model.cdgs.items():
            if v is cdg:
                return k
        return "?"

    def _chain(self, cdg: Cdg, target: CdgNode) -> list[str]:
        return [f"{e.kind}: {e.src.label} -> {e.dst.label}" for e in cdg.path_to(target)]

    def _role_paths(self) -> list[VariablePath]:
        return sorted(self.model.rewards | self.model.amounts | self.model.stake_times, key=str)

    def _is_role_path(self, p: VariablePath) -> bool:
        return any(_covers(r, p) for r in self._role_paths())

    def _amount_cdgs(self) -> list[tuple[str, Cdg]]:
        """Reward CDGs first, then stake and unstake amounts."""
        order = {"GetReward": 0, "Stake": 1, "UnStake": 2}
        items = [(k, c) for k, c in sorted(self.model.cdgs.items()) if c.role in order]
        return sorted(items, key=lambda kc: (order[kc[1].role], kc[0]))

    def _transfer_file(self, cdg: Cdg) -> str | None:
        return cdg.transfer.stmt.loc.file if cdg.transfer else None

    # SVM ----------------------------------------------------------------------------
    def svm(self) -> None:
        fb = self.facts
        for key, cdg in self._amount_cdgs():
            for var in sorted(cdg.state_dep, key=str):
                if self._is_role_path(var) and var.key_shape != "none":
                    continue  # per-user stake entries belong to normal staking flows
                for w in fb.writes:
                    if w.path != var and not _covers(var, w.path):
                        continue
                    if w.self_keyed or w.function in self.staking_ops or fb.has_perm(w.function):
                        continue
                    if w.value_kind == "derived":
                        continue  # deterministic sync of contract state, not attacker-chosen
                    node = next(n for n in cdg.nodes if n.kind == "state" and n.path == var)
                    ev = [f"Reward-side amount {cdg.root.label} ({key})"] + self._chain(cdg, node)
                    ev += [f"ModifyVar({w.function}, {w.path}) at line {w.line}", f"no permissCheck in {w.function}"]
                    self.emit(
                        ("R1", w.function, var.dotted), "SVM", "R1", w.function, [var.dotted], w.line, ev,
                        {"re": key, "var": str(var), "func": w.function, "line": str(w.line)},
                        f"{var.dotted} feeds the {cdg.role} amount in {cdg.transfer.anchor.name if cdg.transfer else '?'} "
                        f"and can be changed by anyone through {w.function}",
                        self._flags(cdg, [var]),
                    )
                    break
        # native and token balance arm
        for key, cdg in self._amount_cdgs():
            if not cdg.depends_on_balance:
                continue
            bal_nodes = [n for n in cdg.nodes if n.kind == "balance"]
            for t in self.model.transfers:
                fn = fn_label(t.anchor)
                if fn in self.role_fns or fb.has_perm(fn) or t.direction != "out":
                    continue
                for b in bal_nodes:
                    native = b.name == "native"
                    if native and not t.native:
                        continue
                    if not native and (t.native or t.token_key != b.name):
                        continue
                    ev = [f"DependonBalance({cdg.root.label}) via {b.label}"] + self._chain(cdg, b)
                    ev.append(f"{'NaTokenTrans' if native else 'token balance drain'}({fn}) at line {t.site.line}")
                    ev.append(f"no permissCheck in {fn}")
                    self.emit(
                        ("R2", fn, b.label), "SVM", "R2", fn, [b.label], t.site.line, ev,
                        {"re": key, "balance": b.label, "func": fn, "line": str(t.site.line)},
                        f"the {cdg.role} amount depends on {b.label}, which anyone can drain through {fn}",
                        self._flags(cdg), t.site.file,
                    )

    # RT -----------------------------------------------------------------------------
    def rt(self) -> None:
        for key, cdg in self._amount_cdgs():
            if cdg.role != "GetReward" or cdg.time_dep or cdg.transfer is None:
                continue
            t = cdg.transfer
            fn = t.anchor.name
            ev = [f"reward amount {cdg.root.label} ({key})", "no time evidence in its dependency closure"]
            ev.append("closure: " + ", ".join(sorted(n.label for n in cdg.nodes)))
            self.emit(("R3", fn), "RT", "R3", fn, [cdg.root.label], t.site.line, ev,
                      {"re": key, "func": fn, "line": str(t.site.line)},
                      f"reward paid in {fn} does not depend on staking duration", self._flags(cdg), t.site.file)

    # SLR ----------------------------------------------------------------------------
    def slr(self) -> None:
        for key, cdg in sorted(self.model.cdgs.items()):
            is_reward = cdg.role == "GetReward"
            is_mint = cdg.transfer is not None and cdg.transfer.kind == "mint"
            if not (is_reward or is_mint) or cdg.transfer is None:
                continue
            pools = sorted({n.name for n in cdg.pool_sources})
            if len(pools) != 1:
                continue
            node = min((n for n in cdg.pool_sources), key=lambda n: n.id)
            sites = cdg.sites.get(node.id) or [cdg.transfer.stmt.loc]
            site = min(sites, key=lambda lc: lc.line)
            fn = cdg.transfer.anchor.name
            ev = [f"{'reward' if is_reward else 'minted'} amount {cdg.root.label} ({key})"] + self._chain(cdg, node)
            ev.append(f"lpPool({node.name}: {node.target or '?'}) is the only pool in the closure")
            self.emit(("R4", fn, pools[0]), "SLR", "R4", fn, [node.label], site.line, ev,
                      {"re": key, "pool": pools[0], "func": fn, "line": str(site.line)},
                      f"the amount paid in {fn} is priced from the single pool {pools[0]}", self._flags(cdg), site.file)

    # OSU ----------------------------------------------------------------------------
    def _first_transfer(self, role: str, fn: str) -> tuple[int, str | None, Cdg | None]:
        ts = self.model.role_functions(role).get(fn) or []
        if not ts:
            return 0, None, None
        t = min(ts, key=lambda t: t.site.line)
        cdg = next((c for c in self.model.cdgs.values() if c.transfer is t), None)
        return t.site.line, t.site.file, cdg

    def _time_feeds_reward(self) -> bool:
        for cdg in self.model.cdgs.values():
            if cdg.role == "GetReward" and any(_covers(p, q) for p in self.model.stake_times for q in cdg.state_dep):
                return True
        return False

    def osu(self) -> None:
        fb = self.facts
        amounts = sorted(self.model.amounts, key=str)
        times = sorted(self.model.stake_times, key=str)
        time_matters = self._time_feeds_reward()
        for role, needs in (("Stake", "amount"), ("UnStake", "amount"), ("GetReward", "status")):
            for fn in sorted(self.model.role_functions(role)):
                line, file, cdg = self._first_transfer(role, fn)
                if not line:
                    continue
                missing: list[str] = []
                rule = "R5"
                if needs == "amount":
                    flags_written = role == "UnStake" and any(
                        fb.modifies(fn, VariablePath(b, m)) for b, m in self._status_members()
                        if any(a.base == b for a in amounts)
                    )
                    if amounts and not flags_written and not any(fb.modifies(fn, p) for p in amounts):
                        missing.append("staked amount (" + ", ".join(p.dotted for p in amounts) + ")")
                    if role == "Stake" and time_matters and not missing and not any(fb.modifies(fn, p) for p in times):
                        missing.append("stake time (" + ", ".join(p.dotted for p in times) + ")")
                        rule = "R5-time"
                else:
                    status = self._claim_status_paths(fn)
                    if status and not any(fb.modifies(fn, p) for p in status):
                        missing.append("reward status (" + ", ".join(p.dotted for p in status) + ")")
                if not missing:
                    continue
                ev = [f"{role}({fn}) transfers tokens at line {line}"] + [f"no ModifyVar({fn}, {m})" for m in missing]
                self.emit(("R5", fn), "OSU", rule, fn, missing, line, ev,
                          {"func": fn, "role": role, "line": str(line), "missing": "; ".join(missing)},
                          f"{fn} moves tokens without updating the {missing[0].split(' (')[0]}",
                          self._flags(cdg), file)

    def _claim_status_paths(self, fn: str) -> list[VariablePath]:
        out: set[VariablePath] = set(self.model.rewards) | set(self.model.stake_times)
        for ts in self.model.getreward_funcs.get(fn, []):
            for cdg in self.model.cdgs.values():
                if cdg.transfer is ts:
                    for p in cdg.state_dep:
                        if p.key_shape != "none" and not any(_covers(a, p) for a in self.model.amounts):
                            out.add(p)
        return sorted(out, key=str)

    # UV -----------------------------------------------------------------------------
    def uv(self) -> None:
        fb = self.facts
        amounts = sorted(self.model.amounts, key=str)
        rewards = sorted(self.model.rewards, key=str)
        for fn in sorted(self.model.unstake_funcs):
            line, file, cdg = self._first_transfer("UnStake", fn)
            if not line or not amounts:
                continue
            if any(fb.verifies(fn, p) for p in amounts):
                continue
            if cdg is not None and self._amount_from_entry(cdg, amounts):
                continue  # amount read straight from the caller's own entry
            ev = [f"UnStake({fn}) transfers at line {line}", "no VerifyVar on " + ", ".join(p.dotted for p in amounts)]
            self.emit(("R6", fn, "A"), "UV", "R6-A", fn, [p.dotted for p in amounts], line, ev,
                      {"func": fn, "scenario": "A", "line": str(line)},
                      f"{fn} releases stake without checking the staked amount", self._flags(cdg), file)
        for fn in sorted(self.model.getreward_funcs):
            line, file, cdg = self._first_transfer("GetReward", fn)
            if not line:
                continue
            checked = any(fb.verifies(fn, p) for p in rewards)
            if cdg is not None and cdg.root.kind in ("local", "param") and cdg.root.fn == fn:
                checked = checked or cdg.root.name in fb.guard_locals.get(fn, set())
            if cdg is not None and cdg.root.kind == "state" and cdg.root.path is not None:
                checked = checked or fb.verifies(fn, cdg.root.path)
            checked = checked or self._one_shot_flag(fn)
            if not checked:
                ev = [f"GetReward({fn}) transfers at line {line}", "no guard verifies the reward amount or a reward entry"]
                self.emit(("R6", fn, "B"), "UV", "R6-B", fn, [cdg.root.label if cdg else "?"], line, ev,
                          {"func": fn, "scenario": "B", "line": str(line)},
                          f"{fn} pays rewards without verifying them", self._flags(cdg), file)
                continue
            for base, member in self._status_members():
                reads = self._indexes(fn, base)
                if not reads:
                    continue
                if fb.verifies(fn, VariablePath(base, member)):
                    continue
                ev = [f"GetReward({fn}) indexes {base} at line {reads[0]}",
                      f"status member {base}.{member} is never checked in {fn}'s guards"]
                self.emit(("R6", fn, "C"), "UV", "R6-C", fn, [f"{base}.{member}"], line, ev,
                          {"func": fn, "scenario": "C", "status": f"{base}.{member}", "line": str(line)},
                          f"{fn} does not check {base}.{member} before paying", self._flags(cdg), file)

    def _one_shot_flag(self, fn: str) -> bool:
        """The claim checks a per-user entry and then overwrites it, as with a claimed flag."""
        for f, p in self.facts.verify:
            if f == fn and p.key_shape != "none" and not self.model.Amount(p):
                if any(w.self_keyed for w in self.facts.modifies(fn, p)):
                    return True
        return False

    def _amount_from_entry(self, cdg: Cdg, amounts: list[VariablePath]) -> bool:
        direct = [cdg.root] + [e.dst for e in cdg.edges if e.src == cdg.root and e.kind == "Cal"]
        return any(n.path is not None and any(_covers(a, n.path) for a in amounts) for n in direct)

    def _status_members(self) -> list[tuple[str, str]]:
        out = []
        written = {(w.path.base, w.path.member) for w in self.facts.writes}
        for v in self.contract.state_vars:
            leaf = v.type_desc.leaf()
            if leaf.kind != "struct" or v.type_desc.kind not in ("mapping", "array"):
                continue
            for m, mt in leaf.members:
                if mt.is_bool and STATUS_MEMBER.search(m) and (v.name, m) in written:
                    out.append((v.name, m))
        return out

    def _indexes(self, fn: str, base: str) -> list[int]:
        f = next((g for g in self.contract.functions if g.name == fn), None)
        if f is None:
            return []
        lines = []
        for g, _chain in closure_chains(f, self.cg):
            for rs in self.cg.defuse[g].read_sites:
                if rs.path.base == base:
                    lines.append(rs.stmt.loc.line)
            for ws in self.cg.defuse[g].write_sites:
                if ws.path.base == base:
                    lines.append(ws.stmt.loc.line)
        return sorted(set(lines))

    # UAA ----------------------------------------------------------------------------
    def uaa(self) -> None:
        fb = self.facts
        r7_fns: set[str] = set()
        for t in fb.reward_trans:
            if t.frm in (CALLER, THIS) or t.frm.kind == "origin" or t.frm == t.to:
                continue
            if fb.has_perm(t.function, t.frm) or any(p.function == t.function and p.pattern in ("role", "modifier") or (p.function == t.function and p.who.kind == "state") for p in fb.perms):
                continue
            cdg = self._cdg_for_locator(t)
            ev = [f"RewardTrans({t.function}, from={t.frm}, to={t.to}) at line {t.line}",
                  f"no permissCheck({t.function}, {t.frm})"]
            writes = [w for w in fb.writes if w.function == t.function and self._is_uaa_path(w.path)
                      and not w.self_keyed and w.key_class == t.frm]
            ev += [f"ModifyVar({w.function}, {w.path}) keyed by {w.key_class} at line {w.line}" for w in writes]
            self.emit(("R7", t.function), "UAA", "R7", t.function, sorted({str(t.frm)}), t.line, ev,
                      {"func": t.function, "from": str(t.frm), "to": str(t.to), "line": str(t.line)},
                      f"{t.function} moves staked assets of {t.frm} without checking the caller", self._flags(cdg))
            r7_fns.add(t.function)
        for w in fb.writes:
            if w.function in r7_fns or w.self_keyed or not self._is_uaa_path(w.path):
                continue
            if fb.has_perm(w.function) or self._credit_by_depositor(w):
                continue
            ev = [f"ModifyVar({w.function}, {w.path}) keyed by {w.key_class} at line {w.line}", f"no permissCheck in {w.function}"]
            self.emit(("R8", w.function, w.path.dotted), "UAA", "R8", w.function, [w.path.dotted], w.line, ev,
                      {"func": w.function, "var": str(w.path), "line": str(w.line)},
                      f"{w.function} rewrites {w.path.dotted} of other accounts without authorization",
                      self._flags(None, [w.path]))

    def _is_uaa_path(self, p: VariablePath) -> bool:
        return any(_covers(r, p) for r in self.model.rewards | self.model.amounts) and p.key_shape != "none"

    def _credit_by_depositor(self, w: WriteFact) -> bool:
        """Crediting someone else's entry while pulling tokens from the caller is a deposit on their behalf."""
        if w.op not in ("+=", "++", "credit", "="):
            return False
        ins = [t for t in self.model.transfers if t.anchor.name == w.function and t.direction == "in" and t.from_class == CALLER]
        return bool(ins) and w.op != "="

    def _cdg_for_locator(self, t: TransferFact) -> Cdg | None:
        for c in self.model.cdgs.values():
            if c.transfer is not None and c.transfer.locator == t.locator:
                return c
        return None

    def run(self, rules: set[str] | None = None) -> list[Finding]:
        rules = set(rules or DEFECTS)
        for name in DEFECTS:
            if name in rules:
                getattr(self, name.lower())()
        return sorted(self.findings.values(), key=lambda f: f.sort_key)


def run_rules(contract: ir.ContractIR, model: StakingModel, facts: FactBase, cg: CallGraph,
              rules: set[str] | None = None) -> list[Finding]:
    if model.info.empty:
        return []
    return Detector(contract, model, facts, cg).run(rules)


def replay(f: Finding, model: StakingModel, facts: FactBase) -> bool:
    """Re-check a finding's bound conjuncts against the inputs it was derived from."""
    b = f.binding
    if f.rule_id == "R1":
        cdg = model.cdgs.get(b["re"])
        if cdg is None:
            return False
        var = next((p for p in cdg.state_dep if str(p) == b["var"]), None)
        return (
            var is not None
            and any(str(w.path) == b["var"] and w.function == b["func"] and not w.self_keyed for w in facts.writes)
            and not facts.has_perm(b["func"])
        )
    if f.rule_id == "R2":
        cdg = model.cdgs.get(b["re"])
        return cdg is not None and cdg.depends_on_balance and not facts.has_perm(b["func"])
    if f.rule_id == "R3":
        cdg = model.cdgs.get(b["re"])
        return cdg is not None and not cdg.time_dep
    if f.rule_id == "R4":
        cdg = model.cdgs.get(b["re"])
        return cdg is not None and len({n.name for n in cdg.pool_sources}) == 1
    if f.rule_id.startswith("R5"):
        fn = b["func"]
        paths = model.amounts if b["role"] != "GetReward" else model.rewards | model.stake_times
        return fn in model.role_functions(b["role"]) and not any(
            facts.modifies(fn, p) for p in paths if p.dotted in b["missing"]
        )
    if f.rule_id.startswith("R6"):
        fn = b["func"]
        if b["scenario"] == "A":
            return not any(facts.verifies(fn, p) for p in model.amounts)
        if b["scenario"] == "B":
            return not any(facts.verifies(fn, p) for p in model.rewards)
        base, member = b["status"].split(".")
        return not facts.verifies(fn, VariablePath(base, member))
    if f.rule_id == "R7":
        return any(t.function == b["func"] and str(t.frm) == b["from"] for t in facts.reward_trans) and not any(
            p.function == b["func"] and str(p.who) == b["from"] for p in facts.perms
        )
    if f.rule_id == "R8":
        return any(
            w.function == b["func"] and str(w.path) == b["var"] and not w.self_keyed for w in facts.writes
        ) and not facts.has_perm(b["func"])
    return False

"""End-to-end analysis of source units and contracts."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .detect import DEFECTS, Finding, run_rules
from .errors import MalformedResponse, ServiceUnavailable, SsrlintError
from .extract import LlmConfig, StakingInfo, extract_heuristic, extract_llm, refine_roles
from .facts import FactBase, build_facts, make_pool_check
from .graphs import CallGraph, build_callgraph, cfg_to_dot
from .ingest import ir, load_path
from .model import StakingModel, build_model

log = logging.getLogger(__name__)

SOURCE_SUFFIXES = (".sol", ".json")
NON_AST_JSON = {"labels.json", "gold.json", "fixes.json"}


@dataclass
class RunConfig:
    inputs: list[str] = field(default_factory=list)
    format: str = "text"
    extractor: str = "heuristic"
    rules: set[str] = field(default_factory=lambda: set(DEFECTS))
    jobs: int = 0
    fail_on: str = "any"
    dump_graphs: str | None = None
    dump_cdg: str | None = None
    dump_facts: bool = False
    llm: LlmConfig | None = None
    strict_llm: bool = False


@dataclass
class ContractResult:
    file: str
    contract: str
    status: str  # analyzed | non-staking | errored
    findings: list[Finding] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    error: str | None = None
    info: StakingInfo | None = None
    model: StakingModel | None = None
    facts: FactBase | None = None

    @property
    def sort_key(self) -> tuple:
        return (self.file, self.contract)


@dataclass
class Report:
    results: list[ContractResult] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def findings(self) -> list[Finding]:
        return [f for r in self.results for f in r.findings]

    @property
    def errored(self) -> bool:
        return any(r.status == "errored" for r in self.results)


def expand_inputs(paths: list[str]) -> tuple[list[str], list[str]]:
    """Files to analyze and diagnostics for paths that cannot be read."""
    files: list[str] = []
    problems: list[str] = []
    for p in paths:
        path = Path(p)
        if path.is_dir():
            for q in sorted(path.rglob("*")):
                if q.is_file() and q.suffix in SOURCE_SUFFIXES and q.name not in NON_AST_JSON and _looks_analyzable(q):
                    files.append(str(q))
        elif path.is_file() and os.access(path, os.R_OK):
            files.append(str(path))
        else:
            problems.append(f"{p}: cannot read input")
    return files, problems


def _looks_analyzable(q: Path) -> bool:
    if q.suffix != ".json":
        return True
    try:
        data = json.loads(q.read_text(encoding="utf-8"))
    except (OSError, ValueError):
        return False
    if isinstance(data, list):
        return bool(data) and isinstance(data[0], dict) and "nodeType" in data[0]
    return isinstance(data, dict) and ("nodeType" in data or "sources" in data or "ast" in data)


def concrete_contracts(unit: ir.SourceUnit) -> list[ir.ContractIR]:
    """Deployable contracts that no other contract in the unit inherits from."""
    bases = {b for c in unit.contracts for b in c.linearization[1:]}
    return [c for c in unit.contracts if c.kind == "contract" and not c.abstract and c.name not in bases]


def extract_info(unit: ir.SourceUnit, contract: ir.ContractIR, cg: CallGraph, cfg: RunConfig,
                 warnings: list[str]) -> StakingInfo:
    if cfg.extractor == "llm":
        llm_cfg = cfg.llm or LlmConfig.from_env()
        try:
            info = extract_llm(unit, contract, llm_cfg)
            return refine_roles(info, cg, contract)
        except (ServiceUnavailable, MalformedResponse) as e:
            if cfg.strict_llm:
                raise
            warnings.append(f"{unit.path}:{contract.name}: LLM extraction failed ({e}); using the heuristic extractor")
    return refine_roles(extract_heuristic(contract, cg), cg, contract)


def analyze_contract(unit: ir.SourceUnit, contract: ir.ContractIR, cg: CallGraph, cfg: RunConfig,
                     warnings: list[str]) -> ContractResult:
    res = ContractResult(file=unit.path, contract=contract.name, status="analyzed")
    info = extract_info(unit, contract, cg, cfg, warnings)
    res.info = info
    if info.empty:
        res.status = "non-staking"
        res.notes.append("non-staking: no staking roles found")
        return res
    model = build_model(contract, info, cg, make_pool_check(contract, cg, unit))
    facts = build_facts(contract, model, cg, unit)
    res.model, res.facts = model, facts
    res.findings = run_rules(contract, model, facts, cg, cfg.rules)
    res.notes.extend(facts.advisories)
    if cfg.dump_cdg:
        _dump_cdgs(cfg.dump_cdg, unit, contract, model)
    if cfg.dump_graphs:
        _dump_graphs(cfg.dump_graphs, unit, contract, cg)
    return res


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_.@" else "_" for ch in name)


def _dump_cdgs(root: str, unit: ir.SourceUnit, contract: ir.ContractIR, model: StakingModel) -> None:
    d = Path(root)
    d.mkdir(parents=True, exist_ok=True)
    stem = _safe(Path(unit.path).stem)
    for key, cdg in sorted(model.cdgs.items()):
        (d / f"{stem}.{contract.name}.{_safe(key)}.dot").write_text(cdg.to_dot(), encoding="utf-8")


def _dump_graphs(root: str, unit: ir.SourceUnit, contract: ir.ContractIR, cg: CallGraph) -> None:
    d = Path(root)
    d.mkdir(parents=True, exist_ok=True)
    stem = _safe(Path(unit.path).stem)
    for f in contract.functions:
        if f in cg.cfgs:
            (d / f"{stem}.{contract.name}.{_safe(f.name or f.kind)}.cfg.dot").write_text(cfg_to_dot(cg.cfgs[f]), encoding="utf-8")
    lines = [f'digraph "calls {contract.name}" {{']
    for e in cg.edges:
        if cg.contract_of.get(e.caller) is contract:
            tgt = e.callee.name if e.callee else e.callee_name
            lines.append(f'  "{e.caller.name or e.caller.kind}" -> "{tgt}" [label="{e.kind}"];')
    lines.append("}")
    (d / f"{stem}.{contract.name}.callgraph.dot").write_text("\n".join(lines) + "\n", encoding="utf-8")


def analyze_file(path: str, cfg: RunConfig) -> tuple[list[ContractResult], list[str]]:
    warnings: list[str] = []
    try:
        unit = load_path(path)
        cg = build_callgraph(unit)
    except (SsrlintError, OSError, ValueError, RecursionError) as e:
        return [ContractResult(file=path, contract="", status="errored", error=f"{type(e).__name__}: {e}")], warnings
    unit.path = path
    out = []
    for c in concrete_contracts(unit):
        try:
            r = analyze_contract(unit, c, cg, cfg, warnings)
        except (SsrlintError, RecursionError, ValueError, KeyError) as e:
            log.debug("analysis of %s:%s failed", path, c.name, exc_info=True)
            r = ContractResult(file=path, contract=c.name, status="errored", error=f"{type(e).__name__}: {e}")
        r.file = path
        for f in r.findings:
            f.file = path if f.file == c.loc.file or not f.file else f.file
        out.append(r)
    return out, warnings


def analyze(cfg: RunConfig) -> Report:
    files, problems = expand_inputs(cfg.inputs)
    report = Report()
    for p in problems:
        report.results.append(ContractResult(file=p.split(":")[0], contract="", status="errored", error=p))
    jobs = cfg.jobs or os.cpu_count() or 1
    if jobs > 1 and len(files) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(lambda f: analyze_file(f, cfg), files))
    else:
        outcomes = [analyze_file(f, cfg) for f in files]
    for results, warnings in outcomes:
        report.results.extend(results)
        report.warnings.extend(warnings)
    report.results.sort(key=lambda r: r.sort_key)
    return report


def exit_code(report: Report, fail_on: str = "any") -> int:
    if report.errored:
        return 2
    if fail_on == "none":
        return 0
    if fail_on == "high":
        return 1 if any(f.confidence == "high" for f in report.findings) else 0
    return 1 if report.findings else 0

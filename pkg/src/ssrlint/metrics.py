"""Detection metrics over a labeled corpus and staking-model accuracy against hand-written gold models."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .detect import DEFECTS
from .errors import LabelMismatch, SchemaError
from .extract import FUNC_ROLES, VAR_ROLES
from .pipeline import ContractResult, Report

LABELS_SCHEMA_VERSION = 1
GOLD_SCHEMA_VERSION = 1


# --- labels ------------------------------------------------------------------------

@dataclass
class LabelEntry:
    file: str
    contract: str
    defects: list[str]
    lines: dict[str, list[int]] = field(default_factory=dict)


@dataclass
class CorpusLabels:
    entries: list[LabelEntry]
    root: Path = Path(".")
    schema_version: int = LABELS_SCHEMA_VERSION

    def path_of(self, entry: LabelEntry) -> Path:
        return self.root / entry.file


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise SchemaError(msg)


def parse_labels(doc: object, root: Path = Path(".")) -> CorpusLabels:
    _require(isinstance(doc, dict), "labels document must be a JSON object")
    _require(doc.get("schema_version") == LABELS_SCHEMA_VERSION,
             f"labels schema_version must be {LABELS_SCHEMA_VERSION}, got {doc.get('schema_version')!r}")
    entries = doc.get("entries")
    _require(isinstance(entries, list), "labels document needs an 'entries' list")
    out = []
    for i, e in enumerate(entries):
        _require(isinstance(e, dict), f"entry {i} must be an object")
        _require(isinstance(e.get("file"), str) and e["file"], f"entry {i}: 'file' must be a non-empty string")
        _require(isinstance(e.get("contract"), str) and e["contract"], f"entry {i}: 'contract' must be a non-empty string")
        defects = e.get("defects", [])
        _require(isinstance(defects, list) and all(d in DEFECTS for d in defects),
                 f"entry {i}: defects must be drawn from {', '.join(DEFECTS)}")
        lines = e.get("lines", {})
        _require(isinstance(lines, dict) and all(k in defects and isinstance(v, list) for k, v in lines.items()),
                 f"entry {i}: 'lines' must map labeled defects to line lists")
        out.append(LabelEntry(e["file"], e["contract"], list(defects), {k: list(v) for k, v in lines.items()}))
    labels = CorpusLabels(out, root)
    for e in labels.entries:
        if not labels.path_of(e).is_file():
            raise LabelMismatch(f"labeled file {e.file!r} does not exist under {root}")
    return labels


def load_labels(path: str | Path) -> CorpusLabels:
    p = Path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except ValueError as e:
        raise SchemaError(f"{p}: not valid JSON ({e})") from None
    return parse_labels(doc, p.parent)


# --- metrics -----------------------------------------------------------------------

@dataclass
class TypeMetrics:
    defect: str
    tp: int = 0
    fp: int = 0
    fn: int = 0
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    undefined: list[str] = field(default_factory=list)

    @property
    def incs(self) -> int:
        """Labeled instances of this type, TP plus FN."""
        return self.tp + self.fn

    @property
    def detected(self) -> int:
        """Reported instances of this type, TP plus FP; the weight of this row in the overall means."""
        return self.tp + self.fp

    def to_json(self) -> dict:
        return {"type": self.defect, "incs": self.incs, "detected": self.detected, "tp": self.tp, "fp": self.fp, "fn": self.fn,
                "precision": self.precision, "recall": self.recall, "f1": self.f1, "undefined": list(self.undefined)}


@dataclass
class MetricsReport:
    rows: list[TypeMetrics]
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    undefined: list[str] = field(default_factory=list)
    model_accuracy: dict | None = None
    unlabeled: list[str] = field(default_factory=list)

    def row(self, defect: str) -> TypeMetrics:
        return next(r for r in self.rows if r.defect == defect)

    def to_json(self) -> dict:
        out = {
            "schema_version": 1,
            "types": [r.to_json() for r in self.rows],
            "overall": {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                        "weighting": "detected (TP+FP)", "undefined": list(self.undefined)},
        }
        if self.unlabeled:
            out["unlabeled"] = list(self.unlabeled)
        if self.model_accuracy is not None:
            out["model_accuracy"] = self.model_accuracy
        return out

    def to_text(self) -> str:
        def pct(v: float | None) -> str:
            return "n/a" if v is None else f"{v * 100:.2f}"

        lines = [f"{'Type':<6}{'Incs':>6}{'TP':>5}{'FP':>5}{'FN':>5}{'Precision':>11}{'Recall':>9}{'F1':>9}"]
        for r in self.rows:
            lines.append(f"{r.defect:<6}{r.incs:>6}{r.tp:>5}{r.fp:>5}{r.fn:>5}{pct(r.precision):>11}{pct(r.recall):>9}{pct(r.f1):>9}")
        tp = sum(r.tp for r in self.rows)
        fp = sum(r.fp for r in self.rows)
        fn = sum(r.fn for r in self.rows)
        lines.append(f"{'Total':<6}{tp + fn:>6}{tp:>5}{fp:>5}{fn:>5}{pct(self.precision):>11}{pct(self.recall):>9}{pct(self.f1):>9}")
        for u in self.undefined:
            lines.append(f"note: {u}")
        return "\n".join(lines) + "\n"


def type_metrics(defect: str, tp: int, fp: int, fn: int) -> TypeMetrics:
    m = TypeMetrics(defect, tp, fp, fn)
    if tp + fp:
        m.precision = tp / (tp + fp)
    else:
        m.undefined.append("precision: nothing detected")
    if tp + fn:
        m.recall = tp / (tp + fn)
    else:
        m.undefined.append("recall: nothing labeled")
    if m.precision is not None and m.recall is not None:
        m.f1 = 0.0 if m.precision + m.recall == 0 else 2 * m.precision * m.recall / (m.precision + m.recall)
    else:
        m.undefined.append("f1: precision or recall undefined")
    return m


def _weighted(rows: list[TypeMetrics], attr: str) -> float | None:
    pairs = [(r.detected, getattr(r, attr)) for r in rows if r.detected and getattr(r, attr) is not None]
    total = sum(w for w, _ in pairs)
    if not total:
        return None
    return sum(w * v for w, v in pairs) / total


def compute_metrics(counts: dict[str, tuple[int, int, int]]) -> MetricsReport:
    """Per-type rows from (TP, FP, FN) counts and their overall mean weighted by TP+FP."""
    rows = [type_metrics(d, *counts.get(d, (0, 0, 0))) for d in DEFECTS]
    rep = MetricsReport(rows)
    for attr in ("precision", "recall", "f1"):
        v = _weighted(rows, attr)
        setattr(rep, attr, v)
        if v is None:
            rep.undefined.append(f"overall {attr}: no detected instance with a defined {attr}")
    return rep


def _norm(path: str | Path) -> str:
    return str(Path(path).resolve())


def score_corpus(labels: CorpusLabels, report: Report) -> MetricsReport:
    """Compare per-contract detected defect types with the labels."""
    by_key: dict[tuple[str, str], ContractResult] = {(_norm(r.file), r.contract): r for r in report.results}
    counts = {d: [0, 0, 0] for d in DEFECTS}
    labeled = set()
    for e in labels.entries:
        key = (_norm(labels.path_of(e)), e.contract)
        labeled.add(key)
        r = by_key.get(key)
        if r is None:
            raise LabelMismatch(f"label references {e.file}:{e.contract}, which was not analyzed")
        if r.status == "errored":
            raise LabelMismatch(f"labeled contract {e.file}:{e.contract} failed to analyze: {r.error}")
        found = {f.defect for f in r.findings}
        for d in DEFECTS:
            if d in e.defects and d in found:
                counts[d][0] += 1
            elif d in found:
                counts[d][1] += 1
            elif d in e.defects:
                counts[d][2] += 1
    rep = compute_metrics({d: tuple(v) for d, v in counts.items()})
    rep.unlabeled = sorted(f"{r.file}:{r.contract}" for (k, r) in by_key.items() if k not in labeled and r.contract)
    return rep


# --- model accuracy ------------------------------------------------------------------

@dataclass
class ModelDesc:
    variables: dict[str, set[str]]
    functions: dict[str, set[str]]
    state_dep: dict[str, set[str]]


def _strs(v: object, where: str) -> set[str]:
    _require(isinstance(v, list) and all(isinstance(x, str) for x in v), f"{where} must be a list of strings")
    return set(v)


def parse_gold(doc: object) -> dict[tuple[str, str], ModelDesc]:
    _require(isinstance(doc, dict), "gold document must be a JSON object")
    _require(doc.get("schema_version") == GOLD_SCHEMA_VERSION,
             f"gold schema_version must be {GOLD_SCHEMA_VERSION}, got {doc.get('schema_version')!r}")
    items = doc.get("contracts")
    _require(isinstance(items, list), "gold document needs a 'contracts' list")
    out = {}
    for i, c in enumerate(items):
        _require(isinstance(c, dict) and isinstance(c.get("file"), str) and isinstance(c.get("contract"), str),
                 f"gold entry {i} needs 'file' and 'contract'")
        where = f"gold {c['file']}:{c['contract']}"
        vs, fs, deps = c.get("variables"), c.get("functions"), c.get("state_dep")
        _require(isinstance(vs, dict) and set(vs) <= set(VAR_ROLES), f"{where}: 'variables' keys must be among {VAR_ROLES}")
        _require(isinstance(fs, dict) and set(fs) <= set(FUNC_ROLES), f"{where}: 'functions' keys must be among {FUNC_ROLES}")
        _require(isinstance(deps, dict), f"{where}: 'state_dep' must map function names to lists")
        out[(c["file"], c["contract"])] = ModelDesc(
            {r: _strs(vs.get(r, []), f"{where} variables.{r}") for r in VAR_ROLES},
            {r: _strs(fs.get(r, []), f"{where} functions.{r}") for r in FUNC_ROLES},
            {k: _strs(v, f"{where} state_dep.{k}") for k, v in deps.items()},
        )
    return out


def load_gold(path: str | Path) -> tuple[dict[tuple[str, str], ModelDesc], Path]:
    p = Path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except ValueError as e:
        raise SchemaError(f"{p}: not valid JSON ({e})") from None
    return parse_gold(doc), p.parent


def describe(result: ContractResult) -> ModelDesc:
    """The produced staking model in the gold document's vocabulary."""
    info, model = result.info, result.model
    variables = {r: set(info.var_roles.get(r, [])) if info else set() for r in VAR_ROLES}
    functions = {r: {fr.function for fr in info.func_roles.get(r, [])} if info else set() for r in FUNC_ROLES}
    deps: dict[str, set[str]] = {}
    if model is not None:
        for cdg in model.cdgs.values():
            if cdg.role is None or cdg.transfer is None:
                continue
            deps.setdefault(cdg.transfer.anchor.name, set()).update(p.dotted for p in cdg.state_dep)
    return ModelDesc(variables, functions, deps)


def set_prf(gold: set[str], produced: set[str]) -> tuple[float, float, float]:
    """Set precision, recall, F1; an empty side counts as vacuously correct."""
    tp = len(gold & produced)
    p = tp / len(produced) if produced else 1.0
    r = tp / len(gold) if gold else 1.0
    f = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return p, r, f


def _mean(xs: list[tuple[float, float, float]]) -> tuple[float, float, float] | None:
    if not xs:
        return None
    n = len(xs)
    return tuple(sum(x[i] for x in xs) / n for i in range(3))


def _component(per_type: dict[str, list[tuple[float, float, float]]]) -> dict:
    rows = {t: _mean(v) for t, v in per_type.items()}
    defined = [v for v in rows.values() if v is not None]
    avg = _mean(defined)
    return {
        "precision": avg[0] if avg else None,
        "recall": avg[1] if avg else None,
        "f1": avg[2] if avg else None,
        "per_type": {t: (None if v is None else {"precision": v[0], "recall": v[1], "f1": v[2]}) for t, v in rows.items()},
    }


def score_model_accuracy(gold: dict[tuple[str, str], ModelDesc], produced: dict[tuple[str, str], ModelDesc]) -> dict:
    """Mean of the per-component accuracies, each component averaged over its role types."""
    var_rows: dict[str, list] = {r: [] for r in VAR_ROLES}
    fn_rows: dict[str, list] = {r: [] for r in FUNC_ROLES}
    cal_rows: dict[str, list] = {r: [] for r in FUNC_ROLES}
    for key, g in sorted(gold.items()):
        if key not in produced:
            raise LabelMismatch(f"gold model for {key[0]}:{key[1]} has no produced counterpart")
        p = produced[key]
        for r in VAR_ROLES:
            var_rows[r].append(set_prf(g.variables[r], p.variables[r]))
        for r in FUNC_ROLES:
            fn_rows[r].append(set_prf(g.functions[r], p.functions[r]))
            for fn in sorted(g.functions[r]):
                cal_rows[r].append(set_prf(g.state_dep.get(fn, set()), p.state_dep.get(fn, set())))
    comps = {"variables": _component(var_rows), "functions": _component(fn_rows), "calculations": _component(cal_rows)}
    total = {}
    for m in ("precision", "recall", "f1"):
        vals = [c[m] for c in comps.values() if c[m] is not None]
        total[m] = sum(vals) / 3 if len(vals) == 3 else None
    comps["total"] = total
    return comps


def produced_models(report: Report, root: Path, keys: list[tuple[str, str]]) -> dict[tuple[str, str], ModelDesc]:
    by_key = {(_norm(r.file), r.contract): r for r in report.results}
    out = {}
    for file, contract in keys:
        r = by_key.get((_norm(root / file), contract))
        if r is not None and r.status != "errored":
            out[(file, contract)] = describe(r)
    return out


def accuracy_to_text(acc: dict) -> str:
    def pct(v: float | None) -> str:
        return "n/a" if v is None else f"{v * 100:.2f}"

    lines = [f"{'':<14}{'Precision':>11}{'Recall':>9}{'F1':>9}"]
    for name in ("variables", "functions", "calculations", "total"):
        c = acc[name]
        lines.append(f"{name.capitalize():<14}{pct(c['precision']):>11}{pct(c['recall']):>9}{pct(c['f1']):>9}")
    return "\n".join(lines) + "\n"

"""Report rendering in every output format, plus parsers for the JSON and SARIF forms."""

from __future__ import annotations

import json
from pathlib import Path

from . import __version__
from .detect import DEFECT_NAMES, DEFECTS, Finding
from .pipeline import Report

SCHEMA_VERSION = 1
FORMATS = ("text", "json", "sarif")
SARIF_VERSION = "2.1.0"
SARIF_SCHEMA = "https://json.schemastore.org/sarif-2.1.0.json"
SARIF_LEVEL = {"high": "error", "normal": "warning", "low": "note"}

_RULE_HELP = {
    "SVM": "A state variable that feeds a staking amount can be set by any caller.",
    "RT": "A reward amount does not depend on how long the tokens were staked.",
    "SLR": "A paid or minted amount is priced from a single liquidity pool.",
    "OSU": "A staking operation moves tokens without updating the staker's records.",
    "UV": "A staking operation moves tokens without checking the staker's records.",
    "UAA": "Staked assets or rewards of one account can be moved by another account.",
}


def rule_id(defect: str) -> str:
    return f"SSR-{defect}"


def render(report: Report, fmt: str) -> str:
    if fmt == "text":
        return render_text(report)
    if fmt == "json":
        return render_json(report)
    if fmt == "sarif":
        return render_sarif(report)
    raise ValueError(f"unknown format {fmt!r}")


# --- text --------------------------------------------------------------------------

def render_text(report: Report) -> str:
    lines: list[str] = []
    for r in report.results:
        head = f"{r.file}:{r.contract}" if r.contract else r.file
        if r.status == "errored":
            lines.append(f"{head}: error: {r.error}")
            continue
        if r.status == "non-staking":
            lines.append(f"{head}: not a staking contract")
            continue
        if not r.findings:
            lines.append(f"{head}: no findings")
        else:
            lines.append(f"{head}:")
        for f in r.findings:
            lines.append(f"  [{f.defect} {f.rule_id} {f.confidence}] {f.file}:{f.line} {f.function}: {f.message}")
            if f.evidence:
                lines.append("      " + " | ".join(f.evidence))
        for n in r.notes:
            if not n.startswith("non-staking"):
                lines.append(f"  note: {n}")
    total = len(report.findings)
    errored = sum(1 for r in report.results if r.status == "errored")
    lines.append(f"{total} finding(s) in {len(report.results)} contract(s), {errored} error(s)")
    return "\n".join(lines) + "\n"


# --- JSON --------------------------------------------------------------------------

def report_to_json(report: Report) -> dict:
    counts = {d: 0 for d in DEFECTS}
    for f in report.findings:
        counts[f.defect] += 1
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "ssrlint", "version": __version__},
        "results": [
            {
                "file": r.file,
                "contract": r.contract,
                "status": r.status,
                "error": r.error,
                "notes": list(r.notes),
                "findings": [f.to_json() for f in r.findings],
            }
            for r in report.results
        ],
        "summary": {"findings": len(report.findings), "by_defect": counts,
                    "errored": sum(1 for r in report.results if r.status == "errored")},
    }


def render_json(report: Report) -> str:
    return json.dumps(report_to_json(report), indent=2, ensure_ascii=False) + "\n"


def parse_json(text: str) -> list[Finding]:
    doc = json.loads(text)
    return [Finding.from_json(f) for r in doc["results"] for f in r["findings"]]


# --- SARIF -------------------------------------------------------------------------

def _rules() -> list[dict]:
    return [
        {
            "id": rule_id(d),
            "name": DEFECT_NAMES[d].replace(" ", ""),
            "shortDescription": {"text": DEFECT_NAMES[d]},
            "fullDescription": {"text": _RULE_HELP[d]},
            "defaultConfiguration": {"level": "warning"},
        }
        for d in DEFECTS
    ]


def _uri(path: str) -> str:
    return Path(path).as_posix()


def _region(loc: str) -> tuple[str, int]:
    file, _, line = loc.rpartition(":")
    return file, int(line) if line.isdigit() else 0


def _sarif_result(f: Finding) -> dict:
    related = []
    for i, loc in enumerate(f.locations):
        file, line = _region(loc)
        if (file, line) == (f.file, f.line) or not line:
            continue
        related.append({
            "id": i,
            "physicalLocation": {"artifactLocation": {"uri": _uri(file)}, "region": {"startLine": line}},
        })
    res = {
        "ruleId": rule_id(f.defect),
        "ruleIndex": DEFECTS.index(f.defect),
        "level": SARIF_LEVEL[f.confidence],
        "message": {"text": f.message},
        "locations": [{
            "physicalLocation": {
                "artifactLocation": {"uri": _uri(f.file)},
                "region": {"startLine": max(f.line, 1)},
            },
            "logicalLocations": [{"name": f.function, "fullyQualifiedName": f"{f.contract}.{f.function}", "kind": "function"}],
        }],
        "properties": {
            "defect": f.defect,
            "rule_id": f.rule_id,
            "contract": f.contract,
            "function": f.function,
            "variables": list(f.variables),
            "file": f.file,
            "line": f.line,
            "locations": list(f.locations),
            "evidence": list(f.evidence),
            "confidence": f.confidence,
            "binding": dict(sorted(f.binding.items())),
        },
    }
    if related:
        res["relatedLocations"] = related
    return res


def report_to_sarif(report: Report) -> dict:
    notifications = [
        {"level": "error", "message": {"text": f"{r.file}:{r.contract}: {r.error}" if r.contract else f"{r.file}: {r.error}"}}
        for r in report.results if r.status == "errored"
    ]
    return {
        "$schema": SARIF_SCHEMA,
        "version": SARIF_VERSION,
        "runs": [{
            "tool": {"driver": {"name": "ssrlint", "version": __version__, "rules": _rules()}},
            "invocations": [{"executionSuccessful": not notifications, "toolExecutionNotifications": notifications}],
            "results": [_sarif_result(f) for f in report.findings],
        }],
    }


def render_sarif(report: Report) -> str:
    return json.dumps(report_to_sarif(report), indent=2, ensure_ascii=False) + "\n"


def parse_sarif(text: str) -> list[Finding]:
    doc = json.loads(text)
    out = []
    for run in doc["runs"]:
        for res in run["results"]:
            p = res["properties"]
            out.append(Finding(
                defect=p["defect"], rule_id=p["rule_id"], contract=p["contract"], function=p["function"],
                variables=list(p["variables"]), file=p["file"], line=p["line"], locations=list(p["locations"]),
                evidence=list(p["evidence"]), confidence=p["confidence"], message=res["message"]["text"],
                binding=dict(p["binding"]),
            ))
    return out

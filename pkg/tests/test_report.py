from __future__ import annotations

import json

from conftest import CORPUS
from hypothesis import given, settings
from hypothesis import strategies as st

from ssrlint.detect import DEFECTS, Finding
from ssrlint.pipeline import ContractResult, Report, RunConfig, analyze
from ssrlint.report import parse_json, parse_sarif, render, render_json, render_sarif, report_to_sarif


def corpus_report():
    return analyze(RunConfig(inputs=[str(CORPUS)]))


def test_json_round_trip_on_corpus():
    report = corpus_report()
    assert report.findings
    assert parse_json(render_json(report)) == report.findings


def test_sarif_round_trip_on_corpus():
    report = corpus_report()
    assert parse_sarif(render_sarif(report)) == report.findings


def test_sarif_shape_for_svm():
    report = analyze(RunConfig(inputs=[str(CORPUS / "fig2_svm.sol")]))
    doc = json.loads(render_sarif(report))
    assert doc["version"] == "2.1.0"
    run = doc["runs"][0]
    assert [r["id"] for r in run["tool"]["driver"]["rules"]] == [f"SSR-{d}" for d in DEFECTS]
    (res,) = run["results"]
    assert res["ruleId"] == "SSR-SVM"
    assert res["locations"][0]["physicalLocation"]["region"]["startLine"] == report.findings[0].line


def test_empty_report_sarif():
    doc = report_to_sarif(Report())
    run = doc["runs"][0]
    assert run["results"] == []
    assert run["tool"]["driver"]["name"] == "ssrlint"
    assert len(run["tool"]["driver"]["rules"]) == len(DEFECTS)


def test_errored_contract_becomes_notification():
    rep = Report([ContractResult(file="x.sol", contract="", status="errored", error="boom")])
    inv = report_to_sarif(rep)["runs"][0]["invocations"][0]
    assert not inv["executionSuccessful"]
    assert "boom" in inv["toolExecutionNotifications"][0]["message"]["text"]


def test_json_has_schema_version_and_summary():
    doc = json.loads(render(corpus_report(), "json"))
    assert doc["schema_version"] == 1
    assert sum(doc["summary"]["by_defect"].values()) == doc["summary"]["findings"]


def test_text_lists_each_finding():
    report = corpus_report()
    text = render(report, "text")
    for f in report.findings:
        assert f"{f.file}:{f.line}" in text
    assert text.rstrip().endswith("error(s)")


word = st.text(alphabet="abcdefghij_", min_size=1, max_size=8)
finding = st.builds(
    Finding,
    defect=st.sampled_from(DEFECTS),
    rule_id=st.sampled_from(["R1", "R2", "R3", "R4", "R5", "R6-A", "R7", "R8"]),
    contract=word,
    function=word,
    variables=st.lists(word, max_size=2),
    file=st.just("a.sol"),
    line=st.integers(1, 500),
    locations=st.lists(st.integers(1, 500).map(lambda n: f"a.sol:{n}"), max_size=3),
    evidence=st.lists(st.text(max_size=20), max_size=3),
    confidence=st.sampled_from(["high", "normal", "low"]),
    message=st.text(max_size=30),
    binding=st.dictionaries(word, word, max_size=3),
)


def _report(fs):
    fs = sorted(fs, key=lambda f: f.sort_key)
    return Report([ContractResult(file="a.sol", contract="C", status="analyzed", findings=fs)])


@settings(max_examples=60, deadline=None)
@given(st.lists(finding, max_size=5))
def test_round_trip_preserves_every_field(fs):
    rep = _report(fs)
    assert parse_json(render_json(rep)) == rep.findings
    assert parse_sarif(render_sarif(rep)) == rep.findings


@settings(max_examples=60, deadline=None)
@given(st.lists(finding, min_size=2, max_size=6))
def test_same_file_order_is_defect_then_line(fs):
    rep = _report(fs)
    got = [(DEFECTS.index(f.defect), f.line) for f in parse_json(render_json(rep))]
    assert got == sorted(got)

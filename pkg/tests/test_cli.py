from __future__ import annotations

import json
import subprocess
import sys

import pytest
from conftest import CORPUS, FIXTURES

from ssrlint.cli import main, parse_rules
from ssrlint.ingest import parse_solidity


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def fig2_json(tmp_path):
    path = tmp_path / "fig2.json"
    ast = parse_solidity((CORPUS / "fig2_svm.sol").read_text(), path="fig2_svm.sol")
    path.write_text(json.dumps(ast))
    return path


def test_empty_directory_exits_zero(tmp_path, capsys):
    code, out, _ = run(["analyze", str(tmp_path)], capsys)
    assert code == 0
    assert "0 finding(s)" in out


def test_missing_path_exits_two(tmp_path, capsys):
    code, _, err = run(["analyze", str(tmp_path / "absent.sol")], capsys)
    assert code == 2
    assert "absent.sol" in err


def test_garbage_input_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.sol"
    bad.write_text("pragma solidity ^0.8.0; contract {")
    code, _, err = run(["analyze", str(bad)], capsys)
    assert code == 2 and "error" in err


def test_fig2_ast_json_exits_one(fig2_json, capsys):
    code, out, _ = run(["analyze", "--format", "json", str(fig2_json)], capsys)
    assert code == 1
    doc = json.loads(out)
    assert [f["defect"] for r in doc["results"] for f in r["findings"]] == ["SVM"]


def test_clean_contract_exits_zero(capsys):
    code, _, _ = run(["analyze", str(CORPUS / "fig2_svm_fixed.sol")], capsys)
    assert code == 0


def test_fail_on_none_and_high(capsys):
    assert run(["analyze", "--fail-on", "none", str(CORPUS / "fig2_svm.sol")], capsys)[0] == 0
    assert run(["analyze", "--fail-on", "high", str(CORPUS / "fig2_svm.sol")], capsys)[0] == 1
    assert run(["analyze", "--fail-on", "high", str(CORPUS / "fig6_uv.sol")], capsys)[0] == 0


def test_rules_filter(capsys):
    code, out, _ = run(["analyze", "--rules", "RT,UAA", "--format", "json", str(CORPUS / "fig2_svm.sol")], capsys)
    assert code == 0
    assert json.loads(out)["summary"]["findings"] == 0


def test_unknown_rule_is_usage_error(capsys):
    with pytest.raises(SystemExit) as e:
        main(["analyze", "--rules", "XYZ", str(CORPUS)])
    assert e.value.code == 2
    with pytest.raises(Exception):
        parse_rules("SVM,NOPE")


def test_sarif_output(capsys):
    code, out, _ = run(["analyze", "--format", "sarif", str(CORPUS / "fig7_uaa.sol")], capsys)
    assert code == 1
    assert json.loads(out)["runs"][0]["results"][0]["ruleId"] == "SSR-UAA"


def test_dump_options(tmp_path, capsys):
    g, c = tmp_path / "graphs", tmp_path / "cdg"
    code, _, err = run(["analyze", "--dump-graphs", str(g), "--dump-cdg", str(c), "--dump-facts",
                        str(FIXTURES / "fig11_cdg.sol")], capsys)
    assert code == 1  # the walkthrough's reward has no time term
    assert list(g.rglob("*.dot")) and list(c.rglob("*.dot"))
    cdg_text = "".join(p.read_text() for p in c.rglob("*.dot"))
    assert "Cal" in cdg_text and "Con" in cdg_text
    facts = [json.loads(line) for line in err.splitlines() if line.startswith("{")]
    assert any(f["fact"] == "ModifyVar" for f in facts)


def test_corpus_command(capsys):
    code, out, _ = run(["corpus", "--labels", str(CORPUS / "labels.json"), "--format", "json"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert all(t["precision"] == 1.0 and t["recall"] == 1.0 for t in doc["types"])


def test_corpus_with_gold_text(capsys):
    code, out, _ = run(["corpus", "--labels", str(CORPUS / "labels.json"), "--gold", str(CORPUS / "gold.json")], capsys)
    assert code == 0
    assert "Precision" in out and "Calculations" in out


def test_score_model_command(capsys):
    code, out, _ = run(["score-model", "--gold", str(CORPUS / "gold.json"), "--format", "json"], capsys)
    assert code == 0
    assert set(json.loads(out)) == {"variables", "functions", "calculations", "total"}


def test_bad_labels_exit_two(tmp_path, capsys):
    labels = tmp_path / "labels.json"
    labels.write_text(json.dumps({"schema_version": 1, "entries": [{"file": "ghost.sol", "contract": "G", "defects": []}]}))
    code, _, err = run(["corpus", "--labels", str(labels)], capsys)
    assert code == 2 and "ghost.sol" in err


def test_module_entry_point_version():
    out = subprocess.run([sys.executable, "-m", "ssrlint", "--version"], capture_output=True, text=True, check=True)
    assert out.stdout.startswith("ssrlint ")

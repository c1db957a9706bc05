from __future__ import annotations

import json
from pathlib import Path

import pytest

from ssrlint.graphs import build_callgraph
from ssrlint.ingest import load_ast, load_path, parse_solidity

ROOT = Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"
FIXTURES = Path(__file__).resolve().parent / "fixtures"


def unit_from_source(text: str, name: str = "T.sol"):
    """Parse a Solidity snippet with the subset parser and load it like an input file."""
    from ssrlint.ingest import flatten_inheritance

    ast = parse_solidity(text, path=name)
    return flatten_inheritance(load_ast(json.dumps(ast), sources={name: text}, path=name))


def contract_of(unit, name: str | None = None):
    if name is None:
        return unit.contracts[-1]
    return next(c for c in unit.contracts if c.name == name)


def load_fixture(path: Path, contract: str | None = None):
    unit = load_path(path)
    cg = build_callgraph(unit)
    return unit, cg, contract_of(unit, contract)


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS

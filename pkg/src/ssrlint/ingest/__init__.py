"""Frontends: compact-AST JSON loader, Solidity subset parser, inheritance flattening."""

from __future__ import annotations

import json
import os
import shutil
import subprocess
from pathlib import Path

from ..errors import ParseError
from .inherit import flatten_inheritance
from .loader import load_ast
from .parser import parse_solidity

__all__ = ["load_ast", "flatten_inheritance", "parse_solidity", "load_path", "solidity_to_ast"]


def solidity_to_ast(path: Path) -> tuple[bytes, dict[str, str]]:
    """Compact-AST bytes for a ``.sol`` file, plus the source text keyed by its AST path.

    Uses the compiler named by ``SSRLINT_SOLC`` when set; otherwise the built-in
    subset parser.
    """
    text = path.read_text(encoding="utf-8")
    solc = os.environ.get("SSRLINT_SOLC")
    if solc:
        exe = shutil.which(solc) or solc
        proc = subprocess.run(
            [exe, "--ast-compact-json", path.name],
            cwd=str(path.parent),
            capture_output=True,
            text=True,
        )
        if proc.returncode != 0:
            raise ParseError(f"{path}: solc failed: {proc.stderr.strip()[:500]}")
        return proc.stdout.encode("utf-8"), {path.name: text}
    ast = parse_solidity(text, path=str(path))
    return json.dumps(ast).encode("utf-8"), {str(path): text}


def load_path(path: str | Path):
    """Load and flatten one ``.sol`` or ``.json`` input."""
    p = Path(path)
    if p.suffix == ".sol":
        data, sources = solidity_to_ast(p)
        unit = load_ast(data, sources=sources, base_dir=p.parent, path=str(p))
    else:
        unit = load_ast(p.read_bytes(), base_dir=p.parent, path=str(p))
    return flatten_inheritance(unit)

"""Normalize solc compact-AST JSON into :mod:`ssrlint.ingest.ir` objects."""

from __future__ import annotations

import bisect
import hashlib
import json
import re
from pathlib import Path
from typing import Any

from ..errors import ParseError, UnsupportedVersion
from . import ir
from .ir import Loc, TypeDesc

SUPPORTED = ((0, 6, 0), (0, 9, 0))  # half-open

_STATEMENT_NODES = {
    "ExpressionStatement",
    "VariableDeclarationStatement",
    "IfStatement",
    "ForStatement",
    "WhileStatement",
    "DoWhileStatement",
    "Return",
    "EmitStatement",
    "RevertStatement",
    "Break",
    "Continue",
    "PlaceholderStatement",
    "InlineAssembly",
    "TryStatement",
}
_OPAQUE_NODES = {"InlineAssembly": "assembly", "TryStatement": "try"}
_SPECIAL_BASES = {"msg", "block", "tx"}


def _version_tuple(s: str) -> tuple[int, int, int]:
    parts = [int(p) for p in s.split(".")] + [0, 0]
    return parts[0], parts[1], parts[2]


def version_range(constraint: str) -> tuple[tuple[int, int, int], tuple[int, int, int]]:
    """Half-open version interval admitted by a ``pragma solidity`` constraint."""
    lo, hi = (0, 0, 0), (99, 0, 0)
    for alt in constraint.split("||")[:1]:
        for op, ver in re.findall(r"(\^|~|>=|<=|>|<|=)?\s*(\d+(?:\.\d+){0,2})", alt):
            v = _version_tuple(ver)
            if op == "^":
                lo = max(lo, v)
                nxt = (v[0], v[1] + 1, 0) if v[0] == 0 else (v[0] + 1, 0, 0)
                hi = min(hi, nxt)
            elif op == "~":
                lo = max(lo, v)
                hi = min(hi, (v[0], v[1] + 1, 0))
            elif op == ">=":
                lo = max(lo, v)
            elif op == ">":
                lo = max(lo, (v[0], v[1], v[2] + 1))
            elif op == "<":
                hi = min(hi, v)
            elif op == "<=":
                hi = min(hi, (v[0], v[1], v[2] + 1))
            else:
                lo = max(lo, v)
                hi = min(hi, (v[0], v[1], v[2] + 1))
    return lo, hi


def check_pragma(constraint: str) -> None:
    lo, hi = version_range(constraint)
    if lo >= hi or hi <= SUPPORTED[0] or lo >= SUPPORTED[1]:
        raise UnsupportedVersion(constraint.strip())


def _split_cli_output(text: str) -> list[Any]:
    """``solc --ast-compact-json`` prints ``======= path =======`` headers between JSON bodies."""
    chunks = re.split(r"^=+ .* =+\s*$", text, flags=re.M)
    docs = []
    for c in chunks:
        c = c.strip()
        start = c.find("{")
        if start < 0:
            continue
        docs.append(json.loads(c[start:]))
    return docs


def _source_units(doc: Any) -> list[dict]:
    if isinstance(doc, list):
        out = []
        for d in doc:
            out.extend(_source_units(d))
        return out
    if not isinstance(doc, dict):
        raise ParseError("input JSON is not a compiler AST")
    if doc.get("nodeType") == "SourceUnit":
        return [doc]
    if doc.get("name") == "SourceUnit" and "children" in doc:
        raise UnsupportedVersion("legacy-ast", "legacy (pre-0.6 style) AST format is not supported")
    if "sources" in doc and isinstance(doc["sources"], dict):
        out = []
        for entry in doc["sources"].values():
            ast = entry.get("ast") or entry.get("AST") if isinstance(entry, dict) else None
            if ast is not None:
                out.extend(_source_units(ast))
        if out:
            return out
    if "ast" in doc:
        return _source_units(doc["ast"])
    raise ParseError("input JSON is not a compiler AST (no SourceUnit node)")


def load_ast(
    data: bytes | str,
    sources: dict[str, str] | None = None,
    base_dir: str | Path | None = None,
    path: str | None = None,
) -> ir.SourceUnit:
    """Load compact-AST JSON (one or more source units) into a :class:`SourceUnit`.

    ``sources`` maps absolute paths to source text and is used for line numbers;
    when absent the loader tries ``base_dir / absolutePath`` on disk.
    """
    raw = data.encode("utf-8") if isinstance(data, str) else bytes(data)
    digest = hashlib.sha256(raw).hexdigest()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ParseError(f"input is not UTF-8: {e}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        if "=======" in text:
            try:
                doc = _split_cli_output(text)
            except json.JSONDecodeError:
                raise ParseError(f"malformed JSON: {e}") from None
        else:
            raise ParseError(f"malformed JSON: {e}") from None
    units = _source_units(doc)
    if not units:
        raise ParseError("no source units in input")

    loader = _Loader(sources or {}, Path(base_dir) if base_dir else None)
    for u in units:
        loader.index_unit(u)
    contracts: list[ir.ContractIR] = []
    pragma = ""
    files = []
    for u in units:
        p = loader.pragma_of(u)
        if p:
            check_pragma(p)
            pragma = pragma or p
        files.append(u.get("absolutePath", ""))
        contracts.extend(loader.load_unit(u))
    return ir.SourceUnit(
        path=path or files[0] or "<input>",
        contracts=contracts,
        pragma=pragma,
        source_hash=digest,
        files=files,
        sources=dict(loader.texts),
        notes=loader.notes,
    )


def count_ast_statements(data: bytes | str | dict) -> int:
    """Statement nodes in function and modifier bodies, not counting contents of opaque regions."""
    doc = json.loads(data) if isinstance(data, (bytes, str)) else data
    total = 0

    def visit(n: Any, in_body: bool) -> None:
        nonlocal total
        if isinstance(n, list):
            for x in n:
                visit(x, in_body)
            return
        if not isinstance(n, dict):
            return
        kind = n.get("nodeType")
        if in_body and kind in _STATEMENT_NODES:
            total += 1
            if kind in _OPAQUE_NODES:
                return
        inner = in_body or kind in ("FunctionDefinition", "ModifierDefinition")
        for k, v in n.items():
            if k in ("parameters", "returnParameters", "modifiers"):
                continue
            if isinstance(v, (dict, list)):
                visit(v, inner)

    for u in _source_units(doc):
        visit(u, False)
    return total


class _Loader:
    def __init__(self, sources: dict[str, str], base_dir: Path | None):
        self.sources = sources
        self.base_dir = base_dir
        self.texts: dict[str, str] = {}
        self.notes: list[str] = []
        self._line_tables: dict[str, list[int]] = {}
        self._raw_structs: dict[str, dict] = {}
        self._struct_cache: dict[str, TypeDesc] = {}
        self._enums: set[str] = set()
        self._contract_names: set[str] = set()
        self._file = ""
        self._opaque_id = -1

    # -- indexing -------------------------------------------------------
    def index_unit(self, unit: dict) -> None:
        for n in unit.get("nodes", []):
            t = n.get("nodeType")
            if t == "StructDefinition":
                self._raw_structs[n["name"]] = n
            elif t == "EnumDefinition":
                self._enums.add(n["name"])
            elif t == "ContractDefinition":
                self._contract_names.add(n["name"])
                for m in n.get("nodes", []):
                    mt = m.get("nodeType")
                    if mt == "StructDefinition":
                        self._raw_structs.setdefault(m["name"], m)
                        self._raw_structs[f"{n['name']}.{m['name']}"] = m
                    elif mt == "EnumDefinition":
                        self._enums.add(m["name"])
                        self._enums.add(f"{n['name']}.{m['name']}")

    def pragma_of(self, unit: dict) -> str:
        for n in unit.get("nodes", []):
            if n.get("nodeType") == "PragmaDirective":
                lits = n.get("literals", [])
                if lits and lits[0] == "solidity":
                    joined = "".join(lits[1:])
                    return re.sub(r"(?<=[\d*x])(?=[<>=^~|])", " ", joined)
        return ""

    def _source_text(self, path: str) -> str | None:
        if path in self.sources:
            return self.sources[path]
        candidates = []
        if self.base_dir is not None:
            candidates.append(self.base_dir / path)
        candidates.append(Path(path))
        for c in candidates:
            try:
                if c.is_file():
                    return c.read_text(encoding="utf-8")
            except OSError:
                continue
        return None

    # -- locations ------------------------------------------------------
    def loc(self, node: dict | None) -> Loc:
        if not node or "src" not in node:
            return Loc(self._file, 0)
        try:
            start = int(str(node["src"]).split(":")[0])
        except ValueError:
            return Loc(self._file, 0)
        table = self._line_tables.get(self._file)
        if table is None:
            return Loc(self._file, 0, start)
        line = bisect.bisect_right(table, start)
        col = start - table[line - 1] if line > 0 else start
        return Loc(self._file, line, col)

    def _set_file(self, path: str) -> None:
        self._file = path
        if path in self._line_tables:
            return
        text = self._source_text(path)
        if text is None:
            self.notes.append(f"no source text for {path}; locations report byte offsets")
            return
        self.texts[path] = text
        data = text.encode("utf-8")
        table = [0]
        for i, b in enumerate(data):
            if b == 0x0A:
                table.append(i + 1)
        self._line_tables[path] = table

    # -- types ----------------------------------------------------------
    def type_desc(self, tn: dict | None, _seen: frozenset = frozenset()) -> TypeDesc:
        if not tn:
            return ir.UNKNOWN_TYPE
        kind = tn.get("nodeType")
        if kind == "ElementaryTypeName":
            name = tn.get("name", "")
            if name == "uint":
                name = "uint256"
            elif name == "int":
                name = "int256"
            elif name == "byte":
                name = "bytes1"
            elif name.startswith("address"):
                name = "address"
            return TypeDesc("elementary", name)
        if kind == "Mapping":
            return TypeDesc(
                "mapping",
                key=self.type_desc(tn.get("keyType"), _seen),
                value=self.type_desc(tn.get("valueType"), _seen),
            )
        if kind == "ArrayTypeName":
            return TypeDesc("array", value=self.type_desc(tn.get("baseType"), _seen))
        if kind == "UserDefinedTypeName":
            name = (tn.get("pathNode") or {}).get("name") or tn.get("name") or ""
            if not name:
                ts = (tn.get("typeDescriptions") or {}).get("typeString", "")
                name = ts.split()[-1] if ts else ""
            return self.user_type(name, _seen)
        if kind == "FunctionTypeName":
            return TypeDesc("function")
        return ir.UNKNOWN_TYPE

    def user_type(self, name: str, _seen: frozenset = frozenset()) -> TypeDesc:
        short = name.split(".")[-1]
        raw = self._raw_structs.get(name) or self._raw_structs.get(short)
        if raw is not None:
            if name in self._struct_cache:
                return self._struct_cache[name]
            if short in _seen:
                return TypeDesc("struct", short)
            members = tuple(
                (m.get("name", ""), self.type_desc(m.get("typeName"), _seen | {short})) for m in raw.get("members", [])
            )
            t = TypeDesc("struct", short, members=members)
            self._struct_cache[name] = t
            return t
        if name in self._enums or short in self._enums:
            return TypeDesc("enum", short)
        return TypeDesc("contract", short)

    # -- units ----------------------------------------------------------
    def load_unit(self, unit: dict) -> list[ir.ContractIR]:
        self._set_file(unit.get("absolutePath", "<input>"))
        out = []
        free_funcs = []
        for n in unit.get("nodes", []):
            t = n.get("nodeType")
            if t == "ContractDefinition":
                out.append(self.load_contract(n))
            elif t == "FunctionDefinition":
                free_funcs.append(n)
        if free_funcs:
            self.notes.append(f"{len(free_funcs)} free function(s) in {self._file} not analyzed")
        return out

    def load_contract(self, n: dict) -> ir.ContractIR:
        name = n["name"]
        c = ir.ContractIR(
            name=name,
            kind=n.get("contractKind", "contract"),
            abstract=bool(n.get("abstract", False)),
            loc=self.loc(n),
        )
        for b in n.get("baseContracts", []):
            bn = b.get("baseName") or {}
            c.bases.append((bn.get("name") or (bn.get("pathNode") or {}).get("name") or "").split(".")[-1])
        for m in n.get("nodes", []):
            t = m.get("nodeType")
            if t == "VariableDeclaration":
                c.state_vars.append(
                    ir.StateVarDecl(
                        name=m.get("name", ""),
                        type_desc=self.type_desc(m.get("typeName")),
                        visibility=m.get("visibility", "internal"),
                        is_constant_or_immutable=bool(m.get("constant"))
                        or m.get("mutability") in ("constant", "immutable"),
                        value=self.expr(m.get("value")),
                        loc=self.loc(m),
                        contract=name,
                    )
                )
            elif t == "FunctionDefinition":
                c.functions.append(self.load_function(m, name))
            elif t == "ModifierDefinition":
                c.modifiers.append(
                    ir.ModifierIR(
                        name=m.get("name", ""),
                        params=self.params(m.get("parameters")),
                        body=self.block(m.get("body")) if m.get("body") else None,
                        loc=self.loc(m),
                        contract=name,
                    )
                )
            elif t == "StructDefinition":
                c.structs[m["name"]] = self.user_type(f"{name}.{m['name']}")
            elif t == "EnumDefinition":
                c.enums[m["name"]] = [v.get("name", "") for v in m.get("members", [])]
            elif t == "EventDefinition":
                c.events.append(m.get("name", ""))
            elif t == "ErrorDefinition":
                c.errors.append(m.get("name", ""))
        return c

    def params(self, plist: dict | None) -> list[ir.LocalVar]:
        out = []
        for p in (plist or {}).get("parameters", []):
            out.append(
                ir.LocalVar(
                    name=p.get("name", ""),
                    type_desc=self.type_desc(p.get("typeName")),
                    storage=p.get("storageLocation", "default"),
                    loc=self.loc(p),
                )
            )
        return out

    def load_function(self, m: dict, contract: str) -> ir.FunctionIR:
        kind = m.get("kind", "function")
        if kind == "freeFunction":
            kind = "function"
        if m.get("isConstructor"):
            kind = "constructor"
        mods = []
        for inv in m.get("modifiers", []):
            mn = inv.get("modifierName") or {}
            mname = (mn.get("name") or "").split(".")[-1]
            if inv.get("kind") == "baseConstructorSpecifier" or mname in self._contract_names:
                continue
            mods.append(ir.ModifierCall(mname, [self.expr(a) for a in inv.get("arguments") or []], self.loc(inv)))
        body = m.get("body")
        return ir.FunctionIR(
            name=m.get("name", ""),
            kind=kind,
            params=self.params(m.get("parameters")),
            returns=self.params(m.get("returnParameters")),
            visibility=m.get("visibility", "public"),
            mutability=m.get("stateMutability", "nonpayable"),
            modifiers_applied=mods,
            body=self.block(body) if body else None,
            loc=self.loc(m),
            contract=contract,
        )

    # -- statements -----------------------------------------------------
    def block(self, n: dict | None) -> list[ir.Stmt]:
        if n is None:
            return []
        if n.get("nodeType") in ("Block", "UncheckedBlock"):
            out: list[ir.Stmt] = []
            for s in n.get("statements", []):
                out.extend(self.block(s) if s.get("nodeType") in ("Block", "UncheckedBlock") else [self.stmt(s)])
            return out
        return [self.stmt(n)]

    def stmt(self, n: dict) -> ir.Stmt:
        t = n.get("nodeType")
        sid = n.get("id")
        if sid is None:
            sid = self._opaque_id
            self._opaque_id -= 1
        loc = self.loc(n)
        if t == "ExpressionStatement":
            e = n.get("expression") or {}
            et = e.get("nodeType")
            if et == "Assignment":
                return ir.Assign(sid, loc, self.expr(e["leftHandSide"]), e.get("operator", "="), self.expr(e["rightHandSide"]))
            if et == "UnaryOperation" and e.get("operator") in ("++", "--", "delete"):
                return ir.Assign(sid, loc, self.expr(e["subExpression"]), e["operator"], None)
            if et == "FunctionCall":
                callee = e.get("expression") or {}
                if callee.get("nodeType") == "Identifier" and callee.get("name") in ("require", "assert"):
                    args = [self.expr(a) for a in e.get("arguments", [])]
                    if args:
                        return ir.Require(sid, loc, args[0], args[1] if len(args) > 1 else None, callee["name"])
                if callee.get("nodeType") == "Identifier" and callee.get("name") == "revert":
                    return ir.Revert(sid, loc, self.expr(e))
            return ir.ExprStmt(sid, loc, self.expr(e))
        if t == "VariableDeclarationStatement":
            decls: list[ir.LocalVar | None] = []
            for d in n.get("declarations", []):
                if d is None:
                    decls.append(None)
                else:
                    decls.append(
                        ir.LocalVar(d.get("name", ""), self.type_desc(d.get("typeName")), d.get("storageLocation", "default"), self.loc(d))
                    )
            return ir.Declare(sid, loc, decls, self.expr(n.get("initialValue")))
        if t == "IfStatement":
            return ir.If(
                sid,
                loc,
                self.expr(n["condition"]),
                self.block(n.get("trueBody")),
                self.block(n.get("falseBody")) if n.get("falseBody") else [],
            )
        if t in ("ForStatement", "WhileStatement", "DoWhileStatement"):
            kind = {"ForStatement": "for", "WhileStatement": "while", "DoWhileStatement": "do"}[t]
            init = n.get("initializationExpression")
            step = n.get("loopExpression")
            return ir.Loop(
                sid,
                loc,
                kind,
                self.expr(n.get("condition")) if n.get("condition") else None,
                self.block(n.get("body")),
                self.stmt(init) if init else None,
                self.stmt(step) if step else None,
            )
        if t == "Return":
            return ir.Return(sid, loc, self.expr(n.get("expression")) if n.get("expression") else None)
        if t == "EmitStatement":
            return ir.Emit(sid, loc, self.expr(n["eventCall"]))
        if t == "RevertStatement":
            return ir.Revert(sid, loc, self.expr(n.get("errorCall")))
        if t in ("Break", "Continue"):
            return ir.Jump(sid, loc, t.lower())
        if t == "PlaceholderStatement":
            return ir.Placeholder(sid, loc)
        if t in _OPAQUE_NODES:
            inner = self.expr(n.get("externalCall")) if t == "TryStatement" else None
            return ir.Opaque(sid, loc, _OPAQUE_NODES[t], inner)
        self.notes.append(f"{loc}: unsupported statement {t} kept as opaque")
        return ir.Opaque(sid, loc, t or "unknown")

    # -- expressions ----------------------------------------------------
    def expr(self, n: dict | None) -> ir.Expr | None:
        if n is None:
            return None
        t = n.get("nodeType")
        loc = self.loc(n)
        if t == "Identifier":
            name = n.get("name", "")
            if name == "now":
                return ir.SpecialRef(loc, "block.timestamp")
            if name == "this":
                return ir.SpecialRef(loc, "this")
            return ir.Identifier(loc, name)
        if t == "MemberAccess":
            base_raw = n.get("expression") or {}
            member = n.get("memberName", "")
            if base_raw.get("nodeType") == "Identifier" and base_raw.get("name") in _SPECIAL_BASES:
                return ir.SpecialRef(loc, f"{base_raw['name']}.{member}")
            base = self.expr(base_raw)
            if member == "balance" and _is_self(base):
                return ir.SpecialRef(loc, "this.balance")
            return ir.MemberAccess(loc, base, member)
        if t == "FunctionCall":
            callee_raw = n.get("expression") or {}
            options: dict[str, ir.Expr] = {}
            if callee_raw.get("nodeType") == "FunctionCallOptions":
                for k, v in zip(callee_raw.get("names", []), callee_raw.get("options", [])):
                    options[k] = self.expr(v)
                callee_raw = callee_raw.get("expression") or {}
            callee = self.expr(callee_raw)
            args = [self.expr(a) for a in n.get("arguments", [])]
            if isinstance(callee, ir.TypeRef) and callee.name == "address" and len(args) == 1:
                if isinstance(args[0], ir.SpecialRef) and args[0].name == "this":
                    return ir.SpecialRef(loc, "address(this)")
            return ir.Call(loc, callee, args, list(n.get("names") or []), options)
        if t == "FunctionCallOptions":
            # options applied without a call, e.g. `f{value: 1}` passed around
            return self.expr(n.get("expression"))
        if t == "IndexAccess":
            return ir.IndexAccess(loc, self.expr(n["baseExpression"]), self.expr(n.get("indexExpression")))
        if t == "IndexRangeAccess":
            return ir.IndexAccess(loc, self.expr(n["baseExpression"]), None)
        if t == "BinaryOperation":
            return ir.BinaryOp(loc, n.get("operator", ""), self.expr(n["leftExpression"]), self.expr(n["rightExpression"]))
        if t == "UnaryOperation":
            return ir.UnaryOp(loc, n.get("operator", ""), self.expr(n["subExpression"]), bool(n.get("prefix", True)))
        if t == "Assignment":
            return ir.AssignExpr(loc, self.expr(n["leftHandSide"]), n.get("operator", "="), self.expr(n["rightHandSide"]))
        if t == "Literal":
            value = n.get("value")
            if value is None:
                value = n.get("hexValue", "")
            if n.get("subdenomination"):
                value = f"{value} {n['subdenomination']}"
            return ir.Literal(loc, n.get("kind", ""), str(value))
        if t == "TupleExpression":
            comps = [self.expr(c) for c in n.get("components", [])]
            if len(comps) == 1 and comps[0] is not None and not n.get("isInlineArray"):
                return comps[0]
            return ir.TupleExpr(loc, comps)
        if t == "Conditional":
            return ir.Conditional(
                loc, self.expr(n["condition"]), self.expr(n["trueExpression"]), self.expr(n["falseExpression"])
            )
        if t == "ElementaryTypeNameExpression":
            tn = n.get("typeName")
            if isinstance(tn, dict):
                name = tn.get("name", "")
                if tn.get("stateMutability") == "payable":
                    name = "payable"
            else:
                name = str(tn or "")
            return ir.TypeRef(loc, name)
        if t == "NewExpression":
            return ir.NewExpr(loc, str(self.type_desc(n.get("typeName"))))
        self.notes.append(f"{loc}: unsupported expression {t}")
        return ir.Literal(loc, "unknown", t or "")


def _is_self(e: ir.Expr | None) -> bool:
    """``this``, ``address(this)``, or ``payable(address(this))``."""
    while isinstance(e, ir.Call) and isinstance(e.callee, ir.TypeRef) and len(e.args) == 1:
        e = e.args[0]
    return isinstance(e, ir.SpecialRef) and e.name in ("this", "address(this)")

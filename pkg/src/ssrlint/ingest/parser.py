"""Parse a practical subset of Solidity into solc compact-AST JSON.

Used when no compiler binary is configured. The emitted nodes follow the
``solc --ast-compact-json`` schema (``nodeType``, ``id``, ``src``) for the node
kinds the loader understands, so both frontends feed the same normalizer.
Semantic fields that need a type checker (``referencedDeclaration``,
``typeDescriptions``) are omitted; the loader resolves names itself.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any

from ..errors import ParseError

Node = dict[str, Any]

_PUNCT = sorted(
    """>>>= <<= >>= >>> ** == != <= >= && || ++ -- += -= *= /= %= |= &= ^= << >> => ->
    ( ) { } [ ] ; , . ? : = < > + - * / % ! ~ & | ^""".split(),
    key=len,
    reverse=True,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<hexstr>hex(?:"[0-9a-fA-F_]*"|'[0-9a-fA-F_]*'))
  | (?P<string>(?:unicode)?(?:"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*'))
  | (?P<number>0[xX][0-9a-fA-F_]+|(?:\d[\d_]*(?:\.\d[\d_]*)?|\.\d[\d_]*)(?:[eE]-?\d+)?)
  | (?P<ident>[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<punct>"""
    + "|".join(re.escape(p) for p in _PUNCT)
    + r")",
    re.VERBOSE | re.DOTALL,
)

_ELEMENTARY = re.compile(
    r"^(address|bool|string|bytes|byte|uint\d*|int\d*|bytes\d+|fixed\d*(x\d+)?|ufixed\d*(x\d+)?|var)$"
)
_SUBDENOMINATIONS = {
    "wei", "gwei", "szabo", "finney", "ether", "seconds", "minutes", "hours", "days", "weeks", "years",
}
_VISIBILITY = {"public", "private", "internal", "external"}
_MUTABILITY = {"pure", "view", "payable", "constant"}
_STORAGE = {"storage", "memory", "calldata"}
_ASSIGN_OPS = {"=", "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=", "<<=", ">>=", ">>>="}
_BINARY_LEVELS = [
    ("||",),
    ("&&",),
    ("|",),
    ("^",),
    ("&",),
    ("==", "!="),
    ("<", ">", "<=", ">="),
    ("<<", ">>", ">>>"),
    ("+", "-"),
    ("*", "/", "%"),
    ("**",),
]


@dataclass
class Token:
    kind: str
    text: str
    start: int
    end: int


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            line = text.count("\n", 0, pos) + 1
            raise ParseError(f"unexpected character {text[pos]!r} at line {line}")
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            out.append(Token(kind, m.group(), m.start(), m.end()))
        pos = m.end()
    out.append(Token("eof", "", n, n))
    return out


class _Backtrack(Exception):
    pass


class Parser:
    def __init__(self, text: str, path: str = "<input>", file_index: int = 0):
        self.text = text
        self.path = path
        self.file_index = file_index
        self.toks = tokenize(text)
        self.i = 0
        self._next_id = 1
        # solc src offsets are byte offsets
        if text.isascii():
            self._byte = None
        else:
            acc, table = 0, []
            for ch in text:
                table.append(acc)
                acc += len(ch.encode("utf-8"))
            table.append(acc)
            self._byte = table

    # -- token helpers --------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, *texts: str) -> bool:
        return self.tok.text in texts and self.tok.kind in ("punct", "ident")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        if self.tok.kind != "ident":
            self.fail(f"expected identifier, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t.text

    def fail(self, msg: str):
        line = self.text.count("\n", 0, self.tok.start) + 1
        raise ParseError(f"{self.path}:{line}: {msg}")

    def node(self, node_type: str, start: int, **fields: Any) -> Node:
        end = self.toks[self.i - 1].end if self.i > 0 else start
        b0 = start if self._byte is None else self._byte[start]
        b1 = end if self._byte is None else self._byte[end]
        nid = self._next_id
        self._next_id += 1
        n: Node = {"id": nid, "nodeType": node_type, "src": f"{b0}:{max(b1 - b0, 0)}:{self.file_index}"}
        n.update(fields)
        return n

    def skip_balanced(self, open_: str, close: str) -> None:
        depth = 0
        while True:
            if self.tok.kind == "eof":
                self.fail(f"unbalanced {open_!r}")
            if self.at(open_):
                depth += 1
            elif self.at(close):
                depth -= 1
                if depth == 0:
                    self.i += 1
                    return
            self.i += 1

    # -- source unit ----------------------------------------------------
    def parse_source_unit(self) -> Node:
        start = self.tok.start
        nodes: list[Node] = []
        while self.tok.kind != "eof":
            s = self.tok.start
            if self.at("pragma"):
                self.i += 1
                lits = []
                while not self.at(";"):
                    if self.tok.kind == "eof":
                        self.fail("unterminated pragma")
                    lits.append(self.tok.text)
                    self.i += 1
                self.expect(";")
                nodes.append(self.node("PragmaDirective", s, literals=lits))
            elif self.at("import"):
                self.i += 1
                path = ""
                while not self.at(";"):
                    if self.tok.kind == "string" and not path:
                        path = self.tok.text[1:-1]
                    self.i += 1
                self.expect(";")
                nodes.append(self.node("ImportDirective", s, file=path, absolutePath=path))
            elif self.at("contract", "interface", "library", "abstract"):
                nodes.append(self.parse_contract())
            elif self.at("struct"):
                nodes.append(self.parse_struct())
            elif self.at("enum"):
                nodes.append(self.parse_enum())
            elif self.at("error", "event") and self.peek().kind == "ident" and self.peek(2).text == "(":
                nodes.append(self.parse_event_or_error())
            elif self.at("function"):
                nodes.append(self.parse_function())
            elif self.at("using"):
                self._skip_to_semicolon()
            elif self.at("type") and self.peek().kind == "ident":
                self._skip_to_semicolon()
            else:
                nodes.append(self.parse_state_var())
        return self.node("SourceUnit", start, absolutePath=self.path, nodes=nodes)

    def _skip_to_semicolon(self) -> None:
        while not self.at(";"):
            if self.tok.kind == "eof":
                self.fail("expected ';'")
            self.i += 1
        self.i += 1

    def parse_contract(self) -> Node:
        s = self.tok.start
        abstract = self.accept("abstract")
        kind = self.tok.text
        self.i += 1
        name = self.ident()
        bases = []
        if self.accept("is"):
            while True:
                bs = self.tok.start
                path = self.parse_identifier_path()
                args = None
                if self.at("("):
                    args = self.parse_call_args()[0]
                bases.append(self.node("InheritanceSpecifier", bs, baseName=path, arguments=args))
                if not self.accept(","):
                    break
        self.expect("{")
        members: list[Node] = []
        while not self.accept("}"):
            if self.tok.kind == "eof":
                self.fail(f"unterminated contract {name}")
            m = self.parse_contract_member()
            if m is not None:
                members.append(m)
        return self.node(
            "ContractDefinition",
            s,
            name=name,
            contractKind=kind,
            abstract=abstract,
            baseContracts=bases,
            nodes=members,
        )

    def parse_identifier_path(self) -> Node:
        s = self.tok.start
        parts = [self.ident()]
        while self.at(".") and self.peek().kind == "ident":
            self.i += 1
            parts.append(self.ident())
        return self.node("IdentifierPath", s, name=".".join(parts))

    def parse_contract_member(self) -> Node | None:
        if self.at("using") or (self.at("type") and self.peek().kind == "ident" and self.peek(2).text == "is"):
            self._skip_to_semicolon()
            return None
        if self.at(";"):
            self.i += 1
            return None
        if self.at("struct"):
            return self.parse_struct()
        if self.at("enum"):
            return self.parse_enum()
        if self.at("event", "error") and self.peek().kind == "ident" and self.peek(2).text == "(":
            return self.parse_event_or_error()
        if self.at("modifier"):
            return self.parse_modifier()
        if self.at("function", "constructor", "fallback", "receive"):
            return self.parse_function()
        return self.parse_state_var()

    def parse_struct(self) -> Node:
        s = self.tok.start
        self.expect("struct")
        name = self.ident()
        self.expect("{")
        members = []
        while not self.accept("}"):
            ms = self.tok.start
            tn = self.parse_type_name()
            mname = self.ident()
            self.expect(";")
            members.append(self.node("VariableDeclaration", ms, name=mname, typeName=tn, stateVariable=False))
        return self.node("StructDefinition", s, name=name, members=members)

    def parse_enum(self) -> Node:
        s = self.tok.start
        self.expect("enum")
        name = self.ident()
        self.expect("{")
        members = []
        while not self.accept("}"):
            ms = self.tok.start
            members.append(self.node("EnumValue", ms, name=self.ident()))
            self.accept(",")
        return self.node("EnumDefinition", s, name=name, members=members)

    def parse_event_or_error(self) -> Node:
        s = self.tok.start
        kind = "EventDefinition" if self.tok.text == "event" else "ErrorDefinition"
        self.i += 1
        name = self.ident()
        params = self.parse_parameter_list()
        self.accept("anonymous")
        self.expect(";")
        return self.node(kind, s, name=name, parameters=params)

    def parse_parameter_list(self) -> Node:
        s = self.tok.start
        self.expect("(")
        params = []
        while not self.accept(")"):
            ps = self.tok.start
            tn = self.parse_type_name()
            loc = "default"
            indexed = False
            pname = ""
            while self.tok.kind == "ident" and self.tok.text in _STORAGE | {"indexed"}:
                if self.tok.text == "indexed":
                    indexed = True
                else:
                    loc = self.tok.text
                self.i += 1
            if self.tok.kind == "ident":
                pname = self.ident()
            params.append(
                self.node(
                    "VariableDeclaration",
                    ps,
                    name=pname,
                    typeName=tn,
                    storageLocation=loc,
                    indexed=indexed,
                    stateVariable=False,
                )
            )
            if not self.at(")"):
                self.expect(",")
        return self.node("ParameterList", s, parameters=params)

    def parse_modifier(self) -> Node:
        s = self.tok.start
        self.expect("modifier")
        name = self.ident()
        params = self.parse_parameter_list() if self.at("(") else self.node("ParameterList", s, parameters=[])
        virtual = False
        while self.at("virtual", "override"):
            virtual = virtual or self.tok.text == "virtual"
            self.i += 1
            if self.at("("):
                self.skip_balanced("(", ")")
        body = None
        if not self.accept(";"):
            body = self.parse_block()
        return self.node("ModifierDefinition", s, name=name, parameters=params, body=body, virtual=virtual)

    def parse_function(self) -> Node:
        s = self.tok.start
        head = self.tok.text
        self.i += 1
        kind = "function"
        name = ""
        if head == "function":
            if self.tok.kind == "ident" and not self.at("("):
                name = self.ident()
            else:
                kind = "fallback"
        else:
            kind = head
        params = self.parse_parameter_list()
        visibility = ""
        mutability = "nonpayable"
        virtual = False
        modifiers: list[Node] = []
        returns = None
        while True:
            if self.tok.kind != "ident":
                break
            t = self.tok.text
            if t in _VISIBILITY:
                visibility = t
                self.i += 1
            elif t in _MUTABILITY:
                mutability = "view" if t == "constant" else t
                self.i += 1
            elif t == "virtual":
                virtual = True
                self.i += 1
            elif t == "override":
                self.i += 1
                if self.at("("):
                    self.skip_balanced("(", ")")
            elif t == "returns":
                self.i += 1
                returns = self.parse_parameter_list()
            else:
                ms = self.tok.start
                mname = self.parse_identifier_path()
                args = None
                if self.at("("):
                    args = self.parse_call_args()[0]
                modifiers.append(
                    self.node("ModifierInvocation", ms, modifierName=mname, arguments=args, kind="modifierInvocation")
                )
        if not visibility:
            visibility = "public" if kind in ("function", "constructor") else "external"
        body = None
        if not self.accept(";"):
            body = self.parse_block()
        return self.node(
            "FunctionDefinition",
            s,
            name=name,
            kind=kind,
            visibility=visibility,
            stateMutability=mutability,
            virtual=virtual,
            modifiers=modifiers,
            parameters=params,
            returnParameters=returns or self.node("ParameterList", s, parameters=[]),
            body=body,
            implemented=body is not None,
        )

    def parse_state_var(self) -> Node:
        s = self.tok.start
        tn = self.parse_type_name()
        visibility = "internal"
        constant = False
        mutability = "mutable"
        while self.tok.kind == "ident" and self.tok.text in _VISIBILITY | {"constant", "immutable", "override", "transient"}:
            t = self.tok.text
            self.i += 1
            if t in _VISIBILITY:
                visibility = t
            elif t == "constant":
                constant = True
                mutability = "constant"
            elif t == "immutable":
                mutability = "immutable"
            elif t == "override" and self.at("("):
                self.skip_balanced("(", ")")
        name = self.ident()
        value = None
        if self.accept("="):
            value = self.parse_expression()
        self.expect(";")
        return self.node(
            "VariableDeclaration",
            s,
            name=name,
            typeName=tn,
            stateVariable=True,
            visibility=visibility,
            constant=constant,
            mutability=mutability,
            value=value,
            storageLocation="default",
        )

    # -- types ----------------------------------------------------------
    def parse_type_name(self) -> Node:
        s = self.tok.start
        if self.at("mapping"):
            self.i += 1
            self.expect("(")
            key = self.parse_type_name()
            if self.tok.kind == "ident" and not self.at("=>"):
                self.i += 1
            self.expect("=>")
            value = self.parse_type_name()
            if self.tok.kind == "ident":
                self.i += 1
            self.expect(")")
            t = self.node("Mapping", s, keyType=key, valueType=value)
        elif self.at("function"):
            self.i += 1
            self.skip_balanced("(", ")")
            while self.tok.kind == "ident" and self.tok.text in _VISIBILITY | _MUTABILITY:
                self.i += 1
            if self.accept("returns"):
                self.skip_balanced("(", ")")
            t = self.node("FunctionTypeName", s)
        elif self.tok.kind == "ident" and _ELEMENTARY.match(self.tok.text):
            name = self.ident()
            mut = None
            if name == "address" and self.at("payable"):
                self.i += 1
                mut = "payable"
            t = self.node("ElementaryTypeName", s, name=name, stateMutability=mut)
        elif self.tok.kind == "ident":
            path = self.parse_identifier_path()
            t = self.node("UserDefinedTypeName", s, pathNode=path)
        else:
            self.fail(f"expected type name, found {self.tok.text!r}")
        while self.at("["):
            self.i += 1
            length = None
            if not self.at("]"):
                length = self.parse_expression()
            self.expect("]")
            t = self.node("ArrayTypeName", s, baseType=t, length=length)
        return t

    # -- statements -----------------------------------------------------
    def parse_block(self) -> Node:
        s = self.tok.start
        self.expect("{")
        stmts = []
        while not self.accept("}"):
            if self.tok.kind == "eof":
                self.fail("unterminated block")
            stmts.append(self.parse_statement())
        return self.node("Block", s, statements=stmts)

    def parse_statement(self) -> Node:
        s = self.tok.start
        t = self.tok.text if self.tok.kind in ("ident", "punct") else ""
        if t == "{":
            return self.parse_block()
        if t == "unchecked" and self.peek().text == "{":
            self.i += 1
            blk = self.parse_block()
            return self.node("UncheckedBlock", s, statements=blk["statements"])
        if t == "if":
            self.i += 1
            self.expect("(")
            cond = self.parse_expression()
            self.expect(")")
            then = self.parse_statement()
            other = None
            if self.accept("else"):
                other = self.parse_statement()
            return self.node("IfStatement", s, condition=cond, trueBody=then, falseBody=other)
        if t == "for":
            self.i += 1
            self.expect("(")
            init = None
            if not self.accept(";"):
                init = self.parse_simple_statement()
            cond = None
            if not self.at(";"):
                cond = self.parse_expression()
            self.expect(";")
            step = None
            if not self.at(")"):
                es = self.tok.start
                step = self.node("ExpressionStatement", es, expression=self.parse_expression())
            self.expect(")")
            body = self.parse_statement()
            return self.node(
                "ForStatement", s, initializationExpression=init, condition=cond, loopExpression=step, body=body
            )
        if t == "while":
            self.i += 1
            self.expect("(")
            cond = self.parse_expression()
            self.expect(")")
            body = self.parse_statement()
            return self.node("WhileStatement", s, condition=cond, body=body)
        if t == "do":
            self.i += 1
            body = self.parse_statement()
            self.expect("while")
            self.expect("(")
            cond = self.parse_expression()
            self.expect(")")
            self.expect(";")
            return self.node("DoWhileStatement", s, condition=cond, body=body)
        if t == "return":
            self.i += 1
            value = None
            if not self.at(";"):
                value = self.parse_expression()
            self.expect(";")
            return self.node("Return", s, expression=value)
        if t == "emit":
            self.i += 1
            call = self.parse_expression()
            self.expect(";")
            return self.node("EmitStatement", s, eventCall=call)
        if t == "revert" and self.peek().kind == "ident":
            self.i += 1
            call = self.parse_expression()
            self.expect(";")
            return self.node("RevertStatement", s, errorCall=call)
        if t in ("break", "continue") and self.peek().text == ";":
            self.i += 2
            return self.node("Break" if t == "break" else "Continue", s)
        if t == "_" and self.peek().text == ";":
            self.i += 2
            return self.node("PlaceholderStatement", s)
        if t == "assembly":
            self.i += 1
            if self.tok.kind == "string":
                self.i += 1
            if self.at("("):
                self.skip_balanced("(", ")")
            self.skip_balanced("{", "}")
            return self.node("InlineAssembly", s, AST={}, evmVersion="")
        if t == "try":
            return self.parse_try()
        return self.parse_simple_statement()

    def parse_try(self) -> Node:
        s = self.tok.start
        self.expect("try")
        call = self.parse_expression()
        clauses = []
        cs = self.tok.start
        rets = None
        if self.accept("returns"):
            rets = self.parse_parameter_list()
        blk = self.parse_block()
        clauses.append(self.node("TryCatchClause", cs, errorName="", parameters=rets, block=blk))
        while self.at("catch"):
            cs = self.tok.start
            self.i += 1
            err = ""
            if self.tok.kind == "ident":
                err = self.ident()
            params = self.parse_parameter_list() if self.at("(") else None
            blk = self.parse_block()
            clauses.append(self.node("TryCatchClause", cs, errorName=err, parameters=params, block=blk))
        return self.node("TryStatement", s, externalCall=call, clauses=clauses)

    def parse_simple_statement(self) -> Node:
        """Variable declaration or expression statement, terminated by ';'."""
        s = self.tok.start
        saved = (self.i, self._next_id)
        try:
            return self._parse_declaration(s)
        except (_Backtrack, ParseError):
            self.i, self._next_id = saved
        expr = self.parse_expression()
        self.expect(";")
        return self.node("ExpressionStatement", s, expression=expr)

    def _parse_declaration(self, s: int) -> Node:
        decls: list[Node | None] = []
        if self.at("("):
            self.i += 1
            while not self.at(")"):
                if self.at(","):
                    decls.append(None)
                    self.i += 1
                    continue
                decls.append(self._parse_local_decl())
                if not self.at(")"):
                    if not self.accept(","):
                        raise _Backtrack
                    if self.at(")"):
                        decls.append(None)
            self.i += 1
            if not self.at("="):
                raise _Backtrack
        else:
            if self.tok.kind != "ident" or self.tok.text in ("return", "emit", "delete", "new", "true", "false"):
                raise _Backtrack
            decls.append(self._parse_local_decl())
        value = None
        if self.accept("="):
            value = self.parse_expression()
        elif len(decls) != 1:
            raise _Backtrack
        if not self.at(";"):
            raise _Backtrack
        self.i += 1
        return self.node("VariableDeclarationStatement", s, declarations=decls, initialValue=value)

    def _parse_local_decl(self) -> Node:
        s = self.tok.start
        tn = self.parse_type_name()
        loc = "default"
        if self.tok.kind == "ident" and self.tok.text in _STORAGE:
            loc = self.tok.text
            self.i += 1
        if self.tok.kind != "ident":
            raise _Backtrack
        name = self.ident()
        if not self.at("=", ";", ",", ")"):
            raise _Backtrack
        return self.node("VariableDeclaration", s, name=name, typeName=tn, storageLocation=loc, stateVariable=False)

    # -- expressions ----------------------------------------------------
    def parse_expression(self) -> Node:
        s = self.tok.start
        lhs = self.parse_conditional()
        if self.tok.kind == "punct" and self.tok.text in _ASSIGN_OPS:
            op = self.tok.text
            self.i += 1
            rhs = self.parse_expression()
            return self.node("Assignment", s, operator=op, leftHandSide=lhs, rightHandSide=rhs)
        return lhs

    def parse_conditional(self) -> Node:
        s = self.tok.start
        cond = self.parse_binary(0)
        if self.accept("?"):
            a = self.parse_expression()
            self.expect(":")
            b = self.parse_expression()
            return self.node("Conditional", s, condition=cond, trueExpression=a, falseExpression=b)
        return cond

    def parse_binary(self, level: int) -> Node:
        if level == len(_BINARY_LEVELS):
            return self.parse_unary()
        s = self.tok.start
        left = self.parse_binary(level + 1)
        ops = _BINARY_LEVELS[level]
        while self.tok.kind == "punct" and self.tok.text in ops:
            op = self.tok.text
            self.i += 1
            right = self.parse_binary(level + 1)
            left = self.node("BinaryOperation", s, operator=op, leftExpression=left, rightExpression=right)
        return left

    def parse_unary(self) -> Node:
        s = self.tok.start
        if self.tok.kind == "punct" and self.tok.text in ("!", "-", "~", "++", "--", "+"):
            op = self.tok.text
            self.i += 1
            sub = self.parse_unary()
            return self.node("UnaryOperation", s, operator=op, prefix=True, subExpression=sub)
        if self.at("delete"):
            self.i += 1
            sub = self.parse_unary()
            return self.node("UnaryOperation", s, operator="delete", prefix=True, subExpression=sub)
        return self.parse_postfix()

    def parse_call_args(self) -> tuple[list[Node], list[str]]:
        self.expect("(")
        args: list[Node] = []
        names: list[str] = []
        if self.at("{"):
            self.i += 1
            while not self.accept("}"):
                names.append(self.ident())
                self.expect(":")
                args.append(self.parse_expression())
                self.accept(",")
            self.expect(")")
            return args, names
        while not self.accept(")"):
            args.append(self.parse_expression())
            if not self.at(")"):
                self.expect(",")
        return args, names

    def parse_postfix(self) -> Node:
        s = self.tok.start
        e = self.parse_primary()
        while True:
            if self.at("("):
                args, names = self.parse_call_args()
                kind = "typeConversion" if e["nodeType"] == "ElementaryTypeNameExpression" else "functionCall"
                e = self.node("FunctionCall", s, expression=e, arguments=args, names=names, kind=kind)
            elif self.at("["):
                self.i += 1
                if self.at(":") or self._range_ahead():
                    start = None if self.at(":") else self.parse_expression()
                    self.expect(":")
                    end = None if self.at("]") else self.parse_expression()
                    self.expect("]")
                    e = self.node("IndexRangeAccess", s, baseExpression=e, startExpression=start, endExpression=end)
                    continue
                idx = None
                if not self.at("]"):
                    idx = self.parse_expression()
                self.expect("]")
                e = self.node("IndexAccess", s, baseExpression=e, indexExpression=idx)
            elif self.at("."):
                self.i += 1
                if self.tok.kind not in ("ident",):
                    self.fail("expected member name")
                member = self.ident()
                e = self.node("MemberAccess", s, expression=e, memberName=member)
            elif self.at("{") and self.peek().kind == "ident" and self.peek(2).text == ":":
                self.i += 1
                names, opts = [], []
                while not self.accept("}"):
                    names.append(self.ident())
                    self.expect(":")
                    opts.append(self.parse_expression())
                    self.accept(",")
                e = self.node("FunctionCallOptions", s, expression=e, names=names, options=opts)
            elif self.at("++", "--"):
                op = self.tok.text
                self.i += 1
                e = self.node("UnaryOperation", s, operator=op, prefix=False, subExpression=e)
            else:
                return e

    def _range_ahead(self) -> bool:
        depth = 0
        j = self.i
        while j < len(self.toks):
            t = self.toks[j].text
            if t in ("(", "["):
                depth += 1
            elif t in (")", "]"):
                if depth == 0:
                    return False
                depth -= 1
            elif t == ":" and depth == 0:
                return True
            elif t in (";", "{", "}"):
                return False
            j += 1
        return False

    def parse_primary(self) -> Node:
        s = self.tok.start
        t = self.tok
        if t.kind == "number":
            self.i += 1
            sub = None
            if self.tok.kind == "ident" and self.tok.text in _SUBDENOMINATIONS:
                sub = self.tok.text
                self.i += 1
            return self.node("Literal", s, kind="number", value=t.text, subdenomination=sub)
        if t.kind == "string":
            self.i += 1
            value = t.text
            while self.tok.kind == "string":
                value = value[:-1] + self.tok.text[1:]
                self.i += 1
            prefix = "unicode" if value.startswith("unicode") else ""
            return self.node("Literal", s, kind="unicodeString" if prefix else "string", value=value[len(prefix) + 1 : -1])
        if t.kind == "hexstr":
            self.i += 1
            return self.node("Literal", s, kind="hexString", value=t.text[4:-1])
        if t.kind == "punct":
            if t.text == "(":
                self.i += 1
                comps: list[Node | None] = []
                while not self.at(")"):
                    if self.at(","):
                        comps.append(None)
                        self.i += 1
                        continue
                    comps.append(self.parse_expression())
                    if not self.at(")"):
                        self.expect(",")
                        if self.at(")"):
                            comps.append(None)
                self.expect(")")
                return self.node("TupleExpression", s, components=comps, isInlineArray=False)
            if t.text == "[":
                self.i += 1
                comps = []
                while not self.accept("]"):
                    comps.append(self.parse_expression())
                    self.accept(",")
                return self.node("TupleExpression", s, components=comps, isInlineArray=True)
            self.fail(f"unexpected {t.text!r}")
        if t.kind == "ident":
            if t.text in ("true", "false"):
                self.i += 1
                return self.node("Literal", s, kind="bool", value=t.text)
            if t.text == "new":
                self.i += 1
                tn = self.parse_type_name()
                return self.node("NewExpression", s, typeName=tn)
            if t.text == "payable" and self.peek().text == "(":
                self.i += 1
                tn = self.node("ElementaryTypeName", s, name="address", stateMutability="payable")
                return self.node("ElementaryTypeNameExpression", s, typeName=tn)
            if _ELEMENTARY.match(t.text):
                self.i += 1
                name = t.text
                mut = None
                if name == "address" and self.at("payable"):
                    self.i += 1
                    mut = "payable"
                tn = self.node("ElementaryTypeName", s, name=name, stateMutability=mut)
                if self.at("["):
                    # array type used as expression, e.g. `new uint[](n)` handled above; `uint[]` in abi.decode
                    while self.at("[") and self.peek().text == "]":
                        self.i += 2
                return self.node("ElementaryTypeNameExpression", s, typeName=tn)
            self.i += 1
            return self.node("Identifier", s, name=t.text)
        self.fail(f"unexpected {t.text or 'end of input'!r}")


def parse_solidity(text: str, path: str = "<input>", file_index: int = 0) -> Node:
    """Return a compact-AST ``SourceUnit`` dict for ``text``."""
    return Parser(text, path, file_index).parse_source_unit()

"""Textual IR format (``.jules``), trace lines, and JSON reports."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Optional, Union

from .ir import (
    BUILTIN,
    AssignConst,
    AssignReg,
    DirectCall,
    DispatchCall,
    GetField,
    Method,
    MethodTable,
    New,
    Type,
    TypeDecl,
    TypeTable,
)


@dataclass
class SourceProgram:
    text: str
    provenance: str = "<inline>"


@dataclass(frozen=True)
class ParseError:
    message: str
    line: int
    col: int
    provenance: str = "<inline>"

    def __str__(self):
        return f"{self.provenance}:{self.line}:{self.col}: {self.message}"


class ParseFailure(Exception):
    def __init__(self, errors: list):
        self.errors = errors
        super().__init__("\n".join(map(str, errors)))


_TOKEN = re.compile(
    r"(?P<ws>[ \t\r\n]+)"
    r"|(?P<origin>\#[ \t]*origin:[^\n]*)"
    r"|(?P<comment>\#[^\n]*)"
    r"|(?P<int>-?[0-9]+)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<sub><:)"
    r"|(?P<punct>[%=(){}\[\],])"
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


class _Bail(Exception):
    pass


def _tokenize(text: str, errors: list, prov: str) -> list:
    toks = []
    pos, line, line_start = 0, 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None:
            errors.append(ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1, prov))
            pos += 1
            continue
        kind = m.lastgroup
        s = m.group()
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind if kind != "punct" else s, s, line, pos - line_start + 1))
        nl = s.count("\n")
        if nl:
            line += nl
            line_start = pos + s.rindex("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, toks, prov, compiled):
        self.toks = toks
        self.i = 0
        self.prov = prov
        self.compiled = compiled
        self.errors: list = []
        self.concrete_names: set = set()
        # pre-scan type declarations so uses may precede them
        for a, b in zip(toks, toks[1:]):
            if a.kind == "name" and a.text == "type" and b.kind == "name":
                self.concrete_names.add(b.text)

    # -- token helpers --

    def peek(self, k=0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def fail(self, msg, tok=None):
        tok = tok or self.peek()
        self.errors.append(ParseError(msg, tok.line, tok.col, self.prov))
        raise _Bail

    def next(self) -> _Tok:
        t = self.peek()
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, kind, text=None) -> _Tok:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            self.fail(f"expected {want!r}, found {t.text or t.kind!r}")
        return self.next()

    def keyword(self, word):
        return self.expect("name", word)

    def at_keyword(self, word) -> bool:
        t = self.peek()
        return t.kind == "name" and t.text == word

    def nat(self) -> int:
        t = self.expect("int")
        if t.text.startswith("-"):
            self.fail("expected a natural number", t)
        return int(t.text)

    def reg(self) -> int:
        self.expect("%")
        return self.nat()

    # -- grammar --

    def ty(self) -> Type:
        t = self.expect("name")
        if t.text in BUILTIN:
            return BUILTIN[t.text]
        if not t.text[0].isupper():
            self.fail(f"type name {t.text!r} must be capitalized", t)
        return Type(t.text, t.text in self.concrete_names)

    def tylist(self, close) -> tuple:
        out = []
        if self.peek().kind == close:
            return ()
        out.append(self.ty())
        while self.peek().kind == ",":
            self.next()
            out.append(self.ty())
        return tuple(out)

    def reglist(self) -> tuple:
        out = []
        if self.peek().kind == ")":
            return ()
        out.append(self.reg())
        while self.peek().kind == ",":
            self.next()
            out.append(self.reg())
        return tuple(out)

    def program(self):
        types, methods = [], []
        while self.peek().kind != "eof":
            start = self.i
            try:
                if self.at_keyword("type"):
                    types.append(self.typedecl())
                elif self.at_keyword("method"):
                    methods.append(self.methoddecl())
                else:
                    self.fail(f"expected 'type' or 'method', found {self.peek().text!r}")
            except _Bail:
                # resynchronize at the next top-level keyword
                self.i = max(self.i, start + 1)
                while self.peek().kind != "eof" and not (self.at_keyword("type") or self.at_keyword("method")):
                    self.i += 1
        return types, methods

    def typedecl(self) -> TypeDecl:
        self.keyword("type")
        name_tok = self.expect("name")
        name = name_tok.text
        if not name[0].isupper():
            self.fail(f"type name {name!r} must be capitalized", name_tok)
        self.expect("(")
        fields = self.tylist(")")
        self.expect(")")
        self.expect("sub")
        sup_tok = self.peek()
        sup = self.ty()
        if sup.concrete or sup == BUILTIN["Int"]:
            self.fail(f"supertype {sup.name} must be abstract", sup_tok)
        return TypeDecl(name, fields, sup)

    def methoddecl(self) -> Method:
        self.keyword("method")
        name = self.expect("name").text
        self.expect("(")
        params = self.tylist(")")
        self.expect(")")
        self.expect("{")
        origin = params
        if self.peek().kind == "origin":
            tok = self.next()
            if not self.compiled:
                self.fail("origin annotation in source", tok)
            origin = self.origin_annotation(tok, name)
        body: Optional[list] = []
        if self.at_keyword("stub"):
            tok = self.next()
            if not self.compiled:
                self.fail("stub in source", tok)
            body = None
        while body is not None and self.peek().kind == "%":
            body.append(self.instr())
        self.expect("}")
        return Method(name, params, None if body is None else tuple(body), origin)

    def origin_annotation(self, tok, name) -> tuple:
        text = tok.text.split("origin:", 1)[1]
        sub = _Parser(_tokenize(text, [], self.prov), self.prov, self.compiled)
        sub.concrete_names = self.concrete_names
        try:
            oname = sub.expect("name").text
            sub.expect("(")
            sig = sub.tylist(")")
            sub.expect(")")
            sub.expect("eof")
        except _Bail:
            self.fail("malformed origin annotation", tok)
        if oname != name:
            self.fail(f"origin names {oname}, method is {name}", tok)
        return sig

    def instr(self):
        target = self.reg()
        self.expect("=")
        op = self.expect("name")
        if op.text == "const":
            return AssignConst(target, int(self.expect("int").text))
        if op.text == "reg":
            return AssignReg(target, self.reg())
        if op.text == "new":
            t = self.ty()
            if not t.concrete:
                self.fail(f"new of non-concrete type {t.name}", op)
            self.expect("(")
            args = self.reglist()
            self.expect(")")
            return New(target, t, args)
        if op.text == "field":
            recv = self.reg()
            return GetField(target, recv, self.nat())
        if op.text == "invoke":
            self.fail("direct call in source" if not self.compiled else "invoke needs a guard: 'if %j invoke ...'", op)
        if op.text == "if":
            guard = self.reg()
            kind = self.expect("name")
            callee = self.expect("name").text
            if kind.text == "call":
                self.expect("(")
                args = self.reglist()
                self.expect(")")
                self.keyword("else")
                return DispatchCall(target, guard, callee, args, self.reg())
            if kind.text == "invoke":
                if not self.compiled:
                    self.fail("direct call in source", kind)
                self.expect("[")
                sig = self.tylist("]")
                self.expect("]")
                self.expect("(")
                args = self.reglist()
                self.expect(")")
                self.keyword("else")
                return DirectCall(target, guard, callee, sig, args, self.reg())
            self.fail(f"expected 'call' or 'invoke', found {kind.text!r}", kind)
        self.fail(f"unknown operation {op.text!r}", op)


def parse_program(src: Union[SourceProgram, str, bytes], *, compiled: bool = False) -> tuple[TypeTable, MethodTable]:
    """Parse a program; raises ``ParseFailure`` with positioned errors.

    ``compiled`` admits direct calls, origin annotations and stubs, as found
    in dumps of compiled tables.
    """
    if isinstance(src, SourceProgram):
        text, prov = src.text, src.provenance
    else:
        text, prov = src, "<inline>"
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseFailure([ParseError(f"invalid UTF-8: {exc.reason}", 1, exc.start + 1, prov)]) from None
    errors: list = []
    toks = _tokenize(text, errors, prov)
    p = _Parser(toks, prov, compiled)
    types, methods = p.program()
    errors += p.errors
    if errors:
        errors.sort(key=lambda e: (e.line, e.col))
        raise ParseFailure(errors)
    return TypeTable(types), MethodTable(methods)


# -- printing -------------------------------------------------------------------


def _tys(ts) -> str:
    return ", ".join(t.name for t in ts)


def _regs(rs) -> str:
    return ", ".join(f"%{r}" for r in rs)


def format_instr(instr) -> str:
    t = f"%{instr.target} = "
    if isinstance(instr, AssignConst):
        return t + f"const {instr.value}"
    if isinstance(instr, AssignReg):
        return t + f"reg %{instr.source}"
    if isinstance(instr, New):
        return t + f"new {instr.struct.name}({_regs(instr.args)})"
    if isinstance(instr, GetField):
        return t + f"field %{instr.receiver} {instr.index}"
    if isinstance(instr, DispatchCall):
        return t + f"if %{instr.guard} call {instr.callee}({_regs(instr.args)}) else %{instr.alt}"
    return t + (f"if %{instr.guard} invoke {instr.callee}[{_tys(instr.sig)}]({_regs(instr.args)}) "
                f"else %{instr.alt}")


def method_sort_key(m: Method):
    return (m.name, tuple(t.name for t in m.params))


def print_program(tytbl: TypeTable, mtbl: MethodTable) -> str:
    """Canonical text: type declarations in order, then methods sorted by signature."""
    lines = []
    for e in tytbl.entries:
        lines.append(f"type {e.name}({_tys(e.fields)}) <: {e.supertype.name}")
    for m in sorted(mtbl, key=method_sort_key):
        head = f"method {m.name}({_tys(m.params)}) {{"
        if not m.is_original:
            head += f"  # origin: {m.name}({_tys(m.origin)})"
        lines.append(head)
        if m.is_stub:
            lines.append("  stub")
        else:
            for instr in m.body:
                lines.append("  " + format_instr(instr))
        lines.append("}")
    return "\n".join(lines) + ("\n" if lines else "")


def trace_line(n: int, rule: str, depth: int, reg: int, value) -> str:
    return f"step {n} {rule} depth={depth} %{reg}={value}"


# -- JSON reports -------------------------------------------------------------------


def stability_dict(r) -> dict:
    return {
        "method": r.method,
        "sig": [t.name for t in r.arg_types],
        "stable": r.stable,
        "grounded": r.grounded,
        "return_type": r.return_type.name,
        "register_types": [t.name for t in r.register_types],
        "per_register_concrete": list(r.per_register_concrete),
    }


def census_dict(c) -> dict:
    return {
        "instance_count": c.instance_count,
        "stable_fraction": c.stable_fraction,
        "grounded_fraction": c.grounded_fraction,
        "zero_denominator": c.zero_denominator,
        "failed": [{"method": n, "sig": [t.name for t in s], "error": e} for n, s, e in c.failed],
        "instances": [stability_dict(r) for r in c.per_instance],
    }


def verdict_dict(v) -> dict:
    d = {"verdict": "match" if v.match else "mismatch"}
    if v.match:
        d["steps"] = v.step_counts[0]
    else:
        d["steps"] = list(v.step_counts)
    d["mode"] = v.mode
    d["left"] = v.left
    d["right"] = v.right
    d["property_failures"] = list(v.property_failures)
    if v.seed is not None:
        d["seed"] = v.seed
    return d


def report_to_json(report, indent: Optional[int] = None) -> str:
    from .analysis import CensusReport, StabilityReport

    if isinstance(report, StabilityReport):
        d = stability_dict(report)
    elif isinstance(report, CensusReport):
        d = census_dict(report)
    elif isinstance(report, list):
        return json.dumps([json.loads(report_to_json(r)) for r in report], indent=indent)
    else:
        d = verdict_dict(report)
    return json.dumps(d, indent=indent)

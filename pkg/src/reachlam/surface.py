"""Surface syntax: a whitespace-insensitive s-expression reader and the
canonical printer.

Grammar::

    term  := "true" | "false" | ident
           | "(lam" qual "(" ident ":" qtype ")" term ")"
           | "(app" term term ")" | "(ref" term ")" | "(!" term ")"
           | "(:=" term term ")" | "(seq" term term ")"
    qual  := "{" (ident | "fresh" | "self")* "}"
    eff   := "{" (ident | "self")* "}"
    qtype := ptype "^" qual
    ptype := "Bool" | "(Ref" qtype ")"
           | "((" ident ":" qtype ")" "->" qtype "/" eff ")"

Printing is canonical (sorted qualifier members, single spaces), and
``parse(print(t)) == t`` for every well-formed term.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .syntax import (
    Abs,
    App,
    Assign,
    BoolType,
    BoolVal,
    Closure,
    Const,
    Deref,
    Effect,
    FunType,
    Loc,
    Pretype,
    Qualifier,
    QualifiedType,
    ReachlamError,
    RefAlloc,
    RefType,
    Seq,
    Term,
    Value,
    Var,
)


class ParseError(ReachlamError):
    pass


RESERVED = {"true", "false", "lam", "app", "ref", "seq", "fresh", "self", "Bool", "Ref"}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<punct>:=|->|[(){}^:/!])|(?P<ident>[A-Za-z_][A-Za-z0-9_']*))"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "punct" | "ident" | "eof"
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            bad_at = len(text) - len(stripped)
            raise ParseError(
                f"unexpected character {text[bad_at]!r}", rule="parse", span=(bad_at, bad_at + 1)
            )
        if match.lastgroup == "punct":
            tokens.append(_Token("punct", match.group("punct"), match.start("punct")))
        else:
            tokens.append(_Token("ident", match.group("ident"), match.start("ident")))
        pos = match.end()
    tokens.append(_Token("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.index = 0

    # -- token plumbing ----------------------------------------------------

    def peek(self, ahead: int = 0) -> _Token:
        return self.tokens[min(self.index + ahead, len(self.tokens) - 1)]

    def next(self) -> _Token:
        token = self.tokens[self.index]
        if token.kind != "eof":
            self.index += 1
        return token

    def expect(self, kind: str, text: Optional[str] = None) -> _Token:
        token = self.next()
        if token.kind != kind or (text is not None and token.text != text):
            want = text if text is not None else kind
            raise ParseError(
                f"expected {want!r}, found {token.text or 'end of input'!r}",
                rule="parse",
                span=(token.pos, token.pos + max(1, len(token.text))),
            )
        return token

    def expect_name(self) -> _Token:
        token = self.expect("ident")
        if token.text in RESERVED:
            raise ParseError(
                f"{token.text!r} is a reserved word",
                rule="parse",
                span=(token.pos, token.pos + len(token.text)),
            )
        return token

    # -- grammar -----------------------------------------------------------

    def parse_term(self) -> Term:
        token = self.peek()
        if token.kind == "ident":
            self.next()
            span = (token.pos, token.pos + len(token.text))
            if token.text == "true":
                return Const(True, span=span)
            if token.text == "false":
                return Const(False, span=span)
            if token.text in RESERVED:
                raise ParseError(f"{token.text!r} is a reserved word", rule="parse", span=span)
            return Var(token.text, span=span)
        start = self.expect("punct", "(").pos
        head = self.next()
        if head.kind == "ident" and head.text == "lam":
            qual = self.parse_qual()
            self.expect("punct", "(")
            param = self.expect_name()
            self.expect("punct", ":")
            param_type = self.parse_qtype()
            self.expect("punct", ")")
            body = self.parse_term()
            end = self.expect("punct", ")").pos + 1
            return Abs(qual, param.text, param_type, body, span=(start, end))
        if head.kind == "ident" and head.text == "app":
            fn = self.parse_term()
            arg = self.parse_term()
            end = self.expect("punct", ")").pos + 1
            return App(fn, arg, span=(start, end))
        if head.kind == "ident" and head.text == "ref":
            init = self.parse_term()
            end = self.expect("punct", ")").pos + 1
            return RefAlloc(init, span=(start, end))
        if head.kind == "punct" and head.text == "!":
            target = self.parse_term()
            end = self.expect("punct", ")").pos + 1
            return Deref(target, span=(start, end))
        if head.kind == "punct" and head.text == ":=":
            target = self.parse_term()
            value = self.parse_term()
            end = self.expect("punct", ")").pos + 1
            return Assign(target, value, span=(start, end))
        if head.kind == "ident" and head.text == "seq":
            first = self.parse_term()
            second = self.parse_term()
            end = self.expect("punct", ")").pos + 1
            return Seq(first, second, span=(start, end))
        raise ParseError(
            f"expected a term form, found {head.text or 'end of input'!r}",
            rule="parse",
            span=(head.pos, head.pos + max(1, len(head.text))),
        )

    def parse_qual(self) -> Qualifier:
        self.expect("punct", "{")
        names: set[str] = set()
        fresh = False
        self_ref = False
        while True:
            token = self.peek()
            if token.kind == "punct" and token.text == "}":
                self.next()
                return Qualifier(frozenset(names), fresh, self_ref)
            word = self.expect("ident")
            if word.text == "fresh":
                fresh = True
            elif word.text == "self":
                self_ref = True
            elif word.text in RESERVED:
                raise ParseError(
                    f"{word.text!r} is a reserved word",
                    rule="parse",
                    span=(word.pos, word.pos + len(word.text)),
                )
            else:
                names.add(word.text)

    def parse_eff(self, param: str) -> Effect:
        self.expect("punct", "{")
        names: set[str] = set()
        self_ref = False
        arg = False
        while True:
            token = self.peek()
            if token.kind == "punct" and token.text == "}":
                self.next()
                return Effect(frozenset(names), self_ref, arg)
            word = self.expect("ident")
            if word.text == "self":
                self_ref = True
            elif word.text in RESERVED:
                raise ParseError(
                    f"{word.text!r} is not allowed in an effect",
                    rule="parse",
                    span=(word.pos, word.pos + len(word.text)),
                )
            elif word.text == param:
                arg = True
            else:
                names.add(word.text)

    def parse_qtype(self) -> QualifiedType:
        pretype = self.parse_ptype()
        self.expect("punct", "^")
        qual = self.parse_qual()
        return QualifiedType(pretype, qual)

    def parse_ptype(self) -> Pretype:
        token = self.peek()
        if token.kind == "ident" and token.text == "Bool":
            self.next()
            return BoolType()
        self.expect("punct", "(")
        inner = self.peek()
        if inner.kind == "ident" and inner.text == "Ref":
            self.next()
            referent = self.parse_qtype()
            self.expect("punct", ")")
            return RefType(referent)
        self.expect("punct", "(")
        param = self.expect_name()
        self.expect("punct", ":")
        domain = self.parse_qtype()
        self.expect("punct", ")")
        self.expect("punct", "->")
        codomain = self.parse_qtype()
        self.expect("punct", "/")
        latent = self.parse_eff(param.text)
        self.expect("punct", ")")
        return FunType(param.text, domain, latent, codomain)

    def at_eof(self) -> bool:
        return self.peek().kind == "eof"


def parse_term(text: str) -> Term:
    parser = _Parser(text)
    term = parser.parse_term()
    if not parser.at_eof():
        trailing = parser.peek()
        raise ParseError(
            f"trailing input {trailing.text!r}",
            rule="parse",
            span=(trailing.pos, trailing.pos + max(1, len(trailing.text))),
        )
    return term


def parse_qualified_type(text: str) -> QualifiedType:
    parser = _Parser(text)
    qtype = parser.parse_qtype()
    if not parser.at_eof():
        trailing = parser.peek()
        raise ParseError(
            f"trailing input {trailing.text!r}",
            rule="parse",
            span=(trailing.pos, trailing.pos + max(1, len(trailing.text))),
        )
    return qtype


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def print_qual(qual: Qualifier) -> str:
    return str(qual)


def print_qtype(qtype: QualifiedType) -> str:
    return str(qtype)


def print_term(term: Term) -> str:
    if isinstance(term, Const):
        return "true" if term.value else "false"
    if isinstance(term, Var):
        return term.name
    if isinstance(term, Abs):
        return (
            f"(lam {term.qual_annotation} ({term.param} : {term.param_type}) "
            f"{print_term(term.body)})"
        )
    if isinstance(term, App):
        return f"(app {print_term(term.fn)} {print_term(term.arg)})"
    if isinstance(term, RefAlloc):
        return f"(ref {print_term(term.init)})"
    if isinstance(term, Deref):
        return f"(! {print_term(term.target)})"
    if isinstance(term, Assign):
        return f"(:= {print_term(term.target)} {print_term(term.value)})"
    if isinstance(term, Seq):
        return f"(seq {print_term(term.first)} {print_term(term.second)})"
    raise TypeError(f"not a term: {term!r}")


def format_value(value: Value) -> str:
    if isinstance(value, BoolVal):
        return "true" if value.value else "false"
    if isinstance(value, Loc):
        return f"loc:{value.index}"
    if isinstance(value, Closure):
        return f"<closure q={value.qual}>"
    raise TypeError(f"not a value: {value!r}")

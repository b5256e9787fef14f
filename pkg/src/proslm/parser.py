"""Tokenizer, recursive-descent parser and canonical printer for the KB language.

The language is a small Prolog subset: definite clauses, integer arithmetic,
the comparison operators ``> < >= =< = is`` and lists. There are no quoted
atoms and no user-defined operators, so one token of lookahead is enough.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from itertools import count

from .terms import (
    ARITH_OPS,
    COMPARISON_OPS,
    OPERATORS,
    Atom,
    Clause,
    Compound,
    KnowledgeBase,
    ListTerm,
    Num,
    Term,
    Var,
)


class SyntaxErrorAt(ValueError):
    """Lexing or parsing failure at a 1-based (line, col) position."""

    def __init__(self, message: str, line: int, col: int, expected: frozenset = frozenset()):
        self.message = message
        self.line = line
        self.col = col
        self.expected = expected
        detail = f" (expected one of: {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"line {line}, col {col}: {message}{detail}")


class LexError(SyntaxErrorAt):
    pass


class ParseError(SyntaxErrorAt):
    pass


@dataclass(frozen=True)
class Token:
    kind: str  # atom | variable | integer | punct | operator | comment | end
    lexeme: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>%[^\n]*)
  | (?P<integer>\d+)
  | (?P<variable>[A-Z_][a-zA-Z0-9_]*)
  | (?P<atom>[a-z][a-zA-Z0-9_]*)
  | (?P<operator>:-|>=|=<|//|[><=+*-])
  | (?P<punct>[()\[\]|,.])
    """,
    re.VERBOSE,
)


def tokenize(text: str, keep_comments: bool = False) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise LexError(f"illegal character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        lexeme = m.group()
        if kind == "atom" and lexeme == "is":
            kind = "operator"
        if kind != "ws" and (kind != "comment" or keep_comments):
            tokens.append(Token(kind, lexeme, line, pos - line_start + 1))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            line_start = pos + lexeme.rindex("\n") + 1
        pos = m.end()
    return tokens


@dataclass
class Program:
    clauses: list[Clause]
    source_name: str = "<string>"

    def to_kb(self) -> KnowledgeBase:
        return KnowledgeBase(self.clauses)


_ADD_OPS = ("+", "-")
_MUL_OPS = ("*", "//")


@dataclass
class _Parser:
    tokens: list[Token]
    end: Token
    pos: int = 0
    anon: count = field(default_factory=lambda: count(1))

    @classmethod
    def from_text(cls, text: str) -> "_Parser":
        tokens = tokenize(text)
        lines = text.split("\n")
        end = Token("end", "", len(lines), len(lines[-1]) + 1)
        return cls(tokens, end)

    def peek(self) -> Token:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else self.end

    def next(self) -> Token:
        tok = self.peek()
        self.pos += 1
        return tok

    def at(self, lexeme: str) -> bool:
        tok = self.peek()
        return tok.kind in ("punct", "operator") and tok.lexeme == lexeme

    def expect(self, lexeme: str) -> Token:
        if not self.at(lexeme):
            self.fail(frozenset({lexeme}))
        return self.next()

    def fail(self, expected: frozenset):
        tok = self.peek()
        found = "end of input" if tok.kind == "end" else repr(tok.lexeme)
        raise ParseError(f"unexpected {found}", tok.line, tok.col, expected)

    # grammar

    def clause(self, source_name: str, source_id: int) -> Clause:
        head_tok = self.peek()
        head = self.primary()
        if not isinstance(head, (Atom, Compound)) or (
            isinstance(head, Compound) and head.functor in OPERATORS
        ):
            raise ParseError("clause head must be an atom or compound term", head_tok.line, head_tok.col)
        body: list[Term] = []
        if self.at(":-"):
            self.next()
            body = self.conjunction()
        self.expect(".")
        return Clause(head, tuple(body), source_name, source_id)

    def conjunction(self) -> list[Term]:
        goals = [self.goal()]
        while self.at(","):
            self.next()
            goals.append(self.goal())
        return goals

    def goal(self) -> Term:
        tok = self.peek()
        left = self.expr()
        if self.peek().kind == "operator" and self.peek().lexeme in COMPARISON_OPS:
            op = self.next().lexeme
            return Compound(op, (left, self.expr()))
        if not isinstance(left, (Atom, Compound)) or (
            isinstance(left, Compound) and left.functor in ARITH_OPS
        ):
            raise ParseError("goal must be an atom, compound term or comparison", tok.line, tok.col)
        return left

    def expr(self) -> Term:
        left = self.term()
        while self.peek().kind == "operator" and self.peek().lexeme in _ADD_OPS:
            op = self.next().lexeme
            left = Compound(op, (left, self.term()))
        return left

    def term(self) -> Term:
        left = self.unary()
        while self.peek().kind == "operator" and self.peek().lexeme in _MUL_OPS:
            op = self.next().lexeme
            left = Compound(op, (left, self.unary()))
        return left

    def unary(self) -> Term:
        if self.at("-"):
            nxt = self.tokens[self.pos + 1] if self.pos + 1 < len(self.tokens) else self.end
            if nxt.kind == "integer":
                self.next()
                return Num(-int(self.next().lexeme))
        return self.primary()

    def primary(self) -> Term:
        tok = self.peek()
        if tok.kind == "integer":
            self.next()
            return Num(int(tok.lexeme))
        if tok.kind == "variable":
            self.next()
            if tok.lexeme == "_":
                return Var(f"_G{next(self.anon)}")
            return Var(tok.lexeme)
        if tok.kind == "atom":
            self.next()
            if self.at("("):
                self.next()
                args = [self.expr()]
                while self.at(","):
                    self.next()
                    args.append(self.expr())
                if not self.at(")"):
                    self.fail(frozenset({",", ")"}))
                self.next()
                return Compound(tok.lexeme, tuple(args))
            return Atom(tok.lexeme)
        if self.at("["):
            return self.list_term()
        if self.at("("):
            self.next()
            inner = self.expr()
            if self.peek().kind == "operator" and self.peek().lexeme in COMPARISON_OPS:
                inner = Compound(self.next().lexeme, (inner, self.expr()))
            self.expect(")")
            return inner
        self.fail(frozenset({"atom", "variable", "integer", "[", "("}))

    def list_term(self) -> Term:
        self.expect("[")
        if self.at("]"):
            self.next()
            return ListTerm()
        elements = [self.expr()]
        while self.at(","):
            self.next()
            elements.append(self.expr())
        tail = None
        if self.at("|"):
            self.next()
            tail = self.expr()
        if not self.at("]"):
            self.fail(frozenset({",", "|", "]"}) if tail is None else frozenset({"]"}))
        self.next()
        return ListTerm(tuple(elements), tail)


def parse_program(text: str, source_name: str = "<string>") -> Program:
    p = _Parser.from_text(text)
    clauses = []
    while p.peek().kind != "end":
        p.anon = count(1)
        clauses.append(p.clause(source_name, len(clauses)))
    return Program(clauses, source_name)


def parse_query(text: str) -> list[Term]:
    """Parse a goal or comma-separated conjunction; a trailing ``.`` is optional."""
    p = _Parser.from_text(text)
    goals = p.conjunction()
    if p.at("."):
        p.next()
    if p.peek().kind != "end":
        p.fail(frozenset({",", "."}))
    return goals


def parse_term(text: str) -> Term:
    p = _Parser.from_text(text)
    t = p.expr()
    if p.peek().kind == "operator" and p.peek().lexeme in COMPARISON_OPS:
        t = Compound(p.next().lexeme, (t, p.expr()))
    if p.peek().kind != "end":
        p.fail(frozenset({"end of input"}))
    return t


def parse_clause(text: str, source_name: str = "user", source_id: int = -1) -> Clause:
    """Parse exactly one clause (the terminating ``.`` may be omitted)."""
    text = text.strip()
    if not text.endswith("."):
        text += "."
    prog = parse_program(text, source_name)
    if len(prog.clauses) != 1:
        raise ParseError(f"expected one clause, found {len(prog.clauses)}", 1, 1)
    c = prog.clauses[0]
    return Clause(c.head, c.body, source_name, source_id)


def load_kb(path) -> KnowledgeBase:
    from pathlib import Path

    path = Path(path)
    return parse_program(path.read_text(encoding="utf-8"), path.name).to_kb()


# printing

_PRECEDENCE = {"+": 500, "-": 500, "*": 400, "//": 400}
_COMPARISON_PREC = 700


def _prec(t: Term) -> int:
    if isinstance(t, Compound):
        if t.functor in COMPARISON_OPS:
            return _COMPARISON_PREC
        if t.functor in _PRECEDENCE:
            return _PRECEDENCE[t.functor]
    return 0


def _wrap(t: Term, limit: int) -> str:
    s = print_term(t)
    return f"({s})" if _prec(t) > limit else s


def print_var(v: Var) -> str:
    return v.name if v.generation == 0 else f"{v.name}_{v.generation}"


def print_term(t: Term) -> str:
    if isinstance(t, Atom):
        return t.name
    if isinstance(t, Num):
        return str(t.value)
    if isinstance(t, Var):
        return print_var(t)
    if isinstance(t, ListTerm):
        inner = ", ".join(_wrap(e, 500) for e in t.elements)
        if t.tail is not None:
            inner += f"|{_wrap(t.tail, 500)}"
        return f"[{inner}]"
    if isinstance(t, Compound):
        if t.functor in COMPARISON_OPS:
            left, right = t.args
            return f"{_wrap(left, _COMPARISON_PREC - 1)} {t.functor} {_wrap(right, _COMPARISON_PREC - 1)}"
        if t.functor in _PRECEDENCE:
            p = _PRECEDENCE[t.functor]
            left, right = t.args
            # all arithmetic operators are left-associative
            return f"{_wrap(left, p)} {t.functor} {_wrap(right, p - 1)}"
        return f"{t.functor}({', '.join(_wrap(a, 500) for a in t.args)})"
    raise TypeError(f"not a term: {t!r}")


def print_clause(c: Clause) -> str:
    head = print_term(c.head)
    if not c.body:
        return f"{head}."
    body = ",\n".join(f"    {print_term(g)}" for g in c.body)
    return f"{head} :-\n{body}."


def print_program(clauses) -> str:
    """Canonical text: one clause per entry, blank line between predicate groups."""
    if isinstance(clauses, Program):
        clauses = clauses.clauses
    out = []
    prev = None
    for c in clauses:
        if prev is not None and c.key != prev:
            out.append("")
        out.append(print_clause(c))
        prev = c.key
    return "\n".join(out) + "\n" if out else ""

from __future__ import annotations

import random
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proslm.config import DEFAULT_KB
from proslm.parser import (
    LexError,
    ParseError,
    SyntaxErrorAt,
    parse_clause,
    parse_program,
    parse_query,
    parse_term,
    print_clause,
    print_program,
    print_term,
    tokenize,
)
from proslm.terms import Atom, Compound, ListTerm, Num, Var
from strategies import programs, terms


def kinds(text):
    return [(t.kind, t.lexeme) for t in tokenize(text)]


# --- tokenizer -------------------------------------------------------------

def test_tokenize_status_query():
    assert kinds("status(pool, 1100, monday, Y).") == [
        ("atom", "status"), ("punct", "("), ("atom", "pool"), ("punct", ","),
        ("integer", "1100"), ("punct", ","), ("atom", "monday"), ("punct", ","),
        ("variable", "Y"), ("punct", ")"), ("punct", "."),
    ]


def test_tokenize_skips_comments():
    assert kinds("% comment\nfoo.") == [("atom", "foo"), ("punct", ".")]
    assert [t.kind for t in tokenize("% c\nfoo.", keep_comments=True)] == ["comment", "atom", "punct"]


def test_tokenize_percept_atom():
    assert kinds("p_weather") == [("atom", "p_weather")]


def test_tokenize_operators():
    assert [lex for _, lex in kinds("a :- X >= 1, Y =< 2, Z is A // 3, B = C.")] == [
        "a", ":-", "X", ">=", "1", ",", "Y", "=<", "2", ",", "Z", "is", "A", "//", "3", ",", "B", "=", "C", ".",
    ]
    assert dict(kinds("is"))["operator"] == "is"


def test_token_positions_are_one_based():
    toks = tokenize("a.\n  bc(X).")
    assert [(t.lexeme, t.line, t.col) for t in toks][:4] == [("a", 1, 1), (".", 1, 2), ("bc", 2, 3), ("(", 2, 5)]


def test_illegal_character_position():
    with pytest.raises(LexError) as err:
        tokenize("ok.\nfoo(a) $ bar.")
    assert (err.value.line, err.value.col) == (2, 8)


@settings(max_examples=300)
@given(st.text(alphabet="abXY_19(),.[]|%:-<>=\n $#@", max_size=40))
def test_tokenizer_is_total(text):
    try:
        toks = tokenize(text)
    except LexError as exc:
        assert exc.line >= 1 and exc.col >= 1
        return
    stripped = re.sub(r"%[^\n]*", "", text)
    assert "".join(t.lexeme for t in toks) == re.sub(r"\s+", "", stripped)
    positions = [(t.line, t.col) for t in toks]
    assert positions == sorted(positions)


# --- parser ----------------------------------------------------------------

def test_parse_rule_with_two_body_goals():
    prog = parse_program("friends(priyesh, jordan) :- human(priyesh), human(jordan).")
    (c,) = prog.clauses
    assert c.key == ("friends", 2)
    assert [b.functor for b in c.body] == ["human", "human"]


def test_parse_fact():
    (c,) = parse_program("outdoor(pool).").clauses
    assert c.is_fact and c.key == ("outdoor", 1)


def test_unterminated_args_fail_at_eof():
    with pytest.raises(ParseError) as err:
        parse_program("f(X")
    assert (err.value.line, err.value.col) == (1, 4)
    assert err.value.expected == frozenset({",", ")"})


def test_infix_comparison_becomes_compound():
    (c,) = parse_program("isOpen(X) :- Hour > Opening.").clauses
    assert c.body[0] == Compound(">", (Var("Hour"), Var("Opening")))


def test_list_with_tail():
    assert parse_term("[a, b|T]") == ListTerm((Atom("a"), Atom("b")), Var("T"))
    assert parse_term("[]") == ListTerm()


def test_leading_zero_integers_normalise():
    assert parse_term("01") == Num(1)
    assert parse_term("0900") == Num(900)
    assert print_term(parse_term("f(01)")) == "f(1)"


def test_arithmetic_precedence():
    assert parse_term("1 + 2 * 3") == Compound("+", (Num(1), Compound("*", (Num(2), Num(3)))))
    assert parse_term("8 - 2 - 1") == Compound("-", (Compound("-", (Num(8), Num(2))), Num(1)))
    assert parse_term("-3") == Num(-3)


def test_anonymous_variables_are_distinct():
    (c,) = parse_program("p(_, _).").clauses
    a, b = c.head.args
    assert a != b


def test_source_ids_are_consecutive():
    prog = parse_program("a.\nb :- a.\nc.", "t.pl")
    assert [c.source_id for c in prog.clauses] == [0, 1, 2]
    assert {c.source_name for c in prog.clauses} == {"t.pl"}


@pytest.mark.parametrize("text, line, col", [
    ("X.", 1, 1),
    ("a :- b", 1, 7),
    ("f(X) :- .", 1, 9),
    ("p(a).\nq(b) r.", 2, 6),
    ("p(a) :- 1 + 2.", 1, 9),
])
def test_syntax_error_positions(text, line, col):
    with pytest.raises(SyntaxErrorAt) as err:
        parse_program(text)
    assert (err.value.line, err.value.col) == (line, col)


def test_parse_query_single_goal():
    (g,) = parse_query("drop_classes(priyesh, 01, Y)")
    assert g == Compound("drop_classes", (Atom("priyesh"), Num(1), Var("Y")))


def test_parse_query_conjunction():
    assert parse_query("a, b") == [Atom("a"), Atom("b")]


def test_parse_query_trailing_period():
    (g,) = parse_query("dineAt(priyesh, 1300, monday, Y).")
    assert g.functor == "dineAt" and len(g.args) == 4


def test_parse_query_rejects_junk():
    with pytest.raises(ParseError) as err:
        parse_query("p(")
    assert err.value.col == 3
    with pytest.raises(ParseError):
        parse_query("a. b")


def test_parse_clause_adds_missing_period():
    c = parse_clause("dining_hall(oakes)")
    assert c.head == Compound("dining_hall", (Atom("oakes"),))
    with pytest.raises(ParseError):
        parse_clause("a. b.")


# --- printing --------------------------------------------------------------

def test_print_query_round_trip():
    assert print_term(parse_term("study_place(priyesh, Y)")) == "study_place(priyesh, Y)"


def test_print_answer_list():
    assert print_term(ListTerm((Num(29), Atom("jan")))) == "[29, jan]"


def test_print_renamed_variable():
    assert print_term(Var("X", 7)) == "X_7"


def test_print_keeps_needed_parentheses():
    for text in ["f(X - (Y - Z))", "(1 + 2) * 3", "f((a > b))", "[(X = Y)]", "X is 7 // 2"]:
        assert print_term(parse_term(text)) == text


def test_print_clause_layout():
    c = parse_clause("isOpen(X, H, D) :- openingHours(X, D, O, C), H > O, H < C.")
    assert print_clause(c) == (
        "isOpen(X, H, D) :-\n    openingHours(X, D, O, C),\n    H > O,\n    H < C."
    )


def test_print_program_separates_groups():
    text = print_program(parse_program("a(1).\na(2).\nb :- a(1)."))
    assert text == "a(1).\na(2).\n\nb :-\n    a(1).\n"


@settings(max_examples=150)
@given(terms())
def test_term_round_trip(t):
    assert parse_term(print_term(t)) == t


@settings(max_examples=100)
@given(programs)
def test_program_round_trip(clauses):
    text = print_program(clauses)
    assert list(parse_program(text).clauses) == list(clauses)


def test_shipped_kb_is_canonical_after_one_pass():
    raw = DEFAULT_KB.read_text(encoding="utf-8")
    once = print_program(parse_program(raw))
    assert print_program(parse_program(once)) == once
    assert parse_program(once).clauses == parse_program(raw).clauses


ILLEGAL = "$@#!~&?^;{}"


def _code_positions(text):
    # offsets outside comments and not on whitespace
    out, in_comment = [], False
    for i, ch in enumerate(text):
        if ch == "%":
            in_comment = True
        elif ch == "\n":
            in_comment = False
        elif not in_comment and not ch.isspace():
            out.append(i)
    return out


def test_corruption_reports_the_corrupted_line():
    text = DEFAULT_KB.read_text(encoding="utf-8")
    rng = random.Random(20240)
    positions = _code_positions(text)
    for _ in range(200):
        i = rng.choice(positions)
        corrupted = text[:i] + rng.choice(ILLEGAL) + text[i + 1:]
        with pytest.raises(SyntaxErrorAt) as err:
            parse_program(corrupted)
        assert err.value.line == text.count("\n", 0, i) + 1

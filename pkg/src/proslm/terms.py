"""Terms, clauses, substitutions and unification.

Every value here is immutable. ``KnowledgeBase`` snapshots are immutable as
well: ``assert_clause`` and ``retract_clause`` return a new snapshot, so a
query that already holds a reference keeps seeing a consistent KB.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from typing import Optional, Union

NAME_RE = re.compile(r"[a-z][a-zA-Z0-9_]*\Z")
VAR_RE = re.compile(r"[A-Z_][a-zA-Z0-9_]*\Z")

COMPARISON_OPS = (">", "<", ">=", "=<", "=", "is")
ARITH_OPS = ("+", "-", "*", "//")
OPERATORS = COMPARISON_OPS + ARITH_OPS


@dataclass(frozen=True)
class Atom:
    name: str

    def __post_init__(self):
        if not NAME_RE.match(self.name):
            raise ValueError(f"invalid atom name: {self.name!r}")


@dataclass(frozen=True)
class Num:
    value: int

    def __post_init__(self):
        if not isinstance(self.value, int) or isinstance(self.value, bool):
            raise TypeError(f"Num holds integers only, got {self.value!r}")


@dataclass(frozen=True)
class Var:
    name: str
    generation: int = 0

    def __post_init__(self):
        if not VAR_RE.match(self.name):
            raise ValueError(f"invalid variable name: {self.name!r}")


@dataclass(frozen=True)
class Compound:
    functor: str
    args: tuple

    def __post_init__(self):
        if not isinstance(self.args, tuple):
            object.__setattr__(self, "args", tuple(self.args))
        if not self.args:
            raise ValueError("compound terms need at least one argument")
        if self.functor in OPERATORS:
            if len(self.args) != 2:
                raise ValueError(f"operator {self.functor} is binary")
        elif not NAME_RE.match(self.functor):
            raise ValueError(f"invalid functor: {self.functor!r}")

    @property
    def arity(self) -> int:
        return len(self.args)


@dataclass(frozen=True)
class ListTerm:
    """``[e1, ..., en | tail]``. A ``None`` tail is a proper list.

    The tail is normalised on construction so it is never itself a list.
    """

    elements: tuple = ()
    tail: Optional["Term"] = None

    def __post_init__(self):
        elements = tuple(self.elements)
        tail = self.tail
        while isinstance(tail, ListTerm):
            elements += tail.elements
            tail = tail.tail
        if tail is not None and not elements:
            raise ValueError("a list with a tail needs at least one element")
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "tail", tail)


Term = Union[Atom, Num, Var, Compound, ListTerm]
EMPTY_LIST = ListTerm()


def _compound(functor: str, args: tuple) -> Compound:
    # skips validation; only for rebuilding a term that was already valid
    c = object.__new__(Compound)
    object.__setattr__(c, "functor", functor)
    object.__setattr__(c, "args", args)
    return c


def _var(name: str, generation: int) -> Var:
    v = object.__new__(Var)
    object.__setattr__(v, "name", name)
    object.__setattr__(v, "generation", generation)
    return v


def indicator(term: Term) -> tuple[str, int]:
    """(functor, arity) key used for clause lookup."""
    if isinstance(term, Atom):
        return term.name, 0
    if isinstance(term, Compound):
        return term.functor, len(term.args)
    raise TypeError(f"not a callable term: {term!r}")


def term_vars(term: Term) -> Iterator[Var]:
    """Variables of ``term`` in left-to-right order, repeats included."""
    if isinstance(term, Var):
        yield term
    elif isinstance(term, Compound):
        for arg in term.args:
            yield from term_vars(arg)
    elif isinstance(term, ListTerm):
        for el in term.elements:
            yield from term_vars(el)
        if term.tail is not None:
            yield from term_vars(term.tail)


def unique_vars(terms: Iterable[Term]) -> list[Var]:
    seen: dict[Var, None] = {}
    for t in terms:
        _collect_vars(t, seen)
    return list(seen)


def _collect_vars(term: Term, acc: dict) -> None:
    kind = type(term)
    if kind is Var:
        acc[term] = None
    elif kind is Compound:
        for arg in term.args:
            _collect_vars(arg, acc)
    elif kind is ListTerm:
        for el in term.elements:
            _collect_vars(el, acc)
        if term.tail is not None:
            _collect_vars(term.tail, acc)


def is_ground(term: Term) -> bool:
    return next(term_vars(term), None) is None


@dataclass(frozen=True)
class Clause:
    head: Term
    body: tuple = ()
    source_name: str = field(default="", compare=False)
    source_id: int = field(default=-1, compare=False)

    def __post_init__(self):
        if not isinstance(self.head, (Atom, Compound)) or (
            isinstance(self.head, Compound) and self.head.functor in OPERATORS
        ):
            raise ValueError(f"clause head must be an atom or compound: {self.head!r}")
        body = tuple(self.body)
        for lit in body:
            if not isinstance(lit, (Atom, Compound)):
                raise ValueError(f"body literal must be callable: {lit!r}")
        object.__setattr__(self, "body", body)

    @property
    def is_fact(self) -> bool:
        return not self.body

    @property
    def key(self) -> tuple[str, int]:
        return indicator(self.head)


class Substitution(Mapping):
    """Immutable finite map from variables to terms.

    Substitutions built through :func:`unify` and :func:`compose` are kept
    idempotent, so :meth:`apply` needs a single pass. The one exception is a
    cyclic binding accepted with the occurs check disabled.
    """

    __slots__ = ("_map", "_hash")

    def __init__(self, bindings: Mapping[Var, Term] | Iterable[tuple[Var, Term]] = ()):
        m = dict(bindings)
        for v, t in m.items():
            if not isinstance(v, Var):
                raise TypeError(f"substitution keys must be variables, got {v!r}")
            if v == t:
                raise ValueError(f"variable {v} bound to itself")
        self._map = m
        self._hash = None

    def __getitem__(self, var: Var) -> Term:
        return self._map[var]

    def __iter__(self):
        return iter(self._map)

    def __len__(self) -> int:
        return len(self._map)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._map.items()))
        return self._hash

    def __eq__(self, other):
        if isinstance(other, Substitution):
            return self._map == other._map
        return NotImplemented

    def __repr__(self):
        inner = ", ".join(f"{v!r}: {t!r}" for v, t in self._map.items())
        return f"Substitution({{{inner}}})"

    def apply(self, term: Term) -> Term:
        return apply(self, term)

    def restrict(self, variables: Iterable[Var]) -> "Substitution":
        return Substitution((v, self._map[v]) for v in variables if v in self._map)

    def _bind(self, var: Var, value: Term) -> "Substitution":
        """Extend with ``var -> value``; ``value`` must already be applied."""
        single = {var: value}
        new = {}
        for v, t in self._map.items():
            if type(t) is not Atom and type(t) is not Num:
                t = _apply(single, t)
                if t == v:
                    continue
            new[v] = t
        new[var] = value
        out = Substitution.__new__(Substitution)
        out._map = new
        out._hash = None
        return out


EMPTY = Substitution()


def _apply(m: Mapping[Var, Term], term: Term) -> Term:
    kind = type(term)
    if kind is Atom or kind is Num:
        return term
    if kind is Var:
        return m.get(term, term)
    if kind is Compound:
        args = tuple([_apply(m, a) for a in term.args])
        if args == term.args:
            return term
        return _compound(term.functor, args)
    if isinstance(term, ListTerm):
        elements = tuple(_apply(m, e) for e in term.elements)
        tail = None if term.tail is None else _apply(m, term.tail)
        if elements == term.elements and tail == term.tail:
            return term
        return ListTerm(elements, tail)
    return term


def apply(s: Mapping[Var, Term], term: Term) -> Term:
    if not s:
        return term
    m = s._map if isinstance(s, Substitution) else s
    return _apply(m, term)


def occurs(var: Var, term: Term) -> bool:
    return any(v == var for v in term_vars(term))


def unify(t1: Term, t2: Term, s: Substitution = EMPTY, occurs_check: bool = False) -> Optional[Substitution]:
    """Most general unifier of ``t1`` and ``t2`` extending ``s``, or ``None``.

    A variable-variable pair binds the left variable to the right one.
    """
    stack = [(apply(s, t1), apply(s, t2))]
    while stack:
        a, b = stack.pop()
        if a == b:
            continue
        ka, kb = type(a), type(b)
        if ka is Var or kb is Var:
            var, val = (a, b) if ka is Var else (b, a)
            if occurs_check and occurs(var, val):
                return None
            s = s._bind(var, val)
            if stack:
                single = {var: val}
                stack = [(_apply(single, x), _apply(single, y)) for x, y in stack]
        elif ka is Compound and kb is Compound:
            if a.functor != b.functor or len(a.args) != len(b.args):
                return None
            stack.extend(zip(reversed(a.args), reversed(b.args)))
        elif ka is ListTerm and kb is ListTerm:
            pairs = _unify_lists(a, b)
            if pairs is None:
                return None
            stack.extend(reversed(pairs))
        else:
            # distinct atoms, numbers, or mismatched kinds
            return None
    return s


def _unify_lists(a: ListTerm, b: ListTerm) -> Optional[list[tuple[Term, Term]]]:
    n = min(len(a.elements), len(b.elements))
    pairs = list(zip(a.elements[:n], b.elements[:n]))
    # at least one side is exhausted, so at most one rest is a non-empty list
    left = _rest(a.elements[n:], a.tail)
    right = _rest(b.elements[n:], b.tail)
    if left == right:
        return pairs
    if isinstance(left, ListTerm) and isinstance(right, ListTerm):
        return None
    pairs.append((left, right))
    return pairs


def _rest(elements: tuple, tail: Optional[Term]) -> Term:
    if elements:
        return ListTerm(elements, tail)
    return EMPTY_LIST if tail is None else tail


def compose(s1: Substitution, s2: Substitution, occurs_check: bool = False) -> Substitution:
    """Idempotent substitution satisfying the bindings of both ``s1`` and ``s2``.

    Raises ``SubstitutionConflict`` when the two disagree.
    """
    out = s1
    for var, term in s2.items():
        nxt = unify(var, term, out, occurs_check=occurs_check)
        if nxt is None:
            raise SubstitutionConflict(f"cannot compose: {var!r} -> {term!r} conflicts")
        out = nxt
    return out


class SubstitutionConflict(RuntimeError):
    pass


def rename_apart(clause: Clause, generation: int) -> Clause:
    """Copy of ``clause`` with every variable moved to ``generation``."""
    variables = unique_vars((clause.head, *clause.body))
    if not variables:
        return clause
    mapping = {v: _var(v.name, generation) for v in variables}
    return Clause(
        _apply(mapping, clause.head),
        tuple(_apply(mapping, lit) for lit in clause.body),
        clause.source_name,
        clause.source_id,
    )


def is_variant(t1: Term, t2: Term) -> bool:
    """True when the terms are equal up to a bijective renaming of variables."""
    fwd: dict[Var, Var] = {}
    bwd: dict[Var, Var] = {}
    stack = [(t1, t2)]
    while stack:
        a, b = stack.pop()
        if isinstance(a, Var) and isinstance(b, Var):
            if fwd.setdefault(a, b) != b or bwd.setdefault(b, a) != a:
                return False
        elif isinstance(a, Compound) and isinstance(b, Compound):
            if a.functor != b.functor or len(a.args) != len(b.args):
                return False
            stack.extend(zip(a.args, b.args))
        elif isinstance(a, ListTerm) and isinstance(b, ListTerm):
            if len(a.elements) != len(b.elements) or (a.tail is None) != (b.tail is None):
                return False
            stack.extend(zip(a.elements, b.elements))
            if a.tail is not None:
                stack.append((a.tail, b.tail))
        elif a != b or isinstance(a, Var) or isinstance(b, Var):
            return False
    return True


class ClauseNotFound(LookupError):
    pass


class KnowledgeBase:
    """Ordered clause store with a (functor, arity) index.

    Instances are snapshots; mutating operations return a new instance.
    """

    __slots__ = ("clauses", "index")

    def __init__(self, clauses: Iterable[Clause] = ()):
        self.clauses: tuple[Clause, ...] = tuple(clauses)
        index: dict[tuple[str, int], list[int]] = {}
        for i, c in enumerate(self.clauses):
            index.setdefault(c.key, []).append(i)
        self.index = {k: tuple(v) for k, v in index.items()}

    def __len__(self):
        return len(self.clauses)

    def __iter__(self):
        return iter(self.clauses)

    def __repr__(self):
        return f"KnowledgeBase({len(self.clauses)} clauses)"

    def lookup(self, key: tuple[str, int]) -> list[Clause]:
        return [self.clauses[i] for i in self.index.get(key, ())]

    def predicates(self) -> list[tuple[str, int]]:
        return list(self.index)

    def assert_clause(self, clause: Clause) -> "KnowledgeBase":
        """Append ``clause`` at the end of its predicate group."""
        if clause.source_id < 0:
            clause = Clause(clause.head, clause.body, clause.source_name or "user", len(self.clauses))
        positions = self.index.get(clause.key)
        at = positions[-1] + 1 if positions else len(self.clauses)
        return KnowledgeBase(self.clauses[:at] + (clause,) + self.clauses[at:])

    def retract_clause(self, clause: Clause) -> "KnowledgeBase":
        """Remove the first structurally equal clause."""
        for i in self.index.get(clause.key, ()):
            if self.clauses[i] == clause:
                return KnowledgeBase(self.clauses[:i] + self.clauses[i + 1:])
        raise ClauseNotFound(f"no clause matches {clause.head!r}")

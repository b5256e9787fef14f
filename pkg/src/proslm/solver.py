"""Depth-first SLD resolution with goal-tree explanations.

Goals are solved left to right and clauses are tried in source order, the
same search order as a standard Prolog engine. Every solution carries the
derivation tree that produced it; a failed search carries, for each node,
the last clause attempt that got furthest through its body.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

from .parser import print_term
from .terms import (
    EMPTY,
    Atom,
    Compound,
    KnowledgeBase,
    ListTerm,
    Num,
    Substitution,
    Term,
    Var,
    apply,
    indicator,
    rename_apart,
    unify,
    unique_vars,
)

PROVED = "proved"
FAILED = "failed"
DEPTH_EXCEEDED = "depth_exceeded"
BUILTIN_PROVED = "builtin_proved"
BUILTIN_FAILED = "builtin_failed"

BUILTINS = frozenset({">", "<", ">=", "=<", "=", "is"})


class SolveError(Exception):
    pass


class ResourceError(SolveError):
    """The search ran out of depth or steps before reaching a verdict."""

    def __init__(self, kind: str, tree: "GoalTree", steps: int):
        self.kind = kind
        self.tree = tree
        self.steps = steps
        super().__init__(f"{kind} limit exceeded after {steps} steps")


class InstantiationError(SolveError):
    pass


class EvaluationError(SolveError):
    pass


@dataclass(frozen=True)
class SolveConfig:
    depth_limit: int = 256
    max_steps: int = 100_000
    first_solution_only: bool = True
    occurs_check: bool = False
    # answer tables per call variant; terminates on function-free programs
    tabling: bool = False

    def __post_init__(self):
        if self.depth_limit <= 0 or self.max_steps <= 0:
            raise ValueError("solver limits must be positive")


@dataclass
class GoalTree:
    goal: Term
    resolved_goal: Term
    status: str
    clause_used: Optional[tuple[str, int]] = None
    children: list["GoalTree"] = field(default_factory=list)
    attempts: int = 0

    @property
    def proved(self) -> bool:
        return self.status in (PROVED, BUILTIN_PROVED)

    def walk(self) -> Iterator["GoalTree"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def size(self) -> int:
        return sum(1 for _ in self.walk())

    def to_dict(self) -> dict:
        return {
            "goal": print_term(self.goal),
            "resolved_goal": print_term(self.resolved_goal),
            "status": self.status,
            "clause": None if self.clause_used is None else _clause_ref(self.clause_used),
            "attempts": self.attempts,
            "children": [c.to_dict() for c in self.children],
        }


@dataclass
class SolveResult:
    truth: bool
    answer: Substitution
    tree: GoalTree
    steps: int
    alternatives: tuple = ()

    def to_dict(self) -> dict:
        return {
            "truth": self.truth,
            "answer": {print_term(v): print_term(t) for v, t in self.answer.items()},
            "steps": self.steps,
            "tree": self.tree.to_dict(),
        }


def _clause_ref(ref: tuple[str, int]) -> str:
    return f"{ref[0]}#{ref[1]}"


class _StepBudget(Exception):
    def __init__(self):
        self.partial = None


class _Outcome:
    """Filled in by a goal or body generator once it is exhausted."""

    __slots__ = ("failed", "partial")

    def __init__(self):
        self.failed: Optional[GoalTree] = None
        self.partial: list[GoalTree] = []


class _Table:
    __slots__ = ("answers", "seen", "complete", "index", "failed", "stamp", "low", "passes", "mark")

    def __init__(self):
        self.answers: list[tuple[Term, GoalTree]] = []
        self.seen: set = set()
        self.complete = False
        self.index: Optional[int] = None  # position on the active stack
        self.failed: Optional[GoalTree] = None
        # answer count at the end of the last fill, and the lowest active call it read
        self.stamp = -1
        self.low = sys.maxsize
        self.passes = 0
        # (outer call this table depends on, its pass number) at the last fill
        self.mark: Optional[tuple["_Table", int]] = None

    def fresh(self, added: int) -> bool:
        """Would a fill now give the same answers as the last one?"""
        if self.stamp == added:
            return True
        if self.mark is None:
            return False
        dep, passes = self.mark
        return dep.index is not None and dep.passes == passes


def _variant_key(t: Term) -> Term:
    variables = unique_vars([t])
    if not variables:
        return t
    return apply({v: Var("_T", i + 1) for i, v in enumerate(variables)}, t)


class _Search:
    def __init__(self, kb: KnowledgeBase, cfg: SolveConfig):
        self.kb = kb
        self.cfg = cfg
        self.steps = 0
        self.generation = 0
        self.depth_hit = False
        # tabling state
        self.tables: dict[Term, _Table] = {}
        self.active: list[_Table] = []
        self.pending: list[_Table] = []
        self.added = 0
        self.low = sys.maxsize

    def tick(self):
        self.steps += 1
        if self.steps > self.cfg.max_steps:
            raise _StepBudget()

    def goal(self, goal: Term, s: Substitution, depth: int, out: _Outcome):
        g = apply(s, goal)
        if depth > self.cfg.depth_limit:
            self.depth_hit = True
            out.failed = GoalTree(g, g, DEPTH_EXCEEDED)
            return
        if isinstance(g, Var):
            raise InstantiationError(f"unbound goal {print_term(g)}")
        if not isinstance(g, (Atom, Compound)):
            raise EvaluationError(f"goal is not callable: {print_term(g)}")
        if isinstance(g, Compound) and g.functor in BUILTINS:
            self.tick()
            s2 = eval_builtin(g, s, self.cfg.occurs_check)
            if s2 is None:
                out.failed = GoalTree(g, g, BUILTIN_FAILED, None, [], 1)
                return
            yield s2, GoalTree(g, apply(s2, g), BUILTIN_PROVED, None, [], 1)
            out.failed = GoalTree(g, g, BUILTIN_FAILED, None, [], 1)
            return
        if self.cfg.tabling:
            yield from self.tabled(g, s, depth, out)
        else:
            yield from self.resolve(g, s, depth, out)

    def resolve(self, g: Term, s: Substitution, depth: int, out: _Outcome):
        attempts = 0
        last_clause = None
        last_children: list[GoalTree] = []
        try:
            for clause in self.kb.lookup(indicator(g)):
                self.tick()
                attempts += 1
                self.generation += 1
                renamed = rename_apart(clause, self.generation)
                s1 = unify(renamed.head, g, s, self.cfg.occurs_check)
                if s1 is None:
                    continue
                last_clause = (clause.source_name, clause.source_id)
                body_out = _Outcome()
                for s2, children in self.body(renamed.body, s1, depth + 1, body_out):
                    yield s2, GoalTree(g, apply(s2, g), PROVED, last_clause, children, attempts)
                last_children = body_out.partial
        except _StepBudget as e:
            e.partial = GoalTree(g, g, FAILED, last_clause, e.partial or [], attempts)
            raise
        out.failed = GoalTree(g, g, FAILED, last_clause, last_children, attempts)

    def tabled(self, g: Term, s: Substitution, depth: int, out: _Outcome):
        """Answer ``g`` from its call table, filling the table to a fixpoint first.

        A call that meets a variant of itself still under evaluation consumes
        the answers found so far; the outermost such call re-runs its clauses
        until no table anywhere gains an answer, then marks the whole group
        complete.
        """
        key = _variant_key(g)
        t = self.tables.get(key)
        if t is None:
            t = self.tables[key] = _Table()
        if not t.complete:
            if t.index is not None:
                self.low = min(self.low, t.index)
            elif t.fresh(self.added):
                self.low = min(self.low, t.low)
            else:
                self.fill(t, g, depth)
        # answers appended while this loop runs are picked up too
        i = 0
        while i < len(t.answers):
            answer, tree = t.answers[i]
            i += 1
            self.generation += 1
            s2 = unify(g, _fresh(answer, self.generation), s, self.cfg.occurs_check)
            if s2 is not None:
                yield s2, replace(tree, goal=g, resolved_goal=apply(s2, g))
        out.failed = t.failed or GoalTree(g, g, FAILED)

    def fill(self, t: _Table, g: Term, depth: int):
        t.index = len(self.active)
        self.active.append(t)
        pending_mark = len(self.pending)
        outer_low = self.low
        low = sys.maxsize
        # a ground call has at most one answer, so its first one is final
        ground = not unique_vars([g])
        done = False
        try:
            while True:
                t.passes += 1
                before = self.added
                self.low = sys.maxsize
                o = _Outcome()
                proofs = self.resolve(g, EMPTY, depth, o)
                try:
                    for s2, tree in proofs:
                        answer = apply(s2, g)
                        k = _variant_key(answer)
                        if k not in t.seen:
                            t.seen.add(k)
                            t.answers.append((answer, _finalize(tree, s2)))
                            self.added += 1
                        if ground:
                            break
                finally:
                    proofs.close()
                t.failed = o.failed
                low = min(low, self.low)
                settled = self.added == before
                if ground and t.answers:
                    break
                # a call that reads an outer one leaves iterating to the outer call
                if settled or low < t.index:
                    break
            done = True
        finally:
            self.active.pop()
            t.index = None
            if not done:
                t.stamp, t.mark = -1, None
        if ground and t.answers:
            t.complete = True
            t.mark = None
            # tables filled under this one may have read it before it was proved
            for p in self.pending[pending_mark:]:
                p.stamp, p.mark = -1, None
            del self.pending[pending_mark:]
            self.low = outer_low
            return
        if low >= len(self.active):
            # no dependency on a call further out: this group is closed
            t.complete = True
            for p in self.pending[pending_mark:]:
                p.complete = True
            del self.pending[pending_mark:]
            t.mark = None
        else:
            self.pending.append(t)
            dep = self.active[low]
            t.mark = (dep, dep.passes)
        t.stamp = self.added if settled else -1
        t.low = low
        self.low = min(outer_low, low)

    def body(self, goals: tuple, s: Substitution, depth: int, out: _Outcome):
        if not goals:
            yield s, []
            return
        last = len(goals) - 1
        first = _Outcome()
        stack = [(self.goal(goals[0], s, depth, first), first)]
        trees: list[GoalTree] = []
        best: list[GoalTree] = []
        while stack:
            k = len(stack) - 1
            it, o = stack[-1]
            try:
                s_k, t_k = next(it)
            except StopIteration:
                stack.pop()
                partial = trees[:k] + [o.failed]
                if len(partial) > len(best):
                    best = partial
                continue
            except _StepBudget as e:
                e.partial = trees[:k] + ([e.partial] if e.partial else [])
                raise
            del trees[k:]
            trees.append(t_k)
            if k == last:
                yield s_k, list(trees)
            else:
                nxt = _Outcome()
                stack.append((self.goal(goals[k + 1], s_k, depth, nxt), nxt))
        out.partial = best


def _fresh(t: Term, generation: int) -> Term:
    variables = unique_vars([t])
    if not variables:
        return t
    return apply({v: Var(v.name, generation) for v in variables}, t)


def _finalize(node: GoalTree, s: Substitution) -> GoalTree:
    if not node.proved:
        return node
    return GoalTree(
        node.goal,
        apply(s, node.resolved_goal),
        node.status,
        node.clause_used,
        [_finalize(c, s) for c in node.children],
        node.attempts,
    )


def _ensure_stack(depth_limit: int):
    # each tree level costs two nested generator frames
    needed = 4 * depth_limit + 1000
    if sys.getrecursionlimit() < needed:
        sys.setrecursionlimit(needed)


def solve(kb: KnowledgeBase, goals: list[Term], cfg: SolveConfig = SolveConfig()) -> SolveResult:
    """Prove the conjunction ``goals`` against ``kb``.

    Raises ``ResourceError`` when no proof was found and the search was cut
    short by the depth limit, or whenever the step budget runs out.
    """
    goals = list(goals)
    if not goals:
        raise ValueError("nothing to solve")
    _ensure_stack(cfg.depth_limit)
    search = _Search(kb, cfg)
    query_vars = [v for v in unique_vars(goals) if not v.name.startswith("_")]
    single = len(goals) == 1
    root_goal = goals[0] if single else Compound("query", tuple(goals))

    out = _Outcome()
    if single:
        gen = search.goal(goals[0], EMPTY, 1, out)
    else:
        gen = ((s, GoalTree(root_goal, apply(s, root_goal), PROVED, None, ch, 1))
               for s, ch in search.body(tuple(goals), EMPTY, 2, out))

    found: list[tuple[Substitution, GoalTree]] = []
    try:
        for s, tree in gen:
            found.append((s, tree))
            if cfg.first_solution_only:
                break
    except _StepBudget as e:
        partial = e.partial
        if not single:
            partial = GoalTree(root_goal, root_goal, FAILED, None, e.partial or [], 1)
        if not found:
            raise ResourceError("steps", partial, search.steps) from None

    if not found:
        tree = out.failed if single else GoalTree(root_goal, root_goal, FAILED, None, out.partial, 1)
        if search.depth_hit:
            raise ResourceError("depth", tree, search.steps)
        return SolveResult(False, EMPTY, tree, search.steps)

    def project(s: Substitution) -> Substitution:
        return Substitution((v, apply(s, v)) for v in query_vars if apply(s, v) != v)

    s, tree = found[0]
    return SolveResult(
        True,
        project(s),
        _finalize(tree, s),
        search.steps,
        tuple(project(s2) for s2, _ in found[1:]),
    )


def evaluate(term: Term, s: Substitution) -> int:
    """Integer value of an arithmetic expression."""
    t = apply(s, term)
    if isinstance(t, Num):
        return t.value
    if isinstance(t, Var):
        raise InstantiationError(f"arguments are not sufficiently instantiated: {print_term(t)}")
    if isinstance(t, Compound) and t.functor in ("+", "-", "*", "//"):
        a, b = (evaluate(x, s) for x in t.args)
        if t.functor == "+":
            return a + b
        if t.functor == "-":
            return a - b
        if t.functor == "*":
            return a * b
        if b == 0:
            raise EvaluationError("integer division by zero")
        # truncating division, as in Prolog's //
        q = abs(a) // abs(b)
        return q if (a >= 0) == (b >= 0) else -q
    raise EvaluationError(f"not an integer expression: {print_term(t)}")


def eval_builtin(goal: Term, s: Substitution = EMPTY, occurs_check: bool = False) -> Optional[Substitution]:
    """Run a builtin goal; returns the extended substitution, or None on failure."""
    if not isinstance(goal, Compound) or goal.functor not in BUILTINS:
        raise ValueError(f"not a builtin: {goal!r}")
    left, right = goal.args
    op = goal.functor
    if op == "=":
        return unify(left, right, s, occurs_check)
    if op == "is":
        return unify(left, Num(evaluate(right, s)), s, occurs_check)
    a, b = evaluate(left, s), evaluate(right, s)
    ok = {">": a > b, "<": a < b, ">=": a >= b, "=<": a <= b}[op]
    return s if ok else None


_GLYPHS = {
    PROVED: "[+]",
    BUILTIN_PROVED: "[+]",
    FAILED: "[-]",
    BUILTIN_FAILED: "[-]",
    DEPTH_EXCEEDED: "[!]",
}


def render_goal_tree(tree: GoalTree) -> str:
    lines: list[str] = []

    def visit(node: GoalTree, indent: int):
        parts = [" " * indent + print_term(node.resolved_goal), _GLYPHS[node.status]]
        if node.status in (BUILTIN_PROVED, BUILTIN_FAILED):
            parts.append("builtin")
        elif node.clause_used is not None:
            parts.append(_clause_ref(node.clause_used))
        if node.status == FAILED:
            parts.append(f"(attempts: {node.attempts})")
        elif node.status == DEPTH_EXCEEDED:
            parts.append("(depth limit)")
        lines.append(" ".join(parts))
        for child in node.children:
            visit(child, indent + 2)

    visit(tree, 0)
    return "\n".join(lines) + "\n"


def to_python(t: Term):
    """Plain Python value for display: atoms become str, lists become list."""
    if isinstance(t, Atom):
        return t.name
    if isinstance(t, Num):
        return t.value
    if isinstance(t, ListTerm) and t.tail is None:
        return [to_python(e) for e in t.elements]
    return print_term(t)


def format_result(result: SolveResult) -> str:
    """``{'truth': True, 'Y': [...]}`` style summary of a result."""
    shown = {"truth": result.truth}
    for v, t in result.answer.items():
        shown[print_term(v)] = to_python(t)
    return repr(shown)

"""The two end-to-end flows: explainable context gathering and fact validation.

``ask``: question -> goals -> proofs -> percept values -> context sentences
-> generator prompt -> response.

``validate``: statement -> ground goals -> one proof attempt per goal.
A goal that cannot be proved is reported as not proven, which may mean the
claim is false or that the KB does not cover it.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .llm import GENERATOR_TEMPERATURE, ChatClient, ChatRequest
from .parser import parse_query, print_term
from .percepts import ClockReading, PerceptReading, PerceptRegistry, resolve_percepts
from .solver import GoalTree, ResourceError, SolveConfig, SolveError, solve
from .terms import KnowledgeBase, Substitution
from .translator import PromptTemplate, TranslationResult, Translator, load_templates, vocabulary_of

CAVEAT = "a False value means either the statement is false or the knowledge base is incomplete"
NO_CONTEXT = "No supporting context was found in the knowledge base."

PROVED = "proved"
NOT_PROVEN = "not_proven"


class PromptTooLarge(ValueError):
    kind = "prompt_too_large"


@dataclass
class PipelineConfig:
    solver: SolveConfig = field(default_factory=SolveConfig)
    domain: str = "ucsc"
    user: str = "priyesh"
    templates: Optional[dict[str, PromptTemplate]] = None
    # rough budget; prompt tokens are estimated as characters / 4
    max_prompt_tokens: int = 3000
    generator_max_tokens: int = 512
    workers: int = 4

    def get_templates(self) -> dict[str, PromptTemplate]:
        if self.templates is None:
            self.templates = load_templates()
        return self.templates


def make_translator(kb: KnowledgeBase, client: ChatClient, cfg: PipelineConfig) -> Translator:
    return Translator(client, cfg.get_templates(), cfg.domain, cfg.user, vocabulary_of(kb))


@dataclass
class GoalOutcome:
    goal: str
    truth: bool
    answer: Substitution
    tree: Optional[GoalTree]
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "goal": self.goal,
            "truth": self.truth,
            "answer": {print_term(v): print_term(t) for v, t in self.answer.items()},
            "error": self.error,
            "tree": None if self.tree is None else self.tree.to_dict(),
        }


def _run_goal(kb: KnowledgeBase, goal: str, cfg: SolveConfig) -> GoalOutcome:
    try:
        r = solve(kb, parse_query(goal), cfg)
    except ResourceError as exc:
        return GoalOutcome(goal, False, Substitution(), exc.tree, f"resource_error: {exc}")
    except SolveError as exc:
        return GoalOutcome(goal, False, Substitution(), None, f"{type(exc).__name__}: {exc}")
    return GoalOutcome(goal, r.truth, r.answer, r.tree)


@dataclass
class ContextItem:
    goal_index: int
    goal: str
    answer: Substitution
    percepts: list[PerceptReading]

    @property
    def text(self) -> str:
        lines = [self.goal]
        lines += [f"{print_term(v)} = {print_term(t)}" for v, t in self.answer.items()]
        lines += [str(r) for r in self.percepts if r.resolved]
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "goal_index": self.goal_index,
            "goal": self.goal,
            "answer": {print_term(v): print_term(t) for v, t in self.answer.items()},
            "percepts": [
                {"name": r.name, "value": None if r.value is None else print_term(r.value)}
                for r in self.percepts
            ],
            "text": self.text,
        }


@dataclass
class AskBundle:
    question: str
    now: ClockReading
    translation: TranslationResult
    outcomes: list[GoalOutcome]
    context: list[ContextItem]
    context_nl: list[str]
    context_sources: list[int]
    prompt: str
    response: str

    @property
    def goals(self) -> list[str]:
        return self.translation.goals

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "now": {"hour": self.now.hour, "day": self.now.day, "month": self.now.month},
            "goals": list(self.goals),
            "parse_failures": self.translation.to_dict()["parse_failures"],
            "solve_results": [o.to_dict() for o in self.outcomes],
            "resolved_context": [c.to_dict() for c in self.context],
            "context_nl": list(self.context_nl),
            "context_sources": list(self.context_sources),
            "prompt": self.prompt,
            "response": self.response,
        }


def generate_response(question: str, context_nl: list[str], client: ChatClient,
                      cfg: Optional[PipelineConfig] = None) -> tuple[str, str]:
    """Render the generator prompt and return ``(prompt, response)``."""
    cfg = cfg or PipelineConfig()
    context = "\n".join(f"- {s}" for s in context_nl) if context_nl else NO_CONTEXT
    system, user = cfg.get_templates()["generator"].render(domain=cfg.domain, query=question, context=context)
    prompt = f"{system}\n\n{user}"
    estimate = len(prompt) // 4 + 1
    if estimate > cfg.max_prompt_tokens:
        raise PromptTooLarge(f"prompt needs about {estimate} tokens, limit is {cfg.max_prompt_tokens}")
    req = ChatRequest.of(system, user, temperature=GENERATOR_TEMPERATURE, max_tokens=cfg.generator_max_tokens)
    return prompt, client.complete(req)


def ask(question: str, kb: KnowledgeBase, reg: PerceptRegistry, clock, client: ChatClient,
        cfg: Optional[PipelineConfig] = None) -> AskBundle:
    cfg = cfg or PipelineConfig()
    translator = make_translator(kb, client, cfg)
    now = clock.now()
    translation = translator.nl_query_to_goals(question, now)

    outcomes = [_run_goal(kb, g, cfg.solver) for g in translation.goals]
    context = []
    for i, o in enumerate(outcomes):
        if o.truth:
            answer, readings = resolve_percepts(o.answer, reg)
            context.append(ContextItem(i, o.goal, answer, readings))

    context_nl, sources = [], []
    for ci, sentences in enumerate(translator.goals_to_nl([c.text for c in context])):
        context_nl.extend(sentences)
        sources.extend([ci] * len(sentences))

    prompt, response = generate_response(question, context_nl, client, cfg)
    return AskBundle(question, now, translation, outcomes, context, context_nl, sources, prompt, response)


@dataclass
class FactVerdict:
    goal: str
    verdict: str
    tree: Optional[GoalTree]
    error: Optional[str] = None

    @property
    def label(self) -> str:
        return "True" if self.verdict == PROVED else "False"

    def to_dict(self) -> dict:
        return {
            "goal": self.goal,
            "verdict": self.verdict,
            "label": self.label,
            "error": self.error,
            "tree": None if self.tree is None else self.tree.to_dict(),
        }


@dataclass
class ValidationReport:
    statement: str
    fact_verdicts: list[FactVerdict]
    untestable: list[tuple[str, str]]
    overall: bool
    caveat: Optional[str]

    def render(self) -> str:
        lines = ["validation:"]
        lines += [f"{v.goal} ({v.label})" for v in self.fact_verdicts]
        lines += [f"{goal} (untestable: {why})" for goal, why in self.untestable]
        if self.caveat:
            lines.append(f"note: {self.caveat}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "statement": self.statement,
            "fact_verdicts": [v.to_dict() for v in self.fact_verdicts],
            "untestable": [{"goal": g, "reason": why} for g, why in self.untestable],
            "overall": self.overall,
            "caveat": self.caveat,
        }


def _check_fact(kb: KnowledgeBase, goal: str, cfg: SolveConfig) -> FactVerdict:
    o = _run_goal(kb, goal, cfg)
    return FactVerdict(goal, PROVED if o.truth else NOT_PROVEN, o.tree, o.error)


def validate(statement: str, kb: KnowledgeBase, client: ChatClient,
             cfg: Optional[PipelineConfig] = None) -> ValidationReport:
    cfg = cfg or PipelineConfig()
    translation = make_translator(kb, client, cfg).nl_facts_to_goals(statement)
    goals = translation.goals
    if cfg.workers > 1 and len(goals) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            verdicts = list(pool.map(lambda g: _check_fact(kb, g, cfg.solver), goals))
    else:
        verdicts = [_check_fact(kb, g, cfg.solver) for g in goals]
    # a statement with nothing testable is not confirmed
    overall = bool(verdicts) and all(v.verdict == PROVED for v in verdicts)
    caveat = None if overall else CAVEAT
    return ValidationReport(statement, verdicts, list(translation.parse_failures), overall, caveat)


def answer_and_validate(question: str, kb: KnowledgeBase, client: ChatClient,
                        cfg: Optional[PipelineConfig] = None) -> tuple[str, ValidationReport]:
    """Let the generator answer without KB context, then check its answer."""
    cfg = cfg or PipelineConfig()
    _, response = generate_response(question, [], client, cfg)
    return response, validate(response, kb, client, cfg)

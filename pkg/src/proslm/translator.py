"""Natural language <-> logic translation through prompt templates.

Templates live as text files (``prompts/<id>.txt``) with a ``[system]`` and
a ``[user]`` section. LLM replies are expected to be list-shaped; they are
cleaned with :func:`clean_llm_list` and each goal is checked by the parser.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .llm import TRANSLATOR_TEMPERATURE, ChatClient, ChatRequest
from .parser import SyntaxErrorAt, parse_query, print_term
from .percepts import ClockReading
from .terms import KnowledgeBase, is_ground

PLACEHOLDERS = {
    "query_to_logic": frozenset({"domain", "user", "now", "vocabulary", "query"}),
    "facts_to_logic": frozenset({"domain", "query"}),
    "logic_to_nl": frozenset({"context"}),
    "generator": frozenset({"domain", "query", "context"}),
}

_PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")


class TemplateError(ValueError):
    pass


class TranslationError(RuntimeError):
    kind = "translation_error"


class CleaningError(TranslationError):
    kind = "cleaning_error"

    def __init__(self, message: str, raw: str):
        self.raw = raw
        super().__init__(f"{message}: {raw!r}")


class TranslationEmpty(TranslationError):
    kind = "translation_empty"

    def __init__(self, result: "TranslationResult"):
        self.result = result
        detail = "; ".join(f"{s!r}: {why}" for s, why in result.parse_failures)
        super().__init__("no usable goals in translation" + (f" ({detail})" if detail else ""))


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    system_text: str
    user_text: str

    def __post_init__(self):
        if self.id not in PLACEHOLDERS:
            raise TemplateError(f"unknown template id {self.id!r}")
        found = set(_PLACEHOLDER_RE.findall(self.system_text + self.user_text))
        if found != PLACEHOLDERS[self.id]:
            raise TemplateError(
                f"template {self.id} uses {sorted(found)}, expected {sorted(PLACEHOLDERS[self.id])}"
            )

    @classmethod
    def parse(cls, template_id: str, text: str) -> "PromptTemplate":
        m = re.match(r"\s*\[system\]\n(.*?)\n\[user\]\n(.*)\Z", text, re.S)
        if m is None:
            raise TemplateError(f"template {template_id} needs [system] and [user] sections")
        return cls(template_id, m.group(1).strip(), m.group(2).rstrip("\n"))

    def render(self, **values: str) -> tuple[str, str]:
        missing = PLACEHOLDERS[self.id] - values.keys()
        if missing:
            raise TemplateError(f"missing values for {sorted(missing)}")

        def fill(text: str) -> str:
            return _PLACEHOLDER_RE.sub(lambda m: str(values[m.group(1)]), text)

        return fill(self.system_text), fill(self.user_text)


def load_templates(prompts_dir: Optional[Path] = None) -> dict[str, PromptTemplate]:
    out = {}
    for template_id in PLACEHOLDERS:
        if prompts_dir is None:
            text = resources.files("proslm").joinpath("prompts", f"{template_id}.txt").read_text(encoding="utf-8")
        else:
            text = (Path(prompts_dir) / f"{template_id}.txt").read_text(encoding="utf-8")
        out[template_id] = PromptTemplate.parse(template_id, text)
    return out


_FENCE_RE = re.compile(r"\A```[\w+-]*[ \t]*\n?(.*?)\n?```\Z", re.S)
_QUOTES = {"'": "'", '"': '"', "`": "`", "‘": "’", "“": "”"}
_BULLET_RE = re.compile(r"\A(?:[-*•]|\d+[.)])\s+")


def _split_top_level(body: str, raw: str) -> list[str]:
    items, buf = [], []
    depth = 0
    closing = None
    i = 0
    while i < len(body):
        ch = body[i]
        if closing is not None:
            buf.append(ch)
            if ch == "\\" and i + 1 < len(body):
                buf.append(body[i + 1])
                i += 2
                continue
            if ch == closing:
                # a quote only closes the item if a separator follows
                rest = body[i + 1:].lstrip()
                if not rest or rest[0] == ",":
                    closing = None
        elif ch in _QUOTES:
            closing = _QUOTES[ch]
            buf.append(ch)
        elif ch in "([":
            depth += 1
            buf.append(ch)
        elif ch in ")]":
            depth -= 1
            if depth < 0:
                raise CleaningError("unbalanced brackets", raw)
            buf.append(ch)
        elif ch == "," and depth == 0:
            items.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
        i += 1
    if closing is not None:
        raise CleaningError("unterminated quote", raw)
    if depth != 0:
        raise CleaningError("unbalanced brackets", raw)
    items.append("".join(buf))
    return items


def _clean_item(item: str) -> str:
    s = item.strip()
    if len(s) >= 2 and s[0] in _QUOTES and s[-1] == _QUOTES[s[0]]:
        s = s[1:-1].replace("\\'", "'").replace('\\"', '"').strip()
    if s.endswith("."):
        s = s[:-1].rstrip()
    return s


def clean_llm_list(raw: str) -> list[str]:
    """Pull the items out of a list-shaped LLM reply.

    Accepts a bracketed list (optionally inside a code fence) or one item
    per line. Items lose their quotes and any trailing period.
    """
    text = raw.strip()
    m = _FENCE_RE.match(text)
    if m:
        text = m.group(1).strip()
    if not text:
        return []
    if text.startswith("[") or text.endswith("]"):
        if not (text.startswith("[") and text.endswith("]")):
            raise CleaningError("unbalanced list brackets", raw)
        items = _split_top_level(text[1:-1], raw)
    else:
        items = [_BULLET_RE.sub("", line.strip()) for line in text.splitlines()]
    return [c for c in (_clean_item(i) for i in items) if c]


@dataclass
class TranslationResult:
    raw: str
    goals: list[str] = field(default_factory=list)
    parse_failures: list[tuple[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "raw": self.raw,
            "goals": list(self.goals),
            "parse_failures": [{"text": s, "reason": why} for s, why in self.parse_failures],
        }


def _canonical(goals) -> str:
    return ", ".join(print_term(g) for g in goals)


def _extract(raw: str, ground_only: bool) -> TranslationResult:
    result = TranslationResult(raw)
    for item in clean_llm_list(raw):
        try:
            goals = parse_query(item)
        except SyntaxErrorAt as exc:
            result.parse_failures.append((item, str(exc)))
            continue
        if ground_only and not all(is_ground(g) for g in goals):
            result.parse_failures.append((item, "non-ground"))
            continue
        result.goals.append(_canonical(goals))
    return result


def vocabulary_of(kb: KnowledgeBase) -> str:
    return ", ".join(f"{name}/{arity}" for name, arity in kb.predicates())


def describe_now(now: ClockReading) -> str:
    return f"hour {now.hour:04d}, day {now.day}, month {now.month}"


class Translator:
    def __init__(
        self,
        client: ChatClient,
        templates: Optional[dict[str, PromptTemplate]] = None,
        domain: str = "ucsc",
        user: str = "priyesh",
        vocabulary: str = "",
    ):
        self.client = client
        self.templates = templates or load_templates()
        self.domain = domain
        self.user = user
        self.vocabulary = vocabulary

    def _ask(self, template_id: str, **values) -> str:
        system, user = self.templates[template_id].render(**values)
        return self.client.complete(ChatRequest.of(system, user, temperature=TRANSLATOR_TEMPERATURE))

    def nl_query_to_goals(self, question: str, now: ClockReading) -> TranslationResult:
        if not question.strip():
            raise ValueError("empty question")
        raw = self._ask(
            "query_to_logic",
            domain=self.domain,
            user=self.user,
            now=describe_now(now),
            vocabulary=self.vocabulary,
            query=question.strip(),
        )
        result = _extract(raw, ground_only=False)
        if not result.goals:
            raise TranslationEmpty(result)
        return result

    def nl_facts_to_goals(self, statement: str) -> TranslationResult:
        """Ground goals for each fact stated; variable-bearing goals are set aside.

        Raises ``TranslationEmpty`` unless at least one goal parsed, ground or not.
        """
        if not statement.strip():
            raise ValueError("empty statement")
        raw = self._ask("facts_to_logic", domain=self.domain, query=statement.strip())
        result = _extract(raw, ground_only=True)
        if not result.goals and not any(why == "non-ground" for _, why in result.parse_failures):
            raise TranslationEmpty(result)
        return result

    def goals_to_nl(self, contexts: Sequence[str], truths: Optional[Sequence[bool]] = None) -> list[list[str]]:
        """Sentences for each logic context, one list per input element."""
        out = []
        for i, text in enumerate(contexts):
            if truths is not None:
                text = f"{text}, {{truth: '{truths[i]}'}}"
            out.append(clean_llm_list(self._ask("logic_to_nl", context=text)))
        return out

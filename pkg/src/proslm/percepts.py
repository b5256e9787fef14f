"""Real-time percepts and the clock.

A percept is any atom whose name starts with ``p_``. The KB stores the atom
itself; after solving, :func:`resolve_percepts` swaps each occurrence in the
answer bindings for the value currently reported by the registry.
"""

from __future__ import annotations

import datetime as _dt
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Union

from .parser import parse_term, print_term
from .terms import Atom, Compound, ListTerm, Substitution, Term

PREFIX = "p_"
DAYS = ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday")

Provider = Callable[[], Union[Term, str]]


class PerceptError(RuntimeError):
    def __init__(self, name: str, cause: BaseException):
        self.name = name
        super().__init__(f"percept {name} could not be read: {cause}")


def _check_name(name: str):
    if not name.startswith(PREFIX):
        raise ValueError(f"percept names must start with {PREFIX!r}: {name!r}")
    Atom(name)


@dataclass(frozen=True)
class PerceptReading:
    name: str
    value: Optional[Term]  # None when the percept is not registered

    @property
    def resolved(self) -> bool:
        return self.value is not None

    def __str__(self):
        shown = print_term(self.value) if self.value is not None else "<unresolved>"
        return f"{self.name} = {shown}"


class PerceptRegistry:
    def __init__(self):
        self._providers: dict[str, Provider] = {}
        self._static: dict[str, Term] = {}
        self._lock = threading.Lock()

    def register(self, name: str, provider: Provider):
        _check_name(name)
        with self._lock:
            self._providers[name] = provider

    def set_static(self, name: str, value: Union[Term, str]):
        _check_name(name)
        if isinstance(value, str):
            value = parse_term(value)
        with self._lock:
            self._static[name] = value

    def names(self) -> list[str]:
        return sorted(set(self._providers) | set(self._static))

    def read(self, name: str) -> Optional[Term]:
        """Current value of ``name``; static overrides win over providers."""
        with self._lock:
            if name in self._static:
                return self._static[name]
            provider = self._providers.get(name)
        if provider is None:
            return None
        try:
            value = provider()
            return parse_term(value) if isinstance(value, str) else value
        except Exception as exc:
            raise PerceptError(name, exc) from exc

    @classmethod
    def from_file(cls, path) -> "PerceptRegistry":
        reg = cls()
        reg.load(path)
        return reg

    def load(self, path):
        """Read ``name value`` lines; ``#`` starts a comment."""
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split(None, 1)
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'name value'")
            self.set_static(parts[0], parts[1].strip())


def resolve_percepts(answer: Substitution, reg: PerceptRegistry) -> tuple[Substitution, list[PerceptReading]]:
    """Replace percept atoms inside answer terms with their current values.

    Each distinct percept is read once per call; the log lists them in
    order of first occurrence.
    """
    cache: dict[str, Optional[Term]] = {}
    log: list[PerceptReading] = []

    def visit(t: Term) -> Term:
        if isinstance(t, Atom) and t.name.startswith(PREFIX):
            if t.name not in cache:
                cache[t.name] = reg.read(t.name)
                log.append(PerceptReading(t.name, cache[t.name]))
            value = cache[t.name]
            return t if value is None else value
        if isinstance(t, Compound):
            return Compound(t.functor, tuple(visit(a) for a in t.args))
        if isinstance(t, ListTerm):
            return ListTerm(tuple(visit(e) for e in t.elements), None if t.tail is None else visit(t.tail))
        return t

    resolved = Substitution((v, visit(t)) for v, t in answer.items())
    return resolved, log


@dataclass(frozen=True)
class ClockReading:
    hour: int  # HHMM
    day: str
    month: int

    def __post_init__(self):
        if not (0 <= self.hour <= 2359 and self.hour % 100 < 60):
            raise ValueError(f"hour must be HHMM between 0000 and 2359: {self.hour}")
        if self.day not in DAYS:
            raise ValueError(f"unknown day: {self.day!r}")
        if not 1 <= self.month <= 12:
            raise ValueError(f"month must be 1-12: {self.month}")

    def __str__(self):
        return f"{self.hour:04d} {self.day} {self.month}"

    @classmethod
    def parse(cls, text: str) -> "ClockReading":
        """Parse ``"1100 monday 1"``."""
        parts = text.split()
        if len(parts) != 3:
            raise ValueError(f"expected 'HHMM day month', got {text!r}")
        return cls(int(parts[0]), parts[1].lower(), int(parts[2]))


class SystemClock:
    def now(self) -> ClockReading:
        t = _dt.datetime.now()
        return ClockReading(t.hour * 100 + t.minute, DAYS[t.weekday()], t.month)


class FixedClock:
    def __init__(self, hour: int, day: str, month: int):
        self.reading = ClockReading(hour, day, month)

    def now(self) -> ClockReading:
        return self.reading

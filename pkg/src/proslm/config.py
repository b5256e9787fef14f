"""Application configuration and runtime wiring.

Settings come from built-in defaults, then an optional sectioned
``key = value`` file, then command-line flags.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

from .llm import ChatClient, ClientConfig, HTTPChatClient, StubClient
from .parser import load_kb
from .percepts import ClockReading, FixedClock, PerceptRegistry, SystemClock
from .pipeline import PipelineConfig
from .solver import SolveConfig
from .terms import KnowledgeBase
from .translator import load_templates


def package_file(*parts: str) -> Path:
    return Path(str(resources.files("proslm").joinpath(*parts)))


DEFAULT_KB = package_file("kb", "ucsc.pl")
DEFAULT_PERCEPTS = package_file("data", "percepts.conf")
DEFAULT_STUB = package_file("data", "stub_ucsc.json")


@dataclass
class AppConfig:
    kb_path: Path = DEFAULT_KB
    prompts_dir: Optional[Path] = None
    percepts_path: Optional[Path] = DEFAULT_PERCEPTS
    stub_fixtures: Path = DEFAULT_STUB
    stub: bool = False
    now: Optional[str] = None
    domain: str = "ucsc"
    user: str = "priyesh"
    llm: ClientConfig = field(default_factory=ClientConfig)
    solver: SolveConfig = field(default_factory=SolveConfig)
    bind: str = "127.0.0.1:8080"

    def with_overrides(self, **flags) -> "AppConfig":
        """Apply flag values that were actually given (``None`` means unset)."""
        cfg = self
        solver_fields = {"depth_limit", "max_steps", "occurs_check"}
        for key, value in flags.items():
            if value is None:
                continue
            if key in solver_fields:
                cfg = replace(cfg, solver=replace(cfg.solver, **{key: value}))
            elif key in ("kb_path", "prompts_dir", "percepts_path", "stub_fixtures"):
                cfg = replace(cfg, **{key: Path(value)})
            else:
                cfg = replace(cfg, **{key: value})
        return cfg


def load_config(path, base: Optional[AppConfig] = None) -> AppConfig:
    path = Path(path)
    parser = configparser.ConfigParser()
    if not parser.read(path, encoding="utf-8"):
        raise FileNotFoundError(f"config file not found: {path}")
    cfg = base or AppConfig()
    here = path.parent

    def p(value: str) -> Path:
        q = Path(value).expanduser()
        return q if q.is_absolute() else here / q

    if parser.has_section("proslm"):
        s = parser["proslm"]
        updates = {}
        for key, attr in (("kb", "kb_path"), ("prompts", "prompts_dir"),
                          ("percepts", "percepts_path"), ("stub_fixtures", "stub_fixtures")):
            if key in s:
                updates[attr] = p(s[key])
        for key in ("now", "domain", "user"):
            if key in s:
                updates[key] = s[key]
        if "stub" in s:
            updates["stub"] = s.getboolean("stub")
        cfg = replace(cfg, **updates)
    if parser.has_section("llm"):
        s = parser["llm"]
        llm = cfg.llm
        for key in ("endpoint", "model", "api_key_env"):
            if key in s:
                llm = replace(llm, **{key: s[key]})
        if "timeout" in s:
            llm = replace(llm, timeout=s.getfloat("timeout"))
        if "retries" in s:
            llm = replace(llm, retries=s.getint("retries"))
        cfg = replace(cfg, llm=llm)
    if parser.has_section("solver"):
        s = parser["solver"]
        solver = cfg.solver
        for key in ("depth_limit", "max_steps"):
            if key in s:
                solver = replace(solver, **{key: s.getint(key)})
        for key in ("occurs_check", "tabling"):
            if key in s:
                solver = replace(solver, **{key: s.getboolean(key)})
        cfg = replace(cfg, solver=solver)
    if parser.has_section("service") and "bind" in parser["service"]:
        cfg = replace(cfg, bind=parser["service"]["bind"])
    return cfg


@dataclass
class Runtime:
    """Everything a pipeline call needs, built once from an ``AppConfig``."""

    config: AppConfig
    kb: KnowledgeBase
    percepts: PerceptRegistry
    clock: object
    client: ChatClient
    pipeline: PipelineConfig


def build_clock(now: Optional[str]):
    if now is None:
        return SystemClock()
    r = ClockReading.parse(now)
    return FixedClock(r.hour, r.day, r.month)


def build_runtime(cfg: AppConfig, client: Optional[ChatClient] = None) -> Runtime:
    kb = load_kb(cfg.kb_path)
    reg = PerceptRegistry()
    if cfg.percepts_path is not None:
        reg.load(cfg.percepts_path)
    if client is None:
        client = StubClient.from_fixtures(cfg.stub_fixtures) if cfg.stub else HTTPChatClient(cfg.llm)
    pipeline = PipelineConfig(
        solver=cfg.solver,
        domain=cfg.domain,
        user=cfg.user,
        templates=load_templates(cfg.prompts_dir),
    )
    return Runtime(cfg, kb, reg, build_clock(cfg.now), client, pipeline)

"""Command-line entry point: ``proslm [ask|validate|query|kb|repl|serve]``.

Exit codes: 0 success, 1 validation failed (or no verdict), 2 usage or
parse error, 3 runtime failure such as an unreachable LLM.
"""

from __future__ import annotations

import argparse
import cmd
import json
import logging
import shlex
import sys
from pathlib import Path
from typing import Optional

from . import pipeline
from .config import AppConfig, Runtime, build_runtime, load_config
from .llm import LLMError
from .parser import SyntaxErrorAt, load_kb, parse_clause, parse_query, print_clause, print_program
from .percepts import PerceptError
from .solver import ResourceError, SolveError, format_result, render_goal_tree, solve
from .terms import ClauseNotFound, KnowledgeBase
from .translator import CleaningError, TranslationEmpty, TranslationError

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _add_common(p: argparse.ArgumentParser, suppress: bool):
    # subcommands suppress defaults so a flag given before the subcommand survives
    def opt(*names, **kw):
        kw["default"] = argparse.SUPPRESS if suppress else None
        p.add_argument(*names, **kw)

    opt("--kb", dest="kb_path", help="knowledge base file")
    opt("--config", help="config file")
    opt("--trace", action="store_true", help="print goals, goal trees and context")
    opt("--now", help='fixed clock, e.g. "1100 monday 1"')
    opt("--stub", action="store_true", help="answer LLM calls from the stub fixtures (no network)")
    opt("--depth-limit", type=int, help="solver depth limit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="proslm", description="Logic-grounded question answering.")
    _add_common(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, **kw):
        p = sub.add_parser(name, **kw)
        _add_common(p, suppress=True)
        return p

    p = add("ask", help="answer a question with KB-grounded context")
    p.add_argument("question")
    p.add_argument("--json", action="store_true", help="print the full bundle as JSON")

    p = add("validate", help="check each fact of a statement against the KB")
    p.add_argument("statement", nargs="?")
    p.add_argument("--question", help="validate the generator's own answer to this question")
    p.add_argument("--json", action="store_true")

    p = add("query", help="run a logic query directly")
    p.add_argument("goal")
    p.add_argument("--json", action="store_true")

    p = add("kb", help="inspect or edit a knowledge base")
    p.add_argument("action", choices=["load", "save", "assert", "retract", "list"])
    p.add_argument("arg", nargs="?", help="path for load/save, clause text for assert/retract")
    p.add_argument("--out", help="write the edited KB here instead of printing it")

    add("repl", help="interactive session")

    p = add("serve", help="run the JSON-over-HTTP service")
    p.add_argument("--bind", help="host:port")
    return parser


def resolve_config(args) -> AppConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else AppConfig()
    return cfg.with_overrides(
        kb_path=getattr(args, "kb_path", None),
        now=getattr(args, "now", None),
        stub=True if getattr(args, "stub", None) else None,
        depth_limit=getattr(args, "depth_limit", None),
        bind=getattr(args, "bind", None),
    )


def _print_trace(bundle: pipeline.AskBundle, out):
    print("goals:", file=out)
    for g in bundle.goals:
        print(f"  {g}", file=out)
    for s, why in bundle.translation.parse_failures:
        print(f"  (rejected) {s}: {why}", file=out)
    for o in bundle.outcomes:
        print(f"goal tree for {o.goal}:" + (f" [{o.error}]" if o.error else ""), file=out)
        if o.tree is not None:
            print(render_goal_tree(o.tree), end="", file=out)
    readings = [r for c in bundle.context for r in c.percepts]
    if readings:
        print("percepts:", file=out)
        for r in readings:
            print(f"  {r}", file=out)
    print("context:", file=out)
    for s in bundle.context_nl or [pipeline.NO_CONTEXT]:
        print(f"  {s}", file=out)
    print("response:", file=out)


def cmd_ask(rt: Runtime, question: str, trace: bool = False, as_json: bool = False, out=None) -> int:
    out = out or sys.stdout
    if not question.strip():
        raise UsageError("question must not be empty")
    bundle = pipeline.ask(question, rt.kb, rt.percepts, rt.clock, rt.client, rt.pipeline)
    if as_json:
        print(json.dumps(bundle.to_dict(), indent=2), file=out)
        return EXIT_OK
    if trace:
        _print_trace(bundle, out)
    print(bundle.response, file=out)
    return EXIT_OK


def cmd_validate(rt: Runtime, statement: Optional[str], question: Optional[str] = None,
                 trace: bool = False, as_json: bool = False, out=None) -> int:
    out = out or sys.stdout
    if question:
        statement, report = pipeline.answer_and_validate(question, rt.kb, rt.client, rt.pipeline)
        print(statement, file=out)
    else:
        if not statement or not statement.strip():
            raise UsageError("statement must not be empty")
        report = pipeline.validate(statement, rt.kb, rt.client, rt.pipeline)
    if as_json:
        print(json.dumps(report.to_dict(), indent=2), file=out)
    else:
        print(report.render(), end="", file=out)
        if trace:
            for v in report.fact_verdicts:
                if v.tree is not None:
                    print(f"goal tree for {v.goal}:", file=out)
                    print(render_goal_tree(v.tree), end="", file=out)
    return EXIT_OK if report.overall else EXIT_FAILED


def cmd_query(kb: KnowledgeBase, goal_text: str, solver_cfg, as_json: bool = False, out=None) -> int:
    out = out or sys.stdout
    goals = parse_query(goal_text)
    try:
        result = solve(kb, goals, solver_cfg)
    except ResourceError as exc:
        print(f"no verdict: {exc}", file=out)
        print(render_goal_tree(exc.tree), end="", file=out)
        return EXIT_FAILED
    if as_json:
        print(json.dumps(result.to_dict(), indent=2), file=out)
    else:
        print(format_result(result), file=out)
        print(render_goal_tree(result.tree), end="", file=out)
    return EXIT_OK


def cmd_kb(kb: KnowledgeBase, action: str, arg: Optional[str], out_path: Optional[str] = None,
           out=None) -> tuple[int, KnowledgeBase]:
    """Run a KB subcommand; returns the exit code and the (possibly new) snapshot."""
    out = out or sys.stdout
    if action in ("load", "save", "assert", "retract") and not arg:
        raise UsageError(f"kb {action} needs an argument")
    if action == "list":
        for c in kb:
            text = print_clause(c).replace("\n", " ").replace("    ", "")
            print(f"{c.source_name}#{c.source_id}: {text}", file=out)
        return EXIT_OK, kb
    if action == "load":
        kb = load_kb(arg)
        print(f"loaded {len(kb)} clauses from {arg}", file=out)
        return EXIT_OK, kb
    if action == "save":
        Path(arg).write_text(print_program(kb.clauses), encoding="utf-8")
        print(f"saved {len(kb)} clauses to {arg}", file=out)
        return EXIT_OK, kb
    clause = parse_clause(arg)
    if action == "assert":
        kb = kb.assert_clause(clause)
    else:
        try:
            kb = kb.retract_clause(clause)
        except ClauseNotFound as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FAILED, kb
    if out_path:
        Path(out_path).write_text(print_program(kb.clauses), encoding="utf-8")
    return EXIT_OK, kb


class Repl(cmd.Cmd):
    intro = "proslm interactive session. Commands: ask, validate, query, kb, history, quit."
    prompt = "proslm> "

    def __init__(self, rt: Runtime, stdin=None, stdout=None):
        super().__init__(stdin=stdin, stdout=stdout)
        if stdin is not None:
            self.use_rawinput = False
        self.rt = rt
        self.history: list[str] = []

    def precmd(self, line):
        if line.strip() and line.strip() != "EOF":
            self.history.append(line.strip())
        return line

    def _run(self, fn, *args, **kw):
        try:
            return fn(*args, **kw)
        except Exception as exc:
            print(f"error: {exc}", file=self.stdout)

    def do_ask(self, arg):
        """ask QUESTION"""
        self._run(cmd_ask, self.rt, arg, trace=True, out=self.stdout)

    def do_validate(self, arg):
        """validate STATEMENT"""
        self._run(cmd_validate, self.rt, arg, out=self.stdout)

    def do_query(self, arg):
        """query GOAL"""
        self._run(cmd_query, self.rt.kb, arg, self.rt.pipeline.solver, out=self.stdout)

    def do_kb(self, arg):
        """kb list | kb load PATH | kb save PATH | kb assert CLAUSE | kb retract CLAUSE"""
        action, _, rest = arg.strip().partition(" ")
        if action not in ("load", "save", "assert", "retract", "list"):
            print("usage: kb list|load|save|assert|retract [ARG]", file=self.stdout)
            return
        if action in ("load", "save") and rest:
            rest = shlex.split(rest)[0]
        res = self._run(cmd_kb, self.rt.kb, action, rest.strip() or None, out=self.stdout)
        if res is not None:
            self.rt.kb = res[1]

    def do_history(self, arg):
        """Show commands entered in this session."""
        for i, line in enumerate(self.history, 1):
            print(f"{i:3d}  {line}", file=self.stdout)

    def do_quit(self, arg):
        """Leave the session."""
        return True

    do_exit = do_quit

    def do_EOF(self, arg):
        print(file=self.stdout)
        return True

    def emptyline(self):
        pass


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    trace = bool(getattr(args, "trace", False))
    if args.command == "ask" and not args.question.strip():
        parser.error("question must not be empty")
    try:
        rt = build_runtime(resolve_config(args))
        if args.command == "ask":
            return cmd_ask(rt, args.question, trace, args.json)
        if args.command == "validate":
            if not args.question and not (args.statement or "").strip():
                parser.error("give a statement or --question")
            return cmd_validate(rt, args.statement, args.question, trace, args.json)
        if args.command == "query":
            return cmd_query(rt.kb, args.goal, rt.pipeline.solver, args.json)
        if args.command == "kb":
            code, kb = cmd_kb(rt.kb, args.action, args.arg, args.out)
            if args.action in ("assert", "retract") and code == EXIT_OK and not args.out:
                print(print_program(kb.clauses), end="")
            return code
        if args.command == "repl":
            Repl(rt).cmdloop()
            return EXIT_OK
        if args.command == "serve":
            from .service import serve

            serve(rt, rt.config.bind)
            return EXIT_OK
    except UsageError as exc:
        parser.error(str(exc))
    except SyntaxErrorAt as exc:
        print(f"syntax error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TranslationEmpty, CleaningError) as exc:
        print(f"translation failed: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TranslationError, LLMError, PerceptError, SolveError, pipeline.PromptTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

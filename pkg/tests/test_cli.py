from __future__ import annotations

import io
import json
import socket
import subprocess
import sys

import pytest

from conftest import DINING_STATEMENT
from proslm.cli import EXIT_FAILED, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, Repl, main
from proslm.config import AppConfig, build_runtime, load_config

STUB = ["--stub", "--now", "1100 monday 1"]


@pytest.fixture
def no_network(monkeypatch):
    def refuse(*args, **kwargs):
        raise AssertionError("network access attempted")

    monkeypatch.setattr(socket, "create_connection", refuse)
    monkeypatch.setattr(socket.socket, "connect", refuse)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_ask_in_stub_mode(capsys, no_network):
    code, out, _ = run(capsys, *STUB, "ask", "Where can I study?")
    assert code == EXIT_OK and "quiet" in out


def test_ask_trace_shows_every_stage(capsys, no_network):
    code, out, _ = run(capsys, "ask", "Is the pool busy?", "--trace", *STUB)
    assert code == EXIT_OK
    for marker in ("goals:", "status(pool, 1100, monday, Y)", "goal tree for", "[+] ucsc.pl#0",
                   "percepts:", "p_weather = sunny", "context:", "The weather is sunny", "response:"):
        assert marker in out


def test_ask_json_bundle(capsys, no_network):
    code, out, _ = run(capsys, *STUB, "ask", "Is the pool busy?", "--json")
    assert code == EXIT_OK and json.loads(out)["context_nl"] == ["The weather is sunny"]


def test_validate_failed_statement_exits_one(capsys, no_network):
    code, out, _ = run(capsys, *STUB, "validate", DINING_STATEMENT)
    assert code == EXIT_FAILED
    assert "dining_hall(cowell_stevenson) (False)" in out and "note:" in out


def test_validate_proved_statement_exits_zero(capsys, tmp_path, no_network):
    fixtures = tmp_path / "stub.json"
    fixtures.write_text(json.dumps([{"match": "ok", "response": "['weekday(monday)']"}]), encoding="utf-8")
    conf = tmp_path / "proslm.ini"
    conf.write_text(f"[proslm]\nstub = true\nstub_fixtures = {fixtures.name}\n", encoding="utf-8")
    code, out, _ = run(capsys, "--config", str(conf), "validate", "ok")
    assert code == EXIT_OK and "weekday(monday) (True)" in out


def test_validate_closed_loop(capsys, no_network):
    code, out, _ = run(capsys, *STUB, "validate", "--question", "How many dining halls does UCSC have?")
    assert code == EXIT_FAILED and out.startswith(DINING_STATEMENT)


def test_query(capsys):
    code, out, _ = run(capsys, "query", "drop_classes(priyesh, 1, Y)")
    assert code == EXIT_OK
    assert out.splitlines()[0] == "{'truth': True, 'Y': [29, 'jan']}"


def test_query_false_still_exits_zero(capsys):
    code, out, _ = run(capsys, "query", "dining_hall(cowell_stevenson)")
    assert code == EXIT_OK and out.startswith("{'truth': False}")


def test_query_without_verdict(capsys, tmp_path):
    kb = tmp_path / "loop.pl"
    kb.write_text("p(X) :- p(X).\n", encoding="utf-8")
    code, out, _ = run(capsys, "--kb", str(kb), "--depth-limit", "16", "query", "p(a)")
    assert code == EXIT_FAILED and out.startswith("no verdict")


def test_query_syntax_error(capsys):
    code, _, err = run(capsys, "query", "status(pool,")
    assert code == EXIT_USAGE and "syntax error" in err


def test_missing_kb_file(capsys, tmp_path):
    code, _, err = run(capsys, "--kb", str(tmp_path / "absent.pl"), "query", "a")
    assert code == EXIT_USAGE and "error" in err


def test_empty_question_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["ask", "  "])
    assert exc.value.code == EXIT_USAGE


def test_unknown_subcommand(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == EXIT_USAGE


def test_unreachable_llm_is_a_runtime_error(capsys, tmp_path):
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    conf = tmp_path / "proslm.ini"
    conf.write_text(f"[llm]\nendpoint = http://127.0.0.1:{port}/v1/chat/completions\nretries = 0\ntimeout = 2\n",
                    encoding="utf-8")
    code, _, err = run(capsys, "--config", str(conf), "ask", "Is the pool busy?")
    assert code == EXIT_RUNTIME and err.startswith("error:")


def test_stub_miss_is_a_runtime_error(capsys):
    code, _, err = run(capsys, *STUB, "ask", "What is the meaning of life?")
    assert code == EXIT_RUNTIME and "no stub response" in err


def test_untranslatable_statement_is_a_usage_error(capsys, tmp_path):
    fixtures = tmp_path / "stub.json"
    fixtures.write_text(json.dumps([{"match": "meh", "response": "[]"}]), encoding="utf-8")
    conf = tmp_path / "proslm.ini"
    conf.write_text(f"[proslm]\nstub = yes\nstub_fixtures = {fixtures}\n", encoding="utf-8")
    code, _, err = run(capsys, "--config", str(conf), "validate", "meh")
    assert code == EXIT_USAGE and "translation failed" in err


# --- kb --------------------------------------------------------------------

def test_kb_list(capsys):
    code, out, _ = run(capsys, "kb", "list")
    assert code == EXIT_OK
    assert out.splitlines()[0].startswith("ucsc.pl#0: status(")


def test_kb_assert_prints_program(capsys, tmp_path):
    kb = tmp_path / "k.pl"
    kb.write_text("a.\n", encoding="utf-8")
    code, out, _ = run(capsys, "--kb", str(kb), "kb", "assert", "b :- a.")
    assert code == EXIT_OK and out == "a.\n\nb :-\n    a.\n"


def test_kb_assert_to_file_then_retract(capsys, tmp_path):
    kb, edited = tmp_path / "k.pl", tmp_path / "out.pl"
    kb.write_text("a.\nb.\n", encoding="utf-8")
    assert run(capsys, "--kb", str(kb), "kb", "retract", "a.", "--out", str(edited))[0] == EXIT_OK
    assert edited.read_text(encoding="utf-8") == "b.\n"
    code, _, err = run(capsys, "--kb", str(kb), "kb", "retract", "zzz.")
    assert code == EXIT_FAILED and "error" in err


def test_kb_save_round_trips(capsys, tmp_path, ucsc_kb):
    out = tmp_path / "saved.pl"
    assert run(capsys, "kb", "save", str(out))[0] == EXIT_OK
    first = out.read_text(encoding="utf-8")
    assert run(capsys, "--kb", str(out), "kb", "save", str(out))[0] == EXIT_OK
    assert out.read_text(encoding="utf-8") == first


def test_kb_action_needs_argument():
    with pytest.raises(SystemExit) as exc:
        main(["kb", "assert"])
    assert exc.value.code == EXIT_USAGE


# --- repl and config -------------------------------------------------------

def test_repl_session(no_network):
    rt = build_runtime(AppConfig(stub=True, now="1100 monday 1"))
    script = "\n".join([
        "query weekday(saturday)",
        "kb assert weekday(saturday).",
        "query weekday(saturday)",
        "ask Where can I study?",
        "validate " + DINING_STATEMENT,
        "query broken(",
        "history",
        "quit",
    ]) + "\n"
    out = io.StringIO()
    Repl(rt, stdin=io.StringIO(script), stdout=out).cmdloop()
    text = out.getvalue()
    assert text.count("{'truth': False}") == 1 and text.count("{'truth': True}") == 1
    assert "The place must be quiet" in text
    assert "dining_hall(cowell_stevenson) (False)" in text
    assert "error:" in text
    assert "  2  kb assert weekday(saturday)." in text


def test_config_file_sections(tmp_path):
    conf = tmp_path / "c.ini"
    conf.write_text(
        "[proslm]\nkb = my.pl\nnow = 1300 monday 1\nuser = sam\n"
        "[llm]\nmodel = other\ntimeout = 5\nretries = 1\n"
        "[solver]\ndepth_limit = 64\ntabling = true\n"
        "[service]\nbind = 0.0.0.0:9000\n", encoding="utf-8")
    cfg = load_config(conf)
    assert cfg.kb_path == tmp_path / "my.pl" and cfg.user == "sam" and cfg.now == "1300 monday 1"
    assert (cfg.llm.model, cfg.llm.timeout, cfg.llm.retries) == ("other", 5.0, 1)
    assert cfg.solver.depth_limit == 64 and cfg.solver.tabling
    assert cfg.bind == "0.0.0.0:9000"
    assert cfg.with_overrides(depth_limit=8, now=None).solver.depth_limit == 8


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "proslm.cli", "query", "weekday(monday)"],
                          capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0 and proc.stdout.startswith("{'truth': True}")

"""JSON-over-HTTP service.

    POST /ask       {"question": "..."}   -> AskBundle export
    POST /validate  {"statement": "..."}  -> ValidationReport export
    GET  /healthz                          -> {"status": "ok"}

The service is read-only with respect to the KB; every request works on
the snapshot loaded at start-up.
"""

from __future__ import annotations

import json
import logging
import time
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from importlib import resources

from . import pipeline
from .config import Runtime
from .llm import LLMError
from .percepts import PerceptError
from .translator import TranslationError

log = logging.getLogger(__name__)

MAX_BODY = 1 << 20


def response_schema(name: str) -> dict:
    """Published JSON schema for ``ask_bundle`` or ``validation_report``."""
    text = resources.files("proslm").joinpath("schemas", f"{name}.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


class BadRequest(ValueError):
    pass


class _Handler(BaseHTTPRequestHandler):
    server_version = "proslm"
    runtime: Runtime = None  # set by make_server

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)

    def _send(self, status: int, payload: dict):
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_field(self, name: str) -> str:
        length = int(self.headers.get("Content-Length") or 0)
        if length <= 0:
            raise BadRequest("request body is empty")
        if length > MAX_BODY:
            raise BadRequest("request body too large")
        try:
            data = json.loads(self.rfile.read(length))
        except (ValueError, UnicodeDecodeError) as exc:
            raise BadRequest(f"body is not valid JSON: {exc}") from exc
        value = data.get(name) if isinstance(data, dict) else None
        if not isinstance(value, str) or not value.strip():
            raise BadRequest(f"field {name!r} must be a non-empty string")
        return value

    def _dispatch(self, method: str):
        start = time.perf_counter()
        status = HTTPStatus.INTERNAL_SERVER_ERROR
        try:
            status, payload = self._route(method)
        except BadRequest as exc:
            status, payload = HTTPStatus.BAD_REQUEST, {"error": "bad_request", "message": str(exc)}
        except (LLMError, TranslationError, PerceptError, pipeline.PromptTooLarge) as exc:
            status = HTTPStatus.BAD_GATEWAY
            payload = {"error": getattr(exc, "kind", type(exc).__name__), "message": str(exc)}
        except Exception as exc:
            log.exception("unhandled error on %s %s", method, self.path)
            payload = {"error": "internal_error", "message": str(exc)}
        try:
            self._send(status, payload)
        finally:
            log.info("%s %s -> %d in %.1f ms", method, self.path, status, (time.perf_counter() - start) * 1000)

    def _route(self, method: str):
        rt = self.runtime
        if method == "GET" and self.path == "/healthz":
            return HTTPStatus.OK, {"status": "ok"}
        if method == "POST" and self.path == "/ask":
            question = self._read_field("question")
            bundle = pipeline.ask(question, rt.kb, rt.percepts, rt.clock, rt.client, rt.pipeline)
            return HTTPStatus.OK, bundle.to_dict()
        if method == "POST" and self.path == "/validate":
            statement = self._read_field("statement")
            return HTTPStatus.OK, pipeline.validate(statement, rt.kb, rt.client, rt.pipeline).to_dict()
        return HTTPStatus.NOT_FOUND, {"error": "not_found", "message": f"no route for {method} {self.path}"}

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    # the socketserver default backlog of 5 resets bursts of connections
    request_queue_size = 128


def make_server(rt: Runtime, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    handler = type("Handler", (_Handler,), {"runtime": rt})
    return _Server((host, port), handler)


def parse_bind(bind: str) -> tuple[str, int]:
    host, _, port = bind.rpartition(":")
    return host or "127.0.0.1", int(port)


def serve(rt: Runtime, bind: str):
    host, port = parse_bind(bind)
    server = make_server(rt, host, port)
    log.warning("serving on http://%s:%d", *server.server_address[:2])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()

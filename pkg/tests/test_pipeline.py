import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from dglcheck.bench import load_suite
from dglcheck.checker import CheckVerdict
from dglcheck.parser import check_syntax, parse_formula
from dglcheck.pipeline import (
    MULTI_SHOT, ZERO_SHOT, RunConfig, best_of, run_attempt, run_benchmark, run_suite,
)
from dglcheck.prompts import (
    REPAIR_EXAMPLES, build_propose_prompt, build_revise_prompt, extract_formula,
)
from dglcheck.transport import (
    HttpTransport, LlmTransport, ReplayExhausted, ReplayMismatch, ReplayTransport, TransportError,
    request_hash,
)
from conftest import FIXTURES, needs_solver


@pytest.fixture(scope="module")
def suite():
    return load_suite()


@pytest.fixture
def mean(suite):
    return suite.get("mean-velocity")


def V(kind, stage=None):
    return CheckVerdict(kind, stage=stage)


# --------------------------------------------------------------------------
# Prompts
# --------------------------------------------------------------------------


def test_propose_prompt_shapes(suite):
    zero = build_propose_prompt("Q")
    assert [m["role"] for m in zero] == ["system", "user"]
    multi = build_propose_prompt("Q", suite.fewshot)
    assert len(multi) == 2 + 2 * len(suite.fewshot)
    assert multi[2]["content"] == suite.fewshot[0].reference_model
    capped = build_propose_prompt("Q", [("q", "m")] * 7)
    assert len(capped) == 2 + 2 * 4


def test_revise_prompt_lists_every_attempt():
    history = [{"proposal": "p1", "feedback": ["f1"]}, {"proposal": "p2", "feedback": "f2"}]
    msgs = build_revise_prompt("Q", history)
    last = msgs[-1]["content"]
    assert last.index("p1") < last.index("f1") < last.index("p2") < last.index("f2")
    assert len(msgs) == 2 + 2 * len(REPAIR_EXAMPLES)
    with pytest.raises(AssertionError):
        build_revise_prompt("Q", [])


def test_repair_examples_quote_real_diagnostics():
    for ex in REPAIR_EXAMPLES:
        assert ex["feedback"] in [d.message for d in check_syntax(ex["proposal"])]
        parse_formula(ex["repair"])


@pytest.mark.parametrize("completion, formula", [
    ("x = 1", "x = 1"),
    ("```dgl\n<x := 1;> x = 1\n```", "<x := 1;> x = 1"),
    ("Here is the model:\n\n<x := 1;> x = 1", "<x := 1;> x = 1"),
    ("Here's the model\nv > 0 -> <x := v;> x = d", "v > 0 -> <x := v;> x = d"),
    ("Sure.\n```\nv > 0 ->\n<x := v;> x = d\n```\nDone.", "v > 0 ->\n<x := v;> x = d"),
])
def test_extract_formula(completion, formula):
    assert extract_formula(completion) == formula


# --------------------------------------------------------------------------
# Transports
# --------------------------------------------------------------------------


def test_replay_order_and_exhaustion():
    t = ReplayTransport(["a", {"response": "b"}])
    assert t.send([], {}) == "a" and t.send([], {}) == "b"
    with pytest.raises(ReplayExhausted):
        t.send([], {})


def test_replay_checks_request_hash():
    msgs, params = [{"role": "user", "content": "hi"}], {"model": "m"}
    t = ReplayTransport([{"response": "ok", "request_hash": request_hash(msgs, params)}] * 2)
    assert t.send(msgs, params) == "ok"
    with pytest.raises(ReplayMismatch):
        t.send(msgs, {"model": "other"})


def test_replay_file_errors(tmp_path):
    p = tmp_path / "r.jsonl"
    p.write_text('{"response": "x"}\n\nnot json\n')
    with pytest.raises(TransportError, match=":3:"):
        ReplayTransport.from_file(p)
    p.write_text('{"answer": "x"}\n')
    with pytest.raises(TransportError, match="response"):
        ReplayTransport.from_file(p)


class _Handler(BaseHTTPRequestHandler):
    script = []  # list of (status, body) served in order
    seen = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).seen.append((self.path, self.headers.get("Authorization"), body))
        status, payload = type(self).script.pop(0)
        data = payload.encode() if isinstance(payload, str) else json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def server():
    _Handler.script, _Handler.seen = [], []
    srv = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    th = threading.Thread(target=srv.serve_forever, daemon=True)
    th.start()
    yield f"http://127.0.0.1:{srv.server_port}/v1", _Handler
    srv.shutdown()
    srv.server_close()


def _completion(text):
    return {"choices": [{"message": {"role": "assistant", "content": text}}]}


def test_http_transport_retries_then_succeeds(server):
    url, h = server
    h.script = [(503, "busy"), (429, "slow down"), (200, _completion("<x := 1;> x = 1"))]
    t = HttpTransport(api_key="k", base_url=url, backoff=0.0)
    out = t.send([{"role": "user", "content": "hi"}], {"model": "m", "temperature": 1.0, "max_tokens": 9})
    assert out == "<x := 1;> x = 1"
    path, auth, body = h.seen[-1]
    assert path == "/v1/chat/completions" and auth == "Bearer k"
    assert body == {"model": "m", "messages": [{"role": "user", "content": "hi"}],
                    "temperature": 1.0, "max_tokens": 9}


def test_http_transport_failures(server):
    url, h = server
    t = HttpTransport(api_key="k", base_url=url, retries=1, backoff=0.0)
    h.script = [(400, "bad request")]
    with pytest.raises(TransportError, match="HTTP 400"):
        t.send([], {"model": "m"})
    h.script = [(500, "x"), (500, "x")]
    with pytest.raises(TransportError, match="giving up"):
        t.send([], {"model": "m"})
    h.script = [(200, {"nope": 1})]
    with pytest.raises(TransportError, match="malformed"):
        t.send([], {"model": "m"})


def test_http_transport_needs_key(monkeypatch):
    monkeypatch.delenv("DGL_LLM_API_KEY", raising=False)
    with pytest.raises(TransportError, match="DGL_LLM_API_KEY"):
        HttpTransport()


def test_http_transport_connection_refused():
    t = HttpTransport(api_key="k", base_url="http://127.0.0.1:9", retries=0, timeout=2)
    with pytest.raises(TransportError):
        t.send([], {"model": "m"})


# --------------------------------------------------------------------------
# Attempts and aggregation
# --------------------------------------------------------------------------


def test_best_of():
    F, T, S, TF = V("failed", "stasis"), V("timeout"), V("success"), V("tool_failure")
    assert best_of([F, T, F, F, F]) == (1, T)
    assert best_of([F, TF, T]) == (1, TF)  # tie: earliest wins
    assert best_of([T, F, S, S])[0] == 2
    assert best_of([F])[0] == 0
    with pytest.raises(ValueError):
        best_of([])


@needs_solver
def test_unicode_then_model2(mean):
    t = ReplayTransport.from_file(FIXTURES / "replay_unicode_then_model2.jsonl")
    a = run_attempt(mean, t, RunConfig(samples=1))
    assert len(a.proposals) == 2 and a.verdict.label == "success"
    assert a.proposals[0].diagnostics[0]["code"] == "UnicodeChar"
    # the repair request quotes the parser's message
    assert "unsupported Unicode character" in a.transcript[1]["request"][-1]["content"]


def test_repair_budget(mean):
    t = ReplayTransport.from_file(FIXTURES / "replay_four_unparseable.jsonl")
    a = run_attempt(mean, t, RunConfig(samples=1, max_repairs=3))
    assert len(a.proposals) == 4 and a.verdict.label == "failed:syntax_exhausted"
    assert t.remaining == 0
    t = ReplayTransport.from_file(FIXTURES / "replay_four_unparseable.jsonl")
    a = run_attempt(mean, t, RunConfig(samples=1, max_repairs=0))
    assert len(a.proposals) == 1 and t.remaining == 3


def test_transport_error_is_recorded(mean):
    a = run_attempt(mean, ReplayTransport([]), RunConfig())
    assert a.verdict.label == "failed:transport_error" and a.proposals == []


@needs_solver
def test_semantic_repair_is_opt_in(mean, model1_path, model2_path):
    answers = [model1_path.read_text(), model2_path.read_text()]
    a = run_attempt(mean, ReplayTransport(answers), RunConfig())
    assert a.verdict.label == "failed:not_equivalent"
    a = run_attempt(mean, ReplayTransport(answers), RunConfig(semantic_repair=True))
    assert a.verdict.label == "success" and len(a.proposals) == 2


def test_zero_shot_sends_no_examples(mean, suite):
    t = ReplayTransport(["x := "])
    a = run_attempt(mean, t, RunConfig(mode=ZERO_SHOT, max_repairs=0), suite.fewshot)
    assert len(a.transcript[0]["request"]) == 2
    t = ReplayTransport(["x := "])
    a = run_attempt(mean, t, RunConfig(mode=MULTI_SHOT, max_repairs=0), suite.fewshot)
    assert len(a.transcript[0]["request"]) == 2 + 2 * len(suite.fewshot)


class _Echo(LlmTransport):
    """Thread-safe transport that always answers with one fixed text."""

    def __init__(self, text):
        self.text = text
        self.calls = 0
        self.lock = threading.Lock()

    def send(self, messages, params):
        with self.lock:
            self.calls += 1
        return self.text


@needs_solver
def test_parallel_samples(mean, model2_path):
    t = _Echo(model2_path.read_text())
    rec = run_benchmark(mean, t, RunConfig(samples=4, workers=4))
    assert t.calls == 4 and [v.label for v in rec.verdicts] == ["success"] * 4
    assert rec.best_index == 0


@needs_solver
def test_run_suite_record_shape(suite, model2_path):
    t = ReplayTransport([model2_path.read_text()] * 2)
    seen = []
    recs = run_suite([suite.get("mean-velocity")], t, RunConfig(samples=2, model="m"), on_record=seen.append)
    assert seen == recs
    d = recs[0].to_dict()
    assert d["samples"] == ["success", "success"] and d["best"] == "success"
    assert d["model"] == "m" and d["mode"] == MULTI_SHOT and d["failure_tag"] is None
    assert "millis" not in json.dumps(d)
    assert "millis" in recs[0].to_dict(timings=True)

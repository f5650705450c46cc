"""Propose / repair loop and best-of-N sampling over benchmarks."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .bench import Benchmark
from .checker import (
    SYNTAX_EXHAUSTED,
    TRANSPORT_ERROR,
    CheckSpec,
    CheckVerdict,
    check,
    classify_tool_failure,
)
from .parser import DglSyntaxError, parse_formula
from .prompts import REPAIR_EXAMPLES, build_propose_prompt, build_revise_prompt, extract_formula
from .solver import DEFAULT_TIMEOUT_MS, SolverConfig
from .transport import LlmTransport, TransportError

log = logging.getLogger(__name__)

MULTI_SHOT = "multi-shot"
ZERO_SHOT = "zero-shot"


@dataclass
class RunConfig:
    model: str = "o3"
    mode: str = MULTI_SHOT
    samples: int = 5
    max_repairs: int = 3
    temperature: float = 1.0
    max_tokens: int | None = None
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    workers: int = 1
    # off by default: only parser feedback re-enters the loop
    semantic_repair: bool = False
    solver: SolverConfig = field(default_factory=SolverConfig.from_env)

    def params(self) -> dict:
        p = {"model": self.model, "temperature": self.temperature}
        if self.max_tokens:
            p["max_tokens"] = self.max_tokens
        return p


@dataclass
class Proposal:
    text: str
    diagnostics: list = field(default_factory=list)  # list of Diagnostic dicts

    def to_dict(self):
        return {"text": self.text, "diagnostics": self.diagnostics}


@dataclass
class Attempt:
    proposals: list = field(default_factory=list)
    verdict: CheckVerdict | None = None
    transcript: list = field(default_factory=list)  # [{"request": [...], "response": str}]
    millis: int = 0

    @property
    def syntax_exhausted(self) -> bool:
        return self.verdict is not None and self.verdict.stage == SYNTAX_EXHAUSTED

    def to_dict(self, timings=False):
        d = {
            "proposals": [p.to_dict() for p in self.proposals],
            "verdict": self.verdict.to_dict(),
            "transcript": self.transcript,
        }
        if timings:
            d["millis"] = self.millis
        return d


@dataclass
class RunRecord:
    benchmark: str
    model: str
    mode: str
    attempts: list
    best: CheckVerdict
    best_index: int
    tags: tuple = ()
    millis: int = 0

    @property
    def verdicts(self) -> list:
        return [a.verdict for a in self.attempts]

    def to_dict(self, timings=False) -> dict:
        d = {
            "benchmark": self.benchmark,
            "model": self.model,
            "mode": self.mode,
            "samples": [a.verdict.label for a in self.attempts],
            "best": self.best.label,
            "best_index": self.best_index,
            "best_verdict": self.best.to_dict(),
            "failure_tag": classify_tool_failure(self.best, self.tags),
            "tags": list(self.tags),
            "attempts": [a.to_dict(timings) for a in self.attempts],
        }
        if timings:
            d["millis"] = self.millis
        return d


def best_of(verdicts) -> tuple:
    """``(index, verdict)`` of the best outcome; earliest wins ties.

    Success beats tool failure and timeout, which tie with each other and
    beat failure.
    """
    verdicts = list(verdicts)
    if not verdicts:
        raise ValueError("no verdicts to aggregate")
    best = 0
    for i, v in enumerate(verdicts):
        if v.rank > verdicts[best].rank:
            best = i
    return best, verdicts[best]


def _diag_dicts(diags) -> list:
    return [d.to_dict() for d in diags]


def run_attempt(bench: Benchmark, transport: LlmTransport, config: RunConfig,
                examples=(), repair_examples=None) -> Attempt:
    """One sample: propose, repair on parser feedback up to ``max_repairs`` times, check."""
    started = time.monotonic()
    attempt = Attempt()
    spec = CheckSpec(bench.expected_formula(), bench.min_writes, config.timeout_ms)
    params = config.params()
    shots = examples if config.mode == MULTI_SHOT else ()
    messages = build_propose_prompt(bench.question, shots)
    history = []
    repairs = 0
    while True:
        try:
            response = transport.send(messages, params)
        except TransportError as e:
            log.warning("%s: transport error: %s", bench.id, e)
            attempt.transcript.append({"request": messages, "error": str(e)})
            attempt.verdict = CheckVerdict.failed(TRANSPORT_ERROR, str(e))
            break
        attempt.transcript.append({"request": messages, "response": response})
        text = extract_formula(response)
        try:
            model = parse_formula(text)
        except DglSyntaxError as e:
            attempt.proposals.append(Proposal(text, _diag_dicts(e.diagnostics)))
            history.append({"proposal": text, "feedback": [d.message for d in e.diagnostics]})
            if repairs >= config.max_repairs:
                attempt.verdict = CheckVerdict.failed(
                    SYNTAX_EXHAUSTED,
                    f"no parseable formula after {repairs} repair round(s)",
                )
                break
            repairs += 1
            messages = build_revise_prompt(bench.question, history, repair_examples)
            continue
        attempt.proposals.append(Proposal(text))
        verdict = check(model, spec, config.solver)
        attempt.verdict = verdict
        if (
            config.semantic_repair
            and verdict.kind == "failed"
            and repairs < config.max_repairs
        ):
            history.append({"proposal": text, "feedback": f"The checker rejected this model: {verdict.detail}"})
            repairs += 1
            messages = build_revise_prompt(bench.question, history, repair_examples)
            continue
        break
    attempt.millis = int((time.monotonic() - started) * 1000)
    return attempt


def run_benchmark(bench: Benchmark, transport: LlmTransport, config: RunConfig,
                  examples=(), repair_examples=None) -> RunRecord:
    """Sample ``config.samples`` independent attempts and keep the best."""
    started = time.monotonic()
    if repair_examples is None:
        repair_examples = REPAIR_EXAMPLES

    def one(_):
        return run_attempt(bench, transport, config, examples, repair_examples)

    workers = 1 if transport.ordered else max(1, config.workers)
    if workers == 1:
        attempts = [one(i) for i in range(config.samples)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            attempts = list(pool.map(one, range(config.samples)))
    idx, best = best_of(a.verdict for a in attempts)
    return RunRecord(
        benchmark=bench.id,
        model=config.model,
        mode=config.mode,
        attempts=attempts,
        best=best,
        best_index=idx,
        tags=tuple(bench.tags),
        millis=int((time.monotonic() - started) * 1000),
    )


def run_suite(benchmarks, transport, config, examples=(), on_record=None) -> list:
    """Run every benchmark; results come back in input order."""
    benchmarks = list(benchmarks)

    def one(b):
        rec = run_benchmark(b, transport, config, examples)
        log.info("%s: %s (samples %s)", b.id, rec.best.label, [v.label for v in rec.verdicts])
        return rec

    if transport.ordered or config.workers <= 1:
        records = []
        for b in benchmarks:
            rec = one(b)
            records.append(rec)
            if on_record:
                on_record(rec)
        return records
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        records = list(pool.map(one, benchmarks))
    if on_record:
        for rec in records:
            on_record(rec)
    return records

"""Semantic evaluation of a parsed model against an expected solution.

Stages: assumption spine, stasis, assumption satisfiability, weakest
precondition, equivalence.  The outcome falls into one of four buckets:
success, failed, timeout, tool_failure.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from . import ir
from .analysis import ShapeError, StasisError, split_assumptions, stasis_check
from .ir import Equiv, Imply, Not, TrueF
from .solver import (
    DEFAULT_TIMEOUT_MS,
    SolverConfig,
    SolverQuery,
    SolverVerdict,
    Status,
    check_validity,
)
from .symexec import FailureKind, ToolFailure, ToolFailureReason, wp

log = logging.getLogger(__name__)

SUCCESS = "success"
FAILED = "failed"
TIMEOUT = "timeout"
TOOL_FAILURE = "tool_failure"
KINDS = (SUCCESS, FAILED, TIMEOUT, TOOL_FAILURE)

# failed stages
SHAPE = "shape"
STASIS = "stasis"
ASSUMPTIONS_UNSAT = "assumptions_unsat"
NOT_EQUIVALENT = "not_equivalent"
SYNTAX_EXHAUSTED = "syntax_exhausted"
TRANSPORT_ERROR = "transport_error"
SOLVER_ERROR = "solver_error"

RANK = {SUCCESS: 2, TOOL_FAILURE: 1, TIMEOUT: 1, FAILED: 0}


@dataclass(frozen=True)
class CheckSpec:
    expected: ir.Formula
    min_writes: int
    timeout_ms: int = DEFAULT_TIMEOUT_MS

    def __post_init__(self):
        if not ir.is_modality_free(self.expected):
            raise ValueError("the expected solution must be modality-free")
        if self.min_writes < 0:
            raise ValueError("min_writes must be nonnegative")


@dataclass
class CheckVerdict:
    kind: str
    stage: str | None = None
    detail: str = ""
    counterexample: dict | None = None
    reason: ToolFailureReason | None = None
    directions: dict = field(default_factory=dict)
    trace: list = field(default_factory=list, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown verdict kind {self.kind!r}")

    @property
    def label(self) -> str:
        return f"{self.kind}:{self.stage}" if self.kind == FAILED and self.stage else self.kind

    @property
    def rank(self) -> int:
        return RANK[self.kind]

    @property
    def success(self) -> bool:
        return self.kind == SUCCESS

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "label": self.label}
        if self.stage:
            d["stage"] = self.stage
        if self.detail:
            d["detail"] = self.detail
        if self.counterexample:
            d["counterexample"] = dict(self.counterexample)
        if self.reason is not None:
            d["reason"] = self.reason.to_dict()
        if self.directions:
            d["directions"] = dict(self.directions)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CheckVerdict":
        reason = d.get("reason")
        return cls(
            kind=d["kind"],
            stage=d.get("stage"),
            detail=d.get("detail", ""),
            counterexample=d.get("counterexample"),
            reason=ToolFailureReason(FailureKind(reason["kind"]), reason["detail"]) if reason else None,
            directions=d.get("directions", {}),
        )

    @classmethod
    def failed(cls, stage, detail="", **kw):
        return cls(FAILED, stage=stage, detail=detail, **kw)


class _Budget:
    def __init__(self, timeout_ms):
        self.deadline = time.monotonic() + timeout_ms / 1000.0

    def remaining_ms(self) -> int:
        return int((self.deadline - time.monotonic()) * 1000)


class _Trace:
    def __init__(self, sink=None):
        self.records = []
        self.sink = sink

    def add(self, stage, status, started, detail=""):
        rec = {
            "stage": stage,
            "status": status,
            "millis": int((time.monotonic() - started) * 1000),
            "detail": detail,
        }
        self.records.append(rec)
        if self.sink is not None:
            self.sink(rec)


def _solve(goal, budget, solver) -> SolverVerdict:
    remaining = budget.remaining_ms()
    if remaining <= 0:
        return SolverVerdict(Status.TIMED_OUT, detail="check budget exhausted")
    return check_validity(SolverQuery(goal, timeout_ms=remaining), solver)


def _solver_outcome(v: SolverVerdict, stage: str) -> CheckVerdict | None:
    if v.status in (Status.TIMED_OUT, Status.UNKNOWN):
        return CheckVerdict(TIMEOUT, detail=f"{stage}: {v.status.value} {v.detail}".strip())
    if v.status is Status.PROCESS_ERROR:
        return CheckVerdict(
            TOOL_FAILURE,
            detail=f"{stage}: solver process error: {v.detail}",
            reason=ToolFailureReason(FailureKind.OTHER, f"solver process error: {v.detail}"),
        )
    return None


def check(model: ir.Formula, spec: CheckSpec, solver: SolverConfig | None = None,
          on_stage=None) -> CheckVerdict:
    """Certify ``model`` against ``spec``.  Never raises for model defects.

    ``on_stage`` receives one ``{stage, status, millis, detail}`` dict per
    completed stage.
    """
    solver = solver or SolverConfig.from_env()
    trace = _Trace(on_stage)
    verdict = _check(model, spec, solver, trace)
    verdict.trace = trace.records
    return verdict


def _check(model, spec, solver, trace) -> CheckVerdict:
    t0 = time.monotonic()
    try:
        split = split_assumptions(model)
    except ShapeError as e:
        trace.add("shape", "failed", t0, str(e))
        return CheckVerdict.failed(SHAPE, str(e))
    trace.add("shape", "ok", t0)

    missing = ir.free_vars(spec.expected) - ir.free_vars(model)
    if missing:
        log.warning("expected solution mentions variables absent from the model: %s",
                    ", ".join(sorted(missing)))

    t0 = time.monotonic()
    try:
        written = stasis_check(split.game, spec.min_writes)
    except StasisError as e:
        trace.add("stasis", "failed", t0, str(e))
        return CheckVerdict.failed(STASIS, str(e))
    trace.add("stasis", "ok", t0, ", ".join(sorted(written)))

    # steps 3-5 share one time budget
    budget = _Budget(spec.timeout_ms)

    t0 = time.monotonic()
    if isinstance(split.assumptions, TrueF):
        trace.add("assumptions", "ok", t0, "no assumptions")
    else:
        v = _solve(Not(split.assumptions), budget, solver)
        if v.status is Status.VALID:
            trace.add("assumptions", "failed", t0, "unsatisfiable")
            return CheckVerdict.failed(ASSUMPTIONS_UNSAT, "the assumptions are unsatisfiable")
        bad = _solver_outcome(v, "assumptions")
        if bad is not None:
            trace.add("assumptions", bad.kind, t0, bad.detail)
            return bad
        trace.add("assumptions", "ok", t0, "satisfiable")

    t0 = time.monotonic()
    try:
        pre = wp(split.modality)
    except ToolFailure as e:
        trace.add("wp", "tool_failure", t0, str(e))
        return CheckVerdict(TOOL_FAILURE, detail=str(e), reason=e.reason)
    trace.add("wp", "ok", t0)

    t0 = time.monotonic()
    goal = _under(split.assumptions, Equiv(spec.expected, pre))
    v = _solve(goal, budget, solver)
    bad = _solver_outcome(v, "equivalence")
    if bad is not None:
        trace.add("equivalence", bad.kind, t0, bad.detail)
        return bad
    if v.status is Status.VALID:
        trace.add("equivalence", "ok", t0, "valid")
        return CheckVerdict(SUCCESS, detail="equivalent to the expected solution")
    trace.add("equivalence", "failed", t0, "invalid")

    t0 = time.monotonic()
    directions = {
        "expected_implies_wp": _direction(_under(split.assumptions, Imply(spec.expected, pre)), budget, solver),
        "wp_implies_expected": _direction(_under(split.assumptions, Imply(pre, spec.expected)), budget, solver),
        "wp_valid": _direction(_under(split.assumptions, pre), budget, solver),
    }
    trace.add("directions", "ok", t0, ", ".join(f"{k}={v}" for k, v in directions.items()))
    detail = "not equivalent to the expected solution"
    if directions["wp_valid"] == Status.VALID.value:
        detail += "; the weakest precondition is valid, so Angel wins regardless of the solution"
    return CheckVerdict.failed(NOT_EQUIVALENT, detail, counterexample=v.counterexample or None,
                               directions=directions)


def _under(assumptions, f):
    return f if isinstance(assumptions, TrueF) else Imply(assumptions, f)


def _direction(goal, budget, solver) -> str:
    return _solve(goal, budget, solver).status.value


OPTIMIZATION = "optimization-blowup"
NON_POLYNOMIAL = "non-polynomial"
COMPLICATED = "complicated-dynamics"
OTHER = "other"


def classify_tool_failure(outcome, tags=()) -> str | None:
    """Report tag for a tool failure or timeout; None for other outcomes.

    ``outcome`` is a ToolFailureReason, a FailureKind, or a CheckVerdict.
    Timeouts on benchmarks tagged ``optimization`` are attributed to the
    adversarial blow-up, other timeouts to complicated dynamics.
    """
    if isinstance(outcome, CheckVerdict):
        if outcome.kind == TIMEOUT:
            return OPTIMIZATION if "optimization" in tags else COMPLICATED
        if outcome.kind != TOOL_FAILURE:
            return None
        outcome = outcome.reason
        if outcome is None:
            return OTHER
    if isinstance(outcome, str) and outcome == TIMEOUT:
        return OPTIMIZATION if "optimization" in tags else COMPLICATED
    kind = outcome.kind if isinstance(outcome, ToolFailureReason) else FailureKind(outcome)
    if kind in (FailureKind.NON_POLYNOMIAL_RHS, FailureKind.NON_SOLVABLE_ODE,
                FailureKind.DIVISION_IN_ODE):
        return NON_POLYNOMIAL
    return OTHER

"""SMT-LIB 2 bridge: validity of modality-free formulas via an external solver.

The solver is any SMT-LIB 2 executable that understands quantified nonlinear
real arithmetic (z3 by default).  It is configured by a command line, taken
from ``DGL_SOLVER`` or the ``solver.cmd`` config key.  A ``{file}``
placeholder in the command switches from stdin to a temporary script file.
"""

from __future__ import annotations

import enum
import os
import re
import shlex
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction

from . import ir
from .ir import (
    Add,
    And,
    Box,
    Cmp,
    Diamond,
    Div,
    Equiv,
    Exists,
    FalseF,
    Forall,
    Imply,
    Mul,
    Neg,
    Not,
    Num,
    Or,
    Pow,
    Sub,
    TrueF,
    Var,
)

DEFAULT_TIMEOUT_MS = 180_000
DEFAULT_CMD = "z3 -in"
GRACE_S = 2.0

_RESERVED = frozenset(
    """
    and or not xor ite let forall exists distinct true false assert par as
    declare-const declare-fun define-fun check-sat set-logic set-option
    Real Int Bool
    """.split()
)


class Status(str, enum.Enum):
    VALID = "valid"
    INVALID = "invalid"
    UNKNOWN = "unknown"
    TIMED_OUT = "timeout"
    PROCESS_ERROR = "error"


@dataclass
class SolverVerdict:
    status: Status
    counterexample: dict = field(default_factory=dict)
    detail: str = ""
    millis: int = 0

    @property
    def valid(self) -> bool:
        return self.status is Status.VALID

    def to_dict(self):
        d = {"status": self.status.value}
        if self.counterexample:
            d["counterexample"] = dict(self.counterexample)
        if self.detail:
            d["detail"] = self.detail
        return d


@dataclass
class SolverQuery:
    goal: ir.Formula
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    declared_vars: frozenset = None

    def __post_init__(self):
        if not ir.is_modality_free(self.goal):
            raise ValueError("solver goals must be modality-free")
        if self.declared_vars is None:
            self.declared_vars = ir.free_vars(self.goal)


class SolverConfigError(RuntimeError):
    pass


@dataclass
class SolverConfig:
    cmd: list = field(default_factory=lambda: shlex.split(DEFAULT_CMD))

    @classmethod
    def from_env(cls, settings: dict | None = None) -> "SolverConfig":
        text = os.environ.get("DGL_SOLVER") or (settings or {}).get("solver.cmd") or DEFAULT_CMD
        return cls(shlex.split(text))

    @property
    def uses_file(self) -> bool:
        return any("{file}" in a for a in self.cmd)

    def available(self) -> bool:
        return bool(self.cmd) and shutil.which(self.cmd[0]) is not None


# --------------------------------------------------------------------------
# Translation
# --------------------------------------------------------------------------


def smt_symbol(name: str) -> str:
    return f"|{name}|" if name in _RESERVED else name


def smt_number(value: Fraction) -> str:
    if value < 0:
        return f"(- {smt_number(-value)})"
    if value.denominator == 1:
        return f"{value.numerator}.0"
    text = ir._decimal_literal(value)
    if text is not None:
        return text if "." in text else text + ".0"
    return f"(/ {value.numerator}.0 {value.denominator}.0)"


def smt_term(t: ir.Term) -> str:
    if isinstance(t, Var):
        return smt_symbol(t.name)
    if isinstance(t, Num):
        return smt_number(t.value)
    if isinstance(t, Neg):
        return f"(- {smt_term(t.arg)})"
    if isinstance(t, Pow):
        if t.exp == 0:
            return "1.0"
        if t.exp == 1:
            return smt_term(t.base)
        base = smt_term(t.base)
        return "(* " + " ".join([base] * t.exp) + ")"
    ops = {Add: "+", Sub: "-", Mul: "*", Div: "/"}
    op = ops.get(type(t))
    if op is None:
        raise TypeError(f"not a term: {t!r}")
    return f"({op} {smt_term(t.left)} {smt_term(t.right)})"


def smt_formula(f: ir.Formula) -> str:
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, Cmp):
        a, b = smt_term(f.left), smt_term(f.right)
        if f.rel == "!=":
            return f"(not (= {a} {b}))"
        return f"({f.rel} {a} {b})"
    if isinstance(f, Not):
        return f"(not {smt_formula(f.arg)})"
    if isinstance(f, And):
        return f"(and {smt_formula(f.left)} {smt_formula(f.right)})"
    if isinstance(f, Or):
        return f"(or {smt_formula(f.left)} {smt_formula(f.right)})"
    if isinstance(f, Imply):
        return f"(=> {smt_formula(f.left)} {smt_formula(f.right)})"
    if isinstance(f, Equiv):
        return f"(= {smt_formula(f.left)} {smt_formula(f.right)})"
    if isinstance(f, (Forall, Exists)):
        q = "forall" if isinstance(f, Forall) else "exists"
        return f"({q} (({smt_symbol(f.var)} Real)) {smt_formula(f.body)})"
    if isinstance(f, (Diamond, Box)):
        raise ValueError("modalities must be symbolically executed before translation")
    raise TypeError(f"not a formula: {f!r}")


def to_smtlib(f: ir.Formula, declared=None, get_model: bool = False) -> str:
    """Script whose ``unsat`` answer means ``f`` is valid."""
    names = sorted(set(declared or ()) | set(ir.free_vars(f)))
    lines = ["(set-logic ALL)"]
    if get_model:
        lines.insert(0, "(set-option :produce-models true)")
    lines += [f"(declare-const {smt_symbol(v)} Real)" for v in names]
    lines.append(f"(assert (not {smt_formula(f)}))")
    lines.append("(check-sat)")
    if get_model:
        lines.append("(get-model)")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Running the solver
# --------------------------------------------------------------------------

_RESULT_RE = re.compile(r"^\s*(sat|unsat|unknown)\s*$")


def check_validity(query: SolverQuery, config: SolverConfig | None = None) -> SolverVerdict:
    """Run the configured solver on ``query``; never raises."""
    config = config or SolverConfig.from_env()
    script = to_smtlib(query.goal, query.declared_vars, get_model=True)
    timeout = max(query.timeout_ms, 0) / 1000.0
    started = time.monotonic()
    path = None
    try:
        cmd = list(config.cmd)
        if config.uses_file:
            fd, path = tempfile.mkstemp(suffix=".smt2", prefix="dgl_")
            with os.fdopen(fd, "w") as fh:
                fh.write(script)
            cmd = [a.replace("{file}", path) for a in cmd]
        out = _run(cmd, None if path else script, timeout)
    except subprocess.TimeoutExpired:
        return SolverVerdict(Status.TIMED_OUT, detail=f"exceeded {query.timeout_ms} ms",
                             millis=_ms(started))
    except OSError as e:
        return SolverVerdict(Status.PROCESS_ERROR, detail=str(e), millis=_ms(started))
    finally:
        if path:
            try:
                os.unlink(path)
            except OSError:
                pass
    verdict = parse_output(out)
    verdict.millis = _ms(started)
    return verdict


def _ms(started) -> int:
    return int((time.monotonic() - started) * 1000)


def _run(cmd, stdin_text, timeout: float) -> str:
    proc = subprocess.Popen(
        cmd,
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        text=True,
    )
    try:
        out, _ = proc.communicate(stdin_text, timeout=timeout)
    except subprocess.TimeoutExpired:
        proc.kill()
        try:
            proc.communicate(timeout=GRACE_S)
        except subprocess.TimeoutExpired:
            pass
        proc.wait()
        raise
    except BaseException:
        proc.kill()
        proc.wait()
        raise
    return out


def parse_output(out: str) -> SolverVerdict:
    lines = out.splitlines()
    for i, line in enumerate(lines):
        m = _RESULT_RE.match(line)
        if not m:
            continue
        answer = m.group(1)
        if answer == "unsat":
            return SolverVerdict(Status.VALID)
        if answer == "unknown":
            return SolverVerdict(Status.UNKNOWN, detail="solver answered unknown")
        rest = "\n".join(lines[i + 1:])
        return SolverVerdict(Status.INVALID, counterexample=parse_model(rest))
    return SolverVerdict(Status.PROCESS_ERROR, detail=out.strip()[:500] or "no output")


# --------------------------------------------------------------------------
# Model parsing
# --------------------------------------------------------------------------


def _sexprs(text: str):
    tokens = re.findall(r"\(|\)|\|[^|]*\||\"(?:[^\"]|\"\")*\"|[^\s()]+", text)
    stack = [[]]
    for tok in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                continue
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    while len(stack) > 1:
        done = stack.pop()
        stack[-1].append(done)
    return stack[0]


def _value(e):
    """Exact rational of a model value, or None when it is not rational."""
    if isinstance(e, str):
        try:
            return Fraction(e)
        except ValueError:
            return None
    if len(e) == 2 and e[0] == "-":
        v = _value(e[1])
        return None if v is None else -v
    if len(e) == 3 and e[0] == "/":
        a, b = _value(e[1]), _value(e[2])
        return None if a is None or not b else a / b
    return None


def _render(e) -> str:
    if isinstance(e, str):
        return e
    return "(" + " ".join(_render(x) for x in e) + ")"


def parse_model(text: str) -> dict:
    """``{name: value text}`` from ``(define-fun name () Real value)`` entries."""
    model = {}

    def walk(e):
        if not isinstance(e, list):
            return
        if len(e) == 5 and e[0] == "define-fun" and e[2] == [] and e[3] == "Real":
            name = e[1].strip("|")
            v = _value(e[4])
            model[name] = str(v) if v is not None else _render(e[4])
            return
        for x in e:
            walk(x)

    walk(_sexprs(text))
    return dict(sorted(model.items()))

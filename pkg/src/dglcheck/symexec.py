"""Backward symbolic execution of loop-free hybrid games.

``wp_diamond(g, post)`` is the first-order condition under which Angel has a
winning strategy in ``g`` for reaching ``post``; ``wp_box`` is the dual (Demon
controls the choices).  ODEs are handled by closed-form solutions of
nilpotent polynomial systems, quantifying over the duration.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from . import ir
from .ir import (
    ODE,
    And,
    Assign,
    AssignAny,
    Box,
    Choice,
    Cmp,
    Diamond,
    Dual,
    Equiv,
    Exists,
    FalseF,
    Forall,
    Imply,
    Loop,
    Not,
    Num,
    Or,
    Seq,
    Test,
    TrueF,
    Var,
    conj,
    disj,
    implies,
)
from .poly import NotPolynomial, Poly, from_term

TAU = "tau_"
SUB = "s_"


class FailureKind(str, enum.Enum):
    LOOP_UNSUPPORTED = "LoopUnsupported"
    NON_SOLVABLE_ODE = "NonSolvableODE"
    NON_POLYNOMIAL_RHS = "NonPolynomialRHS"
    DIVISION_IN_ODE = "DivisionInODE"
    OTHER = "Other"


@dataclass(frozen=True)
class ToolFailureReason:
    kind: FailureKind
    detail: str

    def to_dict(self):
        return {"kind": self.kind.value, "detail": self.detail}


class ToolFailure(Exception):
    """Symbolic execution met a construct outside the supported fragment."""

    def __init__(self, kind: FailureKind, detail: str):
        super().__init__(f"{kind.value}: {detail}")
        self.reason = ToolFailureReason(kind, detail)


@dataclass(frozen=True)
class OdeSolution:
    """Closed form of each evolving variable as a polynomial in ``tau``."""

    tau: str
    solutions: dict  # name -> Term
    polys: dict  # name -> Poly over pre-state atoms and tau

    def at(self, duration: ir.Term) -> dict:
        return {v: ir.substitute(t, self.tau, duration) for v, t in self.solutions.items()}


def fresh(base: str, avoid) -> str:
    return ir.fresh(base, avoid)


def solve_ode(system, tau: str | None = None) -> OdeSolution:
    """Solve ``{v' = rhs}`` for an acyclic (nilpotent) polynomial system.

    ``system`` is an ODE node or a sequence of ``(name, rhs)`` pairs.
    Raises ToolFailure for division by an evolving variable, division by
    zero, or cyclic dependencies between evolving variables.
    """
    equations = system.equations if isinstance(system, ODE) else tuple(system)
    names = [v for v, _ in equations]
    if len(set(names)) != len(names):
        raise ValueError("ODE variables must be distinct")
    evolving = frozenset(names)
    if tau is None:
        avoid = set(evolving)
        for _, rhs in equations:
            avoid |= ir.free_vars(rhs)
        tau = fresh(TAU, avoid)
    rhs_of = dict(equations)

    # reject non-polynomial right-hand sides before looking at dependencies
    for v, rhs in equations:
        try:
            from_term(rhs, evolving=evolving)
        except NotPolynomial as e:
            kind = (
                FailureKind.DIVISION_IN_ODE
                if e.division_by_zero
                else FailureKind.NON_POLYNOMIAL_RHS
            )
            raise ToolFailure(kind, f"{v}' = {rhs}: {e}") from None

    deps = {v: sorted(ir.free_vars(rhs_of[v]) & evolving) for v in names}
    order = _topological(names, deps)

    polys = {}
    for v in order:
        rhs = from_term(rhs_of[v], env=polys, evolving=evolving)
        # rhs(s) integrated from 0 to tau
        polys[v] = Poly.atom(v) + rhs.integrate(tau)
    if __debug__:
        _verify(equations, polys, tau, evolving)
    solutions = {v: polys[v].to_term(order_key=tau) for v in names}
    return OdeSolution(tau, solutions, {v: polys[v] for v in names})


def _topological(names, deps):
    order = []
    state = {}

    def visit(v, path):
        s = state.get(v)
        if s == "done":
            return
        if s == "active":
            cycle = path[path.index(v):] + [v]
            raise ToolFailure(
                FailureKind.NON_SOLVABLE_ODE,
                "cyclic dependency " + " -> ".join(cycle) + " has no polynomial solution",
            )
        state[v] = "active"
        for w in deps[v]:
            visit(w, path + [v])
        state[v] = "done"
        order.append(v)

    for v in names:
        visit(v, [])
    return order


def _verify(equations, polys, tau, evolving):
    for v, rhs in equations:
        sol = polys[v]
        assert sol.substitute(tau, Poly()) == Poly.atom(v), f"{v}(0) != {v}"
        expected = from_term(rhs, env=polys, evolving=evolving)
        assert sol.diff(tau) == expected, f"d{v}/d{tau} does not match {v}' = {rhs}"


# --------------------------------------------------------------------------
# Weakest preconditions
# --------------------------------------------------------------------------


def wp_diamond(game: ir.Game, post: ir.Formula) -> ir.Formula:
    """Condition under which Angel can play ``game`` to reach ``post``."""
    if isinstance(game, Assign):
        return ir.substitute(post, game.var, game.term)
    if isinstance(game, AssignAny):
        return Exists(game.var, post)
    if isinstance(game, Test):
        return conj(expand(game.cond), post)
    if isinstance(game, Seq):
        return wp_diamond(game.first, wp_diamond(game.second, post))
    if isinstance(game, Choice):
        return disj(wp_diamond(game.left, post), wp_diamond(game.right, post))
    if isinstance(game, Dual):
        # <a^d>P == [a]P
        return wp_box(game.body, post)
    if isinstance(game, ODE):
        return _ode_wp(game, post, angel=True)
    if isinstance(game, Loop):
        raise ToolFailure(FailureKind.LOOP_UNSUPPORTED, f"loop {game}")
    raise TypeError(f"not a game: {game!r}")


def wp_box(game: ir.Game, post: ir.Formula) -> ir.Formula:
    """Condition under which every play of ``game`` ends in ``post``."""
    if isinstance(game, Assign):
        return ir.substitute(post, game.var, game.term)
    if isinstance(game, AssignAny):
        return Forall(game.var, post)
    if isinstance(game, Test):
        return implies(expand(game.cond), post)
    if isinstance(game, Seq):
        return wp_box(game.first, wp_box(game.second, post))
    if isinstance(game, Choice):
        return conj(wp_box(game.left, post), wp_box(game.right, post))
    if isinstance(game, Dual):
        return wp_diamond(game.body, post)
    if isinstance(game, ODE):
        return _ode_wp(game, post, angel=False)
    if isinstance(game, Loop):
        raise ToolFailure(FailureKind.LOOP_UNSUPPORTED, f"loop {game}")
    raise TypeError(f"not a game: {game!r}")


def _ode_wp(ode: ODE, post: ir.Formula, angel: bool) -> ir.Formula:
    domain = expand(ode.domain)
    avoid = set(ir.all_names(post)) | set(ir.all_names(ode)) | set(ir.all_names(domain))
    tau = fresh(TAU, avoid)
    sol = solve_ode(ode, tau=tau)
    avoid.add(tau)
    tv = Var(tau)
    nonneg = Cmp(tv, ">=", Num(0))
    at_end = ir.substitute_many(post, sol.at(tv))
    if isinstance(domain, TrueF):
        stays = None
    else:
        s = fresh(SUB, avoid)
        sv = Var(s)
        window = And(Cmp(Num(0), "<=", sv), Cmp(sv, "<=", tv))
        stays = Forall(s, Imply(window, ir.substitute_many(domain, sol.at(sv))))
    if angel:
        body = conj(nonneg, stays, at_end) if stays else conj(nonneg, at_end)
        return Exists(tau, body)
    guard = conj(nonneg, stays) if stays else nonneg
    return Forall(tau, implies(guard, at_end))


def expand(f: ir.Formula) -> ir.Formula:
    """Replace every modality in ``f`` by its weakest precondition."""
    if isinstance(f, (TrueF, FalseF, Cmp)):
        return f
    if isinstance(f, Not):
        return Not(expand(f.arg))
    if isinstance(f, (And, Or, Imply, Equiv)):
        return type(f)(expand(f.left), expand(f.right))
    if isinstance(f, (Forall, Exists)):
        return type(f)(f.var, expand(f.body))
    if isinstance(f, Diamond):
        return wp_diamond(f.game, expand(f.post))
    if isinstance(f, Box):
        return wp_box(f.game, expand(f.post))
    raise TypeError(f"not a formula: {f!r}")


def wp(modal: ir.Formula) -> ir.Formula:
    """WP of a single Diamond/Box node."""
    if isinstance(modal, Diamond):
        return wp_diamond(modal.game, expand(modal.post))
    if isinstance(modal, Box):
        return wp_box(modal.game, expand(modal.post))
    raise TypeError("expected a modality")


__all__ = [
    "FailureKind",
    "OdeSolution",
    "ToolFailure",
    "ToolFailureReason",
    "expand",
    "fresh",
    "solve_ode",
    "wp",
    "wp_box",
    "wp_diamond",
]

"""Independent oracles and random generators shared by the test modules.

The evaluators here interpret the IR directly over exact rationals; they
never go through weakest preconditions or the solver, so they can judge
both.
"""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

import sympy
from hypothesis import strategies as st

from dglcheck import ir
from dglcheck.ir import (
    ODE, Add, And, Assign, AssignAny, Box, Choice, Cmp, Diamond, Div, Dual, Equiv, Exists,
    Forall, Imply, Loop, Mul, Neg, Not, Num, Or, Pow, Seq, Sub, Test, Var,
)

# --------------------------------------------------------------------------
# Concrete evaluation
# --------------------------------------------------------------------------


def eval_term(t, env) -> Fraction:
    if isinstance(t, Var):
        return env[t.name]
    if isinstance(t, Num):
        return t.value
    if isinstance(t, Neg):
        return -eval_term(t.arg, env)
    if isinstance(t, Pow):
        return eval_term(t.base, env) ** t.exp
    a, b = eval_term(t.left, env), eval_term(t.right, env)
    if isinstance(t, Add):
        return a + b
    if isinstance(t, Sub):
        return a - b
    if isinstance(t, Mul):
        return a * b
    if isinstance(t, Div):
        return a / b
    raise TypeError(t)


_REL = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def eval_formula(f, env) -> bool:
    """Truth of a quantifier-free formula; modalities are played out by game search."""
    if f is ir.TRUE or isinstance(f, ir.TrueF):
        return True
    if isinstance(f, ir.FalseF):
        return False
    if isinstance(f, Cmp):
        return _REL[f.rel](eval_term(f.left, env), eval_term(f.right, env))
    if isinstance(f, Not):
        return not eval_formula(f.arg, env)
    if isinstance(f, And):
        return eval_formula(f.left, env) and eval_formula(f.right, env)
    if isinstance(f, Or):
        return eval_formula(f.left, env) or eval_formula(f.right, env)
    if isinstance(f, Imply):
        return (not eval_formula(f.left, env)) or eval_formula(f.right, env)
    if isinstance(f, Equiv):
        return eval_formula(f.left, env) == eval_formula(f.right, env)
    if isinstance(f, Diamond):
        return angel_wins(f.game, lambda e: eval_formula(f.post, e), env)
    if isinstance(f, Box):
        return not angel_wins(f.game, lambda e: not eval_formula(f.post, e), env)
    raise TypeError(f"cannot evaluate {f!r}")


def angel_wins(game, goal, env) -> bool:
    """Exhaustive game-tree search: can Angel, in control, play ``game`` into ``goal``?

    Handles assignments, tests, sequence, choice and dual; a dual hands the
    whole subgame to Demon, so Angel wins it iff Demon cannot avoid ``goal``.
    """
    if isinstance(game, Assign):
        return goal({**env, game.var: eval_term(game.term, env)})
    if isinstance(game, Test):
        return eval_formula(game.cond, env) and goal(env)
    if isinstance(game, Seq):
        return angel_wins(game.first, lambda e: angel_wins(game.second, goal, e), env)
    if isinstance(game, Choice):
        return angel_wins(game.left, goal, env) or angel_wins(game.right, goal, env)
    if isinstance(game, Dual):
        return not angel_wins(game.body, lambda e: not goal(e), env)
    raise TypeError(f"no finite game tree for {game!r}")


def states(names, values=range(-2, 3)):
    names = sorted(names)
    for combo in itertools.product(values, repeat=len(names)):
        yield {n: Fraction(v) for n, v in zip(names, combo)}


# --------------------------------------------------------------------------
# sympy bridge
# --------------------------------------------------------------------------


def to_sympy(t):
    if isinstance(t, Var):
        return sympy.Symbol(t.name)
    if isinstance(t, Num):
        return sympy.Rational(t.value.numerator, t.value.denominator)
    if isinstance(t, Neg):
        return -to_sympy(t.arg)
    if isinstance(t, Pow):
        return to_sympy(t.base) ** t.exp
    a, b = to_sympy(t.left), to_sympy(t.right)
    return {Add: a + b, Sub: a - b, Mul: a * b, Div: a / b}[type(t)]


# --------------------------------------------------------------------------
# Random generators (seeded, for the sized acceptance runs)
# --------------------------------------------------------------------------


def random_poly_term(rng: random.Random, names, degree: int, consts=range(-3, 4)) -> ir.Term:
    """Sum of up to three monomials of total degree at most ``degree``."""
    mons = []
    for _ in range(rng.randint(1, 3)):
        c = rng.choice([c for c in consts if c])
        mono = ir.const(c)
        for _ in range(rng.randint(0, degree)):
            if not names:
                break
            v = Var(rng.choice(names))
            e = rng.randint(1, 2)
            mono = Mul(mono, Pow(v, e) if e > 1 else v)
        mons.append(mono)
    out = mons[0]
    for m in mons[1:]:
        out = Add(out, m)
    return out


def _trim_degree(t: ir.Term, names, degree: int, rng) -> ir.Term:
    # rebuild monomials until the total degree bound holds
    poly = sympy.Poly(to_sympy(t), *[sympy.Symbol(n) for n in names]) if names else None
    if poly is None or poly.total_degree() <= degree:
        return t
    return random_poly_term(rng, names, 1)


def random_acyclic_system(rng: random.Random, max_vars=4, max_degree=3, params=("a", "b")):
    """``[(name, rhs)]`` whose dependency graph is acyclic; rhs polynomials of degree <= max_degree."""
    n = rng.randint(1, max_vars)
    names = rng.sample(["x", "y", "z", "w", "v", "p"], n)
    eqs = []
    for i, v in enumerate(names):
        earlier = names[:i] + [p for p in params if rng.random() < 0.5]
        rhs = random_poly_term(rng, earlier, max_degree)
        rhs = _trim_degree(rhs, earlier, max_degree, rng)
        eqs.append((v, rhs))
    rng.shuffle(eqs)
    return eqs


GAME_VARS = ("x", "y", "z")


def random_small_term(rng, depth=2):
    if depth == 0 or rng.random() < 0.4:
        if rng.random() < 0.5:
            return Var(rng.choice(GAME_VARS))
        return ir.const(rng.randint(-2, 2))
    op = rng.choice([Add, Sub, Mul])
    return op(random_small_term(rng, depth - 1), random_small_term(rng, depth - 1))


def random_small_formula(rng, depth=2):
    if depth == 0 or rng.random() < 0.5:
        return Cmp(random_small_term(rng, 1), rng.choice(ir.RELATIONS), random_small_term(rng, 1))
    kind = rng.choice(["and", "or", "not"])
    if kind == "not":
        return Not(random_small_formula(rng, depth - 1))
    op = And if kind == "and" else Or
    return op(random_small_formula(rng, depth - 1), random_small_formula(rng, depth - 1))


def random_discrete_game(rng, depth=5):
    """ODE-free, loop-free game over GAME_VARS with small integer constants."""
    if depth <= 1 or rng.random() < 0.3:
        if rng.random() < 0.6:
            return Assign(rng.choice(GAME_VARS), random_small_term(rng))
        return Test(random_small_formula(rng, 1))
    kind = rng.choice(["seq", "seq", "choice", "dual"])
    if kind == "dual":
        return Dual(random_discrete_game(rng, depth - 1))
    op = Seq if kind == "seq" else Choice
    return op(random_discrete_game(rng, depth - 1), random_discrete_game(rng, depth - 1))


def game_depth(g) -> int:
    if isinstance(g, (Seq, Choice)):
        return 1 + max(game_depth(g.first if isinstance(g, Seq) else g.left),
                       game_depth(g.second if isinstance(g, Seq) else g.right))
    if isinstance(g, (Dual, Loop)):
        return 1 + game_depth(g.body)
    return 1


# --------------------------------------------------------------------------
# Hypothesis strategies for whole IR trees
# --------------------------------------------------------------------------

NAMES = st.sampled_from(["x", "y", "v", "t", "dh", "v0", "x_1"])
DECIMALS = st.sampled_from(["0", "1", "2", "10", "0.5", "2.25", "3", "100"]).map(Num.parse)

terms = st.recursive(
    st.one_of(NAMES.map(Var), DECIMALS),
    lambda sub: st.one_of(
        sub.map(Neg),
        st.builds(Add, sub, sub),
        st.builds(Sub, sub, sub),
        st.builds(Mul, sub, sub),
        st.builds(Div, sub, sub),
        st.builds(Pow, sub, st.integers(0, 3)),
    ),
    max_leaves=6,
)

atoms = st.one_of(
    st.just(ir.TRUE), st.just(ir.FALSE),
    st.builds(Cmp, terms, st.sampled_from(ir.RELATIONS), terms),
)


def _ode(eqs, domain):
    seen, uniq = set(), []
    for v, rhs in eqs:
        if v not in seen:
            seen.add(v)
            uniq.append((v, rhs))
    return ODE(tuple(uniq), domain)


def _games(formula):
    leaves = st.one_of(
        st.builds(Assign, NAMES, terms),
        NAMES.map(AssignAny),
        st.builds(Test, formula),
        st.builds(_ode, st.lists(st.tuples(NAMES, terms), min_size=1, max_size=3),
                  st.one_of(st.just(ir.TRUE), atoms)),
    )
    return st.recursive(
        leaves,
        lambda sub: st.one_of(
            st.builds(Seq, sub, sub),
            st.builds(Choice, sub, sub),
            sub.map(Loop),
            sub.map(Dual),
        ),
        max_leaves=5,
    )


formulas = st.deferred(lambda: st.recursive(
    atoms,
    lambda sub: st.one_of(
        sub.map(Not),
        st.builds(And, sub, sub),
        st.builds(Or, sub, sub),
        st.builds(Imply, sub, sub),
        st.builds(Equiv, sub, sub),
        st.builds(Forall, NAMES, sub),
        st.builds(Exists, NAMES, sub),
        st.builds(Diamond, _games(atoms), sub),
        st.builds(Box, _games(atoms), sub),
    ),
    max_leaves=8,
))

games = _games(formulas)

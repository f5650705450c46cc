"""Abstract syntax for differential game logic.

Terms are real-arithmetic expressions with exact rational constants,
formulas are first-order real arithmetic extended with the game modalities
``<a>phi`` (Angel can win) and ``[a]phi`` (Demon cannot stop phi), and games
are hybrid programs with a duality operator.

All nodes are frozen dataclasses, so they hash, compare structurally and can
be shared freely between threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Union

IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")
KEYWORDS = frozenset({"true", "false"})


def check_ident(name: str) -> str:
    if not isinstance(name, str) or not IDENT_RE.match(name) or name in KEYWORDS:
        raise ValueError(f"invalid identifier: {name!r}")
    return name


# --------------------------------------------------------------------------
# Terms
# --------------------------------------------------------------------------


class Term:
    __slots__ = ()

    def __add__(self, other):
        return Add(self, as_term(other))

    def __sub__(self, other):
        return Sub(self, as_term(other))

    def __mul__(self, other):
        return Mul(self, as_term(other))

    def __truediv__(self, other):
        return Div(self, as_term(other))

    def __neg__(self):
        return Neg(self)

    def __pow__(self, n: int):
        return Pow(self, n)

    def __radd__(self, other):
        return Add(as_term(other), self)

    def __rmul__(self, other):
        return Mul(as_term(other), self)

    def __str__(self):
        from .parser import print_term

        return print_term(self)


@dataclass(frozen=True)
class Var(Term):
    name: str

    def __post_init__(self):
        check_ident(self.name)


def _decimal_literal(value: Fraction) -> str | None:
    """Shortest plain decimal spelling of ``value`` or None if it has none."""
    if value < 0:
        return None
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return None
    places = max(twos, fives)
    if places == 0:
        return str(value.numerator)
    scaled = value * 10**places
    digits = str(scaled.numerator).rjust(places + 1, "0")
    return f"{digits[:-places]}.{digits[-places:]}".rstrip("0").rstrip(".")


@dataclass(frozen=True)
class Num(Term):
    """Nonnegative exact rational. ``literal`` keeps the source spelling."""

    value: Fraction
    literal: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))
        if self.value < 0:
            raise ValueError("Num holds nonnegative values; wrap in Neg")

    @classmethod
    def parse(cls, literal: str) -> "Num":
        return cls(Fraction(literal), literal)

    @property
    def text(self) -> str | None:
        return self.literal or _decimal_literal(self.value)


@dataclass(frozen=True)
class Neg(Term):
    arg: Term


@dataclass(frozen=True)
class Add(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Sub(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Mul(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Div(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Pow(Term):
    base: Term
    exp: int

    def __post_init__(self):
        if isinstance(self.exp, bool) or not isinstance(self.exp, int) or self.exp < 0:
            raise ValueError("exponent must be a nonnegative integer literal")


def as_term(x) -> Term:
    if isinstance(x, Term):
        return x
    if isinstance(x, str):
        return Var(x)
    return const(Fraction(x))


def const(value) -> Term:
    """Term for an arbitrary rational, always reparseable to an equal term.

    Values without a terminating decimal expansion become ``p / q``.
    """
    value = Fraction(value)
    if value < 0:
        return Neg(const(-value))
    if _decimal_literal(value) is not None:
        return Num(value)
    return Div(Num(Fraction(value.numerator)), Num(Fraction(value.denominator)))


# --------------------------------------------------------------------------
# Formulas
# --------------------------------------------------------------------------

RELATIONS = ("=", "!=", "<", "<=", ">", ">=")


class Formula:
    __slots__ = ()

    def __str__(self):
        from .parser import print_formula

        return print_formula(self)


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class FalseF(Formula):
    pass


TRUE = TrueF()
FALSE = FalseF()


@dataclass(frozen=True)
class Cmp(Formula):
    left: Term
    rel: str
    right: Term

    def __post_init__(self):
        if self.rel not in RELATIONS:
            raise ValueError(f"unknown relation {self.rel!r}")


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Imply(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Equiv(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    body: Formula

    def __post_init__(self):
        check_ident(self.var)


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    body: Formula

    def __post_init__(self):
        check_ident(self.var)


@dataclass(frozen=True)
class Diamond(Formula):
    game: "Game"
    post: Formula


@dataclass(frozen=True)
class Box(Formula):
    game: "Game"
    post: Formula


# --------------------------------------------------------------------------
# Games
# --------------------------------------------------------------------------


class Game:
    __slots__ = ()

    def __str__(self):
        from .parser import print_game

        return print_game(self)


@dataclass(frozen=True)
class Assign(Game):
    var: str
    term: Term

    def __post_init__(self):
        check_ident(self.var)


@dataclass(frozen=True)
class AssignAny(Game):
    var: str

    def __post_init__(self):
        check_ident(self.var)


@dataclass(frozen=True)
class Test(Game):
    cond: Formula

    __test__ = False  # keep pytest from collecting this class


@dataclass(frozen=True)
class ODE(Game):
    """``{x1'=e1, ..., xn'=en & domain}``; ``equations`` is a tuple of pairs."""

    equations: tuple
    domain: Formula = TRUE

    def __post_init__(self):
        eqs = tuple((check_ident(v), rhs) for v, rhs in self.equations)
        if not eqs:
            raise ValueError("ODE needs at least one equation")
        names = [v for v, _ in eqs]
        if len(set(names)) != len(names):
            raise ValueError("ODE variables must be distinct")
        object.__setattr__(self, "equations", eqs)

    @property
    def variables(self) -> tuple:
        return tuple(v for v, _ in self.equations)


@dataclass(frozen=True)
class Seq(Game):
    first: Game
    second: Game


@dataclass(frozen=True)
class Choice(Game):
    left: Game
    right: Game


@dataclass(frozen=True)
class Loop(Game):
    body: Game


@dataclass(frozen=True)
class Dual(Game):
    body: Game


Node = Union[Term, Formula, Game]

# --------------------------------------------------------------------------
# Structural utilities
# --------------------------------------------------------------------------


def free_vars(node: Node) -> frozenset:
    """Identifiers read by ``node``.

    Quantifiers bind.  For games, every variable that occurs anywhere
    (including the left side of assignments and ODEs) is reported, since the
    game may read it; use :func:`written_vars` for the write set.
    """
    return _free(node)


def _free(n) -> frozenset:
    if isinstance(n, Var):
        return frozenset((n.name,))
    if isinstance(n, Num) or isinstance(n, (TrueF, FalseF)):
        return frozenset()
    if isinstance(n, (Neg, Not)):
        return _free(n.arg)
    if isinstance(n, Pow):
        return _free(n.base)
    if isinstance(n, (Add, Sub, Mul, Div, And, Or, Imply, Equiv, Choice)):
        return _free(n.left) | _free(n.right)
    if isinstance(n, Cmp):
        return _free(n.left) | _free(n.right)
    if isinstance(n, (Forall, Exists)):
        return _free(n.body) - {n.var}
    if isinstance(n, (Diamond, Box)):
        # variables written by the game are overwritten before post is read,
        # but only on the paths that write them, so keep them free
        return _free(n.game) | _free(n.post)
    if isinstance(n, Assign):
        return frozenset((n.var,)) | _free(n.term)
    if isinstance(n, AssignAny):
        return frozenset((n.var,))
    if isinstance(n, Test):
        return _free(n.cond)
    if isinstance(n, ODE):
        out = set(n.variables)
        for _, rhs in n.equations:
            out |= _free(rhs)
        return frozenset(out) | _free(n.domain)
    if isinstance(n, Seq):
        return _free(n.first) | _free(n.second)
    if isinstance(n, (Loop, Dual)):
        return _free(n.body)
    raise TypeError(f"not a dGL node: {n!r}")


def written_vars(game: Game) -> frozenset:
    """Variables a game may change: assignment targets and ODE-bound names."""
    if isinstance(game, (Assign, AssignAny)):
        return frozenset((game.var,))
    if isinstance(game, Test):
        return frozenset()
    if isinstance(game, ODE):
        return frozenset(game.variables)
    if isinstance(game, Seq):
        return written_vars(game.first) | written_vars(game.second)
    if isinstance(game, Choice):
        return written_vars(game.left) | written_vars(game.right)
    if isinstance(game, (Loop, Dual)):
        return written_vars(game.body)
    raise TypeError(f"not a game: {game!r}")


def all_names(node: Node) -> frozenset:
    """Every identifier occurring in ``node``, bound or free."""
    names = set(free_vars(node))
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, (Forall, Exists)):
            names.add(n.var)
        for child in _children(n):
            stack.append(child)
    return frozenset(names)


def _children(n):
    if isinstance(n, (Neg, Not)):
        return (n.arg,)
    if isinstance(n, Pow):
        return (n.base,)
    if isinstance(n, (Add, Sub, Mul, Div, And, Or, Imply, Equiv, Cmp, Choice)):
        return (n.left, n.right)
    if isinstance(n, (Forall, Exists)):
        return (n.body,)
    if isinstance(n, (Diamond, Box)):
        return (n.game, n.post)
    if isinstance(n, Assign):
        return (n.term,)
    if isinstance(n, Test):
        return (n.cond,)
    if isinstance(n, ODE):
        return tuple(rhs for _, rhs in n.equations) + (n.domain,)
    if isinstance(n, Seq):
        return (n.first, n.second)
    if isinstance(n, (Loop, Dual)):
        return (n.body,)
    return ()


def is_modality_free(f: Formula) -> bool:
    stack = [f]
    while stack:
        n = stack.pop()
        if isinstance(n, (Diamond, Box)):
            return False
        if isinstance(n, Formula):
            stack.extend(_children(n))
    return True


def fresh(base: str, avoid) -> str:
    """``base`` if unused, otherwise ``base1``, ``base2``, ... ."""
    if base not in avoid:
        return base
    i = 1
    while f"{base}{i}" in avoid:
        i += 1
    return f"{base}{i}"


def substitute(node, x: str, e: Term):
    """Capture-avoiding replacement of free ``x`` by ``e``."""
    return substitute_many(node, {x: e})


def substitute_many(node, mapping: Mapping[str, Term]):
    """Simultaneous capture-avoiding substitution.

    Bound variables that would capture a free variable of a replacement are
    renamed.  Substituting into a modality is only admissible when the game
    neither writes a substituted variable nor a variable of its replacement;
    otherwise ValueError is raised.
    """
    mapping = {k: v for k, v in mapping.items()}
    if not mapping:
        return node
    return _subst(node, mapping)


def _subst(n, m):
    if isinstance(n, Var):
        return m.get(n.name, n)
    if isinstance(n, (Num, TrueF, FalseF)):
        return n
    if isinstance(n, Neg):
        return Neg(_subst(n.arg, m))
    if isinstance(n, Not):
        return Not(_subst(n.arg, m))
    if isinstance(n, Pow):
        return Pow(_subst(n.base, m), n.exp)
    if isinstance(n, (Add, Sub, Mul, Div, And, Or, Imply, Equiv)):
        return type(n)(_subst(n.left, m), _subst(n.right, m))
    if isinstance(n, Cmp):
        return Cmp(_subst(n.left, m), n.rel, _subst(n.right, m))
    if isinstance(n, (Forall, Exists)):
        body_free = _free(n.body)
        inner = {k: v for k, v in m.items() if k != n.var and k in body_free}
        if not inner:
            return n
        repl_free = set()
        for v in inner.values():
            repl_free |= _free(v)
        var, body = n.var, n.body
        if var in repl_free:
            avoid = repl_free | all_names(body) | set(inner)
            new = fresh(var, avoid)
            body = _subst(body, {var: Var(new)})
            var = new
        return type(n)(var, _subst(body, inner))
    if isinstance(n, (Diamond, Box)):
        touched = {k: v for k, v in m.items() if k in _free(n)}
        if not touched:
            return n
        writes = written_vars(n.game)
        clash = set(touched) & writes
        for v in touched.values():
            clash |= _free(v) & writes
        if clash:
            raise ValueError(
                f"substitution into modality clashes with written variables {sorted(clash)}"
            )
        return type(n)(_subst(n.game, touched), _subst(n.post, touched))
    if isinstance(n, Assign):
        return Assign(n.var, _subst(n.term, m))
    if isinstance(n, AssignAny):
        return n
    if isinstance(n, Test):
        return Test(_subst(n.cond, m))
    if isinstance(n, ODE):
        return ODE(tuple((v, _subst(rhs, m)) for v, rhs in n.equations), _subst(n.domain, m))
    if isinstance(n, Seq):
        return Seq(_subst(n.first, m), _subst(n.second, m))
    if isinstance(n, Choice):
        return Choice(_subst(n.left, m), _subst(n.right, m))
    if isinstance(n, (Loop, Dual)):
        return type(n)(_subst(n.body, m))
    raise TypeError(f"not a dGL node: {n!r}")


# --------------------------------------------------------------------------
# Smart constructors used by symbolic execution (true/false units only)
# --------------------------------------------------------------------------


def conj(*fs: Formula) -> Formula:
    out = None
    for f in fs:
        if isinstance(f, FalseF):
            return FALSE
        if isinstance(f, TrueF):
            continue
        out = f if out is None else And(out, f)
    return TRUE if out is None else out


def disj(*fs: Formula) -> Formula:
    out = None
    for f in fs:
        if isinstance(f, TrueF):
            return TRUE
        if isinstance(f, FalseF):
            continue
        out = f if out is None else Or(out, f)
    return FALSE if out is None else out


def neg(f: Formula) -> Formula:
    if isinstance(f, TrueF):
        return FALSE
    if isinstance(f, FalseF):
        return TRUE
    return Not(f)


def implies(a: Formula, b: Formula) -> Formula:
    if isinstance(a, TrueF) or isinstance(b, TrueF):
        return b if isinstance(a, TrueF) else TRUE
    if isinstance(a, FalseF):
        return TRUE
    return Imply(a, b)


def seq(*games: Game) -> Game:
    """Right-nested sequential composition, matching the parser."""
    out = games[-1]
    for g in reversed(games[:-1]):
        out = Seq(g, out)
    return out

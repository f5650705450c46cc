"""Sparse multivariate polynomials with exact rational coefficients.

Used to solve nilpotent ODE systems.  Atoms are variable names; subterms
that are not polynomial but do not mention any evolving variable (such as
``1/m``) are kept as opaque atoms keyed by their printed text.
"""

from __future__ import annotations

from fractions import Fraction

from . import ir
from .ir import IDENT_RE, Add, Div, Mul, Neg, Num, Pow, Sub, Var

ONE = ()


class NotPolynomial(Exception):
    def __init__(self, detail: str, division_by_zero: bool = False):
        super().__init__(detail)
        self.division_by_zero = division_by_zero


class Poly:
    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {m: c for m, c in (terms or {}).items() if c != 0}

    @classmethod
    def const(cls, c) -> "Poly":
        return cls({ONE: Fraction(c)})

    @classmethod
    def atom(cls, key: str) -> "Poly":
        return cls({((key, 1),): Fraction(1)})

    def __add__(self, other: "Poly") -> "Poly":
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0) + c
        return Poly(out)

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other: "Poly") -> "Poly":
        out = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                out[m] = out.get(m, 0) + c1 * c2
        return Poly(out)

    def scale(self, c) -> "Poly":
        return Poly({m: c * v for m, v in self.terms.items()})

    def __pow__(self, n: int) -> "Poly":
        out = Poly.const(1)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        return isinstance(other, Poly) and self.terms == other.terms

    def __repr__(self):
        return f"Poly({self.terms!r})"

    def is_const(self) -> bool:
        return all(m == ONE for m in self.terms)

    def const_value(self) -> Fraction:
        return self.terms.get(ONE, Fraction(0))

    def atoms(self) -> set:
        return {a for m in self.terms for a, _ in m}

    def degree_in(self, key: str) -> int:
        return max((dict(m).get(key, 0) for m in self.terms), default=0)

    def substitute(self, key: str, value: "Poly") -> "Poly":
        out = Poly()
        for m, c in self.terms.items():
            rest = tuple(p for p in m if p[0] != key)
            k = dict(m).get(key, 0)
            out = out + Poly({rest: c}) * (value**k)
        return out

    def diff(self, key: str) -> "Poly":
        out = {}
        for m, c in self.terms.items():
            d = dict(m)
            k = d.get(key, 0)
            if k == 0:
                continue
            if k == 1:
                del d[key]
            else:
                d[key] = k - 1
            mono = tuple(sorted(d.items()))
            out[mono] = out.get(mono, 0) + c * k
        return Poly(out)

    def integrate(self, key: str) -> "Poly":
        """Antiderivative in ``key`` vanishing at ``key = 0``."""
        out = {}
        for m, c in self.terms.items():
            d = dict(m)
            k = d.get(key, 0)
            d[key] = k + 1
            mono = tuple(sorted(d.items()))
            out[mono] = out.get(mono, 0) + c / (k + 1)
        return Poly(out)

    def to_term(self, order_key: str | None = None) -> ir.Term:
        """Render as a term, grouping monomials by ascending degree in ``order_key``."""
        if not self.terms:
            return Num(Fraction(0))

        def sort_key(item):
            m, _ = item
            return (dict(m).get(order_key, 0) if order_key else 0, sum(e for _, e in m), m)

        out = None
        for m, c in sorted(self.terms.items(), key=sort_key):
            mono = _mono_term(m)
            negative = c < 0
            mag = -c if negative else c
            if mono is None:
                piece = ir.const(mag)
            elif mag == 1:
                piece = mono
            elif mag.denominator == 1:
                piece = Mul(ir.const(mag), mono)
            else:
                piece = Div(_scaled(mag.numerator, mono), Num(Fraction(mag.denominator)))
            if out is None:
                out = Neg(piece) if negative else piece
            else:
                out = Sub(out, piece) if negative else Add(out, piece)
        return out


def _scaled(n: int, mono: ir.Term) -> ir.Term:
    return mono if n == 1 else Mul(Num(Fraction(n)), mono)


def _mono_mul(m1, m2):
    d = dict(m1)
    for a, e in m2:
        d[a] = d.get(a, 0) + e
    return tuple(sorted(d.items()))


def atom_term(key: str) -> ir.Term:
    if IDENT_RE.match(key):
        return Var(key)
    from .parser import parse_term

    return parse_term(key)


def _mono_term(m):
    out = None
    for a, e in m:
        base = atom_term(a)
        piece = base if e == 1 else Pow(base, e)
        out = piece if out is None else Mul(out, piece)
    return out


def from_term(t: ir.Term, env=None, evolving=frozenset()) -> Poly:
    """Polynomial of ``t`` with variables in ``env`` replaced by polynomials.

    Raises NotPolynomial when a denominator mentions an evolving variable.
    Denominators free of evolving variables become opaque atoms.
    """
    env = env or {}

    def go(t):
        if isinstance(t, Var):
            return env[t.name] if t.name in env else Poly.atom(t.name)
        if isinstance(t, Num):
            return Poly.const(t.value)
        if isinstance(t, Neg):
            return -go(t.arg)
        if isinstance(t, Add):
            return go(t.left) + go(t.right)
        if isinstance(t, Sub):
            return go(t.left) - go(t.right)
        if isinstance(t, Mul):
            return go(t.left) * go(t.right)
        if isinstance(t, Pow):
            return go(t.base) ** t.exp
        if isinstance(t, Div):
            den_vars = ir.free_vars(t.right) & evolving
            if den_vars:
                from .parser import print_term

                raise NotPolynomial(
                    f"division by {print_term(t.right)}, which depends on "
                    f"evolving variable(s) {', '.join(sorted(den_vars))}"
                )
            den = go(t.right)
            if den.is_const():
                if den.const_value() == 0:
                    raise NotPolynomial("division by zero", division_by_zero=True)
                return go(t.left).scale(1 / den.const_value())
            from .parser import print_term

            inv = Div(Num(Fraction(1)), t.right)
            return go(t.left) * Poly.atom(f"({print_term(inv)})")
        raise TypeError(f"not a term: {t!r}")

    return go(t)

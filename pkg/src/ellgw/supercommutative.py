"""Truncated supercommutative polynomial algebra.

The generators are graded variables: ``t^alpha_d`` for the potential side
(``TVariable``), jet variables for the hierarchy side.  Variables with
``odd`` parity anticommute and square to zero; even variables commute with
everything.  A monomial is stored in canonical form: the even part as a
sorted tuple of ``(variable, exponent)`` pairs, the odd part as a strictly
increasing tuple of distinct odd variables, with the accumulated Koszul sign
pushed into the coefficient.

Coefficients live in a ring described by :data:`~ellgw.algebra.QQ` or a
:class:`~ellgw.algebra.SeriesRing`.  Truncation policy objects decide which
monomials are admitted; binary operations require equal truncation policies.
Dropped monomials narrow the window of stored information and never corrupt
coefficients inside it (total degree is additive, the maximal level of a
product is the max of the factors').

Partial derivatives are left derivatives: the variable is moved to the
leftmost position, collecting Koszul signs, then struck.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Iterable, Mapping, NamedTuple

from gmpy2 import mpq

from .algebra import QQ, RationalField, SeriesError, SeriesRing, TruncatedSeries

_SCALARS = (int, type(mpq(0)))


class AlgebraMismatchError(SeriesError):
    """Operands carry different truncation configs or coefficient rings."""


class TVariable(NamedTuple):
    """A formal variable t^alpha_level; odd iff alpha is 2 or 3."""

    alpha: int
    level: int

    @property
    def odd(self) -> bool:
        return self.alpha in (2, 3)

    def __str__(self):
        return "t%d_%d" % (self.alpha, self.level)


def tvar(alpha: int, level: int) -> TVariable:
    if alpha not in (1, 2, 3, 4) or level < 0:
        raise SeriesError("bad variable t^%r_%r" % (alpha, level))
    return TVariable(alpha, level)


# Monomial = (evens, odds): evens a sorted tuple of (var, exponent>0) pairs,
# odds a sorted tuple of distinct odd variables.
ONE_KEY = ((), ())


def monomial_degree(key) -> int:
    evens, odds = key
    return sum(e for _, e in evens) + len(odds)


def monomial_levels(key) -> Iterable[int]:
    evens, odds = key
    for v, _ in evens:
        yield v.level
    for v in odds:
        yield v.level


def monomial_variables(key):
    evens, odds = key
    for v, _ in evens:
        yield v
    yield from odds


def _merge_evens(a, b):
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        if a[i][0] == b[j][0]:
            out.append((a[i][0], a[i][1] + b[j][1]))
            i += 1
            j += 1
        elif a[i][0] < b[j][0]:
            out.append(a[i])
            i += 1
        else:
            out.append(b[j])
            j += 1
    out.extend(a[i:])
    out.extend(b[j:])
    return tuple(out)


def _merge_odds(a, b):
    """Interleave two sorted odd tuples; sign counts the crossings."""
    out = []
    i = j = 0
    sign = 1
    while i < len(a) and j < len(b):
        if a[i] == b[j]:
            return 0, None
        if a[i] < b[j]:
            out.append(a[i])
            i += 1
        else:
            out.append(b[j])
            j += 1
            if (len(a) - i) & 1:
                sign = -sign
    out.extend(a[i:])
    out.extend(b[j:])
    return sign, tuple(out)


def multiply_monomials(k1, k2):
    """Koszul product of canonical monomials: (sign, key) or (0, None)."""
    sign, odds = _merge_odds(k1[1], k2[1])
    if odds is None:
        return 0, None
    return sign, (_merge_evens(k1[0], k2[0]), odds)


def key_from_variables(variables: Iterable) -> tuple[int, Any]:
    """Canonical monomial for a product of variables written left to right.

    Returns (sign, key); sign 0 / key None when an odd variable repeats.
    """
    sign, key = 1, ONE_KEY
    for v in variables:
        factor = (((v, 1),), ()) if not v.odd else ((), (v,))
        s, key = multiply_monomials(key, factor)
        if key is None:
            return 0, None
        sign *= s
    return sign, key


@dataclass(frozen=True)
class DegreeLevelTruncation:
    """Window for the potential variables: total insertion degree <= max_degree,
    every descendant level <= max_level."""

    max_degree: int = 5
    max_level: int = 4

    def admits(self, key) -> bool:
        if monomial_degree(key) > self.max_degree:
            return False
        return all(l <= self.max_level for l in monomial_levels(key))


@dataclass(frozen=True)
class SuperAlgebra:
    """Bundle of a truncation policy and a coefficient ring."""

    truncation: Any
    base: Any = QQ

    def coerce_coefficient(self, value):
        if isinstance(self.base, RationalField):
            return mpq(value)
        if isinstance(value, TruncatedSeries):
            return value
        return self.base.scalar(value)

    def zero(self) -> "SuperPolynomial":
        return SuperPolynomial(self, {}, _clean=True)

    def one(self) -> "SuperPolynomial":
        return self.scalar(1)

    def scalar(self, value) -> "SuperPolynomial":
        value = self.coerce_coefficient(value)
        coeffs = {} if self.base.is_zero(value) else {ONE_KEY: value}
        return SuperPolynomial(self, coeffs, _clean=True)

    def var(self, v, power: int = 1) -> "SuperPolynomial":
        if v.odd:
            if power > 1:
                return self.zero()
            key = ((), (v,))
        else:
            key = (((v, power),), ())
        return SuperPolynomial(self, {key: 1})

    def series(self, coeffs: Mapping) -> "SuperPolynomial":
        return SuperPolynomial(self, coeffs)


class SuperPolynomial:
    """Sparse supercommutative polynomial over an exact coefficient ring."""

    __slots__ = ("algebra", "coeffs")

    def __init__(self, algebra: SuperAlgebra, coeffs: Mapping, _clean=False):
        self.algebra = algebra
        if _clean:
            self.coeffs = coeffs
            return
        base = algebra.base
        cleaned = {}
        for key, value in coeffs.items():
            if not algebra.truncation.admits(key):
                continue
            value = algebra.coerce_coefficient(value)
            if not base.is_zero(value):
                cleaned[key] = value
        self.coeffs = cleaned

    # -- structure ----------------------------------------------------------

    def __bool__(self):
        return bool(self.coeffs)

    __hash__ = None

    def coefficient(self, key):
        return self.coeffs.get(key, self.algebra.base.zero_value)

    def constant_term(self):
        return self.coefficient(ONE_KEY)

    def variables(self):
        seen = set()
        for key in self.coeffs:
            for v in monomial_variables(key):
                if v not in seen:
                    seen.add(v)
                    yield v

    def items(self):
        return sorted(self.coeffs.items())

    def max_degree(self) -> int:
        return max((monomial_degree(k) for k in self.coeffs), default=0)

    def change_truncation(self, truncation) -> "SuperPolynomial":
        algebra = SuperAlgebra(truncation, self.algebra.base)
        return SuperPolynomial(algebra, self.coeffs)

    def cap_order(self, order: int) -> "SuperPolynomial":
        """Cap the trusted order of every (series) coefficient at ``order``."""
        if isinstance(self.algebra.base, RationalField):
            return self
        return SuperPolynomial(self.algebra,
                               {k: v.cap_order(order) for k, v in self.coeffs.items()})

    def with_base(self, base, fn: Callable) -> "SuperPolynomial":
        """Map coefficients into a new ring (e.g. promote rationals to q-series)."""
        algebra = SuperAlgebra(self.algebra.truncation, base)
        return SuperPolynomial(algebra, {k: fn(v) for k, v in self.coeffs.items()})

    def map_coefficients(self, fn: Callable) -> "SuperPolynomial":
        return SuperPolynomial(self.algebra, {k: fn(v) for k, v in self.coeffs.items()})

    def __repr__(self):
        parts = []
        for key, value in self.items()[:6]:
            evens, odds = key
            factors = ["%s^%d" % (v, e) if e > 1 else str(v) for v, e in evens]
            factors += [str(v) for v in odds]
            parts.append("(%s)*%s" % (value, "*".join(factors) or "1"))
        more = " + ..." if len(self.coeffs) > 6 else ""
        return "<spoly %s%s>" % (" + ".join(parts) or "0", more)

    # -- ring operations ------------------------------------------------------

    def _check(self, other: "SuperPolynomial"):
        if self.algebra.truncation != other.algebra.truncation:
            raise AlgebraMismatchError("mismatched truncation configs: %r vs %r"
                                       % (self.algebra.truncation, other.algebra.truncation))

    def __add__(self, other):
        if isinstance(other, _SCALARS) or isinstance(other, TruncatedSeries):
            other = self.algebra.scalar(other)
        if not isinstance(other, SuperPolynomial):
            return NotImplemented
        self._check(other)
        base = self.algebra.base
        out = dict(self.coeffs)
        for key, value in other.coeffs.items():
            s = out.get(key)
            s = value if s is None else s + value
            if base.is_zero(s):
                out.pop(key, None)
            else:
                out[key] = s
        return SuperPolynomial(self.algebra, out, _clean=True)

    __radd__ = __add__

    def __neg__(self):
        return SuperPolynomial(self.algebra, {k: -v for k, v in self.coeffs.items()},
                               _clean=True)

    def __sub__(self, other):
        if isinstance(other, _SCALARS) or isinstance(other, TruncatedSeries):
            other = self.algebra.scalar(other)
        if not isinstance(other, SuperPolynomial):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def _scale(self, value):
        base = self.algebra.base
        out = {}
        for key, coeff in self.coeffs.items():
            p = coeff * value
            if not base.is_zero(p):
                out[key] = p
        return SuperPolynomial(self.algebra, out, _clean=True)

    def __mul__(self, other):
        if isinstance(other, _SCALARS):
            return self._scale(mpq(other))
        if isinstance(other, TruncatedSeries):
            return self._scale(other)
        if not isinstance(other, SuperPolynomial):
            return NotImplemented
        self._check(other)
        admits = self.algebra.truncation.admits
        base = self.algebra.base
        out: dict = {}
        for k1, v1 in self.coeffs.items():
            for k2, v2 in other.coeffs.items():
                sign, key = multiply_monomials(k1, k2)
                if key is None or not admits(key):
                    continue
                p = v1 * v2
                if sign < 0:
                    p = -p
                s = out.get(key)
                out[key] = p if s is None else s + p
        out = {k: v for k, v in out.items() if not base.is_zero(v)}
        return SuperPolynomial(self.algebra, out, _clean=True)

    def __rmul__(self, other):
        if isinstance(other, _SCALARS):
            return self._scale(mpq(other))
        if isinstance(other, TruncatedSeries):
            return self._scale(other)
        return NotImplemented

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise SeriesError("polynomial powers take non-negative integer exponents")
        acc = self.algebra.one()
        base = self
        e = n
        while e:
            if e & 1:
                acc = acc * base
            e >>= 1
            if e:
                base = base * base
        return acc

    def __eq__(self, other):
        if isinstance(other, _SCALARS) or isinstance(other, TruncatedSeries):
            other = self.algebra.scalar(other)
        if not isinstance(other, SuperPolynomial):
            return NotImplemented
        if self.algebra.truncation != other.algebra.truncation:
            return False
        keys = set(self.coeffs) | set(other.coeffs)
        zero = self.algebra.base.zero_value
        return all(self.coeffs.get(k, zero) == other.coeffs.get(k, zero) for k in keys)

    # -- derivations and friends ---------------------------------------------

    def left_partial(self, v) -> "SuperPolynomial":
        """Left derivative: move v to the leftmost position with Koszul signs,
        then strike it."""
        out: dict = {}
        base = self.algebra.base
        for (evens, odds), value in self.coeffs.items():
            if v.odd:
                try:
                    i = odds.index(v)
                except ValueError:
                    continue
                nk = (evens, odds[:i] + odds[i + 1:])
                c = value if i % 2 == 0 else -value
            else:
                for pos, (w, e) in enumerate(evens):
                    if w == v:
                        break
                else:
                    continue
                ne = evens[:pos] + ((v, e - 1),) if e > 1 else evens[:pos]
                ne += evens[pos + 1:]
                nk = (ne, odds)
                c = value * e
            s = out.get(nk)
            out[nk] = c if s is None else s + c
        out = {k: c for k, c in out.items() if not base.is_zero(c)}
        return SuperPolynomial(self.algebra, out, _clean=True)

    def exp(self) -> "SuperPolynomial":
        """sum a^k / k!; requires vanishing constant term, so the powers die
        at the degree truncation."""
        if ONE_KEY in self.coeffs:
            raise SeriesError("exp needs a polynomial with zero constant term")
        acc = self.algebra.one()
        term = acc
        k = 1
        while True:
            term = term * self * mpq(1, k)
            if not term:
                return acc
            acc = acc + term
            k += 1

    def restrict(self, kill: Callable) -> "SuperPolynomial":
        """Set variables to zero: drop all monomials containing a variable
        for which ``kill(var)`` is true."""
        out = {k: v for k, v in self.coeffs.items()
               if not any(kill(w) for w in monomial_variables(k))}
        return SuperPolynomial(self.algebra, out, _clean=True)


def derivation(poly: SuperPolynomial, image: Callable) -> SuperPolynomial:
    """Extend generator images to a superderivation.

    For a (left) superderivation D with D(v) = image(v), on any monomial
    D(m) = sum_v D(v) * (left partial of m by v), with D(v) multiplied from
    the left; the Koszul bookkeeping of both factors cancels the parity of D.
    ``image`` may return None for variables annihilated by D.
    """
    acc = poly.algebra.zero()
    for v in list(poly.variables()):
        img = image(v)
        if img is None or not img:
            continue
        part = poly.left_partial(v)
        if part:
            acc = acc + img * part
    return acc


def evaluate_at(poly: SuperPolynomial, values: Mapping, target_algebra: SuperAlgebra):
    """Evaluate a polynomial by substituting ``values[v]`` for each variable.

    The substituted values must carry the same parity as the variables they
    replace; monomials are expanded in canonical order, so no extra signs
    appear.  Coefficients multiply through as scalars of the target algebra.
    """
    acc = target_algebra.zero()
    power_cache: dict = {}
    for (evens, odds), coeff in poly.coeffs.items():
        term = target_algebra.one() * coeff
        for v, e in evens:
            p = power_cache.get((v, e))
            if p is None:
                p = values[v] ** e
                power_cache[(v, e)] = p
            term = term * p
        for v in odds:
            term = term * values[v]
        acc = acc + term
    return acc

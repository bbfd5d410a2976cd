"""Genus potentials of the elliptic curve and their constraint operators.

The genus-0 potential is assembled directly from the closed-form correlators
(one point-class insertion and the rest identity classes, or one pair of odd
insertions and the rest identity classes, with value (n-3)!/prod k_i!).  The
second derivatives paired through the intersection form give the fields
``v^alpha``; every higher-genus potential is a finite sum over partitions of
2g-2 of products of x-derivatives ``v^4_k`` times connected stationary series
evaluated at q*exp(v^4), minus v^4/24 in genus one.

The Virasoro-type operators L_k, D_k, Dbar_k and the divisor operator O act
by left derivatives; residuals of the stated identities are exact
supercommutative polynomials.  Since truncation makes boundary coefficients
of an operator image unreliable, the workspace builds every potential on an
internally enlarged window chosen so the residual is exact on the window the
caller asked for; residual functions return that window along with the
polynomial.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import Iterable, Iterator

from gmpy2 import mpq

from .algebra import QQ, SeriesError, SeriesRing, TruncatedSeries, qring, substitute
from .combinatorics import automorphism_factor, partitions, pochhammer
from .supercommutative import (DegreeLevelTruncation, SuperAlgebra, SuperPolynomial,
                               TVariable, evaluate_at, key_from_variables,
                               monomial_degree, monomial_levels, tvar)
from . import stationary

# parities and half-degrees of the cohomology basis: the unit class, the two
# odd classes pairing to 1, and the point class.
TWICE_HALF_DEGREE = {1: 0, 2: 1, 3: 1, 4: 2}
VIRASORO_B = {1: 0, 2: 1, 3: 0, 4: 1}

# intersection pairing eta_{ab} and its inverse; the (3,2) entries pick up a
# sign from odd anticommutativity of the pairing.
ETA = {(1, 4): 1, (4, 1): 1, (2, 3): 1, (3, 2): -1}
ETA_INV = {(1, 4): 1, (4, 1): 1, (2, 3): -1, (3, 2): 1}


def eta(a: int, b: int) -> int:
    return ETA.get((a, b), 0)


def eta_inv(a: int, b: int) -> int:
    return ETA_INV.get((a, b), 0)


def dimension_defect(key, genus: int) -> int:
    """Twice the failure of sum(k_i + q_{alpha_i} - 1) = 2g - 2 on a monomial."""
    total = 0
    evens, odds = key
    for v, e in evens:
        total += e * (2 * v.level + TWICE_HALF_DEGREE[v.alpha] - 2)
    for v in odds:
        total += 2 * v.level + TWICE_HALF_DEGREE[v.alpha] - 2
    return total - (4 * genus - 4)


def _level_multisets(size: int, total: int, cap: int) -> Iterator[tuple[int, ...]]:
    """Weakly decreasing level tuples of fixed size, fixed sum, entries <= cap."""
    def rec(size, total, top):
        if size == 0:
            if total == 0:
                yield ()
            return
        for m in range(min(top, total), -1, -1):
            if m * size < total:
                break
            for rest in rec(size - 1, total - m, m):
                yield (m,) + rest
    yield from rec(size, total, cap)


def genus0_potential(truncation: DegreeLevelTruncation) -> SuperPolynomial:
    """The genus-0 potential over plain rationals (no q-dependence).

    Coefficient of a canonical monomial is the correlator value divided by
    the automorphism count of the monomial; the odd pair always sits in the
    order t^2 t^3, which absorbs the Koszul signs of reordered insertions.
    """
    algebra = SuperAlgebra(truncation, QQ)
    N, D = truncation.max_degree, truncation.max_level
    acc: dict = {}

    def add(key, value):
        prev = acc.get(key)
        acc[key] = value if prev is None else prev + value

    for n in range(3, N + 1):
        budget = n - 3
        # one point-class insertion at level k1, the rest identity classes
        for k1 in range(0, min(budget, D) + 1):
            for rest in _level_multisets(n - 1, budget - k1, D):
                value = mpq(factorial(budget))
                for k in rest:
                    value /= factorial(k)
                value /= factorial(k1)
                sign, key = key_from_variables(
                    [tvar(4, k1)] + [tvar(1, k) for k in rest])
                aut = 1
                mult: dict = {}
                for k in rest:
                    mult[k] = mult.get(k, 0) + 1
                for m in mult.values():
                    aut *= factorial(m)
                add(key, value / aut)
        # one pair of odd insertions, the rest identity classes
        if n >= 3:
            for k2 in range(0, min(budget, D) + 1):
                for k3 in range(0, min(budget - k2, D) + 1):
                    for rest in _level_multisets(n - 2, budget - k2 - k3, D):
                        value = mpq(factorial(budget))
                        for k in (k2, k3) + rest:
                            value /= factorial(k)
                        sign, key = key_from_variables(
                            [tvar(2, k2), tvar(3, k3)] + [tvar(1, k) for k in rest])
                        aut = 1
                        mult = {}
                        for k in rest:
                            mult[k] = mult.get(k, 0) + 1
                        for m in mult.values():
                            aut *= factorial(m)
                        add(key, value / aut)
    return algebra.series(acc)


def v_series(f0: SuperPolynomial, alpha: int) -> SuperPolynomial:
    """v^alpha = eta^{alpha mu} d^2 F_0 / dt^mu_0 dt^1_0."""
    inner = f0.left_partial(tvar(1, 0))
    acc = f0.algebra.zero()
    for mu in (1, 2, 3, 4):
        c = eta_inv(alpha, mu)
        if c:
            acc = acc + inner.left_partial(tvar(mu, 0)) * mpq(c)
    return acc


def promote_to_qseries(poly: SuperPolynomial, q_order: int) -> SuperPolynomial:
    ring = qring(q_order)
    return poly.with_base(ring, lambda c: ring.scalar(c))


def unstable_constraint_shadow(kind: str, algebra: SuperAlgebra) -> SuperPolynomial:
    """The exact genus-0 residual of the source-free odd constraints at
    level -1: minus t^1_0 times the eta-pairing of the operator's lead class.

    The lowest cubic of the genus-0 potential (one odd pair, one unit class,
    value 1) survives the lead derivative of D_{-1} and Dbar_{-1} with
    nothing left to cancel it, because the would-be cancelling summands hit
    descendant level -1.  This is the same unstable three-point geometry
    that forces the explicit quadratic source of the level -1 even
    constraint; the source-free identity holds verbatim in every genus >= 1.
    """
    lead = {"D": 2, "Dbar": 3}[kind]
    acc = algebra.zero()
    for mu in (1, 2, 3, 4):
        c = eta(lead, mu)
        if c:
            acc = acc - algebra.var(tvar(1, 0)) * algebra.var(tvar(mu, 0)) * mpq(c)
    return acc


@dataclass(frozen=True)
class Window:
    """The region of monomials on which a result is exact."""

    max_degree: int
    max_level: int
    q_order: int | None = None

    def contains(self, key) -> bool:
        if monomial_degree(key) > self.max_degree:
            return False
        return all(l <= self.max_level for l in monomial_levels(key))


def restrict_to_window(poly: SuperPolynomial, window: Window) -> SuperPolynomial:
    out = {}
    for key, value in poly.coeffs.items():
        if not window.contains(key):
            continue
        if window.q_order is not None and isinstance(value, TruncatedSeries):
            value = value.truncate(min(window.q_order,
                                       value.order if value.order is not None
                                       else window.q_order))
        out[key] = value
    return SuperPolynomial(poly.algebra, out)


def first_violation(poly: SuperPolynomial, window: Window):
    """The smallest offending (monomial, coefficient) inside the window, or None."""
    for key, value in poly.items():
        if window.contains(key):
            if isinstance(value, TruncatedSeries) and window.q_order is not None:
                trimmed = value.truncate(min(window.q_order,
                                             value.order if value.order is not None
                                             else window.q_order))
                if trimmed:
                    return key, trimmed
            else:
                return key, value
    return None


@dataclass(frozen=True)
class GenusPotential:
    """A genus potential together with its genus; coefficients are q-series.

    Construction validates the dimension constraint on every stored monomial
    and, in genus zero, the absence of q-dependence.
    """

    genus: int
    body: SuperPolynomial

    def __post_init__(self):
        for key, value in self.body.coeffs.items():
            if dimension_defect(key, self.genus) != 0:
                raise SeriesError("monomial %r violates the dimension constraint "
                                  "in genus %d" % (key, self.genus))
            if self.genus == 0 and isinstance(value, TruncatedSeries):
                if any(k != (0,) for k in value.coeffs):
                    raise SeriesError("genus-0 potential acquired q-dependence")

    @property
    def truncation(self):
        return self.body.algebra.truncation


class PotentialWorkspace:
    """Builds genus potentials at internally enlarged truncations.

    ``max_degree``/``max_level``/``q_order`` describe the window on which
    residuals are reported exactly, for operators with level shift up to
    ``k_max`` and genus up to ``genus_max``.  The genus-0 potential is built
    at degree ``max_degree + 3 + max_level`` (enough for the v^4_d
    annihilation checks with d up to ``max_level``) and level
    ``max_level + k_max``; genus potentials are assembled at degree
    ``max_degree + 1`` and level ``max_level + k_max``.
    """

    def __init__(self, max_degree: int = 5, max_level: int = 4, q_order: int = 6,
                 genus_max: int = 2, k_max: int = 3):
        self.window = Window(max_degree, max_level, q_order)
        self.q_order = q_order
        self.genus_max = genus_max
        self.k_max = k_max
        self._assembly = DegreeLevelTruncation(max_degree + 1, max_level + k_max)
        f0_degree = max(max_degree + 1 + 2 * genus_max, max_degree + 3 + max_level)
        self._f0_trunc = DegreeLevelTruncation(f0_degree, max_level + k_max)
        self._cache: dict = {}

    # -- building blocks ----------------------------------------------------

    @property
    def f0(self) -> SuperPolynomial:
        """Genus-0 potential over plain rationals at the enlarged window."""
        if "f0" not in self._cache:
            self._cache["f0"] = genus0_potential(self._f0_trunc)
        return self._cache["f0"]

    def v(self, alpha: int) -> SuperPolynomial:
        key = ("v", alpha)
        if key not in self._cache:
            self._cache[key] = v_series(self.f0, alpha)
        return self._cache[key]

    def v4_derivative(self, k: int) -> SuperPolynomial:
        """v^4_k = k-th derivative of v^4 along t^1_0, over plain rationals."""
        key = ("v4", k)
        if key not in self._cache:
            if k == 0:
                self._cache[key] = self.v(4)
            else:
                self._cache[key] = self.v4_derivative(k - 1).left_partial(tvar(1, 0))
        return self._cache[key]

    def _assembly_algebra(self) -> SuperAlgebra:
        return SuperAlgebra(self._assembly, qring(self.q_order))

    def _exp_v4(self) -> SuperPolynomial:
        """exp(v^4) at the assembly truncation, over plain rationals."""
        if "exp_v4" not in self._cache:
            v4 = self.v(4).change_truncation(self._assembly)
            self._cache["exp_v4"] = v4.exp()
        return self._cache["exp_v4"]

    def genus_potential(self, g: int) -> GenusPotential:
        """The genus-g potential at the assembly truncation, exact there."""
        key = ("F", g)
        if key in self._cache:
            return self._cache[key]
        if g < 0:
            raise SeriesError("genus must be non-negative")
        algebra = self._assembly_algebra()
        if g == 0:
            body = promote_to_qseries(self.f0.change_truncation(self._assembly),
                                      self.q_order)
        else:
            q_gen = qring(self.q_order).gen(0, order=self.q_order)
            target = promote_to_qseries(self._exp_v4(), self.q_order) * q_gen
            acc = algebra.zero()
            for lam in partitions(2 * g - 2):
                prod = algebra.one()
                for part in lam:
                    prod = prod * promote_to_qseries(
                        self.v4_derivative(part).change_truncation(self._assembly),
                        self.q_order)
                prod = prod * mpq(1, automorphism_factor(lam))
                c_series = stationary.connected_series(lam, self.q_order)
                acc = acc + prod * substitute(c_series, target, algebra.one(),
                                              order=self.q_order)
            if g == 1:
                acc = acc - promote_to_qseries(
                    self.v(4).change_truncation(self._assembly),
                    self.q_order) * mpq(1, 24)
            body = acc
        potential = GenusPotential(g, body)
        self._cache[key] = potential
        return potential

    # -- operators ----------------------------------------------------------

    def _apply_virasoro(self, kind: str, k: int, poly: SuperPolynomial) -> SuperPolynomial:
        """Apply L~_k, D_k or Dbar_k (left derivatives throughout).

        Derivatives toward negative descendant levels are zero operators; no
        such variable exists.
        """
        if k < -1:
            raise SeriesError("constraint levels start at -1")
        algebra = poly.algebra
        level_cap = algebra.truncation.max_level
        lead = {"L": 1, "D": 2, "Dbar": 3}[kind]
        acc = poly.left_partial(tvar(lead, k + 1)) * mpq(-factorial(k + 1))
        for m in range(0, level_cap + 1):
            target = m + k
            if target < 0 or target > level_cap:
                continue
            if kind == "L":
                for alpha in (1, 2, 3, 4):
                    c = pochhammer(VIRASORO_B[alpha] + m, k + 1)
                    if c:
                        acc = acc + algebra.var(tvar(alpha, m)) \
                            * poly.left_partial(tvar(alpha, target)) * c
            elif kind == "D":
                c = pochhammer(m, k + 1)
                if c:
                    acc = acc + algebra.var(tvar(1, m)) \
                        * poly.left_partial(tvar(2, target)) * c
                c = pochhammer(m + 1, k + 1)
                if c:
                    acc = acc + algebra.var(tvar(3, m)) \
                        * poly.left_partial(tvar(4, target)) * c
            else:
                c = pochhammer(m, k + 1)
                if c:
                    acc = acc + algebra.var(tvar(1, m)) \
                        * poly.left_partial(tvar(3, target)) * c
                c = pochhammer(m + 1, k + 1)
                if c:
                    acc = acc - algebra.var(tvar(2, m)) \
                        * poly.left_partial(tvar(4, target)) * c
        return acc

    def _eta_quadratic(self, algebra: SuperAlgebra) -> SuperPolynomial:
        """eta_{ab} t^a_0 t^b_0 / 2 = t^1_0 t^4_0 + t^2_0 t^3_0."""
        acc = algebra.zero()
        for (a, b), c in ETA.items():
            acc = acc + algebra.var(tvar(a, 0)) * algebra.var(tvar(b, 0)) * mpq(c, 2)
        return acc

    def virasoro_source(self, kind: str, k: int, g: int,
                        algebra: SuperAlgebra) -> SuperPolynomial:
        """Right-hand side of the linearized constraint: the quadratic string
        source for the level -1 even operator in genus zero, zero otherwise."""
        if kind == "L" and k == -1 and g == 0:
            return -self._eta_quadratic(algebra)
        return algebra.zero()

    def virasoro_residual(self, kind: str, k: int, g: int):
        """Residual of the linearized constraint on the genus-g potential:
        the operator applied minus the stated right-hand side.

        Returns (residual, window); the identity holds iff the residual
        vanishes on the window.  The two genus-0 odd constraints at level -1
        are known to leave the unstable shadow of
        :func:`unstable_constraint_shadow` instead of vanishing.
        """
        if k > self.k_max:
            raise SeriesError("workspace was sized for k <= %d" % self.k_max)
        body = self.genus_potential(g).body
        applied = self._apply_virasoro(kind, k, body)
        residual = applied - self.virasoro_source(kind, k, g, body.algebra)
        return residual, self.window

    def divisor_residual(self, g: int):
        """Residual of O F_g = delta_{g,0} (t^1_0)^2/2 - delta_{g,1}/24."""
        body = self.genus_potential(g).body
        applied = self._apply_divisor(body)
        algebra = body.algebra
        if g == 0:
            t1 = algebra.var(tvar(1, 0))
            applied = applied - t1 * t1 * mpq(1, 2)
        elif g == 1:
            applied = applied + algebra.scalar(mpq(1, 24))
        return applied, self.window

    def _apply_divisor(self, poly: SuperPolynomial) -> SuperPolynomial:
        algebra = poly.algebra
        acc = poly.left_partial(tvar(4, 0))
        if isinstance(algebra.base, SeriesRing):
            acc = acc - poly.map_coefficients(
                lambda s: s.derivative(0, logarithmic=True))
        level_cap = algebra.truncation.max_level
        for n in range(0, level_cap):
            acc = acc - algebra.var(tvar(1, n + 1)) * poly.left_partial(tvar(4, n))
        return acc

    # -- the v-level annihilation checks -------------------------------------

    def v4_constraint_residual(self, kind: str, k: int, d: int):
        """L~_k, D_k, Dbar_k applied to v^4_d; expected zero on the window."""
        if k > self.k_max or d > self.window.max_level:
            raise SeriesError("workspace sized for k <= %d, d <= %d"
                              % (self.k_max, self.window.max_level))
        vd = self.v4_derivative(d)
        residual = self._apply_virasoro(kind, k, vd)
        degree = min(self.window.max_degree, self._f0_trunc.max_degree - 3 - d)
        return residual, Window(degree, self.window.max_level)

    def v4_divisor_residual(self, d: int):
        """O v^4_d - delta_{d,0}; expected zero on the window."""
        vd = self.v4_derivative(d)
        residual = self._apply_divisor(vd)
        if d == 0:
            residual = residual - vd.algebra.one()
        degree = min(self.window.max_degree, self._f0_trunc.max_degree - 3 - d)
        return residual, Window(degree, self.window.max_level)

    # -- extraction -----------------------------------------------------------

    def correlator(self, g: int, degree: int, insertions: Iterable[tuple[int, int]]):
        """The invariant <prod tau_{k_i}(gamma_{alpha_i})> in genus g, map
        degree ``degree``; insertion order fixes the sign through the Koszul
        reordering of the odd insertions.

        Returns 0 whenever the dimension constraint fails.
        """
        insertions = [(int(k), int(alpha)) for k, alpha in insertions]
        defect = sum(2 * k + TWICE_HALF_DEGREE[a] - 2 for k, a in insertions) \
            - (4 * g - 4)
        if defect != 0:
            return mpq(0)
        variables = [tvar(alpha, k) for k, alpha in insertions]
        odd_positions = [v for v in variables if v.odd]
        sign = 1
        for i in range(len(odd_positions)):
            for j in range(i + 1, len(odd_positions)):
                if odd_positions[i] > odd_positions[j]:
                    sign = -sign
        skey = key_from_variables(variables)
        if skey[1] is None:
            return mpq(0)
        ksign, key = skey
        body = self.genus_potential(g).body
        if not self.window.contains(key):
            raise SeriesError("insertions %r outside the workspace window"
                              % (insertions,))
        coeff = body.coefficient(key)
        if not coeff:
            return mpq(0)
        aut = 1
        for _, e in key[0]:
            aut *= factorial(e)
        value = coeff.coefficient((degree,)) * aut
        return value if sign * ksign > 0 else -value

    # -- structured cross-checks ----------------------------------------------

    def reconstruction_residual(self, g: int):
        """restrict(F_g; t^1 = t^2 = t^3 = t^4_0 = 0) minus the generating
        series rebuilt directly from the connected stationary series."""
        if g < 1:
            raise SeriesError("the reconstruction closure concerns g >= 1")
        body = self.genus_potential(g).body
        algebra = body.algebra
        lhs = body.restrict(lambda v: v.alpha in (1, 2, 3)
                            or (v.alpha == 4 and v.level == 0))
        rhs = algebra.zero()
        for lam in partitions(2 * g - 2):
            if any(part > algebra.truncation.max_level for part in lam):
                continue
            term = algebra.one() * mpq(1, automorphism_factor(lam))
            for part in lam:
                term = term * algebra.var(tvar(4, part))
            rhs = rhs + term * stationary.connected_series(lam, self.q_order)
        return lhs - rhs, self.window

    def two_point_function(self, alpha: int, a: int, beta: int, b: int) -> SuperPolynomial:
        """d^2 F_0 / dt^alpha_a dt^beta_b over plain rationals."""
        return self.f0.left_partial(tvar(beta, b)).left_partial(tvar(alpha, a))

    def two_point_residual(self, alpha: int, a: int, beta: int, b: int):
        """Genus-0 two-point function versus its level-0 restriction with
        t^gamma_0 replaced by v^gamma (a topological-recursion consequence)."""
        lhs = self.two_point_function(alpha, a, beta, b)
        omega = lhs.restrict(lambda v: v.level >= 1)
        values = {tvar(gamma, 0): self.v(gamma) for gamma in (1, 2, 3, 4)}
        rhs = evaluate_at(omega, values, lhs.algebra)
        window = Window(self._f0_trunc.max_degree - 2 - max(a, b),
                        self._f0_trunc.max_level)
        return lhs - rhs, window

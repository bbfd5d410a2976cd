"""Stationary descendant series of an elliptic curve.

The pipeline: the odd Jacobi theta function expanded as a z-series with exact
q-series coefficients feeds an n-point determinant formula whose symmetrized
sum is a Laurent series with poles only along the coordinate hyperplanes.
Extracting coefficients yields the degree-generating series of disconnected
point-class descendant invariants; inverting the set-partition factorization
yields the connected series ``C_{d}(q)``, which are quasimodular: homogeneous
polynomials in the Eisenstein series E2, E4, E6 of weight ``sum(d_i + 2)``.

Per-permutation terms of the determinant formula have genuine poles along the
partial-sum hyperplanes, so they are held as :class:`ZFraction` values (series
numerator over a multiset of subset linear forms) and summed over a least
common denominator; division by the non-singleton forms happens once, at the
end, as exact truncated polynomial division.  A failed division signals a bug
or insufficient truncation and aborts -- it is never truncated away.

The theta/determinant route and the Eisenstein expansions are deliberately
independent of each other; their agreement on the closed-form series is part
of the acceptance suite.
"""

from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass
from math import comb, factorial

from gmpy2 import mpq

from .algebra import (QQ, NonUnitError, SeriesError, SeriesRing, TruncatedSeries,
                      TruncationError, qring, substitute)
from .combinatorics import divisor_power_sum, set_partitions

# zeta(1-k)/2 for k = 2, 4, 6, from zeta(-1) = -1/12, zeta(-3) = 1/120,
# zeta(-5) = -1/252; these three exact constants are all that is needed.
EISENSTEIN_CONSTANT = {2: mpq(-1, 24), 4: mpq(1, 240), 6: mpq(-1, 504)}

#: profiles longer than this need an explicit opt-in (n! permutations and
#: 2^n - 1 denominator forms make n = 4 expensive, n >= 5 unreasonable).
DEFAULT_MAX_POINTS = 3
HARD_MAX_POINTS = 4


class FinalizationError(RuntimeError):
    """The symmetrized numerator failed an exact-divisibility or parity check.

    This means an implementation bug or insufficient truncation; the
    computation must abort rather than return a silently wrong series.
    """


class QuasimodularityError(SeriesError):
    """A series admitted no Eisenstein decomposition at the stated weight."""


class ProfileError(SeriesError):
    """A stationary profile entry was -1 or below -2."""


def check_profile(profile) -> tuple[int, ...]:
    profile = tuple(int(d) for d in profile)
    for d in profile:
        if d == -1 or d < -2:
            raise ProfileError("profile entries live in {-2, 0, 1, 2, ...}: %r" % (profile,))
    return profile


# ---------------------------------------------------------------------------
# q-series building blocks


def eisenstein(k: int, q_order: int) -> TruncatedSeries:
    """E_k(q) = zeta(1-k)/2 + sum_n sigma_{k-1}(n) q^n for k in {2, 4, 6}."""
    if k not in EISENSTEIN_CONSTANT:
        raise SeriesError("unsupported Eisenstein weight %r" % (k,))
    ring = qring(q_order)
    coeffs = {(0,): EISENSTEIN_CONSTANT[k]}
    for n in range(1, q_order + 1):
        coeffs[(n,)] = mpq(divisor_power_sum(n, k - 1))
    return ring.series(coeffs)


def sigma_series(q_order: int) -> TruncatedSeries:
    """sum_{n>=1} sigma(n)/n q^n, the connected point-free series."""
    ring = qring(q_order)
    return ring.series({(n,): mpq(divisor_power_sum(n, 1), n)
                        for n in range(1, q_order + 1)})


def euler_factor(q_order: int) -> TruncatedSeries:
    """(q)_inf = prod_{j>=1} (1 - q^j), truncated."""
    ring = qring(q_order)
    acc = ring.one()
    for j in range(1, q_order + 1):
        acc = acc * ring.series({(0,): 1, (j,): -1}, order=None)
    return acc.truncate(q_order)


def euler_inverse(q_order: int) -> TruncatedSeries:
    """1/(q)_inf, the partition generating series."""
    return euler_factor(q_order).invert()


# ---------------------------------------------------------------------------
# theta expansion


def theta_series(z_order: int, q_order: int) -> TruncatedSeries:
    """The odd theta function as a univariate z-series over Q[[q]].

    theta(z) = sum_{n>=0} (-1)^n q^{n(n+1)/2} (e^{(n+1/2)z} - e^{-(n+1/2)z});
    only odd z-powers appear, and theta(z) = z * u with u a unit.
    """
    base = qring(q_order)
    ring = SeriesRing(("z",), z_order, base)
    coeffs: dict = {}
    n = 0
    while n * (n + 1) // 2 <= q_order:
        qpow = n * (n + 1) // 2
        sign = -1 if n % 2 else 1
        for m in range(1, z_order + 1, 2):
            # [z^m] of 2 sinh((n+1/2) z) = 2 (n+1/2)^m / m!
            c = mpq(sign * (2 * n + 1) ** m, 2 ** (m - 1) * factorial(m))
            key = (m,)
            prev = coeffs.get(key)
            term = base.series({(qpow,): c}, order=q_order)
            coeffs[key] = term if prev is None else prev + term
        n += 1
    return ring.series(coeffs)


def theta_derivative(theta: TruncatedSeries, k: int) -> TruncatedSeries:
    """k-th z-derivative of the theta expansion, termwise."""
    out = theta
    for _ in range(k):
        out = out.derivative(0)
    return out


# ---------------------------------------------------------------------------
# the n-point determinant pipeline


def _zring(n: int, z_order: int, q_order: int) -> SeriesRing:
    return SeriesRing(tuple("z%d" % (i + 1) for i in range(n)), z_order, qring(q_order))


def _form(ring: SeriesRing, subset: frozenset) -> TruncatedSeries:
    """The linear form sum_{i in S} z_i as an exact polynomial."""
    n = ring.nvars
    coeffs = {}
    for i in subset:
        key = tuple(1 if j == i else 0 for j in range(n))
        coeffs[key] = 1
    return ring.series(coeffs, order=None)


def _integer_form_powers(n: int, subset: frozenset, top: int) -> list[dict]:
    """Integer-coefficient expansions of (sum_{i in S} z_i)^p for p <= top."""
    zero = (0,) * n
    powers = [{zero: 1}]
    gens = [tuple(1 if j == i else 0 for j in range(n)) for i in sorted(subset)]
    for _ in range(top):
        prev = powers[-1]
        nxt: dict = {}
        for key, c in prev.items():
            for g in gens:
                nk = tuple(x + y for x, y in zip(key, g))
                nxt[nk] = nxt.get(nk, 0) + c
        powers.append(nxt)
    return powers


def _substitute_linear(series: TruncatedSeries, pivot: int, rest: frozenset,
                       sign: int) -> TruncatedSeries:
    """Replace the pivot variable v by v + sign * sum_{j in rest} z_j.

    Degree-preserving linear change of coordinates: exact on truncated series.
    """
    if not rest:
        return series
    n = series.ring.nvars
    top = max((key[pivot] for key in series.coeffs), default=0)
    rpow = _integer_form_powers(n, rest, top)
    out: dict = {}
    base = series.ring.base
    for key, coeff in series.coeffs.items():
        a = key[pivot]
        for i in range(a, -1, -1):
            scale = comb(a, i) * (sign ** (a - i))
            for rkey, rc in rpow[a - i].items():
                nk = list(key)
                nk[pivot] = i
                nk = tuple(x + y for x, y in zip(nk, rkey))
                c = coeff * (scale * rc)
                s = out.get(nk)
                out[nk] = c if s is None else s + c
    out = {k: v for k, v in out.items() if not base.is_zero(v)}
    return TruncatedSeries(series.ring, out, series.order, _clean=True)


def _divide_single(series: TruncatedSeries, var: int) -> TruncatedSeries:
    out = {}
    for key, value in series.coeffs.items():
        if key[var] == 0:
            raise FinalizationError(
                "numerator not divisible by %s: stray term %r"
                % (series.ring.variables[var], key))
        out[key[:var] + (key[var] - 1,) + key[var + 1:]] = value
    order = None if series.order is None else series.order - 1
    return TruncatedSeries(series.ring, out, order, _clean=True)


def divide_by_form(series: TruncatedSeries, subset: frozenset) -> TruncatedSeries:
    """Exact division by the linear form of ``subset``; the trusted order
    drops by one.  Raises :class:`FinalizationError` if not divisible."""
    subset = frozenset(subset)
    members = sorted(subset)
    pivot = members[0]
    rest = frozenset(members[1:])
    shifted = _substitute_linear(series, pivot, rest, -1)
    quotient = _divide_single(shifted, pivot)
    return _substitute_linear(quotient, pivot, rest, +1)


@dataclass
class ZFraction:
    """A multivariate series numerator over a multiset of subset linear forms.

    The intermediate representation for per-permutation terms of the n-point
    formula: each denominator form is ``sum_{i in S} z_i`` for a nonempty
    subset S, with a multiplicity.  Addition rescales both numerators to the
    least common denominator by exact multiplication with the missing forms.
    """

    numerator: TruncatedSeries
    denominator: dict  # frozenset -> multiplicity >= 1

    def __post_init__(self):
        self.denominator = {frozenset(s): int(m) for s, m in self.denominator.items()
                            if int(m) != 0}
        if any(m < 0 for m in self.denominator.values()):
            raise SeriesError("denominator multiplicities must be positive")

    def _scaled_to(self, denominator: dict) -> TruncatedSeries:
        num = self.numerator
        ring = num.ring
        for subset, mult in denominator.items():
            missing = mult - self.denominator.get(subset, 0)
            if missing < 0:
                raise SeriesError("cannot scale down a denominator")
            for _ in range(missing):
                num = num * _form(ring, subset)
        return num

    def __add__(self, other: "ZFraction") -> "ZFraction":
        lcd = dict(self.denominator)
        for subset, mult in other.denominator.items():
            lcd[subset] = max(lcd.get(subset, 0), mult)
        return ZFraction(self._scaled_to(lcd) + other._scaled_to(lcd), lcd)

    def relabel(self, perm: tuple[int, ...]) -> "ZFraction":
        """Apply the variable relabeling z_i -> z_{perm[i]}."""
        num = self.numerator
        out = {}
        for key, value in num.coeffs.items():
            nk = [0] * len(key)
            for i, e in enumerate(key):
                nk[perm[i]] = e
            out[tuple(nk)] = value
        numerator = TruncatedSeries(num.ring, out, num.order, _clean=True)
        denominator = {frozenset(perm[i] for i in s): m
                       for s, m in self.denominator.items()}
        return ZFraction(numerator, denominator)

    def finalize(self) -> TruncatedSeries:
        """Divide out every non-singleton form; the singleton forms z_i are
        left implicit (the result is the Laurent numerator times z_1...z_n).

        Singleton multiplicities must be exactly one each; divisibility by
        the non-singleton forms is asserted by the exact division itself.
        """
        num = self.numerator
        for subset, mult in sorted(self.denominator.items(),
                                   key=lambda it: (len(it[0]), sorted(it[0]))):
            if len(subset) == 1:
                if mult != 1:
                    raise FinalizationError("singleton form with multiplicity %d" % mult)
                continue
            for _ in range(mult):
                num = divide_by_form(num, subset)
        return num


def _permutations(n: int):
    import itertools
    return itertools.permutations(range(n))


def _determinant(rows: list[list]):
    """Minor expansion along the first column; ``None`` encodes a zero entry
    and a zero determinant."""
    size = len(rows)
    if size == 1:
        return rows[0][0]
    acc = None
    for i in range(size):
        entry = rows[i][0]
        if entry is None:
            continue
        minor_det = _determinant([row[1:] for j, row in enumerate(rows) if j != i])
        if minor_det is None:
            continue
        term = entry * minor_det
        if i % 2:
            term = -term
        acc = term if acc is None else acc + term
    return acc


def npoint_series(n: int, z_order: int, q_order: int) -> TruncatedSeries:
    """The n-point numerator G: the generating Laurent series of disconnected
    point-class descendant invariants, multiplied by z_1...z_n.

    The coefficient of ``prod z_i^{e_i}`` in G is the degree-generating
    q-series of the disconnected invariant with descendant profile
    ``d_i = e_i - 2``; entries e_i = 1 never occur (no profile entry -1), and
    G is symmetric in the variables.  Includes the 1/(q)_inf prefactor.

    For n = 0 the (variable-free) series 1/(q)_inf is returned.
    """
    if n < 0:
        raise SeriesError("n must be non-negative")
    if n == 0:
        return euler_inverse(q_order)
    if n > HARD_MAX_POINTS:
        raise SeriesError("n-point pipeline supports n <= %d" % HARD_MAX_POINTS)
    if n > DEFAULT_MAX_POINTS:
        warnings.warn("n = %d n-point computation is expensive "
                      "(%d permutations, %d denominator forms)"
                      % (n, factorial(n), 2 ** n - 1), stacklevel=2)

    ring = _zring(n, z_order, q_order)
    theta = theta_series(z_order + n, q_order)

    # theta(z)/z is a unit; invert once in the univariate ring, substitute per form.
    unit_ring = SeriesRing(("z",), z_order, qring(q_order))
    unit = unit_ring.series({(m - 1,): c for (m,), c in theta.coeffs.items()})
    unit_inv = unit.invert()

    chain = [frozenset(range(j + 1)) for j in range(n)]
    forms_cut = {s: _form(ring, s).truncate(z_order) for s in chain}

    # matrix entries: column j < n uses theta^{(j-i+1)}(prefix of length n-j)/(j-i+1)!,
    # column n uses the z-coefficients of theta (derivatives at 0).
    ders = [theta]
    for _ in range(n):
        ders.append(ders[-1].derivative(0))
    sub_cache: dict = {}

    def entry(i: int, j: int):
        k = j - i + 1
        if k < 0:
            return None
        if j == n:
            c = theta.coefficient((k,))
            return None if not c else ring.scalar(c)
        subset = chain[n - j - 1]
        key = (subset, k)
        if key not in sub_cache:
            scaled = ders[k] * mpq(1, factorial(k))
            sub_cache[key] = substitute(scaled, forms_cut[subset], ring.one(), order=z_order)
        return sub_cache[key]

    rows = [[entry(i, j) for j in range(1, n + 1)] for i in range(1, n + 1)]
    det = _determinant(rows)
    if det is None:
        raise FinalizationError("identically vanishing determinant at n = %d" % n)

    numerator = det
    for subset in chain:
        numerator = numerator * substitute(unit_inv, forms_cut[subset], ring.one(), order=z_order)

    identity = ZFraction(numerator, {s: 1 for s in chain})
    total = None
    for perm in _permutations(n):
        term = identity.relabel(tuple(perm))
        total = term if total is None else total + term

    result = total.finalize()
    if result.order is not None and result.order < z_order:
        raise FinalizationError("finalized series lost trusted orders: %r < %r"
                                % (result.order, z_order))

    inv = euler_inverse(q_order)
    result = result.map_coefficients(lambda s: s * inv)

    # consistency of the extra margins: only even total degrees occur and no
    # variable appears with exponent exactly one (profile entries are never -1).
    for key in result.coeffs:
        if sum(key) % 2:
            raise FinalizationError("odd-degree term %r survived symmetrization" % (key,))
        if 1 in key:
            raise FinalizationError("exponent-one term %r survived finalization" % (key,))
    return result


# ---------------------------------------------------------------------------
# disconnected and connected series

_lock = threading.Lock()
_npoint_cache: dict = {}
_connected_cache: dict = {}


def clear_caches():
    with _lock:
        _npoint_cache.clear()
        _connected_cache.clear()


def _npoint_cached(n: int, z_order: int, q_order: int) -> TruncatedSeries:
    """Memoized n-point numerator, grown monotonically in both orders.

    The cache behaves as a deterministic map: recomputation with larger
    orders replaces the entry with a series that agrees on the old window.
    """
    with _lock:
        hit = _npoint_cache.get(n)
    if hit is not None:
        series, zo, qo = hit
        if zo >= z_order and qo >= q_order:
            return series
        z_order, q_order = max(z_order, zo), max(q_order, qo)
    series = npoint_series(n, z_order, q_order)
    with _lock:
        _npoint_cache[n] = (series, z_order, q_order)
    return series


def profile_z_order(profile) -> int:
    """Conservative z-order for extracting ``profile``: sum(d_i + 1) + n + 2."""
    return sum(d + 1 for d in profile) + len(profile) + 2


def disconnected_series(profile, q_order: int) -> TruncatedSeries:
    """Degree-generating q-series of the disconnected invariants of ``profile``.

    Profile entries may include the transparent value -2.
    """
    profile = check_profile(profile)
    if not profile:
        return euler_inverse(q_order)
    G = _npoint_cached(len(profile), profile_z_order(profile), q_order + 2)
    key = tuple(d + 2 for d in profile)
    series = G.coefficient(key)
    if not series:
        ring = qring(q_order)
        return ring.zero()
    return series.truncate(q_order)


def disconnected_invariant(profile, degree: int):
    """The disconnected invariant of ``profile`` in map degree ``degree``."""
    if degree < 0:
        raise SeriesError("map degree must be non-negative")
    return disconnected_series(profile, degree).coefficient((degree,))


def connected_series(profile, q_order: int) -> TruncatedSeries:
    """The connected series C_{d}(q) up to q^q_order.

    Solved from the set-partition factorization of the disconnected series:
    C_{d} = (q)_inf * (disconnected series) - sum over proper set partitions
    of the products of connected sub-series.  The empty profile returns
    sum sigma(n)/n q^n; the entry -2 is transparent and C_{(-2)} = 1.
    """
    profile = check_profile(profile)
    canonical = tuple(sorted(profile, reverse=True))
    key = (canonical, q_order)
    with _lock:
        hit = _connected_cache.get(key)
    if hit is not None:
        return hit
    n = len(canonical)
    if n == 0:
        result = sigma_series(q_order)
    else:
        total = euler_factor(q_order) * disconnected_series(canonical, q_order)
        correction = None
        for blocks in set_partitions(n):
            if len(blocks) == 1:
                continue
            prod = None
            for block in blocks:
                sub = connected_series(tuple(canonical[i] for i in block), q_order)
                prod = sub if prod is None else prod * sub
            correction = prod if correction is None else correction + prod
        result = total if correction is None else total - correction
    with _lock:
        _connected_cache[key] = result
    return result


# ---------------------------------------------------------------------------
# quasimodular decomposition


class QuasimodularForm:
    """An exact coefficient map over monomials E2^a E4^b E6^c of one weight."""

    __slots__ = ("weight", "coeffs")

    def __init__(self, weight: int, coeffs: dict):
        self.weight = int(weight)
        cleaned = {}
        for (a, b, c), value in coeffs.items():
            if 2 * a + 4 * b + 6 * c != self.weight:
                raise SeriesError("monomial E2^%d E4^%d E6^%d has weight %d, not %d"
                                  % (a, b, c, 2 * a + 4 * b + 6 * c, self.weight))
            value = mpq(value)
            if value:
                cleaned[(a, b, c)] = value
        self.coeffs = cleaned

    def expand(self, q_order: int) -> TruncatedSeries:
        ring = qring(q_order)
        acc = ring.zero()
        basis = {k: eisenstein(k, q_order) for k in (2, 4, 6)}
        for (a, b, c), value in sorted(self.coeffs.items()):
            term = ring.scalar(value)
            for k, e in ((2, a), (4, b), (6, c)):
                for _ in range(e):
                    term = term * basis[k]
            acc = acc + term
        return acc

    def items(self):
        return sorted(self.coeffs.items())

    def __eq__(self, other):
        return isinstance(other, QuasimodularForm) and self.weight == other.weight \
            and self.coeffs == other.coeffs

    def __repr__(self):
        body = " + ".join("(%s)*E2^%d*E4^%d*E6^%d" % (v, a, b, c)
                          for (a, b, c), v in self.items())
        return "<weight-%d form %s>" % (self.weight, body or "0")


def weight_monomials(weight: int) -> list[tuple[int, int, int]]:
    """All (a, b, c) with 2a + 4b + 6c = weight, sorted lexicographically."""
    out = []
    for c in range(weight // 6 + 1):
        for b in range((weight - 6 * c) // 4 + 1):
            rem = weight - 6 * c - 4 * b
            if rem % 2 == 0:
                out.append((rem // 2, b, c))
    return sorted(out)


def _solve_exact(rows: list[list], dim: int):
    """Gaussian elimination over exact rationals on an overdetermined system.

    ``rows`` are [a_0 .. a_{dim-1} | rhs].  Returns the unique solution;
    raises TruncationError when underdetermined, QuasimodularityError when
    inconsistent.  Every surplus equation is verified against the solution.
    """
    work = [list(r) for r in rows]
    pivots = []
    r = 0
    for col in range(dim):
        pivot = None
        for i in range(r, len(work)):
            if work[i][col]:
                pivot = i
                break
        if pivot is None:
            continue
        work[r], work[pivot] = work[pivot], work[r]
        pr = work[r]
        inv = 1 / pr[col]
        work[r] = [x * inv for x in pr]
        for i in range(len(work)):
            if i != r and work[i][col]:
                f = work[i][col]
                work[i] = [x - f * y for x, y in zip(work[i], work[r])]
        pivots.append(col)
        r += 1
    if len(pivots) < dim:
        raise TruncationError("underdetermined decomposition: rank %d < %d "
                              "(q-order too small)" % (len(pivots), dim))
    solution = [mpq(0)] * dim
    for row, col in zip(work[:r], pivots):
        solution[col] = row[dim]
    for i in range(r, len(work)):
        if work[i][dim]:
            raise QuasimodularityError("inconsistent linear system: the series is "
                                       "not quasimodular of this weight at truncation")
    for row in rows:
        lhs = sum((a * x for a, x in zip(row[:dim], solution)), mpq(0))
        if lhs != row[dim]:
            raise QuasimodularityError("surplus equation failed verification")
    return solution


def quasimodular_decompose(series: TruncatedSeries, weight: int,
                           q_order: int | None = None) -> QuasimodularForm:
    """Write a q-series as a weight-homogeneous polynomial in E2, E4, E6.

    Uses q-coefficients 0..q_order as equations; requires at least three
    surplus coefficients beyond the dimension of the weight space, and
    verifies all of them against the solution.
    """
    if q_order is None:
        q_order = series.order
    if q_order is None:
        raise SeriesError("a finite q-order is required")
    monomials = weight_monomials(weight)
    dim = len(monomials)
    if dim == 0:
        raise SeriesError("no Eisenstein monomials of weight %r" % (weight,))
    if q_order + 1 < dim + 3:
        raise TruncationError(
            "need q-order >= %d for weight %d (dimension %d plus 3 surplus)"
            % (dim + 2, weight, dim))
    basis = {}
    e = {k: eisenstein(k, q_order) for k in (2, 4, 6)}
    for (a, b, c) in monomials:
        term = qring(q_order).one()
        for k, exp in ((2, a), (4, b), (6, c)):
            for _ in range(exp):
                term = term * e[k]
        basis[(a, b, c)] = term
    rows = []
    for j in range(q_order + 1):
        row = [basis[m].coefficient((j,)) for m in monomials]
        row.append(series.coefficient((j,)))
        rows.append(row)
    solution = _solve_exact(rows, dim)
    return QuasimodularForm(weight, dict(zip(monomials, solution)))


def stationary_series(profile, q_order: int, quasimodular: bool = False):
    """C_{d}(q) through the full pipeline for a non-negative profile.

    With ``quasimodular=True`` also returns the weight-``sum(d_i + 2)``
    Eisenstein decomposition, cross-validated against the series.
    """
    profile = check_profile(profile)
    if any(d < 0 for d in profile):
        raise ProfileError("stationary series take non-negative profiles")
    series = connected_series(profile, q_order)
    if not quasimodular:
        return series
    weight = sum(d + 2 for d in profile)
    form = quasimodular_decompose(series, weight, q_order)
    if form.expand(q_order) != series:
        raise QuasimodularityError("decomposition failed to reproduce the series")
    return series, form

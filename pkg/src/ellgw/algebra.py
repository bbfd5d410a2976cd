"""Exact rational scalars and truncated formal power series.

Every coefficient in this library is an arbitrary-precision rational
(`gmpy2.mpq`), normalized eagerly, so all identities downstream are checked
bit-exactly.  There is no floating point anywhere.

A :class:`TruncatedSeries` is a sparse polynomial representative of a formal
power series: a coefficient map together with a *trusted order*.  Coefficients
of total degree up to ``order`` are exact; nothing is stored above it.  An
order of ``None`` marks an exact polynomial (linear forms, scalars), for which
every coefficient is trusted.  Binary operations track the trusted order
honestly: a product is trusted up to ``min(ord(a) + val(b), ord(b) + val(a))``
where ``val`` is the valuation of the stored part, which reduces to the usual
"minimum of the two orders" rule for series with nonzero constant term.

Series may be nested: the coefficient ring of a series is described by a
:class:`SeriesRing` (or :data:`QQ` for plain rationals), so ``C[[q]]``,
``C[[z1,...,zn]][[q]]``-style rings and series with supercommutative
polynomial coefficients are all instances of the same machinery.

All values are immutable after construction; operations are pure functions,
deterministic, and independent of dict iteration order, so values may be
shared freely between concurrent tasks.
"""

from __future__ import annotations

from fractions import Fraction
from math import factorial
from typing import Callable, Iterable, Mapping

from gmpy2 import mpq

Rational = mpq

_SCALARS = (int, type(mpq(0)), Fraction)


def rational(numerator=0, denominator=1) -> Rational:
    """Exact rational, reduced to lowest terms with positive denominator."""
    return mpq(numerator, denominator)


def rational_parts(x) -> tuple[int, int]:
    """``(numerator, denominator)`` of ``x`` as plain ints, denominator > 0."""
    r = mpq(x)
    return int(r.numerator), int(r.denominator)


class SeriesError(ValueError):
    """Base class for truncated-series failures."""


class VariableMismatchError(SeriesError):
    """Operands live over different variable tags."""


class TruncationError(SeriesError):
    """A coefficient beyond the trusted order was requested, or an operation
    needs more trusted orders than the operand carries.  Distinguishes
    "unknown" from "zero"."""


class NonUnitError(SeriesError):
    """Inversion of a non-unit (vanishing constant term)."""


class RationalField:
    """Coefficient-ring descriptor for plain exact rationals."""

    variables: tuple = ()

    @property
    def zero_value(self) -> Rational:
        return mpq(0)

    def scalar(self, value) -> Rational:
        return mpq(value)

    def is_zero(self, value) -> bool:
        return not value

    def recip(self, value):
        if not value:
            raise NonUnitError("division by zero in the rational field")
        return 1 / mpq(value)

    def __eq__(self, other):
        return isinstance(other, RationalField)

    def __hash__(self):
        return hash("QQ")

    def __repr__(self):
        return "QQ"


QQ = RationalField()


def _bases_compatible(a, b) -> bool:
    if isinstance(a, RationalField) and isinstance(b, RationalField):
        return True
    if isinstance(a, SeriesRing) and isinstance(b, SeriesRing):
        return a.variables == b.variables and _bases_compatible(a.base, b.base)
    return False


class SeriesRing:
    """Descriptor of a truncated-series ring: variable tags, a default
    truncation order (total degree across the listed variables), and the
    coefficient ring.

    Two rings are compatible when their variable tags and coefficient rings
    agree; the truncation order is carried per value, not by the ring, so
    rings only provide the default used by the constructors.
    """

    __slots__ = ("variables", "order", "base")

    def __init__(self, variables, order, base=QQ):
        if isinstance(variables, str):
            variables = (variables,)
        self.variables = tuple(variables)
        if len(set(self.variables)) != len(self.variables):
            raise SeriesError("variable tags must be distinct: %r" % (self.variables,))
        if order is not None and order < 0:
            raise SeriesError("truncation order must be non-negative")
        self.order = order
        self.base = base

    @property
    def nvars(self) -> int:
        return len(self.variables)

    @property
    def zero_value(self) -> "TruncatedSeries":
        return self.zero()

    def compatible(self, other) -> bool:
        return isinstance(other, SeriesRing) and self.variables == other.variables \
            and _bases_compatible(self.base, other.base)

    def __eq__(self, other):
        return self.compatible(other)

    def __hash__(self):
        return hash((self.variables, "series"))

    def _key(self, key) -> tuple[int, ...]:
        if isinstance(key, int):
            key = (key,)
        key = tuple(int(e) for e in key)
        if len(key) != self.nvars or any(e < 0 for e in key):
            raise SeriesError("bad exponent %r for variables %r" % (key, self.variables))
        return key

    def coerce_coefficient(self, value):
        if isinstance(self.base, RationalField):
            return mpq(value)
        if isinstance(value, TruncatedSeries):
            if not self.base.compatible(value.ring):
                raise VariableMismatchError(
                    "coefficient over %r does not fit ring over %r"
                    % (value.ring.variables, self.base.variables))
            return value
        return self.base.scalar(value)

    def zero(self) -> "TruncatedSeries":
        return TruncatedSeries(self, {}, self.order)

    def one(self) -> "TruncatedSeries":
        return self.scalar(1)

    def scalar(self, value) -> "TruncatedSeries":
        value = self.coerce_coefficient(value)
        coeffs = {} if self.base.is_zero(value) else {(0,) * self.nvars: value}
        return TruncatedSeries(self, coeffs, self.order, _clean=True)

    def gen(self, which=0, power=1, order=...) -> "TruncatedSeries":
        """The series for a single variable power; trusted exactly."""
        if isinstance(which, str):
            which = self.variables.index(which)
        key = tuple(power if i == which else 0 for i in range(self.nvars))
        if order is ...:
            order = None
        return self.series({key: 1}, order=order)

    def series(self, coeffs: Mapping, order=...) -> "TruncatedSeries":
        if order is ...:
            order = self.order
        return TruncatedSeries(self, {self._key(k): v for k, v in coeffs.items()}, order)

    def is_zero(self, value: "TruncatedSeries") -> bool:
        return not value

    def recip(self, value: "TruncatedSeries") -> "TruncatedSeries":
        return value.invert()

    def __repr__(self):
        return "SeriesRing(%r, order=%r, base=%r)" % (self.variables, self.order, self.base)


def qring(order: int) -> SeriesRing:
    """The workhorse ring ``Q[[q]]`` truncated at ``order``."""
    return SeriesRing(("q",), order, QQ)


def _min_order(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def _shift_order(order, shift):
    return None if order is None else order + shift


class TruncatedSeries:
    """A formal power series truncated at a stated total degree.

    ``coeffs`` maps exponent tuples to coefficient-ring elements; zero
    coefficients and keys above the trusted order are never stored.
    """

    __slots__ = ("ring", "order", "coeffs")

    def __init__(self, ring: SeriesRing, coeffs: Mapping, order, _clean=False):
        self.ring = ring
        if order is not None:
            order = int(order)
        self.order = order
        if _clean:
            self.coeffs = coeffs
            return
        base = ring.base
        cleaned = {}
        for key, value in coeffs.items():
            if order is not None and sum(key) > order:
                continue
            value = ring.coerce_coefficient(value)
            if not base.is_zero(value):
                cleaned[key] = value
        self.coeffs = cleaned

    # -- structure ---------------------------------------------------------

    def valuation(self):
        """Minimal total degree of a stored term, or ``None`` for zero."""
        if not self.coeffs:
            return None
        return min(sum(k) for k in self.coeffs)

    def truncate(self, order) -> "TruncatedSeries":
        """Forget coefficients above ``order``; the trust cannot be raised."""
        if order is None:
            if self.order is not None:
                raise TruncationError("cannot promote a truncated series to an exact one")
            return self
        if self.order is not None and order > self.order:
            raise TruncationError("cannot raise the trusted order from %r to %r"
                                  % (self.order, order))
        coeffs = {k: v for k, v in self.coeffs.items() if sum(k) <= order}
        return TruncatedSeries(self.ring, coeffs, order, _clean=True)

    def cap_order(self, order: int) -> "TruncatedSeries":
        """Like :meth:`truncate`, but a no-op when already at or below ``order``."""
        if self.order is not None and self.order <= order:
            return self
        return self.truncate(order)

    def coefficient(self, key):
        """Exact coefficient at ``key``; raises beyond the trusted order."""
        key = self.ring._key(key)
        if self.order is not None and sum(key) > self.order:
            raise TruncationError(
                "coefficient %r beyond trusted order %d" % (key, self.order))
        return self.coeffs.get(key, self.ring.base.zero_value)

    def __getitem__(self, key):
        return self.coefficient(key)

    def constant_term(self):
        return self.coefficient((0,) * self.ring.nvars)

    def map_coefficients(self, fn: Callable, order=...) -> "TruncatedSeries":
        if order is ...:
            order = self.order
        return TruncatedSeries(self.ring, {k: fn(v) for k, v in self.coeffs.items()}, order)

    def __bool__(self):
        return bool(self.coeffs)

    __hash__ = None

    def __repr__(self):
        items = sorted(self.coeffs.items())[:6]
        body = " + ".join("%s*%s" % (v, k) for k, v in items) or "0"
        more = " + ..." if len(self.coeffs) > 6 else ""
        return "<series %s%s (order %s)>" % (body, more, self.order)

    # -- ring operations ----------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, _SCALARS):
            return self.ring.scalar(other)
        if isinstance(other, TruncatedSeries) and self.ring.compatible(other.ring):
            return other
        return None

    def __add__(self, other):
        rhs = self._coerce(other)
        if rhs is None:
            if isinstance(other, TruncatedSeries):
                raise VariableMismatchError(
                    "cannot add series over %r and %r"
                    % (self.ring.variables, other.ring.variables))
            return NotImplemented
        order = _min_order(self.order, rhs.order)
        base = self.ring.base
        out = dict(self.coeffs)
        for key, value in rhs.coeffs.items():
            s = out.get(key)
            s = value if s is None else s + value
            if base.is_zero(s):
                out.pop(key, None)
            else:
                out[key] = s
        if order is not None:
            out = {k: v for k, v in out.items() if sum(k) <= order}
        return TruncatedSeries(self.ring, out, order, _clean=True)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries(self.ring, {k: -v for k, v in self.coeffs.items()},
                               self.order, _clean=True)

    def __sub__(self, other):
        rhs = self._coerce(other)
        if rhs is None:
            if isinstance(other, TruncatedSeries):
                raise VariableMismatchError(
                    "cannot subtract series over %r and %r"
                    % (self.ring.variables, other.ring.variables))
            return NotImplemented
        return self + (-rhs)

    def __rsub__(self, other):
        return (-self) + other

    def _scale(self, value):
        """Coefficientwise multiplication by a scalar of the coefficient ring."""
        base = self.ring.base
        out = {}
        for key, coeff in self.coeffs.items():
            p = coeff * value
            if not base.is_zero(p):
                out[key] = p
        return TruncatedSeries(self.ring, out, self.order, _clean=True)

    def __mul__(self, other):
        if isinstance(other, _SCALARS):
            return self._scale(mpq(other))
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        if self.ring.compatible(other.ring):
            return self._convolve(other)
        # a coefficient-ring element acting as a scalar
        if isinstance(self.ring.base, SeriesRing) and self.ring.base.compatible(other.ring):
            return self._scale(other)
        if isinstance(other.ring.base, SeriesRing) and other.ring.base.compatible(self.ring):
            return other._scale(self)
        raise VariableMismatchError(
            "cannot multiply series over %r and %r"
            % (self.ring.variables, other.ring.variables))

    def __rmul__(self, other):
        if isinstance(other, _SCALARS):
            return self._scale(mpq(other))
        return NotImplemented

    def _convolve(self, other: "TruncatedSeries") -> "TruncatedSeries":
        order = _min_order(_shift_order(self.order, other.valuation() or 0)
                           if self.order is not None else None,
                           _shift_order(other.order, self.valuation() or 0)
                           if other.order is not None else None)
        base = self.ring.base
        out: dict = {}
        bitems = [(k, sum(k), v) for k, v in other.coeffs.items()]
        for ka, va in self.coeffs.items():
            da = sum(ka)
            for kb, db, vb in bitems:
                if order is not None and da + db > order:
                    continue
                key = tuple(x + y for x, y in zip(ka, kb))
                p = va * vb
                s = out.get(key)
                out[key] = p if s is None else s + p
        out = {k: v for k, v in out.items() if not base.is_zero(v)}
        return TruncatedSeries(self.ring, out, order, _clean=True)

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise SeriesError("series powers take non-negative integer exponents")
        result = self.ring.one()
        if result.order is None and self.order is not None:
            result = TruncatedSeries(self.ring, result.coeffs, None, _clean=True)
        base = self
        e = n
        acc = self.ring.scalar(1)
        acc = TruncatedSeries(self.ring, acc.coeffs, None, _clean=True)
        while e:
            if e & 1:
                acc = acc * base
            e >>= 1
            if e:
                base = base * base
        return acc

    def __eq__(self, other):
        rhs = self._coerce(other)
        if rhs is None:
            return NotImplemented if not isinstance(other, TruncatedSeries) else False
        order = _min_order(self.order, rhs.order)
        keys = set(self.coeffs) | set(rhs.coeffs)
        base = self.ring.base
        zero = base.zero_value
        for key in keys:
            if order is not None and sum(key) > order:
                continue
            if self.coeffs.get(key, zero) != rhs.coeffs.get(key, zero):
                return False
        return True

    # -- calculus -----------------------------------------------------------

    def derivative(self, var=0, logarithmic=False) -> "TruncatedSeries":
        """d/dv, or the Euler operator v*d/dv when ``logarithmic`` is set.

        d/dv loses one trusted order; v*d/dv preserves it.
        """
        if isinstance(var, str):
            var = self.ring.variables.index(var)
        out = {}
        base = self.ring.base
        for key, value in self.coeffs.items():
            e = key[var]
            if e == 0:
                continue
            coeff = value * e
            if base.is_zero(coeff):
                continue
            if logarithmic:
                out[key] = coeff
            else:
                nk = key[:var] + (e - 1,) + key[var + 1:]
                out[nk] = coeff
        order = self.order if logarithmic else _shift_order(self.order, -1)
        if order is not None and order < 0:
            out = {}
        return TruncatedSeries(self.ring, out, order, _clean=True)

    def _by_degree(self) -> dict[int, dict]:
        buckets: dict[int, dict] = {}
        for key, value in self.coeffs.items():
            buckets.setdefault(sum(key), {})[key] = value
        return buckets

    def invert(self) -> "TruncatedSeries":
        """Multiplicative inverse up to the trusted order.

        Requires the constant coefficient to be a unit of the coefficient
        ring.  Solved degree by degree from a*b = 1.
        """
        base = self.ring.base
        zero_key = (0,) * self.ring.nvars
        c0 = self.coeffs.get(zero_key)
        if c0 is None or base.is_zero(c0):
            raise NonUnitError("constant term vanishes; series is not invertible")
        b0 = base.recip(c0)
        if self.order is None:
            if len(self.coeffs) > 1:
                raise TruncationError(
                    "inverting a nonconstant exact polynomial needs a finite order")
            return TruncatedSeries(self.ring, {zero_key: b0}, None, _clean=True)
        a_deg = self._by_degree()
        inv_deg: dict[int, dict] = {0: {zero_key: b0}}
        for m in range(1, self.order + 1):
            acc: dict = {}
            for j in range(1, m + 1):
                aj = a_deg.get(j)
                bj = inv_deg.get(m - j)
                if not aj or not bj:
                    continue
                for ka, va in aj.items():
                    for kb, vb in bj.items():
                        key = tuple(x + y for x, y in zip(ka, kb))
                        p = va * vb
                        s = acc.get(key)
                        acc[key] = p if s is None else s + p
            comp = {}
            for key, value in acc.items():
                c = -(b0 * value)
                if not base.is_zero(c):
                    comp[key] = c
            if comp:
                inv_deg[m] = comp
        out = {}
        for comp in inv_deg.values():
            out.update(comp)
        return TruncatedSeries(self.ring, out, self.order, _clean=True)

    def exp(self) -> "TruncatedSeries":
        """exp(a) = sum a^k / k!, trusted to a's order; requires vanishing
        constant term (so the powers die at the truncation)."""
        zero_key = (0,) * self.ring.nvars
        if zero_key in self.coeffs:
            raise SeriesError("exp needs a series with zero constant term")
        if self.order is None:
            if self.coeffs:
                raise TruncationError("exp of an exact polynomial needs a finite order")
            return self.ring.one()
        acc = self.ring.one().cap_order(self.order)
        term = acc
        k = 1
        while True:
            term = (term * self * mpq(1, k)).cap_order(self.order)
            if not term:
                return acc
            acc = acc + term
            k += 1

    def log(self) -> "TruncatedSeries":
        """log(a) for a with constant term 1, trusted to a's order; inverse of
        :meth:`exp`."""
        one = self.ring.one()
        x = self - one
        zero_key = (0,) * self.ring.nvars
        if zero_key in x.coeffs:
            raise SeriesError("log needs a series with constant term 1")
        if x.order is None:
            if x.coeffs:
                raise TruncationError("log of an exact polynomial needs a finite order")
            return self.ring.zero()
        acc = self.ring.zero().cap_order(x.order)
        power = one.cap_order(x.order)
        m = 1
        while True:
            power = (power * x).cap_order(x.order)
            if not power:
                return acc
            acc = acc + power * mpq((-1) ** (m + 1), m)
            m += 1


def substitute(series: TruncatedSeries, target, one, order=None):
    """Evaluate a univariate truncated series at ``target``: sum a_d * target^d.

    ``target`` must have positive degree in its own algebra's grading, so its
    powers eventually vanish at truncation; ``one`` is the multiplicative unit
    of the target algebra.  When the target algebra does not truncate by
    itself (e.g. powers of an exact linear form), pass the working ``order``
    to cap each power at that total degree.  Raises
    :class:`TruncationError` when the powers of ``target`` outlive the
    trusted coefficients of ``series`` (e.g. when ``target`` has a scalar
    constant term, so the substitution would not truncate).
    """
    if series.ring.nvars != 1:
        raise SeriesError("substitution is defined for univariate series")
    if series.order is None:
        top = max((k[0] for k in series.coeffs), default=0)
    else:
        top = series.order

    def cap(value):
        return value if order is None else value.cap_order(order)

    acc = one * series.coeffs.get((0,), mpq(0))
    power = cap(one)
    for d in range(1, top + 1):
        power = cap(power * target)
        if not power:
            return acc
        c = series.coeffs.get((d,))
        if c is not None:
            acc = acc + power * c
    if cap(power * target):
        raise TruncationError(
            "substitution target keeps contributing beyond the series order %r" % top)
    return acc

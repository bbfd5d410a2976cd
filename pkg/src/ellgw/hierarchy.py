"""The principal hierarchy on a supercommutative jet ring, and its Miura-type
deformation.

Jet variables ``u^alpha_k`` stand for the k-th x-derivatives of the genus-0
fields ``v^alpha`` (x is the coupling of the level-0 unit insertion).  The
closed-form flow densities P^alpha_{beta,b} are polynomial in the jets of
order zero; every flow is the evolutionary superderivation with
``du^alpha_k/dt^beta_b = d_x^{k+1} P^alpha_{beta,b}``.

The genus corrections deform the fields to ``w^alpha = u^alpha_0 + sum over
g >= 1 of eps^{2g}`` times a differential polynomial obtained by applying
d_x and the level-0 flow of the pairing partner to the genus-g jet
expression, which depends only on ``u^4_0, ..., u^4_{2g-2}`` and q.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import NamedTuple

from gmpy2 import mpq

from .algebra import QQ, SeriesError, TruncatedSeries, qring, substitute
from .combinatorics import automorphism_factor, partitions
from .supercommutative import (SuperAlgebra, SuperPolynomial, derivation,
                               monomial_degree, monomial_variables)
from .potential import ETA_INV, eta_inv
from . import stationary


class JetOrderError(SeriesError):
    """A flow needed more jet-order headroom than the algebra provides."""


class JetVariable(NamedTuple):
    """u^alpha_k, the k-th x-derivative of the field v^alpha."""

    alpha: int
    order: int

    @property
    def odd(self) -> bool:
        return self.alpha in (2, 3)

    @property
    def level(self) -> int:
        # uniform accessor shared with the t-variables (windows, truncations)
        return self.order

    def __str__(self):
        return "u%d_%d" % (self.alpha, self.order)


def jvar(alpha: int, order: int = 0) -> JetVariable:
    if alpha not in (1, 2, 3, 4) or order < 0:
        raise SeriesError("bad jet variable u^%r_%r" % (alpha, order))
    return JetVariable(alpha, order)


@dataclass(frozen=True)
class JetTruncation:
    """Jet order is a hard resource: exceeding it raises.  The optional total
    degree bound truncates silently (a window, like the potential side)."""

    max_jet_order: int = 6
    max_degree: int | None = None

    def admits(self, key) -> bool:
        for v in monomial_variables(key):
            if v.order > self.max_jet_order:
                raise JetOrderError("jet order %d exceeds the configured bound %d"
                                    % (v.order, self.max_jet_order))
        if self.max_degree is not None and monomial_degree(key) > self.max_degree:
            return False
        return True


def jet_algebra(q_order: int | None = None, max_jet_order: int = 6,
                max_degree: int | None = None) -> SuperAlgebra:
    base = QQ if q_order is None else qring(q_order)
    return SuperAlgebra(JetTruncation(max_jet_order, max_degree), base)


def principal_flow_density(algebra: SuperAlgebra, alpha: int, beta: int,
                           b: int) -> SuperPolynomial:
    """The closed-form density P^alpha_{beta,b} in the order-zero jets.

    The two-odd term of P^4_{1,b} is absent at b = 0 (its empty falling
    index), consistent with the 1/k! := 0 convention for k < 0.
    """
    if b < 0:
        raise SeriesError("flow levels start at 0")
    u = lambda a: algebra.var(jvar(a, 0))
    v1 = u(1)

    def v1pow(e: int, fact: int) -> SuperPolynomial:
        return v1 ** e * mpq(1, factorial(fact))

    if beta == 1:
        if alpha == 1:
            return v1pow(b + 1, b + 1)
        if alpha == 2:
            return u(2) * v1pow(b, b)
        if alpha == 3:
            return u(3) * v1pow(b, b)
        out = u(4) * v1pow(b, b)
        if b >= 1:
            out = out + u(2) * u(3) * v1pow(b - 1, b - 1)
        return out
    if beta == 2:
        if alpha == 2:
            return v1pow(b + 1, b + 1)
        if alpha == 4:
            return u(3) * v1pow(b, b)
        return algebra.zero()
    if beta == 3:
        if alpha == 3:
            return v1pow(b + 1, b + 1)
        if alpha == 4:
            return -(u(2) * v1pow(b, b))
        return algebra.zero()
    if beta == 4:
        if alpha == 4:
            return v1pow(b + 1, b + 1)
        return algebra.zero()
    raise SeriesError("basis indices run over 1..4")


def x_derivative(e: SuperPolynomial) -> SuperPolynomial:
    """The total x-derivative: the even derivation u^alpha_k -> u^alpha_{k+1}."""
    algebra = e.algebra
    return derivation(e, lambda v: algebra.var(JetVariable(v.alpha, v.order + 1)))


def flow_apply(beta: int, b: int, e: SuperPolynomial) -> SuperPolynomial:
    """Derivative of ``e`` along the (beta, b) flow of the hierarchy.

    Chain rule: u^alpha_k varies by d_x^k of the right side d_x P^alpha_{beta,b}.
    For (beta, b) = (1, 0) this is the total x-derivative, since the density
    of the unit-class level-0 flow is the field itself.
    """
    algebra = e.algebra
    cache: dict = {}

    def image(v: JetVariable):
        hit = cache.get(v)
        if hit is None:
            base = cache.get((v.alpha, 0))
            if base is None:
                base = x_derivative(principal_flow_density(algebra, v.alpha, beta, b))
                cache[(v.alpha, 0)] = base
            hit = base
            for _ in range(v.order):
                hit = x_derivative(hit)
            cache[v] = hit
        return hit

    return derivation(e, image)


def commutator_residual(beta: int, b: int, gamma: int, c: int,
                        alpha: int, algebra: SuperAlgebra) -> SuperPolynomial:
    """Supercommutator of two flows on u^alpha_0; zero iff the flows commute.

    Odd flows anticommute: the second term carries (-1)^{|beta||gamma|}.
    """
    u = algebra.var(jvar(alpha, 0))
    first = flow_apply(beta, b, flow_apply(gamma, c, u))
    second = flow_apply(gamma, c, flow_apply(beta, b, u))
    sign = -1 if (beta in (2, 3) and gamma in (2, 3)) else 1
    return first - second * mpq(sign)


def genus_jet_expression(algebra: SuperAlgebra, g: int, q_order: int) -> SuperPolynomial:
    """The genus-g term of the free energy written in jets: a differential
    polynomial in u^4_0 ... u^4_{2g-2} with q-series coefficients."""
    if g < 1:
        raise SeriesError("jet expressions exist for g >= 1")
    if not isinstance(algebra.base, type(qring(q_order))):
        raise SeriesError("the jet algebra must carry q-series coefficients")
    u40 = algebra.var(jvar(4, 0))
    q_gen = qring(q_order).gen(0, order=q_order)
    target = u40.exp() * q_gen
    acc = algebra.zero()
    for lam in partitions(2 * g - 2):
        prod = algebra.one() * mpq(1, automorphism_factor(lam))
        for part in lam:
            prod = prod * algebra.var(jvar(4, part))
        c_series = stationary.connected_series(lam, q_order)
        acc = acc + prod * substitute(c_series, target, algebra.one(), order=q_order)
    if g == 1:
        acc = acc - u40 * mpq(1, 24)
    return acc


def miura_field(alpha: int, genus_max: int, q_order: int,
                max_jet_order: int = 6, max_degree: int | None = None) -> dict:
    """The deformed field w^alpha as a map genus -> differential polynomial.

    Genus 0 contributes u^alpha_0; genus g >= 1 contributes the coefficient
    of eps^{2g}: the pairing eta^{alpha mu} of the (mu, 0)-flow derivative of
    d_x applied to the genus-g jet expression.  Only even powers of eps occur
    by construction.
    """
    algebra = jet_algebra(q_order, max_jet_order, max_degree)
    out = {0: algebra.var(jvar(alpha, 0))}
    for g in range(1, genus_max + 1):
        expression = x_derivative(genus_jet_expression(algebra, g, q_order))
        term = algebra.zero()
        for mu in (1, 2, 3, 4):
            c = eta_inv(alpha, mu)
            if c:
                term = term + flow_apply(mu, 0, expression) * mpq(c)
        out[g] = term
    return out

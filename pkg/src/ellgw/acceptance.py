"""The acceptance suite: every checkable identity at pinned truncations.

Each criterion is a function returning a :class:`CriterionResult`; the
:func:`run_acceptance` driver executes them in order and prints one pass/fail
line per criterion.  All checks are exact: "zero" means the zero polynomial
or series on the stated window, bit for bit.

One documented exception: the source-free forms of the two odd constraints at
level -1 fail in genus zero by the unstable three-point shadow (see
:func:`ellgw.potential.unstable_constraint_shadow`).  The suite verifies the
residual equals that exact shadow; the literal source-free identity for those
two cells is reported as a known gap.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from functools import cached_property

from gmpy2 import mpq

from .algebra import qring
from .combinatorics import divisor_power_sum, partitions, set_partitions
from .supercommutative import tvar, evaluate_at
from . import hierarchy, potential, stationary

#: pinned truncations of the constraint suite
CONSTRAINT_DEGREE = 5
CONSTRAINT_LEVEL = 4
CONSTRAINT_QORDER = 6
GENUS_RANGE = (0, 1, 2)
LEVEL_RANGE = (-1, 0, 1, 2, 3)
JET_ORDER = 5


@dataclass
class CriterionResult:
    name: str
    passed: bool
    seconds: float
    detail: str = ""
    notes: list = field(default_factory=list)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = (" -- " + self.detail) if self.detail else ""
        return "[%s] %s (%.1fs)%s" % (status, self.name, self.seconds, extra)


class SuiteContext:
    """Shared lazily-built state across criteria (one workspace, warm caches)."""

    @cached_property
    def workspace(self) -> potential.PotentialWorkspace:
        return potential.PotentialWorkspace(
            max_degree=CONSTRAINT_DEGREE, max_level=CONSTRAINT_LEVEL,
            q_order=CONSTRAINT_QORDER, genus_max=2, k_max=max(LEVEL_RANGE))


def independent_partition_numbers(top: int) -> list[int]:
    """Partition counts by the bounded-part recurrence, independent of any
    series machinery."""
    table = [[0] * (top + 1) for _ in range(top + 1)]
    for maxpart in range(top + 1):
        table[maxpart][0] = 1
    for maxpart in range(1, top + 1):
        for total in range(1, top + 1):
            table[maxpart][total] = table[maxpart - 1][total]
            if total >= maxpart:
                table[maxpart][total] += table[maxpart][total - maxpart]
    return [table[top][n] for n in range(top + 1)]


def criterion_closed_forms(ctx) -> CriterionResult:
    """C_(2) and C_(1,1) from the determinant pipeline versus the Eisenstein
    closed forms, through q^10 and q^8."""
    t0 = time.time()
    problems = []
    c2 = stationary.connected_series((2,), 10)
    e2, e4 = stationary.eisenstein(2, 10), stationary.eisenstein(4, 10)
    if c2 != e2 * e2 * mpq(1, 2) + e4 * mpq(1, 12):
        problems.append("C_(2) != E2^2/2 + E4/12 through q^10")
    c11 = stationary.connected_series((1, 1), 8)
    e2, e4, e6 = (stationary.eisenstein(k, 8) for k in (2, 4, 6))
    if c11 != e2 ** 3 * mpq(-8, 3) + e2 * e4 * mpq(2, 3) + e6 * mpq(7, 180):
        problems.append("C_(1,1) != -8/3 E2^3 + 2/3 E2 E4 + 7/180 E6 through q^8")
    return CriterionResult("1 stationary pipeline vs closed forms",
                           not problems, time.time() - t0, "; ".join(problems))


def criterion_quasimodular(ctx) -> CriterionResult:
    """The decomposition recovers the exact coefficient maps with >= 3
    surplus q-coefficients verified."""
    t0 = time.time()
    problems = []
    c2 = stationary.connected_series((2,), 10)
    form = stationary.quasimodular_decompose(c2, 4, 10)
    if form.coeffs != {(2, 0, 0): mpq(1, 2), (0, 1, 0): mpq(1, 12)}:
        problems.append("weight-4 map is %r" % (form.coeffs,))
    surplus = 10 + 1 - len(stationary.weight_monomials(4))
    if surplus < 3:
        problems.append("weight-4 surplus %d < 3" % surplus)
    c11 = stationary.connected_series((1, 1), 8)
    form = stationary.quasimodular_decompose(c11, 6, 8)
    expected = {(3, 0, 0): mpq(-8, 3), (1, 1, 0): mpq(2, 3), (0, 0, 1): mpq(7, 180)}
    if form.coeffs != expected:
        problems.append("weight-6 map is %r" % (form.coeffs,))
    surplus = 8 + 1 - len(stationary.weight_monomials(6))
    if surplus < 3:
        problems.append("weight-6 surplus %d < 3" % surplus)
    return CriterionResult("2 quasimodular decomposition maps",
                           not problems, time.time() - t0, "; ".join(problems))


def criterion_point_free(ctx) -> CriterionResult:
    """C_() = sum sigma(n)/n q^n through q^20 and the n = 0 disconnected
    series equals the partition numbers through q^20."""
    t0 = time.time()
    problems = []
    c0 = stationary.connected_series((), 20)
    for n in range(1, 21):
        if c0.coefficient((n,)) != mpq(divisor_power_sum(n, 1), n):
            problems.append("C_() wrong at q^%d" % n)
            break
    disc = stationary.disconnected_series((), 20)
    oracle = independent_partition_numbers(20)
    for n in range(21):
        if disc.coefficient((n,)) != oracle[n]:
            problems.append("partition series wrong at q^%d" % n)
            break
    return CriterionResult("3 point-free series and partition numbers",
                           not problems, time.time() - t0, "; ".join(problems))


def criterion_transparency(ctx) -> CriterionResult:
    """Appending -2 to small profiles changes nothing; the level-0 reduction
    C_(0) = q d/dq C_() - 1/24 holds through q^10."""
    t0 = time.time()
    problems = []
    for base in ((), (0,), (1,), (2,), (0, 0), (1, 1), (2, 0)):
        with_tail = base + (-2,)
        if stationary.disconnected_series(with_tail, 6) != \
                stationary.disconnected_series(base, 6):
            problems.append("appending -2 to %r changed the series" % (base,))
    c0 = stationary.connected_series((0,), 10)
    reduced = stationary.connected_series((), 10).derivative(0, logarithmic=True) \
        - qring(10).scalar(mpq(1, 24))
    if c0 != reduced:
        problems.append("C_(0) != q d/dq C_() - 1/24")
    return CriterionResult("4 tau_{-2} transparency and level-0 reduction",
                           not problems, time.time() - t0, "; ".join(problems))


def constraint_cells(ws: potential.PotentialWorkspace):
    """Run every cell of the constraint suite; returns (failures, known_gaps).

    A cell fails when its residual is nonzero on the window, except the two
    genus-0 level -1 odd cells, which must equal the derived unstable shadow
    exactly (reported as known gaps when they do, failures when they do not).
    """
    failures, gaps = [], []
    for g in GENUS_RANGE:
        for k in LEVEL_RANGE:
            for kind in ("L", "D", "Dbar"):
                residual, window = ws.virasoro_residual(kind, k, g)
                if kind in ("D", "Dbar") and k == -1 and g == 0:
                    shadow = potential.unstable_constraint_shadow(
                        kind, residual.algebra)
                    if potential.first_violation(residual - shadow, window) is None:
                        gaps.append("%s_{-1} F_0 = unstable shadow, not 0" % kind)
                    else:
                        failures.append("%s_{-1} g=0 residual is not even the "
                                        "unstable shadow" % kind)
                    continue
                violation = potential.first_violation(residual, window)
                if violation is not None:
                    failures.append("%s_%d g=%d at %r" % (kind, k, g, violation[0]))
        residual, window = ws.divisor_residual(g)
        violation = potential.first_violation(residual, window)
        if violation is not None:
            failures.append("divisor g=%d at %r" % (g, violation[0]))
    for d in range(0, CONSTRAINT_LEVEL + 1):
        for k in LEVEL_RANGE:
            for kind in ("L", "D", "Dbar"):
                residual, window = ws.v4_constraint_residual(kind, k, d)
                if potential.first_violation(residual, window) is not None:
                    failures.append("%s_%d v4_%d" % (kind, k, d))
        residual, window = ws.v4_divisor_residual(d)
        if potential.first_violation(residual, window) is not None:
            failures.append("divisor on v4_%d" % d)
    return failures, gaps


def criterion_constraints(ctx) -> CriterionResult:
    t0 = time.time()
    failures, gaps = constraint_cells(ctx.workspace)
    detail = "; ".join(failures)
    notes = ["known gap: " + g for g in gaps]
    if len(gaps) != 2:
        failures.append("expected exactly the two documented unstable cells, saw %d"
                        % len(gaps))
        detail = "; ".join(failures)
    return CriterionResult("5 constraint suite (g<=2, k<=3, N=5 D=4 Q=6)",
                           not failures, time.time() - t0, detail, notes)


def criterion_reconstruction(ctx) -> CriterionResult:
    t0 = time.time()
    problems = []
    for g in (1, 2):
        residual, window = ctx.workspace.reconstruction_residual(g)
        violation = potential.first_violation(residual, window)
        if violation is not None:
            problems.append("genus %d at %r" % (g, violation[0]))
    return CriterionResult("6 reconstruction closure (g = 1, 2)",
                           not problems, time.time() - t0, "; ".join(problems))


def hierarchy_consistency(ws: potential.PotentialWorkspace) -> list[str]:
    """Compare dv^alpha/dt^beta_b against d_x P^alpha_{beta,b} on jets of v."""
    jalg = hierarchy.jet_algebra()

    def v_jet(gamma, k):
        p = ws.v(gamma)
        for _ in range(k):
            p = p.left_partial(tvar(1, 0))
        return p

    t_algebra = ws.f0.algebra
    window = potential.Window(ws._f0_trunc.max_degree - 3, ws._f0_trunc.max_level)
    problems = []
    for alpha in (1, 2, 3, 4):
        for beta in (1, 2, 3, 4):
            for b in (0, 1, 2):
                lhs = ws.v(alpha).left_partial(tvar(beta, b))
                rhs_jet = hierarchy.x_derivative(
                    hierarchy.principal_flow_density(jalg, alpha, beta, b))
                values = {v: v_jet(v.alpha, v.order) for v in rhs_jet.variables()}
                rhs = evaluate_at(rhs_jet, values, t_algebra)
                if potential.first_violation(lhs - rhs, window) is not None:
                    problems.append("alpha=%d beta=%d b=%d" % (alpha, beta, b))
    return problems


def hierarchy_commutators() -> list[str]:
    algebra = hierarchy.jet_algebra(max_jet_order=JET_ORDER)
    flows = [(beta, b) for beta in (1, 2, 3, 4) for b in (0, 1, 2)]
    problems = []
    for i, (beta, b) in enumerate(flows):
        for gamma, c in flows[i:]:
            for alpha in (1, 2, 3, 4):
                if hierarchy.commutator_residual(beta, b, gamma, c, alpha, algebra):
                    problems.append("[.(%d,%d), .(%d,%d)] on u%d"
                                    % (beta, b, gamma, c, alpha))
    return problems


def criterion_hierarchy(ctx) -> CriterionResult:
    t0 = time.time()
    problems = hierarchy_consistency(ctx.workspace)
    problems += hierarchy_commutators()
    return CriterionResult("7 principal hierarchy (table + commutators)",
                           not problems, time.time() - t0, "; ".join(problems[:4]))


def miura_residual(ws: potential.PotentialWorkspace):
    """eps^2 part of w^4 on jets of v, versus the second derivative of F_1."""
    q_order = ws.q_order
    w4 = hierarchy.miura_field(4, 1, q_order, max_jet_order=JET_ORDER,
                               max_degree=ws._assembly.max_degree)
    eps2 = w4[1]
    body1 = ws.genus_potential(1).body

    def v_jet_q(gamma, k):
        p = ws.v(gamma)
        for _ in range(k):
            p = p.left_partial(tvar(1, 0))
        return potential.promote_to_qseries(p.change_truncation(ws._assembly), q_order)

    values = {v: v_jet_q(v.alpha, v.order) for v in eps2.variables()}
    lhs = evaluate_at(eps2, values, body1.algebra)
    rhs = body1.left_partial(tvar(1, 0)).left_partial(tvar(1, 0))
    window = potential.Window(ws._assembly.max_degree - 2,
                              ws._assembly.max_level, q_order)
    return lhs - rhs, window


def criterion_miura(ctx) -> CriterionResult:
    t0 = time.time()
    residual, window = miura_residual(ctx.workspace)
    violation = potential.first_violation(residual, window)
    detail = "" if violation is None else "at %r" % (violation[0],)
    return CriterionResult("8 Miura eps^2 cross-check",
                           violation is None, time.time() - t0, detail)


def roundtrip_profiles(max_weight: int = 8, max_points: int = 3):
    out = []
    for n in range(1, max_points + 1):
        budget = max_weight - 2 * n
        if budget < 0:
            continue
        for total in range(budget + 1):
            for parts in partitions(total, max_part=total or None):
                if len(parts) <= n:
                    profile = tuple(parts) + (0,) * (n - len(parts))
                    out.append(profile)
    return out


def roundtrip_failures(q_order: int = 6, max_weight: int = 8,
                       max_points: int = 3) -> list[str]:
    """Reassemble every disconnected series from connected blocks."""
    problems = []
    inv = stationary.euler_inverse(q_order)
    for profile in roundtrip_profiles(max_weight, max_points):
        disc = stationary.disconnected_series(profile, q_order)
        acc = None
        for blocks in set_partitions(len(profile)):
            prod = None
            for block in blocks:
                sub = stationary.connected_series(
                    tuple(profile[i] for i in block), q_order)
                prod = sub if prod is None else prod * sub
            acc = prod if acc is None else acc + prod
        if disc != inv * acc:
            problems.append(repr(profile))
    return problems


def criterion_roundtrip(ctx) -> CriterionResult:
    t0 = time.time()
    problems = roundtrip_failures()
    return CriterionResult("9 connected/disconnected round trip (n <= 3)",
                           not problems, time.time() - t0, "; ".join(problems))


def criterion_genus3(ctx) -> CriterionResult:
    """Extended spot checks: the genus-3 potential over the partitions of 4.

    Expensive (the 4-point determinant); gated behind the extended flag.
    """
    t0 = time.time()
    problems = []
    expected = {(4,), (3, 1), (2, 2), (2, 1, 1), (1, 1, 1, 1)}
    if set(partitions(4)) != expected:
        problems.append("partition set of 4 is wrong")
    for lam, weight in (((4,), 6), ((3, 1), 8), ((2, 2), 8), ((2, 1, 1), 10)):
        q_order = len(stationary.weight_monomials(weight)) + 3
        series = stationary.connected_series(lam, q_order)
        form = stationary.quasimodular_decompose(series, weight, q_order)
        if form.expand(q_order) != series:
            problems.append("quasimodular check failed for %r" % (lam,))
    ws = potential.PotentialWorkspace(max_degree=4, max_level=4, q_order=3,
                                      genus_max=3, k_max=1)
    residual, window = ws.divisor_residual(3)
    violation = potential.first_violation(residual, window)
    if violation is not None:
        problems.append("divisor residual g=3 at %r" % (violation[0],))
    for kind in ("D", "Dbar", "L"):
        residual, window = ws.virasoro_residual(kind, 0, 3)
        if potential.first_violation(residual, window) is not None:
            problems.append("%s_0 residual g=3" % kind)
    residual, window = ws.reconstruction_residual(3)
    if potential.first_violation(residual, window) is not None:
        problems.append("reconstruction closure g=3")
    return CriterionResult("10 genus-3 spot checks (extended)",
                           not problems, time.time() - t0, "; ".join(problems))


CRITERIA = [
    criterion_closed_forms,
    criterion_quasimodular,
    criterion_point_free,
    criterion_transparency,
    criterion_constraints,
    criterion_reconstruction,
    criterion_hierarchy,
    criterion_miura,
    criterion_roundtrip,
]


def run_acceptance(extended: bool = False, emit=print):
    """Run the suite; returns (results, all_passed)."""
    ctx = SuiteContext()
    results = []
    todo = list(CRITERIA) + ([criterion_genus3] if extended else [])
    for criterion in todo:
        result = criterion(ctx)
        results.append(result)
        emit(result.line())
        for note in result.notes:
            emit("       " + note)
    return results, all(r.passed for r in results)


def extended_enabled() -> bool:
    return os.environ.get("ELLGW_EXTENDED", "") not in ("", "0")

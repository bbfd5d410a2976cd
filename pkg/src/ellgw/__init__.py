"""Exact computation of the Gromov-Witten invariants of an elliptic curve.

All arithmetic is exact (arbitrary-precision rationals); the stationary
descendant series come from the theta-determinant n-point formula, the full
genus potentials from the closed reconstruction formula, and every stated
constraint (Virasoro-type operators, divisor equation, principal hierarchy,
Miura transform) is verified as a bit-exact identity at finite truncation.
"""

__version__ = "0.1.0"

from .algebra import (QQ, Rational, SeriesError, SeriesRing, TruncatedSeries,
                      TruncationError, NonUnitError, VariableMismatchError,
                      qring, rational, rational_parts, substitute)
from .combinatorics import (automorphism_factor, divisor_power_sum, partitions,
                            pochhammer, set_partitions)
from .supercommutative import (DegreeLevelTruncation, SuperAlgebra,
                               SuperPolynomial, TVariable, tvar)
from .stationary import (QuasimodularForm, connected_series,
                         disconnected_invariant, disconnected_series,
                         eisenstein, euler_factor, euler_inverse,
                         npoint_series, quasimodular_decompose,
                         stationary_series, theta_series)
from .potential import (GenusPotential, PotentialWorkspace, Window,
                        genus0_potential, v_series)
from .hierarchy import (JetVariable, jet_algebra, jvar, miura_field,
                        principal_flow_density, flow_apply, x_derivative)

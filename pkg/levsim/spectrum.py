"""
Non-Hermitian two-mode Hamiltonian, its eigenvalues and PT phase.

The closed form and the numeric solver both return eigenvalues of the
matrix ``H`` as built by :func:`build_hamiltonian`. These are half of the
frequently quoted ``-iΓ ± sqrt(-Γ² + 4(β² + γgx(γgy - γay)))``; the phase
boundaries are the same.
"""

import cmath
import dataclasses
import enum
import logging
import math

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import derive_parameters
from .errors import DegenerateTrap, EmptyGrid, OutOfRange
from .executor import parallel_map

__all__ = [
    "PTPhase",
    "ComplexMatrix2",
    "EigenPair",
    "SweepRow",
    "SweepTable",
    "build_hamiltonian",
    "eigenvalues_closed_form",
    "eigenvalues_numeric",
    "sweep_coupling",
    "exceptional_point",
]

logger = logging.getLogger(__name__)

# relative tolerances for "balanced" and "at the exceptional point"
BALANCE_TOL = 1e-9
EP_TOL = 1e-9
_TINY = 1e-300


class PTPhase(str, enum.Enum):
    PT_SYMMETRIC = "PTSymmetric"
    EXCEPTIONAL_POINT = "ExceptionalPoint"
    PT_BROKEN = "PTBroken"
    NON_BALANCED = "NonBalanced"


@dataclass(frozen=True)
class ComplexMatrix2:
    h11: complex
    h12: complex
    h21: complex
    h22: complex

    def __post_init__(self):
        for name in ("h11", "h12", "h21", "h22"):
            if not cmath.isfinite(getattr(self, name)):
                raise OutOfRange(name, "matrix entries must be finite")

    @property
    def trace(self):
        return self.h11 + self.h22

    @property
    def determinant(self):
        return self.h11 * self.h22 - self.h12 * self.h21

    def as_array(self):
        return np.array([[self.h11, self.h12], [self.h21, self.h22]], dtype=complex)


@dataclass(frozen=True)
class EigenPair:
    lambda_plus: complex
    lambda_minus: complex
    phase: PTPhase

    @property
    def trace(self):
        return self.lambda_plus + self.lambda_minus


@dataclass(frozen=True)
class SweepRow:
    beta: float
    closed_form: EigenPair
    numeric: EigenPair

    @property
    def phase(self):
        return self.closed_form.phase

    @property
    def deviation(self):
        """Largest closed-form/numeric mismatch, relative to the rate scale."""
        scale = max(
            abs(self.closed_form.lambda_plus),
            abs(self.closed_form.lambda_minus),
            self.beta,
            _TINY,
        )
        return max(
            abs(self.closed_form.lambda_plus - self.numeric.lambda_plus),
            abs(self.closed_form.lambda_minus - self.numeric.lambda_minus),
        ) / scale

    def as_record(self):
        plus, minus = self.closed_form.lambda_plus, self.closed_form.lambda_minus
        return {
            "beta": self.beta,
            "re_plus": plus.real,
            "im_plus": plus.imag,
            "re_minus": minus.real,
            "im_minus": minus.imag,
            "phase": self.phase.value,
        }


@dataclass
class SweepTable:
    rows: list

    COLUMNS = ("beta", "re_plus", "im_plus", "re_minus", "im_minus", "phase")

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    @property
    def betas(self):
        return np.array([row.beta for row in self.rows])

    @property
    def phases(self):
        return [row.phase for row in self.rows]

    @property
    def max_deviation(self):
        return max((row.deviation for row in self.rows), default=0.0)

    def records(self):
        return [row.as_record() for row in self.rows]


def _ordered(first, second):
    """Descending real part, ties broken by descending imaginary part."""
    pair = sorted((complex(first), complex(second)), key=lambda z: (z.real, z.imag))
    return pair[1], pair[0]


def _linear_rates(params, gamma_rates):
    if gamma_rates is None:
        return params.Gamma_x, params.Gamma_y
    gamma_x, gamma_y = gamma_rates
    for name, value in (("Gamma_x", gamma_x), ("Gamma_y", gamma_y)):
        if not math.isfinite(value):
            raise OutOfRange(name, "must be finite")
    return gamma_x, gamma_y


def build_hamiltonian(params, gamma_rates=None):
    """H = [[(Δ - iΓx)/2, βx], [βy, -(Δ + iΓy)/2]].

    ``gamma_rates`` is the effective damping pair (Γx, Γy); the default is
    the linear one, (2γgx, 2(γgy - γay)).
    """
    gamma_x, gamma_y = _linear_rates(params, gamma_rates)
    delta = params.Delta
    return ComplexMatrix2(
        h11=complex(delta, -gamma_x) / 2.0,
        h12=complex(params.beta_x),
        h21=complex(params.beta_y),
        h22=-complex(delta, gamma_y) / 2.0,
    )


def _classify(balanced, discriminant, scale_sq):
    if not balanced:
        return PTPhase.NON_BALANCED
    if abs(discriminant) < EP_TOL * scale_sq:
        return PTPhase.EXCEPTIONAL_POINT
    return PTPhase.PT_SYMMETRIC if discriminant > 0 else PTPhase.PT_BROKEN


def eigenvalues_closed_form(params, gamma_rates=None):
    gamma_x, gamma_y = _linear_rates(params, gamma_rates)
    # per-mode amplitude rates: γgx and γgy - γay in the linear case
    loss, gain = gamma_x / 2.0, gamma_y / 2.0
    coupling_sq = params.beta_x * params.beta_y
    total = loss + gain

    root = cmath.sqrt(complex(params.Delta, -(loss - gain)) ** 2 + 4.0 * coupling_sq)
    centre = complex(0.0, -total / 2.0)
    plus, minus = _ordered(centre + root / 2.0, centre - root / 2.0)

    rate_scale = max(abs(loss), abs(gain), math.sqrt(abs(coupling_sq)), abs(params.Delta))
    balanced = abs(total) <= BALANCE_TOL * rate_scale
    discriminant = -(total**2) + 4.0 * (coupling_sq + loss * gain)
    scale_sq = max(total**2, 4.0 * abs(coupling_sq), 4.0 * abs(loss * gain), _TINY)
    return EigenPair(plus, minus, _classify(balanced, discriminant, scale_sq))


def eigenvalues_numeric(H):
    """Roots of the characteristic polynomial of a 2x2 matrix.

    The discriminant is formed as (h11 - h22)² + 4·h12·h21, which does not
    cancel the way tr² - 4·det does. When the smaller root is much smaller
    than the larger one it comes from det/q instead of a difference of
    nearly equal numbers.
    """
    trace = H.trace
    split = H.h11 - H.h22
    discriminant = split * split + 4.0 * H.h12 * H.h21
    root = cmath.sqrt(discriminant)
    # pick the sign that makes |q| large
    if (trace.conjugate() * root).real < 0:
        root = -root
    q = (trace + root) / 2.0
    rest = (trace - root) / 2.0
    if abs(rest) < 0.5 * abs(q):
        rest = H.determinant / q
    plus, minus = _ordered(q, rest)

    scale = max(abs(H.h11), abs(H.h12), abs(H.h21), abs(H.h22), _TINY)
    balanced = abs(trace) <= BALANCE_TOL * scale
    if not balanced:
        phase = PTPhase.NON_BALANCED
    elif abs(discriminant) < EP_TOL * 4.0 * scale * scale:
        phase = PTPhase.EXCEPTIONAL_POINT
    elif _pt_invariant(plus, minus, scale) and abs(plus.imag) <= BALANCE_TOL * scale:
        phase = PTPhase.PT_SYMMETRIC
    else:
        phase = PTPhase.PT_BROKEN
    return EigenPair(plus, minus, phase)


def _pt_invariant(plus, minus, scale):
    """Whether the spectrum is mapped onto itself by λ -> -conj(λ)."""
    tol = 1e-8 * scale
    return abs(plus + minus.conjugate()) <= tol or (
        abs(plus + plus.conjugate()) <= tol and abs(minus + minus.conjugate()) <= tol
    )


def sweep_coupling(config, beta_grid, threads=None):
    """Eigenvalues along a grid of coupling strengths.

    Each β is realised by setting δ = β/|ω1| in a copy of ``config``. The
    grid is sorted ascending before evaluation; rows come back in that
    order.
    """
    grid = np.asarray(beta_grid, dtype=float).ravel()
    if grid.size == 0:
        raise EmptyGrid("beta grid is empty")
    if not np.all(np.isfinite(grid)) or np.any(grid < 0):
        raise OutOfRange("beta_grid", "coupling strengths must be finite and >= 0")
    if np.any(np.diff(grid) < 0):
        logger.info("beta grid is not ascending; sorting %d points", grid.size)
        grid = np.sort(grid)

    omega_1 = abs(derive_parameters(dataclasses.replace(config, delta=0.0)).omega_1)
    if omega_1 == 0 and grid[-1] > 0:
        raise DegenerateTrap("omega_x == omega_y: no delta produces a nonzero beta")

    def evaluate(beta):
        delta = beta / omega_1 if beta else 0.0
        params = derive_parameters(dataclasses.replace(config, delta=delta))
        return SweepRow(
            beta=float(beta),
            closed_form=eigenvalues_closed_form(params),
            numeric=eigenvalues_numeric(build_hamiltonian(params)),
        )

    table = SweepTable(parallel_map(evaluate, grid, threads))
    logger.info(
        "swept %d couplings in [%g, %g]; max closed/numeric deviation %.3g",
        len(table),
        grid[0],
        grid[-1],
        table.max_deviation,
    )
    return table


def _split_sq(pair):
    return ((pair.lambda_plus - pair.lambda_minus) ** 2).real


def exceptional_point(table) -> Optional[float]:
    """β of the exceptional point along a sweep, or None.

    A row classified as the exceptional point is returned as is. Otherwise
    the first change between the broken and the symmetric phase is located
    by interpolating (λ+ - λ-)², which is affine in β², between the two
    bracketing rows.
    """
    rows = list(table)
    for row in rows:
        if row.phase is PTPhase.EXCEPTIONAL_POINT:
            return row.beta
    crossing = {PTPhase.PT_BROKEN, PTPhase.PT_SYMMETRIC}
    for left, right in zip(rows, rows[1:]):
        if {left.phase, right.phase} != crossing:
            continue
        d_left, d_right = _split_sq(left.closed_form), _split_sq(right.closed_form)
        if d_left == d_right:
            return left.beta
        fraction = d_left / (d_left - d_right)
        return math.sqrt(left.beta**2 + fraction * (right.beta**2 - left.beta**2))
    return None

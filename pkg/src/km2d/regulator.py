"""Heat-kernel sums, finite-part extraction and regularized multiplicities.

The divergent mode sums that multiply the central terms are damped by a
regulator eps and assigned their Laurent finite part at eps -> 0.  For the
lattice sums appearing here this is the Hurwitz value zeta(0, a) = 1/2 - a,
so every supported angular multiplicity regularizes to exactly 1:

    NS:  2 * sum_{k>=0} e^{-2 eps k}            ->  2 zeta(0, 0)      = 1
    R:   2 * sum_{k>=0} e^{-2 eps (k - 1/2)} - 1 ->  2 zeta(0,-1/2) - 1 = 1

On the sphere the degree sums carry a free constant a_m in the damped basis
functions; a_m is fixed by a one-dimensional linear solve so that the finite
part of the degree sum is 1 as well.  The analogous half-integer-basis sum
diverges logarithmically and its finite part cannot be tuned by a_m; asking
for it raises :class:`UnresolvedPrescriptionError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .harmonics import legendre_Q

__all__ = [
    "HeatSum",
    "UnresolvedPrescriptionError",
    "hurwitz_zeta_at_zero",
    "heat_sum_finite_part",
    "heat_sum_numeric",
    "richardson_finite_part",
    "torus_delta_eps",
    "delta_eps_pairing",
    "delta_reg_zero",
    "solve_a_m",
    "sphere_degree_sum",
    "sphere_degree_sum_model",
]


class UnresolvedPrescriptionError(Exception):
    """No finite-part prescription exists for the requested descriptor."""


def hurwitz_zeta_at_zero(a: float) -> float:
    """Analytic continuation value zeta(0, a) = 1/2 - a."""
    return 0.5 - a


@dataclass(frozen=True)
class HeatSum:
    """The damped lattice sum sum_{k>=0} exp(-2 eps (k*step + offset))."""

    step: int
    offset: float

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")


def heat_sum_finite_part(s: HeatSum) -> tuple:
    """(pole coefficient, finite part) of the Laurent expansion at eps -> 0.

    From the closed geometric form: the pole is 1/(2*step) (coefficient of
    1/eps) and the finite part is zeta(0, offset/step).
    """
    return 1.0 / (2 * s.step), hurwitz_zeta_at_zero(s.offset / s.step)


def heat_sum_numeric(s: HeatSum, eps: float, cutoff: int | None = None) -> float:
    """Truncated evaluation of the damped sum at fixed eps > 0."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if cutoff is None:
        cutoff = int(math.ceil(22.0 / (eps * s.step))) + 1
    k = np.arange(cutoff)
    return float(np.exp(-2.0 * eps * (k * s.step + s.offset)).sum())


def _neville_at_zero(xs, ys) -> float:
    tab = [float(y) for y in ys]
    n = len(tab)
    for k in range(1, n):
        for i in range(n - k):
            tab[i] = ((xs[i + k] * tab[i] - xs[i] * tab[i + 1])
                      / (xs[i + k] - xs[i]))
    return tab[0]


def richardson_finite_part(fn: Callable[[float], float], eps0: float = 0.1,
                           levels: int = 8) -> tuple:
    """Extrapolated (pole coefficient, finite part) of fn(eps) ~ A/eps + B.

    Samples at eps0 / 2^k; first extrapolates g(eps) = eps * fn(eps) to get
    the pole, then the pole-subtracted values for the finite part.
    """
    xs = [eps0 / 2 ** k for k in range(levels)]
    vals = [fn(x) for x in xs]
    pole = _neville_at_zero(xs, [x * v for x, v in zip(xs, vals)])
    finite = _neville_at_zero(xs, [v - pole / x for x, v in zip(xs, vals)])
    return pole, finite


# ---------------------------------------------------------------------------
# Torus delta function
# ---------------------------------------------------------------------------

def torus_delta_eps(theta: float, eps: float, sector: str) -> float:
    """Closed form of sum_m e^{-i m theta} e^{-2 eps (|m|-1/2)} on the lattice."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    z = complex(math.cos(theta), -math.sin(theta)) * math.exp(-2.0 * eps)
    if sector == "NS":
        # m = +-(k + 1/2), k >= 0
        half = complex(math.cos(theta / 2), -math.sin(theta / 2))
        return 2.0 * (half / (1.0 - z)).real
    if sector == "R":
        return math.exp(eps) * (1.0 + 2.0 * (z / (1.0 - z)).real)
    raise ValueError(f"unknown sector {sector!r}")


def delta_eps_pairing(n, eps: float, sector: str, grid: int = 4096) -> float:
    """(1/2pi) int_0^{2pi} delta_eps(theta) e^{i n theta} dtheta.

    Evaluated by the uniform-grid rule, which is exact for lattice Fourier
    modes up to aliasing of order exp(-2 eps grid).
    """
    theta = np.linspace(0.0, 2.0 * math.pi, grid, endpoint=False)
    dvals = np.array([torus_delta_eps(t, eps, sector) for t in theta])
    phase = np.exp(1j * float(n) * theta)
    return float((dvals * phase).mean().real)


# ---------------------------------------------------------------------------
# Regularized multiplicities
# ---------------------------------------------------------------------------

def solve_a_m(m: int) -> float:
    """Damping offset making the sphere degree-sum finite part equal 1.

    The divergent part of the degree sum is (4/pi) * sum_j e^{-2 eps (2j +
    2|m| + a_m)}; its finite part is affine in a_m, so the defining condition
    is a one-dimensional linear equation with a unique solution.
    """
    base = 2 * abs(int(m))

    def fp(a):
        return (4.0 / math.pi) * heat_sum_finite_part(HeatSum(2, base + a))[1]

    f0, f1 = fp(0.0), fp(1.0)
    return (1.0 - f0) / (f1 - f0)


def delta_reg_zero(geometry: str, sector: str, m: int = 0) -> float:
    """Regularized coincident-point multiplicity; 1 for every supported case."""
    if geometry == "torus":
        if sector == "NS":
            return 2.0 * heat_sum_finite_part(HeatSum(1, 0.0))[1]
        if sector == "R":
            # m = 0 term tends to 1; the rest pairs into offset-1/2 sums
            return 1.0 + 2.0 * heat_sum_finite_part(HeatSum(1, 0.5))[1]
        raise ValueError(f"unknown sector {sector!r}")
    if geometry == "sphere":
        if sector == "R":
            a_m = solve_a_m(m)
            return (4.0 / math.pi) * heat_sum_finite_part(
                HeatSum(2, 2 * abs(int(m)) + a_m))[1]
        if sector == "NS":
            raise UnresolvedPrescriptionError(
                "sphere NS degree sums diverge logarithmically; their finite "
                "part cannot be normalized by the damping offset")
        raise ValueError(f"unknown sector {sector!r}")
    raise ValueError(f"unknown geometry {geometry!r}")


# ---------------------------------------------------------------------------
# Sphere degree-sum diagnostics
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _legendre_at_zero_sq(l: int, m: int) -> float:
    return legendre_Q(l, m, 0.0) ** 2


def sphere_degree_sum(m: int, eps: float, l_max: int,
                      a_m: float | None = None) -> float:
    """Partial sum over l <= l_max of the damped squared basis values at u=0.

    The damped function at the equator factorizes exactly as
    e^{-eps(l + m + a_m)} Q_{lm}(0), so only undamped values are tabulated.
    """
    if a_m is None:
        a_m = solve_a_m(m)
    m = int(m)
    total = 0.0
    for l in range(abs(m), l_max + 1):
        q2 = _legendre_at_zero_sq(l, m)
        if q2:
            total += q2 * math.exp(-2.0 * eps * (l + m + a_m))
    return total


def sphere_degree_sum_model(m: int, eps: float, a_m: float | None = None) -> float:
    """Large-degree model of the damped sum, up to the constant offset C_m:
    (4/pi) e^{-2 eps (2|m| + a_m)} / (1 - e^{-4 eps})."""
    if a_m is None:
        a_m = solve_a_m(m)
    return (4.0 / math.pi) * math.exp(-2.0 * eps * (2 * abs(int(m)) + a_m)) \
        / (1.0 - math.exp(-4.0 * eps))

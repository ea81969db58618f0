"""Orthonormal function bases on [-1, 1] and their product structure.

Everything here uses the inner product (f, g) = (1/2) * integral_{-1}^{1} f g du.

Two families:

* ``legendre_Q(l, m, u)``: normalized associated Legendre functions, integer
  indices l >= |m|.  Orthonormal within fixed m; Q_{l,-m} = (-1)^m Q_{lm}.
* ``jacobi_Q(l, m, eta, u)``: weighted Jacobi polynomials with half-integer
  l, m and a branch label eta = +-1, orthonormal within each (m, eta) family.

The product of two Legendre-family elements expands exactly in the family of
the summed azimuthal index; the expansion coefficients form the
:class:`StructureTable` that drives the sphere mode algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import eval_jacobi, roots_jacobi

from .halfints import fmt_half, to_doubled

__all__ = [
    "legendre_Q",
    "legendre_Q_reference",
    "jacobi_Q",
    "quadrature",
    "StructureTable",
    "structure_table",
    "delta_partial_residual",
    "triple_product_ns",
]


# ---------------------------------------------------------------------------
# Gauss-Legendre quadrature
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def quadrature(n: int):
    """Gauss-Legendre nodes and weights on [-1, 1], exact to degree 2n-1."""
    if n < 1:
        raise ValueError("need at least one node")
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _nodes_for_degree(deg: int):
    return quadrature(deg // 2 + 1)


# ---------------------------------------------------------------------------
# Normalized associated Legendre functions
# ---------------------------------------------------------------------------

def legendre_Q(l: int, m: int, u):
    """Normalized associated Legendre function, (1/2)int Q_{lm}Q_{l'm} = d_{ll'}.

    Evaluated by the stable three-term recurrence in l; supports scalar or
    ndarray u.  Negative m via Q_{l,-m} = (-1)^m Q_{lm}.
    """
    l, m = int(l), int(m)
    if l < abs(m):
        raise ValueError(f"need l >= |m|, got l={l}, m={m}")
    sign = 1
    if m < 0:
        m = -m
        sign = -1 if m % 2 else 1
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    u = np.atleast_1d(u)

    # diagonal start Q_mm, then upward recurrence
    qmm = np.ones_like(u)
    if m > 0:
        ratio = 1.0
        for k in range(1, m + 1):
            ratio *= (2 * k - 1) / (2 * k)
        qmm = ((-1) ** m) * math.sqrt((2 * m + 1) * ratio) * (1 - u * u) ** (m / 2)
    if l == m:
        out = qmm
    else:
        prev, cur = np.zeros_like(u), qmm
        for ll in range(m, l):
            a = math.sqrt((2 * ll + 1) * (2 * ll + 3)
                          / ((ll + 1 - m) * (ll + 1 + m)))
            b = 0.0
            if ll > m:
                b = math.sqrt((2 * ll + 3) / (2 * ll - 1)
                              * (ll - m) * (ll + m)
                              / ((ll + 1 - m) * (ll + 1 + m)))
            prev, cur = cur, a * u * cur - b * prev
        out = cur
    out = sign * out
    return float(out[0]) if scalar else out


def legendre_Q_reference(l: int, m: int, u: float) -> float:
    """Direct Rodrigues-formula evaluation with exact rational coefficients.

    Independent of the recurrence path; intended as an oracle for l up to ~20
    where raw differentiation is still well conditioned.
    """
    l, m = int(l), int(m)
    if l < abs(m):
        raise ValueError(f"need l >= |m|, got l={l}, m={m}")
    sign = 1
    if m < 0:
        m = -m
        sign = -1 if m % 2 else 1
    # d^{l+m}/du^{l+m} (1-u^2)^l, exact polynomial coefficients
    coeffs = {2 * k: Fraction(math.comb(l, k) * (-1) ** k) for k in range(l + 1)}
    for _ in range(l + m):
        coeffs = {p - 1: c * p for p, c in coeffs.items() if p > 0}
    poly = sum(float(c) * u ** p for p, c in coeffs.items())
    norm = (math.sqrt(2 * l + 1)
            * math.sqrt(math.factorial(l - m) / math.factorial(l + m))
            / (2 ** l * math.factorial(l)))
    return sign * ((-1) ** (l + m)) * norm * (1 - u * u) ** (m / 2) * poly


# ---------------------------------------------------------------------------
# Half-integer (NS) basis functions
# ---------------------------------------------------------------------------

def _ns_indices(l, m, eta):
    l2, m2 = to_doubled(l), to_doubled(m)
    if eta not in (1, -1):
        raise ValueError(f"eta must be +-1, got {eta}")
    if l2 % 2 == 0 or m2 % 2 == 0:
        raise ValueError("NS indices must be half-odd-integers")
    if l2 < abs(m2):
        raise ValueError(f"need l >= |m|, got l={fmt_half(l2)}, m={fmt_half(m2)}")
    n = (l2 - abs(m2)) // 2          # l - |m|, a nonnegative integer
    a = abs(m2 - eta) // 2           # |m - eta/2|
    b = abs(m2 + eta) // 2           # |m + eta/2|
    return n, a, b


@lru_cache(maxsize=None)
def _jacobi_norm(n: int, a: int, b: int) -> float:
    # (1/2)int (1-u)^a (1+u)^b P_n^{(a,b)}^2 du = h/2, orthonormal factor sqrt(2/h)
    h = (Fraction(2 ** (a + b + 1), 2 * n + a + b + 1)
         * Fraction(math.factorial(n + a) * math.factorial(n + b),
                    math.factorial(n + a + b) * math.factorial(n)))
    return math.sqrt(2 / h)


def jacobi_Q(l, m, eta: int, u):
    """Orthonormal NS basis function with half-integer indices l >= |m|.

    Symmetric under (m, eta) -> (-m, -eta).  Evaluate on the open interval;
    endpoint weights vanish or stay bounded but carry no lattice meaning.
    """
    n, a, b = _ns_indices(l, m, eta)
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    val = (_jacobi_norm(n, a, b)
           * (1 - u) ** (a / 2) * (1 + u) ** (b / 2)
           * eval_jacobi(n, a, b, u))
    return float(val[0]) if scalar else val


# ---------------------------------------------------------------------------
# Structure constants of the Legendre-family product expansion
# ---------------------------------------------------------------------------

@dataclass
class StructureTable:
    """Coefficients c of Q_{l1 m1} Q_{l2 m2} = sum_{l3} c * Q_{l3, m1+m2}.

    Entries are keyed by (l1, m1, l2, m2, l3); the target azimuthal index is
    always m1 + m2.  Only the triangle-and-parity-allowed entries are stored.
    """

    L_max: int
    entries: dict

    def get(self, l1: int, m1: int, l2: int, m2: int, l3: int) -> float:
        return self.entries.get((l1, m1, l2, m2, l3), 0.0)

    def target_degrees(self, l1: int, l2: int, m3: int):
        lo = max(abs(l1 - l2), abs(m3))
        hi = min(l1 + l2, self.L_max)
        return [l3 for l3 in range(lo, hi + 1) if (l1 + l2 + l3) % 2 == 0]

    def covers(self, l: int) -> bool:
        return l <= self.L_max

    def to_csv(self, fh) -> None:
        fh.write("l1,m1,l2,m2,l3,m3,value\n")
        for key in sorted(self.entries):
            l1, m1, l2, m2, l3 = key
            fh.write(f"{l1},{m1},{l2},{m2},{l3},{m1 + m2},"
                     f"{self.entries[key]:.17g}\n")


@lru_cache(maxsize=8)
def structure_table(L_max: int) -> StructureTable:
    """Triple-product table for all l1, l2, l3 <= L_max by exact quadrature."""
    if L_max < 0:
        raise ValueError("L_max must be nonnegative")
    nodes, weights = _nodes_for_degree(3 * L_max)
    # pretabulate Q_{lm}(nodes) for every l <= L_max, |m| <= l
    qtab = {}
    for l in range(L_max + 1):
        for m in range(-l, l + 1):
            qtab[(l, m)] = legendre_Q(l, m, nodes)
    entries = {}
    for l1 in range(L_max + 1):
        for m1 in range(-l1, l1 + 1):
            for l2 in range(L_max + 1):
                for m2 in range(-l2, l2 + 1):
                    m3 = m1 + m2
                    prod = qtab[(l1, m1)] * qtab[(l2, m2)] * weights
                    lo = max(abs(l1 - l2), abs(m3))
                    for l3 in range(lo, min(l1 + l2, L_max) + 1):
                        if (l1 + l2 + l3) % 2:
                            continue
                        val = 0.5 * float(np.dot(prod, qtab[(l3, m3)]))
                        entries[(l1, m1, l2, m2, l3)] = val
    return StructureTable(L_max=L_max, entries=entries)


def delta_partial_residual(m: int, test_fn_degree: int, L_max: int) -> float:
    """Worst-case error of the truncated reproducing kernel on a basis element.

    The kernel K(u, v) = sum_{l <= L_max} Q_{lm}(u) Q_{lm}(v) must reproduce
    Q_{l'm} exactly for l' <= L_max; returns the max deviation over nodes u.
    """
    lp = test_fn_degree
    if lp > L_max:
        raise ValueError(f"test degree {lp} exceeds kernel cutoff {L_max}")
    if lp < abs(m):
        raise ValueError(f"need test degree >= |m| = {abs(m)}")
    nodes, weights = _nodes_for_degree(2 * L_max + lp)
    target = legendre_Q(lp, m, nodes)
    acc = np.zeros_like(nodes)
    for l in range(abs(m), L_max + 1):
        ql = legendre_Q(l, m, nodes)
        proj = 0.5 * float(np.dot(weights, ql * target))
        acc += ql * proj
    return float(np.max(np.abs(acc - target)))


@lru_cache(maxsize=64)
def _jacobi_rule(n: int, alpha: float, beta: float):
    x, w = roots_jacobi(n, alpha, beta)
    return x, w


@lru_cache(maxsize=None)
def triple_product_ns(l1, m1, eta1, l2, m2, eta2, l: int, m: int) -> float:
    """(1/2)int jacobi_Q(l1,m1,eta1) jacobi_Q(l2,m2,eta2) Q_{lm} du.

    The integrand is a polynomial times (1-u)^E1 (1+u)^E2 with E1, E2
    integer or half-odd; splitting off the fractional part as a Gauss-Jacobi
    weight makes the rule exact.
    """
    n1, a1, b1 = _ns_indices(l1, m1, eta1)
    n2, a2, b2 = _ns_indices(l2, m2, eta2)
    # twice the total weight exponents on (1-u) and (1+u)
    e1_2 = a1 + a2 + abs(m)
    e2_2 = b1 + b2 + abs(m)
    alpha = 0.5 * (e1_2 % 2)
    beta = 0.5 * (e2_2 % 2)
    deg = n1 + n2 + (l - abs(m)) + e1_2 // 2 + e2_2 // 2
    nodes, weights = _jacobi_rule(deg // 2 + 2, alpha, beta)
    f = (jacobi_Q(l1, m1, eta1, nodes) * jacobi_Q(l2, m2, eta2, nodes)
         * legendre_Q(l, m, nodes))
    f = f / ((1.0 - nodes) ** alpha * (1.0 + nodes) ** beta)
    return 0.5 * float(np.dot(weights, f))

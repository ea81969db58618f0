"""Certification of the mode algebras on truncated Fock spaces.

Operator parts of brackets are checked exactly on *safe windows*: probe
states far enough below the mode cutoffs that every contributing lattice
term of the commutator survives truncation.  Central terms are never read
from raw truncated commutators (their coincident-point multiplicity grows
with the angular cutoff); they come from the regulated pipeline:

    central = (one-dimensional mode anomaly, computed exactly on a
               degenerate single-angular-mode sector)
            * (regularized multiplicity, which is 1)
            * (on the sphere, the overlap of the two degree labels,
               which is (-1)^m delta_{l1 l2})

The raw divergence remains available as a documented diagnostic.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .currents import sphere_L, sphere_T, torus_L, torus_T
from .fock import (FockState, ModeOperator, SectorConfig,
                   enumerate_states, render_state, torus_sector,
                   vacuum_states)
from .halfints import fmt_half, to_doubled
from .harmonics import StructureTable, legendre_Q, quadrature
from .lie_core import LieAlgebraRep
from .regulator import delta_reg_zero, richardson_finite_part
from .scalars import SqrtTwoScalar, to_complex

__all__ = [
    "Window",
    "WindowViolationError",
    "BracketResult",
    "CommutatorReport",
    "probe_states",
    "commutator_on_window",
    "measure_central",
    "measure_virasoro_shape",
    "central_raw_scan",
    "check_torus_algebra",
    "check_sphere_realization",
    "check_sphere_abstract",
]


class WindowViolationError(Exception):
    """Probe states and operator modes do not satisfy the exactness bound."""


@dataclass(frozen=True)
class Window:
    """Probe-state generating rule (all bounds doubled internally).

    w_z2: max doubled z-level; w_a2: max doubled |angular charge| and
    per-mode angular bound (torus) or doubled per-mode degree bound
    (sphere); n_max: max particle number.
    """

    w_z2: int
    w_a2: int
    n_max: int
    sigmas: Optional[tuple] = None

    @staticmethod
    def of(w_z, w_a, n, sigmas=None) -> "Window":
        from .halfints import to_doubled
        return Window(to_doubled(w_z), to_doubled(w_a), int(n), sigmas)

    def describe(self) -> str:
        return f"(z<={fmt_half(self.w_z2)}, a<={fmt_half(self.w_a2)}, N<={self.n_max})"


def _window_sigmas(cfg: SectorConfig, window: Window):
    if window.sigmas is not None:
        return window.sigmas
    dim = cfg.spinor_dim()
    return tuple(range(dim)) if dim <= 4 else (0, dim - 1)


def probe_states(cfg: SectorConfig, window: Window) -> list:
    """Probe states of the window, in deterministic order."""
    sigmas = _window_sigmas(cfg, window)
    if cfg.geometry == "torus":
        return enumerate_states(cfg, max_z2=window.w_z2,
                                max_particles=window.n_max,
                                max_charge2=window.w_a2,
                                per_mode_k2=window.w_a2, sigmas=sigmas)
    return enumerate_states(cfg, max_z2=window.w_z2,
                            max_particles=window.n_max,
                            per_mode_l2=window.w_a2, sigmas=sigmas)


# ---------------------------------------------------------------------------
# Geometry adapters: operator construction and expected bracket structure
# ---------------------------------------------------------------------------

class TorusAlgebra:
    """Builds torus generators and the expected right-hand sides."""

    def __init__(self, cfg: SectorConfig, rep: LieAlgebraRep, eps: float = 0.0):
        self.cfg = cfg
        self.rep = rep
        self.eps = eps
        self._ops: dict = {}

    def op(self, kind: str, a, mode) -> ModeOperator:
        key = (kind, a, mode)
        if key not in self._ops:
            m, p = mode
            if kind == "T":
                o = torus_T(self.rep, a, m, p, self.cfg, self.eps)
            else:
                o = torus_L(m, p, self.cfg, self.eps)
            o._build_groups()
            self._ops[key] = o
        return self._ops[key]

    def rhs_terms(self, family: str, a, b, mode1, mode2):
        """[(scale, kind, generator index, mode), ...] of the expected RHS."""
        msum = (mode1[0] + mode2[0], mode1[1] + mode2[1])
        if family == "TT":
            out = []
            for c in range(1, self.rep.dim_g + 1):
                fabc = int(self.rep.f[a - 1, b - 1, c - 1])
                if fabc:
                    out.append((complex(0.0, fabc), "T", c, msum))
            return out
        if family == "LL":
            coeff = mode1[0] - mode2[0]
            return [(coeff, "L", None, msum)] if coeff else []
        if family == "LT":
            coeff = -mode2[0]           # minus the z-mode of the current
            return [(coeff, "T", a, msum)] if coeff else []
        raise ValueError(f"unknown family {family!r}")

    def zero_total(self, mode1, mode2) -> bool:
        return mode1[0] + mode2[0] == 0 and mode1[1] + mode2[1] == 0

    def central_expected(self, family: str, a, b, mode1, mode2) -> float:
        if not self.zero_total(mode1, mode2):
            return 0.0
        m = mode1[0]
        if family == "TT":
            return 0.5 * self.rep.C_M * m if a == b else 0.0
        if family == "LL":
            c = self.cfg.d / 2.0
            return (c / 12.0) * m * (m * m - 1)
        return 0.0

    def guard(self, window: Window, probes, mode1, mode2) -> None:
        """Exactness conditions for the bracket on this window.

        Every comparison state must keep all its modes inside the interior
        margin (one operator strength below each cutoff): there every
        contraction route of the commutator survives truncation, so the
        matrix elements are those of the untruncated algebra.
        """
        cfg = self.cfg
        mA2, pA2 = 2 * abs(mode1[0]), 2 * abs(mode1[1])
        mB2, pB2 = 2 * abs(mode2[0]), 2 * abs(mode2[1])
        max_k1 = max((m.k1 for s in probes for m in s.occ), default=0)
        max_k2 = max((abs(m.k2) for s in probes for m in s.occ), default=0)
        if max_k1 + mA2 + mB2 > cfg.m2_cut:
            raise WindowViolationError(
                f"z reach {fmt_half(max_k1 + mA2 + mB2)} exceeds cutoff "
                f"{fmt_half(cfg.m2_cut)}")
        if max_k2 + pA2 + pB2 > cfg.p2_cut:
            raise WindowViolationError(
                f"angular reach {fmt_half(max_k2 + pA2 + pB2)} exceeds cutoff "
                f"{fmt_half(cfg.p2_cut)}")
        margin_z, margin_a = self.compare_bounds(window, mode1, mode2)
        if max_k1 > margin_z or max_k2 > margin_a:
            raise WindowViolationError(
                "probe states extend past the truncation-exact margin")

    def compare_bounds(self, window: Window, mode1, mode2):
        """Per-mode interior margins of the truncation-exact region."""
        margin_z = self.cfg.m2_cut - 2 * max(abs(mode1[0]), abs(mode2[0]))
        margin_a = self.cfg.p2_cut - 2 * max(abs(mode1[1]), abs(mode2[1]))
        return margin_z, margin_a

    def in_bounds(self, state: FockState, margins) -> bool:
        margin_z, margin_a = margins
        return all(m.k1 <= margin_z and abs(m.k2) <= margin_a
                   for m in state.occ)

    def mode_label(self, kind, a, mode) -> str:
        tag = f"T{a}" if kind == "T" else "L"
        return f"{tag}[{mode[0]},{mode[1]}]"


class SphereAlgebra:
    """Builds sphere generators and table-contracted right-hand sides."""

    def __init__(self, cfg: SectorConfig, rep: LieAlgebraRep,
                 table: StructureTable):
        self.cfg = cfg
        self.rep = rep
        self.table = table
        self._ops: dict = {}

    def op(self, kind: str, a, mode) -> ModeOperator:
        key = (kind, a, mode)
        if key not in self._ops:
            l, m = mode
            if kind == "T":
                o = sphere_T(self.rep, a, l, m, self.cfg, self.table)
            else:
                o = sphere_L(l, m, self.cfg, self.table)
            o._build_groups()
            self._ops[key] = o
        return self._ops[key]

    def rhs_terms(self, family: str, a, b, mode1, mode2):
        l1, m1 = mode1
        l2, m2 = mode2
        msum = m1 + m2
        out = []
        for l3 in self.table.target_degrees(l1, l2, msum):
            c = self.table.get(l1, m1, l2, m2, l3)
            if abs(c) < 1e-15:
                continue
            if family == "TT":
                for cc in range(1, self.rep.dim_g + 1):
                    fabc = int(self.rep.f[a - 1, b - 1, cc - 1])
                    if fabc:
                        out.append((complex(0.0, fabc * c), "T", cc, (l3, msum)))
            elif family == "LL":
                if m1 != m2:
                    out.append(((m1 - m2) * c, "L", None, (l3, msum)))
            elif family == "LT":
                if m2 != 0:
                    out.append((-m2 * c, "T", a, (l3, msum)))
            else:
                raise ValueError(f"unknown family {family!r}")
        return out

    def zero_total(self, mode1, mode2) -> bool:
        return mode1[1] + mode2[1] == 0

    def central_expected(self, family: str, a, b, mode1, mode2) -> float:
        if not self.zero_total(mode1, mode2):
            return 0.0
        l1, m1 = mode1
        l2, _ = mode2
        if l1 != l2:
            return 0.0
        sign = -1.0 if m1 % 2 else 1.0
        if family == "TT":
            return sign * 0.5 * self.rep.C_M * m1 if a == b else 0.0
        if family == "LL":
            c = self.cfg.d / 2.0
            return sign * (c / 12.0) * m1 * (m1 * m1 - 1)
        return 0.0

    def guard(self, window: Window, probes, mode1, mode2) -> None:
        lA2, lB2 = 2 * mode1[0], 2 * mode2[0]
        max_l = max((m.k1 for s in probes for m in s.occ), default=0)
        if max_l + lA2 + lB2 > self.cfg.l2_cut:
            raise WindowViolationError(
                f"degree reach {fmt_half(max_l + lA2 + lB2)} exceeds cutoff "
                f"{fmt_half(self.cfg.l2_cut)}")
        if self.table.L_max < (lA2 + lB2) // 2:
            raise WindowViolationError(
                f"structure table degree {self.table.L_max} below bracket "
                f"target {(lA2 + lB2) // 2}")
        margin_z, margin_l = self.compare_bounds(window, mode1, mode2)
        if max_l > margin_l:
            raise WindowViolationError(
                "probe states extend past the truncation-exact margin")

    def compare_bounds(self, window: Window, mode1, mode2):
        margin_l = self.cfg.l2_cut - 2 * max(mode1[0], mode2[0])
        return margin_l, margin_l

    def in_bounds(self, state: FockState, margins) -> bool:
        _, margin_l = margins
        return all(m.k1 <= margin_l for m in state.occ)

    def mode_label(self, kind, a, mode) -> str:
        tag = f"T{a}" if kind == "T" else "L"
        return f"{tag}[l={mode[0]},m={mode[1]}]"


# ---------------------------------------------------------------------------
# Central-term measurements
# ---------------------------------------------------------------------------

def _vacuum_sandwich(A: ModeOperator, B: ModeOperator, rhs: Optional[ModeOperator],
                     cfg: SectorConfig, check_sigmas: bool = True):
    """<0| [A, B] - rhs |0>, exact on the truncated space, per vacuum label."""
    vals = []
    vacs = vacuum_states(cfg)
    sample = vacs if (check_sigmas and len(vacs) <= 4) else vacs[:1]
    for vac in sample:
        xB = B.apply_state(vac)
        xA = A.apply_state(vac)
        t1 = A.apply(xB, z2_bound=0).get(vac, 0)
        t2 = B.apply(xA, z2_bound=0).get(vac, 0)
        r = rhs.apply_state(vac, z2_bound=0).get(vac, 0) if rhs is not None else 0
        vals.append(to_complex(t1) - to_complex(t2) - to_complex(r))
    spread = max(abs(v - vals[0]) for v in vals)
    if spread > 1e-10:
        raise AssertionError(f"central value varies across the vacuum "
                             f"multiplet by {spread:.3e}")
    if abs(vals[0].imag) > 1e-10:
        raise AssertionError(f"central value has imaginary part {vals[0]:.3e}")
    return vals[0].real


def _one_dim_reduction(z_sector: str, d: int, m: int) -> SectorConfig:
    """Single-angular-mode sector isolating the z-direction anomaly."""
    m2 = 2 * abs(int(m))
    m2_cut = m2 + (1 if z_sector == "NS" else 2)
    return torus_sector(z_sector, "R", d, Fraction(m2_cut, 2), 0)


def _anomaly_1d(z_sector: str, rep: LieAlgebraRep, family: str, a: int, b: int,
                m: int) -> float:
    """Exact z-direction anomaly of [X_m, X_-m] on the reduced sector.

    Runs in exact (Gaussian rational over sqrt2) arithmetic, so the returned
    anomaly values are exact dyadic rationals.
    """
    cfg1 = _one_dim_reduction(z_sector, rep.d, m)
    if family == "TT":
        A = torus_T(rep, a, m, 0, cfg1, exact=True)
        B = torus_T(rep, b, -m, 0, cfg1, exact=True)
        rhs = None
        for c in range(1, rep.dim_g + 1):
            fabc = int(rep.f[a - 1, b - 1, c - 1])
            if fabc:
                piece = torus_T(rep, c, 0, 0, cfg1, exact=True).scaled(
                    SqrtTwoScalar(ia=Fraction(fabc)))
                rhs = piece if rhs is None else rhs + piece
    elif family == "LL":
        A = torus_L(m, 0, cfg1, exact=True)
        B = torus_L(-m, 0, cfg1, exact=True)
        rhs = torus_L(0, 0, cfg1, exact=True).scaled(2 * m) if m else None
    else:
        raise ValueError("central terms exist for TT and LL only")
    return _vacuum_sandwich(A, B, rhs, cfg1)


def _legendre_overlap(l1: int, l2: int, m: int) -> float:
    """(1/2) int Q_{l1 m} Q_{l2 -m} du = (-1)^m delta_{l1 l2}, by quadrature."""
    nodes, weights = quadrature((l1 + l2) // 2 + 1)
    vals = legendre_Q(l1, m, nodes) * legendre_Q(l2, -m, nodes)
    return 0.5 * float(np.dot(weights, vals))


def measure_central(family: str, m: int, *, rep: LieAlgebraRep,
                    cfg: SectorConfig, a: int = 1, b: Optional[int] = None,
                    p: int = 0, degrees: Optional[tuple] = None,
                    method: str = "analytic", table: Optional[StructureTable] = None,
                    eps0: float = 0.1, levels: int = 5) -> float:
    """Regulated (or raw) central value of <0|[X_{m,.}, X_{-m,.}]|0>.

    family "TT" or "LL"; on the sphere, degrees = (l1, l2) gives the two
    degree labels.  Methods: "analytic" (exact z anomaly times regularized
    multiplicity), "eps_extrapolated" (damped sums plus finite part, torus
    only), "raw" (truncated value, diverges with the angular cutoff).
    """
    if b is None:
        b = a
    if method == "analytic":
        anomaly = _anomaly_1d(cfg.z_sector, rep, family, a, b, m)
        if cfg.geometry == "torus":
            return anomaly * delta_reg_zero("torus", cfg.angular_sector)
        mult = delta_reg_zero("sphere", cfg.z_sector, m)
        l1, l2 = degrees
        return anomaly * _legendre_overlap(l1, l2, m) * mult
    if method == "raw":
        alg = (TorusAlgebra(cfg, rep) if cfg.geometry == "torus"
               else SphereAlgebra(cfg, rep, table))
        if cfg.geometry == "torus":
            mode1, mode2 = (m, p), (-m, -p)
        else:
            l1, l2 = degrees
            mode1, mode2 = (l1, m), (l2, -m)
        kind = "T" if family == "TT" else "L"
        A = alg.op(kind, a if kind == "T" else None, mode1)
        B = alg.op(kind, b if kind == "T" else None, mode2)
        rhs = _assemble_rhs(alg, family, a, b, mode1, mode2)
        return _vacuum_sandwich(A, B, rhs, cfg, check_sigmas=False)
    if method == "eps_extrapolated":
        if cfg.geometry != "torus":
            raise ValueError("eps extrapolation is implemented for the torus")
        return _central_eps_extrapolated(family, m, p, rep, cfg, a, b,
                                         eps0, levels)
    raise ValueError(f"unknown method {method!r}")


def _central_eps_extrapolated(family, m, p, rep, cfg, a, b, eps0, levels):
    z_cut = Fraction(2 * abs(m) + (1 if cfg.z_sector == "NS" else 2), 2)

    def value(eps: float) -> float:
        p2 = int(np.ceil(36.0 / eps))
        if p2 % 2 != (1 if cfg.angular_sector == "NS" else 0):
            p2 += 1
        cfge = torus_sector(cfg.z_sector, cfg.angular_sector, cfg.d,
                            z_cut, Fraction(p2, 2))
        if family == "TT":
            A = torus_T(rep, a, m, p, cfge, eps)
            B = torus_T(rep, b, -m, -p, cfge, eps)
            rhs = None
            for c in range(1, rep.dim_g + 1):
                fabc = int(rep.f[a - 1, b - 1, c - 1])
                if fabc:
                    piece = torus_T(rep, c, 0, 0, cfge, eps).scaled(
                        complex(0.0, fabc))
                    rhs = piece if rhs is None else rhs + piece
        else:
            A = torus_L(m, p, cfge, eps)
            B = torus_L(-m, -p, cfge, eps)
            rhs = torus_L(0, 0, cfge, eps).scaled(2 * m) if m else None
        return _vacuum_sandwich(A, B, rhs, cfge, check_sigmas=False)

    _, finite = richardson_finite_part(value, eps0=eps0, levels=levels)
    return finite


def measure_virasoro_shape(cfg: SectorConfig, rep: LieAlgebraRep,
                           ms=(1, 2, 3), method: str = "analytic",
                           degrees=None, table=None) -> dict:
    """Central values of the Virasoro bracket at several mode numbers."""
    out = {}
    for m in ms:
        deg = degrees(m) if callable(degrees) else degrees
        out[m] = measure_central("LL", m, rep=rep, cfg=cfg, method=method,
                                 degrees=deg, table=table)
    return out


def central_raw_scan(z_sector: str, angular_sector: str, d: int,
                     rep: LieAlgebraRep, m_cut, p_cuts, family: str = "TT",
                     m: int = 1) -> list:
    """Raw central values against the angular cutoff (documents divergence)."""
    rows = []
    for p_cut in p_cuts:
        cfg = torus_sector(z_sector, angular_sector, d, m_cut, p_cut)
        val = measure_central(family, m, rep=rep, cfg=cfg, method="raw")
        count = len(cfg.angular_lattice())
        rows.append({"p_cut": fmt_half(cfg.p2_cut), "angular_modes": count,
                     "raw_central": val})
    return rows


# ---------------------------------------------------------------------------
# Bracket checks on windows
# ---------------------------------------------------------------------------

def _assemble_rhs(alg, family, a, b, mode1, mode2) -> Optional[ModeOperator]:
    rhs = None
    for scale, kind, c, mode in alg.rhs_terms(family, a, b, mode1, mode2):
        piece = alg.op(kind, c, mode).scaled(scale)
        rhs = piece if rhs is None else rhs + piece
    return rhs


@dataclass
class BracketResult:
    lhs: str
    rhs: str
    residual: float
    raw_central: Optional[float]
    central_measured: Optional[float]
    central_expected: Optional[float]
    passed: bool
    kappa: Optional[float] = None
    offending_state: Optional[str] = None

    def to_dict(self) -> dict:
        out = {"lhs": self.lhs, "rhs": self.rhs, "residual": self.residual}
        if self.raw_central is not None:
            out["raw_central"] = self.raw_central
        out["central_measured"] = self.central_measured
        out["central_expected"] = self.central_expected
        if self.kappa is not None:
            out["kappa_measured"] = self.kappa
        if self.offending_state is not None:
            out["offending_state"] = self.offending_state
        out["pass"] = self.passed
        return out


@dataclass
class CommutatorReport:
    task: str
    geometry: str
    sectors: str
    d: int
    rep: str
    cutoffs: dict
    window: str
    tol: float
    brackets: list = field(default_factory=list)
    charges: dict = field(default_factory=dict)
    lt_summary: dict = field(default_factory=dict)
    passed: bool = True

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "geometry": self.geometry,
            "sectors": self.sectors,
            "d": self.d,
            "rep": self.rep,
            "cutoffs": self.cutoffs,
            "window": self.window,
            "tol": self.tol,
            "brackets": [b.to_dict() for b in self.brackets],
            "charges": self.charges,
            "lt_coefficient": self.lt_summary,
            "pass": self.passed,
        }

    @property
    def max_residual(self) -> float:
        return max((b.residual for b in self.brackets), default=0.0)


def _strip_boundary_zero_modes(D: ModeOperator, margins) -> ModeOperator:
    """Drop terms with a self-conjugate factor beyond the exact margin.

    Zero-mode bilinears act inside the spinor module without occupying any
    oscillator, so out-of-margin ones (whose contraction routes are cut off)
    cannot be filtered by inspecting output states; they are removed from
    the comparison on both sides instead.
    """
    cfg = D.cfg
    margin_z, margin_a = margins

    def ok(key):
        for m in key:
            if cfg.classify(m) == "zero" and (m.k1 > margin_z
                                              or abs(m.k2) > margin_a):
                return False
        return True

    kept = {k: c for k, c in D.terms.items() if ok(k)}
    if len(kept) == len(D.terms):
        return D
    return ModeOperator(cfg, kept)


def _bracket_job(alg, family, a, b, mode1, mode2, probes, window, tol,
                 central_cache, central_tol, want_kappa):
    kind_a = "T" if family == "TT" else "L"
    kind_b = "L" if family == "LL" else "T"
    A = alg.op(kind_a, a if kind_a == "T" else None, mode1)
    B = alg.op(kind_b, b if kind_b == "T" else None, mode2)
    rhs = _assemble_rhs(alg, family, a, b, mode1, mode2)
    D = A.commutator(B)
    if rhs is not None:
        D = D - rhs
    margins = alg.compare_bounds(window, mode1, mode2)
    D = _strip_boundary_zero_modes(D, margins)
    D._build_groups()
    # states worth comparing keep every mode inside the margins
    perf_z2 = window.w_z2 + 2 * max(margins[0], 0)
    zero_tot = alg.zero_total(mode1, mode2)

    # independent refit of the [L, T] coefficient against the unit RHS
    field_coeff = _lt_field_coefficient(alg, mode2)
    w_op = None
    if want_kappa and rhs is not None and field_coeff != 0:
        w_op = _strip_boundary_zero_modes(rhs.scaled(1.0 / field_coeff),
                                          margins)
        w_op._build_groups()

    residual = 0.0
    worst_state = None
    diags = []
    knum, kden = 0j, 0.0
    for probe in probes:
        out = D.apply_state(probe, z2_bound=perf_z2, mode_bounds=margins)
        diag = out.pop(probe, 0)
        for s, amp in out.items():
            mag = abs(to_complex(amp))
            if mag > residual:
                residual = mag
                worst_state = s
        if zero_tot:
            diags.append(to_complex(diag))
        else:
            residual = max(residual, abs(to_complex(diag)))
        if w_op is not None:
            wp = w_op.apply_state(probe, z2_bound=perf_z2, mode_bounds=margins)
            out.add_term(probe, diag)
            knum += wp.inner(out)
            kden += wp.norm2()

    kappa = None
    if w_op is not None and kden > 1e-12:
        # [A,B]|probe> = D|probe> + field_coeff * w|probe>
        kappa = (knum / kden).real + field_coeff

    raw_central = None
    central_measured = None
    central_expected = None
    if zero_tot:
        mean = sum(diags) / len(diags) if diags else 0j
        spread = max((abs(v - mean) for v in diags), default=0.0)
        residual = max(residual, spread, abs(mean.imag))
        raw_central = mean.real
        central_expected = alg.central_expected(family, a, b, mode1, mode2)
        central_measured = central_cache(family, a, b, mode1, mode2)
    passed = residual <= tol
    if central_measured is not None:
        passed = passed and abs(central_measured - central_expected) <= central_tol
    lhs = f"[{alg.mode_label(kind_a, a if kind_a == 'T' else None, mode1)}, " \
          f"{alg.mode_label(kind_b, b if kind_b == 'T' else None, mode2)}]"
    rhs_desc = _rhs_label(alg, family, a, b, mode1, mode2)
    offender = (render_state(worst_state, alg.cfg)
                if (not passed and worst_state is not None) else None)
    return BracketResult(lhs, rhs_desc, residual, raw_central,
                         central_measured, central_expected, passed, kappa,
                         offender)


def _lt_field_coefficient(alg, mode2):
    if alg.cfg.geometry == "torus":
        return -mode2[0]
    return -mode2[1]


def _rhs_label(alg, family, a, b, mode1, mode2) -> str:
    parts = []
    for scale, kind, c, mode in alg.rhs_terms(family, a, b, mode1, mode2):
        if isinstance(scale, SqrtTwoScalar):
            txt = f"i*({scale.ia})"
        elif isinstance(scale, complex):
            txt = f"({scale.real:+.6g}{scale.imag:+.6g}i)"
        else:
            txt = f"{float(scale):+.6g}"
        parts.append(f"{txt}*{alg.mode_label(kind, c, mode)}")
    return " + ".join(parts) if parts else "0"


def _run_jobs(jobs, threads: Optional[int]):
    if threads is None:
        threads = int(os.environ.get("KM2D_THREADS", "1") or "1")
    if threads <= 1 or len(jobs) <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(job) for job in jobs]
        return [f.result() for f in futures]


def _mode_grid(max_mode: int):
    rng = range(-max_mode, max_mode + 1)
    return [(m, p) for m in rng for p in rng]


def check_torus_algebra(cfg: SectorConfig, rep: LieAlgebraRep, window: Window,
                        tol: float = 1e-9, max_mode: int = 2,
                        flavour_pair=(1, 2), lt_flavour: int = 1,
                        central_method: str = "analytic",
                        central_tol: Optional[float] = None,
                        threads: Optional[int] = None) -> CommutatorReport:
    """Certify the torus bracket relations on a safe window.

    Sweeps all operator mode pairs with |m|, |p| <= max_mode for the three
    bracket families, measures the regulated central charges, and refits the
    [L, T] coefficient independently.
    """
    if central_tol is None:
        central_tol = tol
    alg = TorusAlgebra(cfg, rep)
    probes = probe_states(cfg, window)
    report = CommutatorReport(
        task="verify-torus", geometry="torus",
        sectors=f"{cfg.z_sector},{cfg.angular_sector}", d=cfg.d, rep=rep.name,
        cutoffs={"m": fmt_half(cfg.m2_cut), "p": fmt_half(cfg.p2_cut)},
        window=window.describe(), tol=tol)

    central_cache: dict = {}

    def central_for(family, a, b, mode1, mode2):
        key = (family, a, b, mode1[0])
        if key not in central_cache:
            central_cache[key] = measure_central(
                family, mode1[0], rep=rep, cfg=cfg, a=a, b=b, p=mode1[1],
                method=central_method)
        return central_cache[key]

    def central_lookup(family, a, b, mode1, mode2):
        if family == "LT":
            return 0.0
        return central_for(family, a, b, mode1, mode2)

    grid = _mode_grid(max_mode)
    tasks = []
    for m1 in grid:
        for m2 in grid:
            tasks.append(("TT", flavour_pair[0], flavour_pair[1], m1, m2, False))
    for i1, m1 in enumerate(grid):
        for m2 in grid[i1:]:
            tasks.append(("LL", None, None, m1, m2, False))
    for m1 in grid:
        for m2 in grid:
            tasks.append(("LT", lt_flavour, lt_flavour, m1, m2, True))

    for family, a, b, mode1, mode2, _ in tasks:
        alg.guard(window, probes, mode1, mode2)

    jobs = [
        (lambda fam=family, aa=a, bb=b, mm1=mode1, mm2=mode2, wk=wk:
         _bracket_job(alg, fam, aa, bb, mm1, mm2, probes, window, tol,
                      central_lookup, central_tol, wk))
        for family, a, b, mode1, mode2, wk in tasks
    ]
    results = _run_jobs(jobs, threads)
    report.brackets = results

    # charges from the regulated pipeline
    k_val = measure_central("TT", 1, rep=rep, cfg=cfg, a=1, b=1,
                            method=central_method)
    c_val = 2.0 * measure_central("LL", 2, rep=rep, cfg=cfg,
                                  method=central_method)
    report.charges = {
        "c_measured": c_val, "k_measured": k_val,
        "c_expected": cfg.d / 2.0, "k_expected": rep.C_M / 2.0,
    }

    # [L, T] coefficient resolution
    kappas = []
    for res, (family, a, b, mode1, mode2, wk) in zip(results, tasks):
        if family == "LT" and res.kappa is not None:
            kappas.append((mode1, mode2, res.kappa))
    max_dev_field = max((abs(k - (-m2[0])) for _, m2, k in kappas),
                        default=0.0)
    printed_rule_holds = all(abs(k - (-m1[1])) <= tol for m1, _, k in kappas)
    report.lt_summary = {
        "rule": "-(z mode of T)",
        "max_deviation_from_rule": max_dev_field,
        "printed_variant": "-(angular mode of L)",
        "printed_variant_matches": printed_rule_holds,
        "pairs_measured": len(kappas),
    }

    charges_ok = (abs(c_val - cfg.d / 2.0) <= central_tol
                  and abs(k_val - rep.C_M / 2.0) <= central_tol)
    report.passed = (all(r.passed for r in results) and charges_ok
                     and max_dev_field <= max(tol, 1e-9))
    return report


def check_sphere_realization(cfg: SectorConfig, rep: LieAlgebraRep,
                             table: StructureTable, window: Window,
                             tol: float = 1e-9, max_l: int = 1,
                             flavour_pair=(1, 2), lt_flavour: int = 1,
                             central_method: str = "analytic",
                             central_tol: float = 1e-8,
                             central_ms=(1, 2),
                             threads: Optional[int] = None) -> CommutatorReport:
    """Certify the sphere bracket relations in the fermionic realization."""
    alg = SphereAlgebra(cfg, rep, table)
    probes = probe_states(cfg, window)
    report = CommutatorReport(
        task="verify-sphere", geometry="sphere", sectors=cfg.z_sector,
        d=cfg.d, rep=rep.name,
        cutoffs={"l": fmt_half(cfg.l2_cut), "table_L_max": table.L_max},
        window=window.describe(), tol=tol)

    central_cache: dict = {}

    def central_lookup(family, a, b, mode1, mode2):
        if family == "LT":
            return 0.0
        key = (family, a, b, mode1, mode2)
        if key not in central_cache:
            central_cache[key] = measure_central(
                family, mode1[1], rep=rep, cfg=cfg, a=a or 1, b=b or 1,
                degrees=(mode1[0], mode2[0]), method=central_method,
                table=table)
        return central_cache[key]

    modes = [(l, m) for l in range(max_l + 1) for m in range(-l, l + 1)]
    tasks = []
    for m1 in modes:
        for m2 in modes:
            tasks.append(("TT", flavour_pair[0], flavour_pair[1], m1, m2, False))
    for i1, m1 in enumerate(modes):
        for m2 in modes[i1:]:
            tasks.append(("LL", None, None, m1, m2, False))
    for m1 in modes:
        for m2 in modes:
            tasks.append(("LT", lt_flavour, lt_flavour, m1, m2, True))

    for family, a, b, mode1, mode2, _ in tasks:
        alg.guard(window, probes, mode1, mode2)

    jobs = [
        (lambda fam=family, aa=a, bb=b, mm1=mode1, mm2=mode2, wk=wk:
         _bracket_job(alg, fam, aa, bb, mm1, mm2, probes, window, tol,
                      central_lookup, central_tol, wk))
        for family, a, b, mode1, mode2, wk in tasks
    ]
    results = _run_jobs(jobs, threads)
    report.brackets = results

    # charges: the diagonal current bracket at m = 1 carries (-1)^1 k
    k_val = -measure_central("TT", 1, rep=rep, cfg=cfg, a=1, b=1,
                             degrees=(1, 1), method=central_method, table=table)
    c_col = {}
    l_cut = cfg.l2_cut // 2
    for m in central_ms:
        l = max(abs(m), 2)
        if l > l_cut:
            continue
        val = measure_central("LL", m, rep=rep, cfg=cfg, degrees=(l, l),
                              method=central_method, table=table)
        sgn = -1.0 if m % 2 else 1.0
        c_col[m] = (val, sgn * (cfg.d / 2.0 / 12.0) * m * (m * m - 1))
    c_val = 2.0 * c_col[2][0] if 2 in c_col else float("nan")
    report.charges = {
        "c_measured": c_val, "k_measured": k_val,
        "c_expected": cfg.d / 2.0, "k_expected": rep.C_M / 2.0,
        "virasoro_centrals": {str(m): {"measured": v[0], "expected": v[1]}
                              for m, v in sorted(c_col.items())},
    }

    kappas = [(m1, m2, r.kappa) for r, (fam, _, _, m1, m2, wk)
              in zip(results, tasks) if fam == "LT" and r.kappa is not None]
    max_dev = max((abs(k - (-m2[1])) for _, m2, k in kappas), default=0.0)
    report.lt_summary = {
        "rule": "-(z mode of T)",
        "max_deviation_from_rule": max_dev,
        "pairs_measured": len(kappas),
    }
    charges_ok = (abs(k_val - rep.C_M / 2.0) <= central_tol
                  and all(abs(v - e) <= central_tol for v, e in c_col.values()))
    report.passed = (all(r.passed for r in results) and charges_ok
                     and max_dev <= max(tol, 1e-8))
    return report


# ---------------------------------------------------------------------------
# Abstract sphere algebra (free module over generator symbols)
# ---------------------------------------------------------------------------

def _abstract_bracket(table: StructureTable, rep: LieAlgebraRep, x, y) -> dict:
    """Bracket of two generator symbols in the abstract sphere algebra.

    Symbols: ("L", l, m), ("T", a, l, m), ("C",), ("K",).  Central symbols
    commute with everything; central charges appear in units of c and k.
    """
    if x[0] in ("C", "K") or y[0] in ("C", "K"):
        return {}
    out: dict = {}

    def add(sym, coeff):
        if sym in out:
            out[sym] += coeff
            if out[sym] == 0:
                del out[sym]
        else:
            out[sym] = coeff

    if x[0] == "T" and y[0] == "L":
        return {s: -c for s, c in _abstract_bracket(table, rep, y, x).items()}

    if x[0] == "L" and y[0] == "L":
        _, l1, m1 = x
        _, l2, m2 = y
        for l3 in table.target_degrees(l1, l2, m1 + m2):
            cval = table.get(l1, m1, l2, m2, l3)
            if cval and m1 != m2:
                add(("L", l3, m1 + m2), (m1 - m2) * cval)
        if m1 + m2 == 0 and l1 == l2:
            sign = -1 if m1 % 2 else 1
            add(("C",), sign * m1 * (m1 * m1 - 1) / 12.0)
        return out

    if x[0] == "L" and y[0] == "T":
        _, l1, m1 = x
        _, a2, l2, m2 = y
        if m2:
            for l3 in table.target_degrees(l1, l2, m1 + m2):
                cval = table.get(l1, m1, l2, m2, l3)
                if cval:
                    add(("T", a2, l3, m1 + m2), -m2 * cval)
        return out

    _, a1, l1, m1 = x
    _, a2, l2, m2 = y
    for l3 in table.target_degrees(l1, l2, m1 + m2):
        cval = table.get(l1, m1, l2, m2, l3)
        if not cval:
            continue
        for c in range(1, rep.dim_g + 1):
            fabc = int(rep.f[a1 - 1, a2 - 1, c - 1])
            if fabc:
                add(("T", c, l3, m1 + m2), 1j * fabc * cval)
    if m1 + m2 == 0 and l1 == l2 and a1 == a2:
        sign = -1 if m1 % 2 else 1
        add(("K",), sign * m1)
    return out


def _bracket_elements(table, rep, u: dict, v: dict) -> dict:
    out: dict = {}
    for sx, cx in u.items():
        for sy, cy in v.items():
            for sz, cz in _abstract_bracket(table, rep, sx, sy).items():
                val = out.get(sz, 0) + cx * cy * cz
                if val == 0:
                    out.pop(sz, None)
                else:
                    out[sz] = val
    return out


def check_sphere_abstract(table: StructureTable, rep: LieAlgebraRep,
                          l_probe: int = 2, tol: float = 1e-10,
                          include_currents: bool = True) -> dict:
    """Max Jacobi residual over generator triples with degree <= l_probe."""
    if table.L_max < 3 * l_probe:
        raise ValueError(f"need table degree >= {3 * l_probe}, "
                         f"have {table.L_max}")
    gens = [("L", l, m) for l in range(l_probe + 1) for m in range(-l, l + 1)]
    if include_currents:
        gens += [("T", a, l, m) for a in range(1, rep.dim_g + 1)
                 for l in range(l_probe + 1) for m in range(-l, l + 1)]
    worst = 0.0
    worst_triple = None
    n_checked = 0
    import itertools as _it
    for x, y, z in _it.combinations_with_replacement(gens, 3):
        j = {}
        for u, v, w in ((x, y, z), (y, z, x), (z, x, y)):
            inner = _abstract_bracket(table, rep, u, v)
            for sym, coeff in _bracket_elements(table, rep, inner, {w: 1}).items():
                val = j.get(sym, 0) + coeff
                if val == 0:
                    j.pop(sym, None)
                else:
                    j[sym] = val
        n_checked += 1
        res = max((abs(c) for c in j.values()), default=0.0)
        if res > worst:
            worst, worst_triple = res, (x, y, z)
    return {
        "task": "sphere-abstract",
        "l_probe": l_probe,
        "table_L_max": table.L_max,
        "rep": rep.name,
        "triples_checked": n_checked,
        "max_jacobi_residual": worst,
        "worst_triple": repr(worst_triple),
        "tol": tol,
        "pass": worst <= tol,
    }


def commutator_on_window(A: ModeOperator, B: ModeOperator, cfg: SectorConfig,
                         window: Window) -> tuple:
    """Matrix of <probe'|[A,B]|probe> with the c-number part split off.

    Returns (matrix, raw_central); the raw central value is the common
    diagonal c-number (nonzero only when the total mode vanishes), already
    subtracted from the matrix.
    """
    probes = probe_states(cfg, window)
    specs = [op.spec for op in (A, B)]
    if all(s is not None for s in specs):
        mA2, mB2 = (abs(s.mode[0]) for s in specs)
        pA2, pB2 = (abs(s.mode[1]) for s in specs)
        max_k1 = max((m.k1 for s in probes for m in s.occ), default=0)
        zc = cfg.m2_cut if cfg.geometry == "torus" else cfg.l2_cut
        if cfg.geometry == "torus" and max_k1 + mA2 + mB2 > zc:
            raise WindowViolationError(
                f"z reach {fmt_half(max_k1 + mA2 + mB2)} exceeds cutoff "
                f"{fmt_half(zc)}")
    D = A.commutator(B)
    index = {s: k for k, s in enumerate(probes)}
    mat = np.zeros((len(probes), len(probes)), dtype=complex)
    for j, probe in enumerate(probes):
        out = D.apply_state(probe)
        for s, amp in out.items():
            i = index.get(s)
            if i is not None:
                mat[i, j] = to_complex(amp)
    diag = np.diagonal(mat)
    zero_total = False
    if all(s is not None for s in specs):
        zero_total = (specs[0].mode[0] + specs[1].mode[0] == 0
                      and specs[0].mode[1] + specs[1].mode[1] == 0)
    raw_central = 0.0
    if zero_total and len(probes):
        raw_central = float(np.mean(diag).real)
        mat = mat - raw_central * np.eye(len(probes))
    return mat, raw_central

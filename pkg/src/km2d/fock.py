"""Truncated fermionic Fock spaces on the two-torus and the two-sphere.

Mode conventions
----------------
All half-integer indices are stored doubled (see :mod:`km2d.halfints`).  A
:class:`Mode` is ``(i, k1, k2, eta)`` with flavour ``i`` starting at 1:

* torus:      k1 = 2m (z index), k2 = 2p (angular index), eta = 0
* sphere R:   k1 = 2l, k2 = 2m, eta = 0
* sphere NS:  k1 = 2l, k2 = 2m (both half-odd), eta = +-1

States are kept as a spinor label into the zero-mode Clifford module plus a
sorted tuple of *occupied oscillators*: the oscillator labels are the modes
that are strictly positive under the ordering (z > 0, or z = 0 and angular
> 0 on the torus).  Physical operators b_mode translate into oscillator
creation/annihilation with the reality twists of each geometry:

* torus:      {b_{mp}, b_{nq}} = d^{ij} d_{m+n} d_{p+q},  b^+ = b_{-m,-p}
* sphere R:   {b_{lm}, b_{l'm'}} = (-1)^m d^{ij} d_{ll'} d_{m+m'}
* sphere NS:  {b^{e}_{lm}, b^{e'}_{l'm'}} = d^{ij} d_{ll'} d_{m+m'} d_{e+e'}

Self-conjugate modes (m = p = 0 on the torus R,R; m = 0 on the sphere R)
generate a Clifford algebra realized on a 2^{floor(G/2)}-dimensional module
by pairing consecutive generators into fermionic oscillators; an unpaired
last generator acts diagonally as (+1/sqrt2) times the parity operator.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Optional

import numpy as np

from .halfints import fmt_half, lattice_range, to_doubled
from .scalars import (
    INV_SQRT2,
    SqrtTwoScalar,
    scalar_abs,
    scalar_add,
    scalar_conj,
    scalar_is_zero,
    scalar_mul,
    to_complex,
)

__all__ = [
    "Mode",
    "FockState",
    "StateVector",
    "SectorConfig",
    "torus_sector",
    "sphere_sector",
    "OutOfCutoffError",
    "ModeOperator",
    "b_operator",
    "annihilator",
    "creation",
    "normal_ordered_pair",
    "vacuum_states",
    "check_car",
    "enumerate_states",
    "render_state",
]


class Mode(NamedTuple):
    i: int
    k1: int
    k2: int
    eta: int


class FockState(NamedTuple):
    sigma: int
    occ: tuple  # sorted tuple of oscillator Modes


class OutOfCutoffError(Exception):
    """A mode index lies outside the configured truncation."""

    def __init__(self, mode: Mode, cfg: "SectorConfig"):
        self.mode = mode
        self.cfg = cfg
        super().__init__(f"mode {mode} outside cutoffs of {cfg.describe()}")


class TableCoverageError(Exception):
    """A structure table does not cover a required degree."""

    def __init__(self, degree, l_max):
        self.degree = degree
        self.l_max = l_max
        super().__init__(
            f"structure table covers degrees <= {l_max}, need {degree}")


@dataclass(frozen=True)
class SectorConfig:
    """Geometry, boundary-condition sectors, flavour count and cutoffs."""

    geometry: str               # "torus" | "sphere"
    z_sector: str               # "R" | "NS"
    d: int
    angular_sector: Optional[str] = None   # torus only
    m2_cut: int = 0             # torus z cutoff, doubled
    p2_cut: int = 0             # torus angular cutoff, doubled
    l2_cut: int = 0             # sphere degree cutoff, doubled

    def __post_init__(self):
        if self.geometry not in ("torus", "sphere"):
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.z_sector not in ("R", "NS"):
            raise ValueError(f"unknown z sector {self.z_sector!r}")
        if self.d < 1:
            raise ValueError("need at least one flavour")
        if self.geometry == "torus":
            if self.angular_sector not in ("R", "NS"):
                raise ValueError("torus needs an angular sector R or NS")
            if self.m2_cut <= 0 or self.p2_cut < 0:
                raise ValueError("torus cutoffs must be positive")
            # p2_cut == 0 (R only) is the degenerate single-angular-mode
            # sector used internally to isolate the z-direction anomaly
            if self.m2_cut % 2 != (1 if self.z_sector == "NS" else 0):
                raise ValueError(
                    f"z cutoff {fmt_half(self.m2_cut)} has wrong parity for "
                    f"{self.z_sector} modes")
            if self.p2_cut % 2 != (1 if self.angular_sector == "NS" else 0):
                raise ValueError(
                    f"angular cutoff {fmt_half(self.p2_cut)} has wrong parity "
                    f"for {self.angular_sector} modes")
        else:
            if self.angular_sector is not None:
                raise ValueError("sphere has a single sector label")
            if self.l2_cut < 0:
                raise ValueError("sphere cutoff must be nonnegative")
            if self.l2_cut % 2 != (1 if self.z_sector == "NS" else 0):
                raise ValueError(
                    f"degree cutoff {fmt_half(self.l2_cut)} has wrong parity "
                    f"for {self.z_sector} modes")

    # -- descriptions ------------------------------------------------------

    def describe(self) -> str:
        if self.geometry == "torus":
            return (f"torus({self.z_sector},{self.angular_sector}) d={self.d} "
                    f"|m|<={fmt_half(self.m2_cut)} |p|<={fmt_half(self.p2_cut)}")
        return (f"sphere({self.z_sector}) d={self.d} "
                f"l<={fmt_half(self.l2_cut)}")

    # -- mode constructors and validation ----------------------------------

    def mode(self, i: int, *idx) -> Mode:
        if self.geometry == "torus":
            m, p = idx
            md = Mode(i, to_doubled(m), to_doubled(p), 0)
        elif self.z_sector == "R":
            l, m = idx
            md = Mode(i, 2 * int(l), 2 * int(m), 0)
        else:
            l, m, eta = idx
            md = Mode(i, to_doubled(l), to_doubled(m), int(eta))
        self.validate_mode(md)
        return md

    def validate_mode(self, mode: Mode) -> None:
        if not 1 <= mode.i <= self.d:
            raise ValueError(f"flavour {mode.i} outside 1..{self.d}")
        if self.geometry == "torus":
            zpar = 1 if self.z_sector == "NS" else 0
            apar = 1 if self.angular_sector == "NS" else 0
            if mode.k1 % 2 != zpar or mode.k2 % 2 != apar:
                raise ValueError(f"mode {mode} off the "
                                 f"({self.z_sector},{self.angular_sector}) lattice")
            if mode.eta != 0:
                raise ValueError("torus modes carry no eta label")
        else:
            par = 1 if self.z_sector == "NS" else 0
            if mode.k1 % 2 != par or mode.k2 % 2 != par:
                raise ValueError(f"mode {mode} off the sphere {self.z_sector} lattice")
            if mode.k1 < abs(mode.k2):
                raise ValueError(f"mode {mode} violates l >= |m|")
            if self.z_sector == "NS" and mode.eta not in (1, -1):
                raise ValueError("sphere NS modes need eta = +-1")
            if self.z_sector == "R" and mode.eta != 0:
                raise ValueError("sphere R modes carry no eta label")

    def in_cutoff(self, mode: Mode) -> bool:
        if self.geometry == "torus":
            return abs(mode.k1) <= self.m2_cut and abs(mode.k2) <= self.p2_cut
        return mode.k1 <= self.l2_cut

    def require_in_cutoff(self, mode: Mode) -> None:
        if not self.in_cutoff(mode):
            raise OutOfCutoffError(mode, self)

    # -- ordering, conjugation, pairing ------------------------------------

    def z_index2(self, mode: Mode) -> int:
        return mode.k1 if self.geometry == "torus" else mode.k2

    def classify(self, mode: Mode) -> str:
        """'ann' for strictly positive modes, 'cre' for negatives, 'zero'."""
        if self.geometry == "torus":
            if mode.k1 > 0 or (mode.k1 == 0 and mode.k2 > 0):
                return "ann"
            if mode.k1 == 0 and mode.k2 == 0:
                return "zero"
            return "cre"
        if mode.k2 > 0:
            return "ann"
        if mode.k2 == 0:
            return "zero"
        return "cre"

    def conj(self, mode: Mode) -> Mode:
        if self.geometry == "torus":
            return Mode(mode.i, -mode.k1, -mode.k2, 0)
        return Mode(mode.i, mode.k1, -mode.k2, -mode.eta)

    def car_pairing(self, x: Mode, y: Mode):
        """c-number {b_x, b_y}; exact int."""
        if y != self.conj(x):
            return 0
        if self.geometry == "sphere" and self.z_sector == "R":
            return -1 if (x.k2 // 2) % 2 else 1
        return 1

    def reality_twist(self, mode: Mode) -> int:
        """t with (b_mode)^+ = t * b_conj(mode)."""
        if self.geometry == "sphere" and self.z_sector == "R":
            return -1 if (mode.k2 // 2) % 2 else 1
        return 1

    # -- zero-mode Clifford module ------------------------------------------

    def zero_modes(self) -> tuple:
        if self.geometry == "torus":
            if self.z_sector == "R" and self.angular_sector == "R":
                return tuple(Mode(i, 0, 0, 0) for i in range(1, self.d + 1))
            return ()
        if self.z_sector == "R":
            lmax = self.l2_cut // 2
            return tuple(Mode(i, 2 * l, 0, 0)
                         for i in range(1, self.d + 1)
                         for l in range(lmax + 1))
        return ()

    def zero_mode_index(self, mode: Mode) -> int:
        if self.geometry == "torus":
            return mode.i - 1
        lmax = self.l2_cut // 2
        return (mode.i - 1) * (lmax + 1) + mode.k1 // 2

    def spinor_dim(self) -> int:
        return 1 << (len(self.zero_modes()) // 2)

    def clifford_action(self, gen: int, sigma: int):
        """Action of zero-mode generator #gen on the module: (coeff, sigma')."""
        n_gen = len(self.zero_modes())
        if n_gen % 2 and gen == n_gen - 1:
            parity = -1 if bin(sigma).count("1") % 2 else 1
            return parity * INV_SQRT2, sigma
        k, r = divmod(gen, 2)
        phase = -1 if bin(sigma & ((1 << k) - 1)).count("1") % 2 else 1
        bit = (sigma >> k) & 1
        if r == 0:
            coeff = phase * INV_SQRT2
        else:
            # -i(a - a^+)/sqrt2: +i/sqrt2 on empty, -i/sqrt2 on occupied
            coeff = phase * SqrtTwoScalar(ib=Fraction(1, 2) if bit == 0
                                          else Fraction(-1, 2))
        return coeff, sigma ^ (1 << k)

    # -- lattices ------------------------------------------------------------

    def z_lattice(self) -> list:
        if self.geometry == "torus":
            return lattice_range(self.m2_cut, self.z_sector == "NS")
        raise ValueError("sphere modes are enumerated by (l, m)")

    def angular_lattice(self) -> list:
        return lattice_range(self.p2_cut, self.angular_sector == "NS")

    def all_modes(self) -> list:
        """Every mode within cutoffs, in deterministic order."""
        out = []
        if self.geometry == "torus":
            for i in range(1, self.d + 1):
                for k1 in self.z_lattice():
                    for k2 in self.angular_lattice():
                        out.append(Mode(i, k1, k2, 0))
            return out
        par = 1 if self.z_sector == "NS" else 0
        etas = (1, -1) if self.z_sector == "NS" else (0,)
        for i in range(1, self.d + 1):
            for k1 in range(par, self.l2_cut + 1, 2):
                for k2 in range(-k1, k1 + 1, 2):
                    for eta in etas:
                        out.append(Mode(i, k1, k2, eta))
        return out

    def oscillator_modes(self) -> list:
        return [m for m in self.all_modes() if self.classify(m) == "ann"]

    # -- grading ---------------------------------------------------------

    def grade2(self, state: FockState):
        """(doubled z-level, doubled charge); charge decreases under b_{.,q}."""
        if self.geometry == "torus":
            z2 = sum(m.k1 for m in state.occ)
            c2 = sum(m.k2 for m in state.occ)
        else:
            z2 = sum(m.k2 for m in state.occ)
            c2 = z2
        return z2, c2


def torus_sector(z: str, angular: str, d: int, m_cut, p_cut) -> SectorConfig:
    return SectorConfig(geometry="torus", z_sector=z, angular_sector=angular,
                        d=d, m2_cut=to_doubled(m_cut), p2_cut=to_doubled(p_cut))


def sphere_sector(z: str, d: int, l_cut) -> SectorConfig:
    return SectorConfig(geometry="sphere", z_sector=z, d=d,
                        l2_cut=to_doubled(l_cut))


# ---------------------------------------------------------------------------
# States and state vectors
# ---------------------------------------------------------------------------

class StateVector(dict):
    """Sparse map FockState -> amplitude (exact scalar or complex)."""

    def add_term(self, state: FockState, coeff) -> None:
        cur = self.get(state)
        if cur is None:
            self[state] = coeff
        else:
            s = scalar_add(cur, coeff)
            if scalar_is_zero(s):
                del self[state]
            else:
                self[state] = s

    def scaled(self, c) -> "StateVector":
        out = StateVector()
        for s, a in self.items():
            out[s] = scalar_mul(a, c)
        return out

    def sub(self, other: "StateVector") -> "StateVector":
        out = StateVector(self)
        for s, a in other.items():
            out.add_term(s, scalar_mul(-1, a))
        return out

    def inner(self, other: "StateVector") -> complex:
        """<self|other> with conjugation on self."""
        if len(self) > len(other):
            return np.conj(other.inner(self))
        acc = 0j
        for s, a in self.items():
            b = other.get(s)
            if b is not None:
                acc += np.conj(to_complex(a)) * to_complex(b)
        return acc

    def norm2(self) -> float:
        return sum(abs(to_complex(a)) ** 2 for a in self.values())

    def max_abs(self) -> float:
        return max((scalar_abs(a) for a in self.values()), default=0.0)


def vacuum_states(cfg: SectorConfig) -> list:
    """The vacuum multiplet: one state per spinor label."""
    return [FockState(s, ()) for s in range(cfg.spinor_dim())]


def _apply_b(cfg: SectorConfig, mode: Mode, state: FockState):
    """Apply physical b_mode to a basis state; (coeff, state') or None."""
    kind = cfg.classify(mode)
    occ = state.occ
    if kind == "ann":
        try:
            j = occ.index(mode)
        except ValueError:
            return None
        sign = -1 if j % 2 else 1
        return sign, FockState(state.sigma, occ[:j] + occ[j + 1:])
    if kind == "cre":
        osc = cfg.conj(mode)
        if osc in occ:
            return None
        j = 0
        while j < len(occ) and occ[j] < osc:
            j += 1
        sign = -1 if j % 2 else 1
        twist = cfg.reality_twist(osc)
        return sign * twist, FockState(state.sigma, occ[:j] + (osc,) + occ[j:])
    # zero mode: anticommute past all explicit creators, then act on sigma
    gen = cfg.zero_mode_index(mode)
    coeff, sigma = cfg.clifford_action(gen, state.sigma)
    if len(occ) % 2:
        coeff = scalar_mul(-1, coeff)
    return coeff, FockState(sigma, occ)


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

class ModeOperator:
    """Finite combination of ordered products of b operators (lazy action).

    terms maps a tuple of modes (applied right to left) to a coefficient;
    the empty tuple is a multiple of the identity.  Supports addition,
    scaling, adjoints, exact bilinear commutators via the canonical
    anticommutation relations, and materialization on an explicit basis.
    """

    __slots__ = ("cfg", "terms", "spec", "_groups")

    def __init__(self, cfg: SectorConfig, terms: dict, spec=None):
        self.cfg = cfg
        self.terms = terms
        self.spec = spec
        self._groups = None

    # -- algebraic combinations -------------------------------------------

    def _merged(self, other_terms, scale=1):
        out = dict(self.terms)
        for key, c in other_terms.items():
            c = scalar_mul(c, scale)
            if key in out:
                s = scalar_add(out[key], c)
                if scalar_is_zero(s):
                    del out[key]
                else:
                    out[key] = s
            else:
                out[key] = c
        return out

    def __add__(self, other: "ModeOperator") -> "ModeOperator":
        return ModeOperator(self.cfg, self._merged(other.terms))

    def __sub__(self, other: "ModeOperator") -> "ModeOperator":
        return ModeOperator(self.cfg, self._merged(other.terms, -1))

    def scaled(self, c) -> "ModeOperator":
        return ModeOperator(self.cfg,
                            {k: scalar_mul(v, c) for k, v in self.terms.items()})

    def adjoint(self) -> "ModeOperator":
        cfg = self.cfg
        out = {}
        for key, c in self.terms.items():
            twist = 1
            for m in key:
                twist *= cfg.reality_twist(m)
            newkey = tuple(cfg.conj(m) for m in reversed(key))
            c2 = scalar_mul(scalar_conj(c), twist)
            if newkey in out:
                out[newkey] = scalar_add(out[newkey], c2)
            else:
                out[newkey] = c2
        return ModeOperator(cfg, out)

    def commutator(self, other: "ModeOperator") -> "ModeOperator":
        """[self, other] for bilinear operators, exact via the CAR.

        [b1 b2, b3 b4] = {b2,b3} b1 b4 - {b1,b3} b2 b4
                       + {b2,b4} b3 b1 - {b1,b4} b3 b2
        """
        cfg = self.cfg
        by_first: dict = {}
        by_second: dict = {}
        for key, c in other.terms.items():
            if len(key) == 0:
                continue        # identity component commutes
            if len(key) != 2:
                raise ValueError("commutator needs bilinear operators")
            by_first.setdefault(key[0], []).append((key, c))
            by_second.setdefault(key[1], []).append((key, c))
        out: dict = {}

        def add(key, c):
            if key in out:
                s = scalar_add(out[key], c)
                if scalar_is_zero(s):
                    del out[key]
                else:
                    out[key] = s
            else:
                out[key] = c

        for key_a, ca in self.terms.items():
            if len(key_a) == 0:
                continue        # identity component commutes
            if len(key_a) != 2:
                raise ValueError("commutator needs bilinear operators")
            x, y = key_a
            cy, cx = cfg.conj(y), cfg.conj(x)
            for (z, w), cb in by_first.get(cy, ()):
                k = cfg.car_pairing(y, z)
                add((x, w), scalar_mul(scalar_mul(ca, cb), k))
            for (z, w), cb in by_first.get(cx, ()):
                k = cfg.car_pairing(x, z)
                add((y, w), scalar_mul(scalar_mul(ca, cb), -k))
            for (z, w), cb in by_second.get(cy, ()):
                k = cfg.car_pairing(y, w)
                add((z, x), scalar_mul(scalar_mul(ca, cb), k))
            for (z, w), cb in by_second.get(cx, ()):
                k = cfg.car_pairing(x, w)
                add((z, y), scalar_mul(scalar_mul(ca, cb), -k))
        return ModeOperator(cfg, out)

    # -- application -------------------------------------------------------

    def _term_requirement(self, key):
        """Required oscillators, z-level shift and net-created mode extent."""
        cfg = self.cfg
        zof = (lambda m: m.k1) if cfg.geometry == "torus" else (lambda m: m.k2)
        required, created = set(), set()
        delta_z2 = 0
        for mode in reversed(key):
            kind = cfg.classify(mode)
            if kind == "ann":
                delta_z2 -= zof(mode)
                if mode in created:
                    created.discard(mode)
                else:
                    required.add(mode)
            elif kind == "cre":
                osc = cfg.conj(mode)
                delta_z2 += zof(osc)
                created.add(osc)
        cre_k1 = max((m.k1 for m in created), default=0)
        cre_k2 = max((abs(m.k2) for m in created), default=0)
        return frozenset(required), delta_z2, cre_k1, cre_k2

    def _build_groups(self):
        groups: dict = {}
        depth = 0
        for key, c in self.terms.items():
            req, delta_z2, cre_k1, cre_k2 = self._term_requirement(key)
            depth = max(depth, len(req))
            groups.setdefault(req, []).append((key, c, delta_z2, cre_k1, cre_k2))
        self._groups = (groups, depth)
        return self._groups

    def _apply_term(self, key, coeff, state: FockState, out: StateVector):
        c, s = coeff, state
        for mode in reversed(key):
            res = _apply_b(self.cfg, mode, s)
            if res is None:
                return
            f, s = res
            c = scalar_mul(c, f)
        out.add_term(s, c)

    def apply_state(self, state: FockState, z2_bound=None,
                    mode_bounds=None) -> StateVector:
        """Image of a basis state; optional pruning of the output grading.

        z2_bound drops components above a doubled z-level; mode_bounds =
        (k1_max, k2_max) drops terms whose net-created oscillators leave
        that box (used for truncation-exact window comparisons).
        """
        groups, depth = self._groups or self._build_groups()
        out = StateVector()
        occ = state.occ
        z2 = self.cfg.grade2(state)[0] if z2_bound is not None else 0
        subsets = {frozenset()}
        for n in range(1, min(depth, len(occ)) + 1):
            subsets.update(frozenset(c) for c in itertools.combinations(occ, n))
        for req in subsets:
            for key, coeff, delta_z2, cre_k1, cre_k2 in groups.get(req, ()):
                if z2_bound is not None and z2 + delta_z2 > z2_bound:
                    continue
                if mode_bounds is not None and (cre_k1 > mode_bounds[0]
                                                or cre_k2 > mode_bounds[1]):
                    continue
                if key:
                    self._apply_term(key, coeff, state, out)
                else:
                    out.add_term(state, coeff)
        return out

    def apply(self, sv: StateVector, z2_bound=None) -> StateVector:
        out = StateVector()
        for state, amp in sv.items():
            for s, c in self.apply_state(state, z2_bound).items():
                out.add_term(s, scalar_mul(c, amp))
        return out

    def materialize(self, basis: list) -> np.ndarray:
        index = {s: k for k, s in enumerate(basis)}
        mat = np.zeros((len(basis), len(basis)), dtype=complex)
        for j, s in enumerate(basis):
            for t, c in self.apply_state(s).items():
                k = index.get(t)
                if k is not None:
                    mat[k, j] = to_complex(c)
        return mat


def b_operator(mode: Mode, cfg: SectorConfig) -> ModeOperator:
    """The physical mode operator b_mode as a lazy operator."""
    cfg.validate_mode(mode)
    cfg.require_in_cutoff(mode)
    return ModeOperator(cfg, {(mode,): 1})


def annihilator(mode: Mode, cfg: SectorConfig) -> ModeOperator:
    return b_operator(mode, cfg)


def creation(mode: Mode, cfg: SectorConfig) -> ModeOperator:
    """Adjoint of b_mode under the reality map of the sector."""
    return b_operator(mode, cfg).adjoint()


def normal_ordered_pair(mode_a: Mode, mode_b: Mode, cfg: SectorConfig) -> ModeOperator:
    """Normal-ordered product of two mode operators.

    The case split is on the z index of the first factor: reversed with a
    sign for positive z, untouched for negative z, and the antisymmetrized
    half-difference on the z = 0 line.
    """
    for m in (mode_a, mode_b):
        cfg.validate_mode(m)
        cfg.require_in_cutoff(m)
    z = cfg.z_index2(mode_a)
    if z > 0:
        terms = {(mode_b, mode_a): -1}
    elif z < 0:
        terms = {(mode_a, mode_b): 1}
    else:
        terms = {(mode_a, mode_b): Fraction(1, 2)}
        key = (mode_b, mode_a)
        if key in terms:
            terms[key] = terms[key] - Fraction(1, 2)
            if terms[key] == 0:
                del terms[key]
        else:
            terms[key] = Fraction(-1, 2)
    return ModeOperator(cfg, terms)


def add_normal_ordered(terms: dict, cfg: SectorConfig, mode_a: Mode,
                       mode_b: Mode, scale) -> None:
    """Accumulate scale * (normal-ordered pair) into a term dict."""
    z = cfg.z_index2(mode_a)
    if z > 0:
        items = (((mode_b, mode_a), scalar_mul(-1, scale)),)
    elif z < 0:
        items = (((mode_a, mode_b), scale),)
    else:
        half = scalar_mul(scale, Fraction(1, 2))
        items = (((mode_a, mode_b), half),
                 ((mode_b, mode_a), scalar_mul(-1, half)))
    for key, c in items:
        if key in terms:
            s = scalar_add(terms[key], c)
            if scalar_is_zero(s):
                del terms[key]
            else:
                terms[key] = s
        else:
            terms[key] = c


# ---------------------------------------------------------------------------
# Enumeration, CAR checks, rendering
# ---------------------------------------------------------------------------

def enumerate_states(cfg: SectorConfig, max_z2: int, max_particles: int,
                     max_charge2: Optional[int] = None,
                     per_mode_k2: Optional[int] = None,
                     per_mode_l2: Optional[int] = None,
                     sigmas: Optional[Iterable[int]] = None) -> list:
    """All states with doubled z-level <= max_z2 and <= max_particles.

    Optional bounds: |total doubled charge| <= max_charge2, per-oscillator
    |angular index| <= per_mode_k2 (torus), degree <= per_mode_l2 (sphere).
    """
    osc = cfg.oscillator_modes()
    if cfg.geometry == "torus":
        zkey, ckey = (lambda m: m.k1), (lambda m: m.k2)
    else:
        zkey, ckey = (lambda m: m.k2), (lambda m: m.k2)
    osc = [m for m in osc if zkey(m) <= max_z2]
    if per_mode_k2 is not None:
        osc = [m for m in osc if abs(m.k2) <= per_mode_k2]
    if per_mode_l2 is not None:
        osc = [m for m in osc if m.k1 <= per_mode_l2]
    osc.sort()
    sig = list(sigmas) if sigmas is not None else list(range(cfg.spinor_dim()))
    out = []
    for n in range(max_particles + 1):
        for combo in itertools.combinations(osc, n):
            if sum(zkey(m) for m in combo) > max_z2:
                continue
            if max_charge2 is not None and abs(sum(ckey(m) for m in combo)) > max_charge2:
                continue
            for s in sig:
                out.append(FockState(s, combo))
    out.sort()
    return out


def check_car(cfg: SectorConfig, sample=None, basis=None) -> float:
    """Max residual of {b_x, b_y} against the postulated c-number.

    With exact integer cutoff data the residual is exactly zero; any nonzero
    return signals a sign error in the fermionic bookkeeping.
    """
    modes = sample if sample is not None else None
    if modes is None:
        all_modes = cfg.all_modes()
        modes = [(x, y) for x in all_modes for y in all_modes]
    if basis is None:
        basis = enumerate_states(cfg, max_z2=2 * max(1, cfg.d // 2),
                                 max_particles=2)
    worst = 0.0
    for x, y in modes:
        terms = {(x, x): 2} if x == y else {(x, y): 1, (y, x): 1}
        op = ModeOperator(cfg, terms)
        expected = cfg.car_pairing(x, y)
        for s in basis:
            sv = op.apply_state(s)
            sv.add_term(s, scalar_mul(-1, expected))
            worst = max(worst, sv.max_abs())
    return worst


def render_state(state: FockState, cfg: SectorConfig) -> str:
    """Deterministic text form, physical creation labels inside the ket."""
    parts = []
    for osc in state.occ:
        phys = cfg.conj(osc)
        if cfg.geometry == "torus":
            parts.append(f"({phys.i},{fmt_half(phys.k1)},{fmt_half(phys.k2)})")
        elif cfg.z_sector == "R":
            parts.append(f"({phys.i},{phys.k1 // 2},{phys.k2 // 2})")
        else:
            sgn = "+" if phys.eta > 0 else "-"
            parts.append(f"({phys.i},{fmt_half(phys.k1)},{fmt_half(phys.k2)},{sgn})")
    body = ",".join(parts)
    if body:
        return f"|sigma={state.sigma}; {body}>"
    return f"|sigma={state.sigma}>"

from fractions import Fraction

import numpy as np
import pytest

from km2d.currents import torus_L, torus_T
from km2d.fock import sphere_sector, torus_sector, vacuum_states
from km2d.harmonics import structure_table
from km2d.regulator import UnresolvedPrescriptionError
from km2d.verifier import (
    Window,
    WindowViolationError,
    central_raw_scan,
    check_sphere_abstract,
    check_sphere_realization,
    check_torus_algebra,
    commutator_on_window,
    measure_central,
    measure_virasoro_shape,
    probe_states,
)

H = Fraction(1, 2)


@pytest.fixture(scope="module")
def nsns():
    return torus_sector("NS", "NS", 3, Fraction(9, 2), Fraction(9, 2))


# ---------------------------------------------------------------------------
# central-term measurements
# ---------------------------------------------------------------------------

def test_level_charge_analytic(so3, nsns):
    assert measure_central("TT", 1, rep=so3, cfg=nsns) == 1.0
    assert measure_central("TT", 2, rep=so3, cfg=nsns) == 2.0
    # off-diagonal generator pair carries no central term
    assert measure_central("TT", 1, rep=so3, cfg=nsns, a=1, b=2) == 0.0


def test_virasoro_shape_analytic(so3, nsns):
    shape = measure_virasoro_shape(nsns, so3, ms=(1, 2, 3))
    c = nsns.d / 2
    assert shape[1] == 0.0           # exactly, not approximately
    assert shape[2] == c / 12 * 2 * 3
    assert shape[3] == c / 12 * 3 * 8


def test_virasoro_shape_ramond(so3):
    cfg = torus_sector("R", "NS", 3, 4, Fraction(9, 2))
    shape = measure_virasoro_shape(cfg, so3, ms=(1, 2, 3))
    assert shape[1] == 0.0
    assert shape[2] == 0.75
    assert shape[3] == 3.0


def test_central_window_independence(so3, nsns):
    # the regulated value is independent of any probe window by
    # construction; the raw diagonal is probe-independent inside a window
    v1 = measure_central("LL", 2, rep=so3, cfg=nsns)
    cfg2 = torus_sector("NS", "NS", 3, Fraction(11, 2), Fraction(13, 2))
    v2 = measure_central("LL", 2, rep=so3, cfg=cfg2)
    assert v1 == v2


def test_central_eps_extrapolated(so3, nsns):
    val = measure_central("TT", 1, rep=so3, cfg=nsns,
                          method="eps_extrapolated", eps0=0.1, levels=5)
    assert val == pytest.approx(1.0, abs=1e-6)


def test_central_raw_diverges_affinely(so3):
    rows = central_raw_scan("NS", "NS", 3, so3, Fraction(5, 2),
                            [Fraction(5, 2), Fraction(9, 2), Fraction(13, 2)])
    vals = [r["raw_central"] for r in rows]
    d1, d2 = vals[1] - vals[0], vals[2] - vals[1]
    assert d1 > 0.5                          # genuinely divergent
    assert d2 == pytest.approx(d1, abs=1e-9)  # affine in the cutoff
    counts = [r["angular_modes"] for r in rows]
    slope = d1 / (counts[1] - counts[0])
    assert slope == pytest.approx(1.0, abs=1e-9)  # anomaly per angular mode


def test_sphere_central_twist(so3, table4):
    cfg = sphere_sector("R", 3, 4)
    val = measure_central("TT", 1, rep=so3, cfg=cfg, degrees=(1, 1))
    assert val == pytest.approx(-1.0, abs=1e-12)       # (-1)^1 k m
    off = measure_central("TT", 1, rep=so3, cfg=cfg, degrees=(1, 2))
    assert off == pytest.approx(0.0, abs=1e-12)        # delta_{l1 l2}
    val2 = measure_central("LL", 2, rep=so3, cfg=cfg, degrees=(2, 2))
    assert val2 == pytest.approx(0.75, abs=1e-12)      # (-1)^2 (c/12) 2 (4-1)


def test_sphere_ns_central_unresolved(so3):
    cfg = sphere_sector("NS", 3, Fraction(3, 2))
    with pytest.raises(UnresolvedPrescriptionError):
        measure_central("TT", 1, rep=so3, cfg=cfg, degrees=(1, 1))


# ---------------------------------------------------------------------------
# window machinery
# ---------------------------------------------------------------------------

def test_probe_states_window(nsns):
    probes = probe_states(nsns, Window.of(1, 1, 2))
    assert len(probes) == 22
    for s in probes:
        z2, c2 = nsns.grade2(s)
        assert z2 <= 2 and abs(c2) <= 2 and len(s.occ) <= 2


def test_commutator_on_window_trivial(so3, nsns):
    w = Window.of(1, 1, 2)
    L00 = torus_L(0, 0, nsns)
    mat, central = commutator_on_window(L00, L00, nsns, w)
    assert np.abs(mat).max() == 0.0
    T00 = torus_T(so3, 1, 0, 0, nsns)
    mat, central = commutator_on_window(T00, T00, nsns, w)
    assert np.abs(mat).max() == 0.0


def test_commutator_on_window_guards(so3, nsns):
    w = Window.of(1, 1, 2)
    A = torus_T(so3, 1, 4, 0, nsns)
    B = torus_T(so3, 1, -4, 0, nsns)
    with pytest.raises(WindowViolationError):
        commutator_on_window(A, B, nsns, w)


def test_window_guard_in_check(so3):
    cfg = torus_sector("NS", "NS", 3, Fraction(5, 2), Fraction(5, 2))
    with pytest.raises(WindowViolationError):
        check_torus_algebra(cfg, so3, Window.of(1, 1, 2), max_mode=2)


# ---------------------------------------------------------------------------
# full torus certification
# ---------------------------------------------------------------------------

def test_torus_algebra_small_grid(so3, nsns):
    report = check_torus_algebra(nsns, so3, Window.of(1, 1, 2), tol=1e-9,
                                 max_mode=1)
    assert report.passed
    assert report.max_residual == 0.0
    assert report.charges["c_measured"] == 1.5
    assert report.charges["k_measured"] == 1.0
    assert report.lt_summary["max_deviation_from_rule"] <= 1e-12
    assert report.lt_summary["printed_variant_matches"] is False


def test_torus_specific_bracket(so3, nsns):
    # [L_00, T^a_{1,0}] = -T^a_{1,0} on the window
    from km2d.verifier import TorusAlgebra, _bracket_job

    alg = TorusAlgebra(nsns, so3)
    probes = probe_states(nsns, Window.of(1, 1, 2))
    res = _bracket_job(alg, "LT", 1, 1, (0, 0), (1, 0), probes,
                       Window.of(1, 1, 2), 1e-12, lambda *a: 0.0, 1e-12, True)
    assert res.residual == 0.0
    assert res.kappa == pytest.approx(-1.0, abs=1e-12)


def test_torus_tt_closure_example(so3, nsns):
    # [T^1_{1,1}, T^2_{-1,0}] closes on i f_12^3 T^3_{0,1} exactly
    from km2d.verifier import TorusAlgebra, _bracket_job

    alg = TorusAlgebra(nsns, so3)
    probes = probe_states(nsns, Window.of(1, 1, 2))
    res = _bracket_job(alg, "TT", 1, 2, (1, 1), (-1, 0), probes,
                       Window.of(1, 1, 2), 1e-12, lambda *a: 0.0, 1e-12, False)
    assert res.residual == 0.0


def test_antisymmetry_of_commutator(so3, nsns):
    A = torus_T(so3, 1, 1, 1, nsns)
    B = torus_T(so3, 2, -1, 0, nsns)
    ab = A.commutator(B)
    ba = B.commutator(A)
    total = ab + ba
    vac = vacuum_states(nsns)[0]
    probe = vac._replace(occ=(nsns.mode(1, -H, H), nsns.mode(2, -H, -H)))
    assert not total.apply_state(probe)


def test_operator_part_cutoff_stable(so3):
    # growing the cutoffs beyond the exactness bound leaves window matrix
    # elements bitwise identical
    w = Window.of(1, 1, 2)
    outs = []
    for cut in (Fraction(9, 2), Fraction(11, 2), Fraction(13, 2)):
        cfg = torus_sector("NS", "NS", 3, cut, cut)
        probes = probe_states(cfg, w)
        A = torus_T(so3, 1, 2, 1, cfg)
        B = torus_T(so3, 2, -1, -1, cfg)
        rhs = torus_T(so3, 3, 1, 0, cfg).scaled(1j)
        D = A.commutator(B) - rhs
        margins = (cfg.m2_cut - 4, cfg.p2_cut - 2)
        vals = []
        for probe in probes:
            out = D.apply_state(probe, mode_bounds=(2, 2))
            vals.append(sorted((s, complex(c)) for s, c in out.items()
                               if abs(complex(c)) > 0))
        outs.append(vals)
    assert outs[0] == outs[1] == outs[2]


# ---------------------------------------------------------------------------
# sphere
# ---------------------------------------------------------------------------

def test_sphere_realization(so3, table4):
    cfg = sphere_sector("R", 3, 4)
    report = check_sphere_realization(cfg, so3, table4, Window.of(1, 1, 2),
                                      tol=1e-9)
    assert report.passed
    assert report.max_residual <= 1e-12
    assert report.charges["k_measured"] == pytest.approx(1.0, abs=1e-8)
    assert report.charges["c_measured"] == pytest.approx(1.5, abs=1e-8)


def test_sphere_lt_constant_coefficient(so3, table4):
    # [L_00, T^a_{l,m}] = -m T^a_{l,m}: the l3 expansion collapses since
    # c_{0,0,l,m}^{l',m} = delta_{l l'}
    for l, m in [(1, 1), (1, -1)]:
        for l3 in table4.target_degrees(0, l, m):
            expected = 1.0 if l3 == l else 0.0
            assert table4.get(0, 0, l, m, l3) == pytest.approx(
                expected, abs=1e-12)


def test_sphere_abstract_jacobi(so3, table8):
    report = check_sphere_abstract(table8, so3, l_probe=1, tol=1e-10)
    assert report["pass"]
    assert report["max_jacobi_residual"] <= 1e-12


def test_sphere_abstract_requires_headroom(so3, table4):
    with pytest.raises(ValueError):
        check_sphere_abstract(table4, so3, l_probe=2)


def test_sphere_central_jacobi_cancellation(so3, table8):
    # triple with m1+m2+m3 = 0 and equal degrees: the central parts cancel
    from km2d.verifier import _abstract_bracket, _bracket_elements

    gens = [("L", 2, 1), ("L", 2, 1), ("L", 2, -2)]
    total = {}
    for x, y, z in ((gens[0], gens[1], gens[2]),
                    (gens[1], gens[2], gens[0]),
                    (gens[2], gens[0], gens[1])):
        inner = _abstract_bracket(table8, so3, x, y)
        for sym, coeff in _bracket_elements(table8, so3, inner, {z: 1}).items():
            total[sym] = total.get(sym, 0) + coeff
    assert max((abs(v) for v in total.values()), default=0.0) <= 1e-12


@pytest.mark.parametrize("z,ang,mc,pc", [
    ("R", "NS", 5, Fraction(9, 2)),
    ("R", "R", 5, 4),
    ("NS", "R", Fraction(9, 2), 4),
])
def test_torus_algebra_other_sectors(so3, z, ang, mc, pc):
    # closure in the sectors with zero-mode lines and Clifford vacua
    cfg = torus_sector(z, ang, 3, mc, pc)
    report = check_torus_algebra(cfg, so3, Window.of(1, 1, 2), tol=1e-9,
                                 max_mode=1)
    assert report.passed
    assert report.max_residual <= 1e-12
    assert report.charges["c_measured"] == 1.5
    assert report.charges["k_measured"] == 1.0


def test_raw_central_window_independent(so3, nsns):
    # the commutator's diagonal c-number is the same on disjoint windows
    from km2d.verifier import TorusAlgebra, _bracket_job

    alg = TorusAlgebra(nsns, so3)
    raws = []
    for window in (Window.of(1, 1, 1), Window.of(1, 1, 2)):
        probes = probe_states(nsns, window)
        res = _bracket_job(alg, "TT", 1, 1, (1, 0), (-1, 0), probes, window,
                           1e-9, lambda *a: 0.0, 1e9, False)
        raws.append(res.raw_central)
    assert raws[0] == pytest.approx(raws[1], abs=1e-10)


def test_sphere_closure_stable_under_cutoff_growth(so3):
    # enlarging the degree cutoff (and the zero-mode module with it) keeps
    # the window residuals at zero and the charges unchanged
    table = structure_table(5)
    cfg = sphere_sector("R", 3, 5)
    report = check_sphere_realization(cfg, so3, table, Window.of(1, 1, 2),
                                      tol=1e-9, central_ms=(1, 2))
    assert report.passed
    assert report.max_residual <= 1e-12
    assert report.charges["k_measured"] == pytest.approx(1.0, abs=1e-8)

import numpy as np
import pytest

from delta_hartree import greens
from delta_hartree.regimes import Parameters, RegimeError
from delta_hartree.solver import SolverOptions, minimize_h1
from delta_hartree.state import energy, make_state
from delta_hartree.verify import (
    ExtremalProfile,
    IdentityReport,
    bl_splitting_check,
    critical_identity_residual,
    curve_csv,
    energy_comparison,
    fit_extremal,
    gauge_norms,
    gn_probe,
    hls_extremal,
    hls_ratio,
    interpolation_probe,
    nehari_residual,
    pohozaev_residual,
    random_recipes,
    reports_json,
    scaling_family_curve,
    spreading_sequence,
)

CRIT = Parameters(5 / 3, 2.0, 0.5, 1.0)
P22 = Parameters(2.0, 2.0, 0.0, 1.0)


def test_identity_report_residual():
    r = IdentityReport.compare(2.0, 1.0, 0.5)
    assert r.residual == pytest.approx(0.25) and r.passed
    assert IdentityReport.compare(0.0, 0.0, 1e-12).residual == 0.0


def test_trivial_identities(grid, op2):
    z = make_state(grid.zeros())
    assert pohozaev_residual(z, 3.0, op2, P22).residual == 0.0
    assert nehari_residual(z, 3.0, op2, P22).residual == 0.0
    crit = critical_identity_residual(z, 1.0, CRIT)
    assert crit.residual == 0.0 and "degenerate" in crit.note


@pytest.fixture(scope="module")
def h1_state(physical_grid, physical_op):
    return minimize_h1(P22, physical_grid, physical_op, SolverOptions(restarts=1))


def test_pohozaev_charge_free_form(h1_state, physical_op):
    u, w = h1_state.state, h1_state.omega
    rep = pohozaev_residual(u, w, physical_op, P22)
    e = energy(u, physical_op, P22)
    assert rep.lhs == pytest.approx(0.5 * u.phi_d12_sq + 1.5 * w * u.phi_l2_sq, rel=1e-12)
    assert rep.rhs == pytest.approx(5 / 4 * e.nonlocal_, rel=1e-12)
    assert rep.passed
    assert nehari_residual(u, w, physical_op, P22).residual <= 1e-3


def test_critical_identity_pure_charge(grid):
    for alpha, q, lam in ((0.0, 1.0, 1.0), (1.0, 0.5, 9.0), (2.5, 2.0, 0.2)):
        u = make_state(grid.zeros(), q, lam)
        rep = critical_identity_residual(u, alpha, CRIT)
        assert rep.lhs == pytest.approx((alpha + np.sqrt(lam) / (8 * np.pi)) * q * q, rel=1e-14)
        assert not rep.passed and "infeasible" in rep.note


def test_critical_identity_regime(grid):
    with pytest.raises(RegimeError):
        critical_identity_residual(make_state(grid.zeros()), 0.0, P22)


def test_extremal_profile():
    with pytest.raises(ValueError):
        ExtremalProfile(0.0, 1.0)
    e = ExtremalProfile(2.0, 0.5)
    assert e(0.0) == pytest.approx(2.0 * 0.5 / 0.5**3)


def test_hls_extremal_norm(physical_grid, physical_op):
    prof, l2 = hls_extremal(1.0, physical_op)
    ext = fit_extremal(1.0, physical_op)
    assert l2 == pytest.approx(ext.l2_sq, rel=1e-4)
    assert l2 == pytest.approx(ext.C**2 * np.pi**2 / 4, rel=1e-4)
    u = make_state(prof)
    assert hls_ratio(u, physical_op, CRIT) == pytest.approx(1.0, abs=5e-3)


def test_hls_ratio_dilation_invariant(physical_grid, physical_op):
    r = [hls_ratio(make_state(fit_extremal(eta, physical_op).sample(physical_grid)), physical_op, CRIT) for eta in (0.5, 2.0)]
    assert r[0] == pytest.approx(r[1], abs=1e-3)
    # amplitude does not matter either
    u = make_state(fit_extremal(1.3, physical_op).sample(physical_grid) * 4.0)
    assert hls_ratio(u, physical_op, CRIT) == pytest.approx(1.0, abs=5e-3)


def test_hls_ratio_below_one(physical_grid, physical_op):
    ref = fit_extremal(1.0, physical_op)
    ratios = [hls_ratio(r.build(physical_grid), physical_op, CRIT, ref) for r in random_recipes(40, 3)]
    assert max(ratios) < 1.0
    assert hls_ratio(make_state(physical_grid.zeros()), physical_op, CRIT) == 0.0
    with pytest.raises(RegimeError):
        hls_ratio(make_state(physical_grid.zeros()), physical_op, P22)


def test_scaling_family():
    params = Parameters(5 / 3, 2.0, 0.0, 1.0)
    curve = scaling_family_curve(params, [1.0, 0.5, 0.25, 0.125])
    assert np.max(np.abs(curve.mass - 1.0)) <= 1e-6
    assert curve.relative_error <= 1e-2
    # E(Q_t) increases with t
    assert np.all(np.diff(curve.energy) < 0)
    single = scaling_family_curve(params, [0.5])
    assert single.limit is None and single.relative_error is None
    with pytest.raises(RegimeError):
        scaling_family_curve(P22, [1.0, 0.5])
    with pytest.raises(RegimeError):
        scaling_family_curve(Parameters(5 / 3, 2.0, -1.0, 1.0), [1.0, 0.5])
    with pytest.raises(ValueError):
        scaling_family_curve(params, [0.5, 1.0])


def test_energy_comparison_sweep(physical_grid, physical_op):
    gaps = []
    for alpha in (0.0, 0.5, 1.0, 2.0):
        cmp = energy_comparison(Parameters(2.0, 2.0, alpha, 1.0), physical_grid, physical_op)
        assert cmp.e_x < cmp.e_h1 < 0
        gaps.append(cmp.gap)
    assert all(g > 0 for g in gaps)
    # the gain from the charge shrinks as the point interaction strengthens
    assert np.all(np.diff(gaps) < 0)


def test_gn_probe_pure_charge(grid):
    for lam, q in ((1.0, 0.3), (5.0, 2.0)):
        rep = gn_probe([make_state(grid.zeros(), q, lam)], 2.5)
        assert rep.sup == pytest.approx(greens.g1_lr_norm_pow(2.5), rel=1e-6)
    with pytest.raises(ValueError):
        gn_probe([], 3.0)


def test_gn_probe_samples(grid):
    charge_free = [r.build(grid) for r in random_recipes(30, 1, charged=False)]
    assert gn_probe(charge_free, 2.5).finite
    rep = gn_probe([r.build(grid) for r in random_recipes(200, 2)], 2.5)
    assert rep.finite and rep.sup > 0 and rep.ratios.size == 200


def test_interpolation_probe(grid, op2):
    z = make_state(grid.zeros())
    assert interpolation_probe([z], P22, op2).skipped == 1
    free = [r.build(grid) for r in random_recipes(20, 4, charged=False)]
    rep = interpolation_probe(free, P22, op2)
    u = free[rep.argmax]
    a, b = 3 * 2 - 5, 5 - 2
    ye = energy(u, op2, P22).nonlocal_ / (np.sqrt(u.phi_d12_sq) ** a * np.sqrt(u.phi_l2_sq) ** b)
    assert rep.sup == pytest.approx(ye, rel=1e-12)
    mixed = interpolation_probe([r.build(grid) for r in random_recipes(50, 5)], P22, op2)
    assert mixed.finite and np.isfinite(mixed.extra["canonical_sup"])
    with pytest.raises(RegimeError):
        interpolation_probe(free, Parameters(5 / 3, 2.0), op2)


def test_gauge_norms_closed_form(grid):
    u = make_state(grid.sample(lambda r: np.exp(-r * r)), 0.4, 2.0)
    from delta_hartree.state import regauge

    v = regauge(u, 6.0)
    l2, d12 = gauge_norms(u, 6.0)
    assert l2 == pytest.approx(v.phi_l2_sq, rel=1e-9)
    assert d12 == pytest.approx(v.phi_d12_sq, rel=1e-7)


def test_bl_splitting(physical_grid, physical_op):
    u = make_state(physical_grid.sample(lambda r: np.exp(-r * r)))
    seq = spreading_sequence(u, [1, 2, 4, 8, 16, 32])
    curve = bl_splitting_check(seq, u, physical_op, P22)
    assert curve.decreasing and curve.residuals[-1] < 1e-2 * curve.residuals[0]
    same = bl_splitting_check([u, u], u, physical_op, P22)
    assert np.all(same.residuals == 0)
    zero = make_state(physical_grid.zeros())
    assert np.all(bl_splitting_check(seq, zero, physical_op, P22).residuals <= 1e-15)


def test_emitters():
    text = curve_csv(("t", "e"), [(1.0, 0.1), (0.5, -0.2)])
    assert text.splitlines() == ["t,e", "1.0,0.1", "0.5,-0.2"]
    js = reports_json([IdentityReport.compare(1.0, 1.0, 1e-3, "x")], tag=1)
    assert '"residual": 0.0' in js

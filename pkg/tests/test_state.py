import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delta_hartree import greens
from delta_hartree.radial import RadialFunction, indicator, norm
from delta_hartree.regimes import Parameters, RegimeError
from delta_hartree.state import (
    SEARCH_RESTRICTION,
    ZeroChargeError,
    boundary_residual,
    canonical_gauge,
    canonical_lambda,
    directional_derivative,
    dumps_state,
    energy,
    energy_gradient,
    h1_energy,
    loads_state,
    make_state,
    mass_gradient,
    nonlocal_term,
    q_form,
    regauge,
)

P22 = Parameters(2.0, 2.0, 0.7, 1.0)


def gaussian(grid, width=1.0, amp=1.0):
    return grid.sample(lambda r: amp * np.exp(-((r / width) ** 2)))


def test_make_state_masses(grid):
    assert make_state(grid.zeros(), 1.0, 1.0).mass == pytest.approx(1 / (8 * np.pi), rel=1e-15)
    assert make_state(grid.sample(lambda r: np.exp(-r)), 0.0, 1.0).mass == pytest.approx(np.pi, rel=1e-6)
    assert make_state(grid.zeros(), 0.0, 1.0).mass == 0.0
    with pytest.raises(ValueError):
        make_state(grid.zeros(), 1.0, 0.0)


def test_cached_values_match_recomputation(grid):
    u = make_state(gaussian(grid), 0.4, 2.0)
    g = greens.eval_g(2.0, grid.nodes)
    total = RadialFunction(grid, u.phi.values + 0.4 * g)
    assert u.mass == pytest.approx(norm(total, "L2sq"), rel=1e-9)
    assert u.phi_l2_sq == pytest.approx(norm(u.phi, "L2sq"), rel=1e-14)
    assert u.cross_inner == pytest.approx(float(np.dot(grid.weights, u.phi.values * g)), rel=1e-14)


def test_q_form_examples(grid):
    u = make_state(grid.zeros(), 1.0, 1.0)
    assert q_form(u, 0.0) == pytest.approx(1 / (8 * np.pi), rel=1e-15)
    v = make_state(grid.sample(lambda r: np.exp(-r)), 0.0, 1.0)
    assert q_form(v, 3.0) == pytest.approx(np.pi, rel=1e-4)
    # negative alpha makes Q indefinite: Q -> alpha for small lambda
    w = make_state(grid.zeros(), 1.0, 1e-10)
    assert q_form(w, -2.0) == pytest.approx(-2.0, rel=1e-5)


def test_q_form_matches_definition(grid):
    # Q = |phi|_D^2 + lam (|phi|^2 - |u|^2) + (alpha + sqrt(lam)/(4 pi)) q^2
    u = make_state(gaussian(grid, 1.5), 0.3, 3.0)
    a = 0.4
    direct = u.phi_d12_sq + u.lam * (u.phi_l2_sq - u.mass) + (a + np.sqrt(u.lam) / (4 * np.pi)) * u.q**2
    assert q_form(u, a) == pytest.approx(direct, rel=1e-13)


def test_nonlocal_term(grid, op2):
    assert nonlocal_term(make_state(grid.zeros()), op2, 2.0) == 0.0
    u = make_state(gaussian(grid), 0.2, 1.0)
    c = 1.7
    assert nonlocal_term(u.scaled(c), op2, 2.0) == pytest.approx(c**4 * nonlocal_term(u, op2, 2.0), rel=1e-10)
    # radius on a cell edge keeps the sampled indicator exactly 0/1, so |u|^p = u
    R = grid.edges[int(np.argmin(np.abs(grid.edges - 1.0)))]
    ball = make_state(indicator(grid, R))
    assert nonlocal_term(ball, op2, 2.0) == pytest.approx(8 * np.pi / 15 * R**5, rel=1e-3)
    with pytest.raises(RegimeError):
        nonlocal_term(u, op2, 2.5)


def test_energy_assembly(grid, op2):
    z = energy(make_state(grid.zeros()), op2, P22)
    assert (z.q_form, z.nonlocal_, z.energy) == (0.0, 0.0, 0.0)
    u = make_state(gaussian(grid), 0.3, 2.0)
    e = energy(u, op2, P22)
    assert e.energy == pytest.approx(0.5 * e.q_form - e.nonlocal_ / 4.0, rel=1e-12)
    phi = gaussian(grid)
    assert energy(make_state(phi), op2, P22).energy == pytest.approx(h1_energy(phi, op2, 2.0), rel=1e-12)
    assert set(e.to_dict()) == {"q_form", "nonlocal", "energy"}


def test_regauge_examples(grid, op2):
    u = make_state(gaussian(grid), 0.5, 1.0)
    v = regauge(u, 7.0)
    assert v.lam == 7.0
    assert np.max(np.abs(v.u_values - u.u_values)) <= 1e-12 * np.max(np.abs(u.u_values))
    assert v.mass == pytest.approx(u.mass, rel=1e-10)
    assert energy(v, op2, P22).energy == pytest.approx(energy(u, op2, P22).energy, rel=1e-6)
    back = regauge(v, 1.0)
    assert np.max(np.abs(back.phi.values - u.phi.values)) < 1e-10
    with pytest.raises(greens.CoincidentLambdaError):
        regauge(u, 1.0)


def test_canonical_gauge_fixed_point(grid):
    u = make_state(grid.zeros(), 1.0, 1.0)
    assert canonical_lambda(1.0, u.mass) == pytest.approx(1.0, rel=1e-14)
    assert canonical_gauge(u) is u
    with pytest.raises(ZeroChargeError):
        canonical_gauge(make_state(gaussian(grid)))


def test_canonical_gauge_properties(grid):
    # a charge-dominated state keeps the canonical gauge resolvable on the grid
    u = make_state(gaussian(grid, 1.0, 0.02), 1.0, 3.0)
    v = canonical_gauge(u)
    assert v.q**2 * greens.g_l2_norm_sq(v.lam) / u.mass == pytest.approx(1.0, abs=1e-12)
    assert v.mass == pytest.approx(u.mass, rel=1e-10)
    m = v.mass
    q = v.q
    a = 0.6
    Q = q_form(v, a)
    display = 0.5 * v.phi_d12_sq + q**4 / (128 * np.pi**2 * m) * (1 + v.phi_l2_sq / m) + 0.5 * a * q**2
    # the display is one half of the quadratic form
    assert 0.5 * Q == pytest.approx(display, rel=1e-8)
    assert q_form(u, a) == pytest.approx(Q, rel=1e-6)


def test_boundary_residual(grid):
    phi = grid.sample(lambda r: r * np.exp(-r))
    assert abs(boundary_residual(make_state(phi), 1.0)) < 1e-9
    assert abs(boundary_residual(make_state(gaussian(grid), 0.5, 1.0), 1.0)) > 1e-2
    # phi(0) = (alpha + sqrt(lam)/(4 pi)) q holds exactly for a shifted profile
    q, lam, a = 0.3, 4.0, 0.5
    target = (a + np.sqrt(lam) / (4 * np.pi)) * q
    psi = grid.sample(lambda r: target * np.exp(-r * r))
    assert abs(boundary_residual(make_state(psi, q, lam), a)) < 1e-9


def _random_state(rng, grid):
    amp = rng.uniform(-1, 1)
    w = rng.uniform(0.5, 3)
    b = rng.uniform(0, 1)
    phi = grid.sample(lambda r: amp * (1 + b * r) * np.exp(-((r / w) ** 2)))
    return make_state(phi, rng.uniform(0, 1), float(np.exp(rng.uniform(np.log(0.1), np.log(50)))))


def test_gradient_finite_differences(grid, op2):
    rng = np.random.default_rng(11)
    params = Parameters(2.0, 2.0, 0.5, 1.0)
    for _ in range(5):
        u = _random_state(rng, grid)
        v = grid.sample(lambda r: rng.uniform(-1, 1) * np.exp(-((r / rng.uniform(0.5, 2)) ** 2)))
        dq = rng.uniform(-1, 1)
        h = 1e-5
        up = make_state(u.phi + v * h, u.q + h * dq, u.lam)
        um = make_state(u.phi - v * h, u.q - h * dq, u.lam)
        fd = (energy(up, op2, params).energy - energy(um, op2, params).energy) / (2 * h)
        an = directional_derivative(u, op2, params, v, dq)
        assert fd == pytest.approx(an, rel=1e-4)


def test_q_gradient_pure_charge(grid, op2):
    params = Parameters(2.0, 2.0, 0.0, 1.0)
    u = make_state(grid.zeros(), 0.8, 2.0)
    _, gq = energy_gradient(u, op2, params)
    h = 1e-5
    fd = (energy(make_state(grid.zeros(), 0.8 + h, 2.0), op2, params).energy - energy(make_state(grid.zeros(), 0.8 - h, 2.0), op2, params).energy) / (2 * h)
    assert gq == pytest.approx(fd, rel=1e-6)
    # the quadratic part alone: d(Q/2)/dq = sqrt(lam) q / (8 pi) at alpha = 0
    fq = (q_form(make_state(grid.zeros(), 0.8 + h, 2.0), 0.0) - q_form(make_state(grid.zeros(), 0.8 - h, 2.0), 0.0)) / (4 * h)
    assert fq == pytest.approx(np.sqrt(2.0) * 0.8 / (8 * np.pi), rel=1e-8)


def test_zero_gradient(grid, op2):
    g, gq = energy_gradient(make_state(grid.zeros()), op2, P22)
    assert not np.any(g.values) and gq == 0.0
    m, mq = mass_gradient(make_state(grid.zeros()))
    assert not np.any(m.values) and mq == 0.0


def test_scaling_law(grid, op2):
    phi = gaussian(grid, 1.0)
    u = make_state(phi)
    p, beta = 2.0, 2.0
    for t in (0.5, 2.0):
        pt = grid.sample(lambda r: t**1.5 * np.exp(-((t * r) ** 2)))
        v = make_state(pt)
        assert v.mass == pytest.approx(u.mass, rel=1e-4)
        assert v.phi_d12_sq == pytest.approx(t**2 * u.phi_d12_sq, rel=1e-4)
        assert nonlocal_term(v, op2, p) == pytest.approx(t ** (3 * p - 3 - beta) * nonlocal_term(u, op2, p), rel=1e-4)


def test_serialization_round_trip(grid):
    u = make_state(gaussian(grid), 0.123456789, 2.5)
    text = dumps_state(u, note="x")
    v = loads_state(text)
    assert v.q == u.q and v.lam == u.lam
    assert np.array_equal(v.phi.values, u.phi.values)
    assert v.grid.spec() == u.grid.spec()


def test_search_restriction_documented():
    assert "radial" in SEARCH_RESTRICTION and "q >= 0" in SEARCH_RESTRICTION


@settings(max_examples=30, deadline=None)
@given(
    st.floats(-1, 1), st.floats(0.4, 3), st.floats(0, 1),
    st.floats(np.log(0.1), np.log(50)), st.floats(np.log(0.1), np.log(50)),
)
def test_gauge_invariance_property(amp, width, q, log_lam, log_nu):
    grid = _prop_grid()
    lam, nu = float(np.exp(log_lam)), float(np.exp(log_nu))
    if abs(lam - nu) < 1e-9 * max(lam, nu):
        return
    u = make_state(grid.sample(lambda r: amp * np.exp(-((r / width) ** 2))), q, lam)
    v = regauge(u, nu)
    op = _prop_op()
    eu, ev = energy(u, op, P22), energy(v, op, P22)
    assert abs(ev.energy - eu.energy) <= 1e-6 * (1 + abs(eu.energy))
    assert abs(ev.q_form - eu.q_form) <= 1e-6 * (1 + abs(eu.q_form))
    assert abs(v.mass - u.mass) <= 1e-10 * u.mass + 1e-300
    # mass expansion in each gauge
    assert v.mass == pytest.approx(v.phi_l2_sq + 2 * v.q * v.cross_inner + v.q**2 / (8 * np.pi * np.sqrt(nu)), rel=1e-12)


_CACHE = {}


def _prop_grid():
    from delta_hartree.radial import build_grid

    if "g" not in _CACHE:
        _CACHE["g"] = build_grid()
    return _CACHE["g"]


def _prop_op():
    from delta_hartree.riesz import RieszOperator

    if "op" not in _CACHE:
        _CACHE["op"] = RieszOperator.build(2.0, _prop_grid())
    return _CACHE["op"]

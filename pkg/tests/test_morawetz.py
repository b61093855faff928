import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlslab.config import RunConfig, parse_initial
from nlslab.cutoffs import build_cutoffs
from nlslab.evolve import SimState, cutoffs_for, evolve
from nlslab.morawetz import (
    NoBoundaryError,
    SeriesTooShortError,
    action,
    action_rate_terms,
    boundary_flux,
    dyadic_boundary_average,
    interaction,
    local_smoothing_average,
    rate_identity_residual,
    xi,
)
from nlslab.radial import RadialField, make_grid, norms
from nlslab.series import ActionTerms, DiagnosticRow, TimeSeries
from nlslab.verify import angular_interaction, interaction_test_state, random_radial_field


@pytest.fixture(scope="module")
def cf():
    return build_cutoffs(2.0, 0.1)


def packet(grid, center=6.0, k=2.0, width=1.0):
    r0 = grid.r0
    return RadialField.from_u(grid, lambda r: (r - r0) * np.exp(-((r - center) / width) ** 2) * np.exp(1j * k * r))


def flux_series(times, flux, r0=1.0):
    terms = ActionTerms(0.0, 0.0, 0.0, 0.0, 0.0)
    grid = make_grid(0.0, 1.0, 16)
    ns = norms(RadialField(grid, np.zeros(16)))
    rows = [DiagnosticRow(float(t), ns, 0.0, terms, float(y), 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
            for t, y in zip(times, flux)]
    return TimeSeries(rows, euclidean=False, r0=r0)


def test_real_field_carries_no_momentum(cf):
    f = RadialField.from_u(make_grid(0.0, 20.0, 801), lambda r: np.exp(-r * r))
    assert action(f, cf) == 0.0
    assert interaction(f, cf) == 0.0
    assert xi(f, 2.0) == 0.0


def test_zero_field(cf):
    g = make_grid(1.0, 10.0, 200)
    f = RadialField(g, np.zeros(200))
    assert action(f, cf) == 0.0 and interaction(f, cf) == 0.0
    assert boundary_flux(f) == 0.0
    assert action_rate_terms(f, cf).total == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_action_cauchy_schwarz_bounds(seed):
    # |M| <= 2 sup(r psi) ||u|| ||grad u|| with sup(r psi) = R * int phi
    rng = np.random.default_rng(seed)
    f = random_radial_field(rng)
    R = float(rng.uniform(0.5, 4.0))
    cf = build_cutoffs(R, 0.1)
    ns = norms(f)
    bound = 2.0 * cf.phi_integral * R * math.sqrt(ns.mass * ns.kinetic)
    assert abs(action(f, cf)) <= 1.01 * bound
    assert abs(interaction(f, cf)) <= 1.01 * bound * ns.mass


def test_outgoing_packet_has_positive_action(cf):
    g = make_grid(0.0, 30.0, 1501)
    f = packet(g)
    assert action(f, cf) > 0
    assert interaction(f, cf) > 0
    assert xi(f, 20.0) < 0  # xi is minus the mean momentum
    assert action(f.conj(), cf) == pytest.approx(-action(f, cf))


def test_xi_of_ground_state_vanishes(gs):
    assert xi(gs.field(), 1e6) == 0.0


def test_angular_term_vanishes_for_radial_data(cf):
    f = packet(make_grid(1.0, 30.0, 1451))
    assert action_rate_terms(f, cf).angular == 0.0


def test_boundary_flux_requires_an_obstacle():
    with pytest.raises(NoBoundaryError):
        boundary_flux(packet(make_grid(0.0, 10.0, 101)))


def test_boundary_flux_value_and_convergence():
    # v = (r - 1) e^{-(r - 1)} has v_r(1) = 1, so the flux is 4 pi
    errs = []
    for n in (201, 401, 801):
        g = make_grid(1.0, 11.0, n)
        f = RadialField(g, (g.r - 1.0) * np.exp(-(g.r - 1.0)))
        errs.append(abs(boundary_flux(f) - 4 * math.pi))
    assert errs[-1] < 5e-3
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_boundary_flux_of_quadratic_vanishing():
    g = make_grid(1.0, 5.0, 101)
    f = RadialField(g, (g.r - 1.0) ** 2)
    assert boundary_flux(f) == pytest.approx(0.0, abs=1e-20)


@pytest.mark.parametrize("r0", [0.0, 1.0])
def test_interaction_matches_angular_quadrature(r0):
    f = interaction_test_state(r0=r0, n=64)
    cf = build_cutoffs(1.5, 0.1)
    fast, slow = interaction(f, cf), angular_interaction(f, cf)
    assert fast == pytest.approx(slow, rel=1e-10)


@pytest.mark.parametrize("seed", range(3))
def test_interaction_oracle_on_random_fields(seed):
    rng = np.random.default_rng(100 + seed)
    f = random_radial_field(rng, make_grid(0.0, 12.0, 97))
    cf = build_cutoffs(float(rng.uniform(1.0, 4.0)), 0.1)
    assert interaction(f, cf) == pytest.approx(angular_interaction(f, cf), rel=1e-9, abs=1e-12)


def test_rate_identity_on_exterior_run(runs):
    cfg = runs.config("morawetz_exterior", keep_states=True, t_end=0.5)
    series = evolve(cfg, with_interaction=False)
    cf = cutoffs_for(cfg)
    st = series.states
    worst = max(rate_identity_residual(st[i - 1], st[i + 1], st[i], cf) for i in range(1, len(st) - 1))
    assert worst < 1e-2


def test_rate_identity_detects_a_wrong_boundary_sign(runs):
    # flipping the boundary term must break the balance
    cfg = runs.config("morawetz_exterior", keep_states=True, t_end=0.5)
    series = evolve(cfg, with_interaction=False)
    cf = cutoffs_for(cfg)
    st = series.states
    worst = 0.0
    for i in range(1, len(st) - 1):
        dt = st[i + 1].t - st[i - 1].t
        lhs = (action(st[i + 1], cf) - action(st[i - 1], cf)) / dt
        terms = action_rate_terms(st[i], cf)
        flipped = terms.total - 2.0 * terms.boundary
        worst = max(worst, abs(lhs - flipped) / max(abs(terms.boundary), 1e-300))
    assert max(abs(s.field.v[1]) for s in st) > 0
    assert worst > 0.5


def test_rate_identity_argument_order():
    g = make_grid(1.0, 10.0, 100)
    a = SimState(1.0, packet(g), 0)
    b = SimState(0.5, packet(g), 0)
    with pytest.raises(ValueError):
        rate_identity_residual(a, b, a, build_cutoffs(2.0, 0.1))


def test_local_smoothing_constant_flux():
    s = flux_series(np.linspace(0.0, 10.0, 101), np.full(101, 3.0))
    assert local_smoothing_average(s, 2.0) == pytest.approx(3.0)


def test_local_smoothing_needs_a_long_enough_series():
    s = flux_series(np.linspace(0.0, 1.0, 11), np.ones(11))
    with pytest.raises(SeriesTooShortError):
        local_smoothing_average(s, 2.0)
    with pytest.raises(ValueError):
        local_smoothing_average(s, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.0, 100.0), min_size=41, max_size=41), st.sampled_from([0.5, 1.0, 2.0]))
def test_local_smoothing_nonincreasing_in_window(flux, T0):
    s = flux_series(np.linspace(0.0, 10.0, 41), flux)
    assert local_smoothing_average(s, 2 * T0) <= local_smoothing_average(s, T0) + 1e-9


def test_dyadic_average_is_reproducible(runs):
    cfg = runs.config("morawetz_exterior")
    series = runs.series("morawetz_exterior")
    cf = cutoffs_for(cfg)
    a = dyadic_boundary_average(series, cf, 1.0, cfg.cutoff_R0, cfg.cutoff_J, cfg.cutoff_nR)
    b = dyadic_boundary_average(series, cf, 1.0, cfg.cutoff_R0, cfg.cutoff_J, cfg.cutoff_nR)
    assert a == b and a > 0
    with pytest.raises(NoBoundaryError):
        dyadic_boundary_average(replace(series, euclidean=True), cf, 1.0, 2.0, 2, 8)


def test_linear_exterior_flux_average_decays():
    # a linear outgoing wave leaves the obstacle: the late windows carry less flux
    cfg = RunConfig(mode="linear", grid_r0=1.0, grid_r_max=61.0, grid_h=0.04, dt=0.01, t_end=20.0,
                    sample_every=10, initial_data=parse_initial("gaussian{amplitude = 1, width = 0.75, center = 4}"))
    series = evolve(cfg, with_interaction=False)
    t = np.asarray(series.times)
    flux = np.array([row.flux for row in series.rows])
    early = local_smoothing_average(series, 2.0)
    late = local_smoothing_average(flux_series(t[t >= 10.0], flux[t >= 10.0]), 2.0)
    assert late < 0.05 * early

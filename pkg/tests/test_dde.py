"""Delay-equation reference solver against its closed form."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mirrorqed.dde import (
    GridError,
    ResolutionError,
    analytic_series,
    fit_decay_rate,
    markovian_rate,
    purcell_rate,
    solve_delay_ode,
)


def test_no_feedback_interval_is_pure_exponential():
    s = solve_delay_ode(Gamma=1.0, tau=2.0, phi=0.7, t_max=2.0, dt=0.01)
    assert np.allclose(s.eps, np.exp(-0.5 * s.t), atol=1e-14)


def test_matches_closed_form_after_several_delays():
    G, tau, phi = 1.0, 0.5, math.pi / 2
    s = solve_delay_ode(G, tau, phi, t_max=8.0, dt=tau / 400)
    ref = analytic_series(G, tau, phi, s.t)
    assert np.max(np.abs(s.eps - ref)) < 1e-10


@given(
    Gamma_tau=st.sampled_from([0.25, 1.0, 2.0, 4.0]),
    phi=st.floats(0.0, 2 * math.pi),
)
@settings(max_examples=25, deadline=None)
def test_population_stays_physical(Gamma_tau, phi):
    tau = Gamma_tau
    s = solve_delay_ode(1.0, tau, phi, t_max=4 * tau, dt=tau / 100)
    pop = s.population
    assert np.all(pop <= 1.0 + 1e-9)
    assert np.all(pop >= -1e-12)
    assert pop[0] == pytest.approx(1.0)


def test_incommensurate_grid_rejected():
    with pytest.raises(GridError):
        solve_delay_ode(1.0, 1.0, 0.0, t_max=5.0, dt=0.3)


def test_dt_larger_than_delay_rejected():
    with pytest.raises(ResolutionError):
        solve_delay_ode(1.0, 0.1, 0.0, t_max=5.0, dt=0.2)


def test_analytic_series_scalar_and_array_agree():
    ts = np.array([0.0, 0.9, 1.7, 3.3])
    arr = analytic_series(1.0, 1.0, math.pi, ts)
    for t, v in zip(ts, arr):
        assert analytic_series(1.0, 1.0, math.pi, float(t)) == pytest.approx(v)


def test_bound_state_plateau_at_two_pi_phase():
    # Gamma*tau = 2, phi = 2*pi: trapped population 1/(1 + Gamma*tau/2)^2
    s = solve_delay_ode(1.0, 2.0, 2 * math.pi, t_max=60.0, dt=2.0 / 500)
    plat = s.plateau(tol=1e-6)
    assert plat is not None
    assert plat == pytest.approx(0.25, abs=1e-4)


def test_plateau_none_while_still_decaying():
    s = solve_delay_ode(1.0, 0.5, 0.0, t_max=2.0, dt=0.5 / 100)
    assert s.plateau(tol=1e-12) is None


def test_markovian_rate_values():
    assert markovian_rate(1.0, math.pi) == pytest.approx(2.0)
    assert markovian_rate(1.0, 0.0) == pytest.approx(0.0)
    assert markovian_rate(2.0, math.pi / 2) == pytest.approx(2.0)


def test_purcell_rate_is_bad_cavity_ratio():
    assert purcell_rate(g0=0.3, gamma=2.0) == pytest.approx(4 * 0.09 / 2.0)


def test_fit_decay_rate_recovers_exponential():
    t = np.linspace(0, 5, 400)
    rate = 0.83
    assert fit_decay_rate(t, np.exp(-rate * t)) == pytest.approx(rate, rel=1e-6)


def test_fit_matches_markovian_limit_short_delay():
    G, phi = 1.0, math.pi / 2
    tau = 1e-2
    s = solve_delay_ode(G, tau, phi, t_max=3.0, dt=tau / 20)
    fitted = fit_decay_rate(s.t, s.population)
    assert fitted == pytest.approx(markovian_rate(G, phi), rel=0.02)

import numpy as np
import pytest

from polburst.atoms import CavityConfig, build_scheme, mhz
from polburst.optimize import OptimProblem, maximize, optimize_pumping, optimize_stirap, optimize_vstirap
from polburst.protocols import (
    PUMPING_PRESETS,
    StirapConfig,
    pumping_initial_states,
    run_optical_pumping,
    run_stirap_reprep,
    run_vstirap,
    vstirap_pulse,
)


def test_quadratic_peak():
    res = maximize(OptimProblem(lambda p: -(p[0] - 3.0) ** 2, [(0, 10)]))
    assert res.best_params[0] == pytest.approx(3.0, abs=1e-3)
    assert not res.flags


def test_constant_objective_is_flagged():
    res = maximize(OptimProblem(lambda p: 1.0, [(0, 10)]))
    assert "zero_gradient" in res.flags
    assert 0 < res.best_params[0] < 10


def test_rosenbrock_against_dense_grid():
    f = lambda p: -((1 - p[0]) ** 2 + 100 * (p[1] - p[0] ** 2) ** 2)  # noqa: E731
    xs = np.linspace(-2, 2, 401)
    ys = np.linspace(-1, 3, 401)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    V = -((1 - X) ** 2 + 100 * (Y - X ** 2) ** 2)
    i, j = np.unravel_index(np.argmax(V), V.shape)
    oracle = np.array([xs[i], ys[j]])
    res = maximize(OptimProblem(f, [(-2, 2), (-1, 3)]))
    assert np.allclose(res.best_params, oracle, atol=1e-2)
    assert np.allclose(res.best_params, [1.0, 1.0], atol=1e-2)


def test_never_worse_than_best_seed_and_deterministic():
    f = lambda p: np.sin(3 * p[0]) * np.cos(2 * p[1])  # noqa: E731
    prob = OptimProblem(f, [(0, 3), (0, 3)], seeds=5, budget=60)
    a, b = maximize(prob), maximize(prob)
    seeds = [f(p) for p in prob.grid()]
    assert a.best_value >= max(seeds)
    assert np.array_equal(a.best_params, b.best_params)
    assert a.best_value == f(a.best_params)


def test_budget_exhausted_is_flagged():
    res = maximize(OptimProblem(lambda p: -np.sum((p - 0.3) ** 2), [(0, 1)] * 2, seeds=3, budget=12))
    assert "budget_exhausted" in res.flags
    assert res.evaluations <= 12


def test_problem_validation():
    with pytest.raises(ValueError):
        OptimProblem(lambda p: 0.0, [(0, np.inf)])
    with pytest.raises(ValueError):
        OptimProblem(lambda p: 0.0, [(0, 1)] * 2, seeds=8, budget=10)
    with pytest.raises(ValueError):
        OptimProblem(lambda p: 0.0, [(1, 0)])


def test_vstirap_detuning_has_little_effect_in_ideal_scheme():
    s = build_scheme("ideal")
    cav = CavityConfig.from_transition_coupling(s, 10.0, 5.0)
    res = optimize_vstirap(s, cav, 10.0, [(1.0, 60.0), (-3.0, 3.0)], seeds=(5, 3), budget=60)
    assert abs(res.best_params[1]) < 0.5
    # the optimum barely moves efficiency away from resonance
    on = run_vstirap(s, cav, vstirap_pulse(s, res.best_params[0], 10.0)).p_H
    assert on == pytest.approx(res.best_value, abs=2e-3)


def test_vstirap_optimal_rabi_grows_with_g():
    s = build_scheme("ideal")
    opt = []
    for g in (2.0, 5.0, 10.0, 20.0):
        cav = CavityConfig.from_transition_coupling(s, g, 5.0)
        res = optimize_vstirap(s, cav, 10.0, [(0.5, 120.0), (0.0, 0.0)], seeds=(8, 1), budget=40)
        opt.append(res.best_params[0])
    assert all(b > a for a, b in zip(opt, opt[1:]))


def test_vstirap_without_coupling_emits_nothing():
    s = build_scheme("ideal")
    cav = CavityConfig(0.0, 2.0)
    res = optimize_vstirap(s, cav, 10.0, [(1.0, 30.0), (0.0, 0.0)], seeds=(3, 1), budget=10)
    assert res.best_value == pytest.approx(0.0, abs=1e-12)


def test_stirap_ideal_optimum():
    s = build_scheme("ideal")
    res = optimize_stirap(s, 10.0, [(5, 7), (10.0, 18.0), (20.0, 150.0)], seeds=(3, 3), budget=25)
    assert res.best_value >= 0.99
    assert res.best_params[0] in (5.0, 6.0, 7.0)


def test_stirap_d1_150ns():
    s = build_scheme("rb_d1")
    res = optimize_stirap(s, 0.15, [(8.0, 14.0), (mhz(25), mhz(60))], n_values=(6,), seeds=(3, 3), budget=30)
    assert res.best_value == pytest.approx(0.95, abs=0.03)
    assert 8.0 <= res.best_params[1] <= 14.0


def test_stirap_zero_rabi_keeps_population():
    s = build_scheme("rb_d1")
    r = run_stirap_reprep(s, StirapConfig(0.0, 0.15))
    assert r.target_population == pytest.approx(0.0, abs=1e-12)
    r = run_stirap_reprep(s, StirapConfig(0.0, 0.15), s.g2)
    assert r.target_population == pytest.approx(1.0, abs=1e-12)


def test_pumping_resonant_is_worse_than_preset_detunings():
    s = build_scheme("rb_d1")
    rho0 = pumping_initial_states(s)["mixed_F1"]
    p = PUMPING_PRESETS[s.kind]
    detuned = run_optical_pumping(s, p, rho0, 2.5, dt=2.5).population[-1]
    from dataclasses import replace

    resonant = run_optical_pumping(s, replace(p, delta1=0.0, delta2=0.0), rho0, 2.5, dt=2.5).population[-1]
    assert resonant < detuned


def test_pumping_optimum_near_quoted_detunings():
    s = build_scheme("rb_d1")
    rho0 = pumping_initial_states(s)["mixed_F1"]
    bounds = [(mhz(0), mhz(8)), (mhz(-12), mhz(-3)), (mhz(34), mhz(34)), (mhz(24), mhz(24))]
    res = optimize_pumping(s, 1.5, bounds, rho0, seeds=[3, 3, 1, 1], budget=40)
    d1, d2 = res.best_params[0] / (2 * np.pi), res.best_params[1] / (2 * np.pi)
    assert abs(d1 - 4.0) < 3.0 and abs(d2 + 7.5) < 3.5


def test_pumping_zero_rabi_changes_nothing():
    s = build_scheme("rb_d1")
    from polburst.protocols import PumpingConfig

    r = run_optical_pumping(s, PumpingConfig(0.0, 0.0, 0.0, 0.0), pumping_initial_states(s)["mixed_F2"], 1.0)
    assert np.allclose(r.population, 0.2, atol=1e-12)

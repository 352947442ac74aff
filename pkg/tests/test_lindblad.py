import numpy as np
import pytest

from polburst.atoms import CavityConfig, build_scheme, mhz
from polburst.lindblad import (
    GeneratorSpec,
    IntegrationError,
    InvariantViolation,
    MissingTraceError,
    _CompiledGenerator,
    emission_efficiency,
    evolve,
    lindblad_rhs,
    photon_flux_operator,
    reachable_indices,
)
from polburst.operators import DensityMatrix, LayoutError, Operator, compose_spaces, fock_lowering, identity
from polburst.protocols import cooperativity_cavity, run_vstirap, vstirap_pulse
from polburst.system import flux_operators, vstirap_generator, with_cavity_vacuum, atomic_state

TWO = compose_spaces([("q", 2)])
EXC = Operator(TWO, np.diag([0.0, 1.0]))


def _ground():
    return DensityMatrix(TWO, np.diag([1.0, 0.0]))


def _rms(a, b):
    return float(np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2)))


def test_rabi_oscillation():
    omega = 2.0
    h = Operator(TWO, 0.5 * omega * np.array([[0, 1], [1, 0]]))
    traj = evolve(_ground(), GeneratorSpec([h]), (0.0, 5.0), observables={"pe": EXC}, n_out=201)
    exact = np.sin(omega * traj.times / 2) ** 2
    assert _rms(traj.traces["pe"], exact) < 1e-6


def test_driven_rabi_uses_envelope():
    h = Operator(TWO, 0.5 * np.array([[0, 1], [1, 0]]))
    traj = evolve(_ground(), GeneratorSpec((), [(h, lambda t: 3.0)]), (0.0, 2.0), observables={"pe": EXC})
    assert _rms(traj.traces["pe"], np.sin(1.5 * traj.times) ** 2) < 1e-6


def test_atomic_decay_rate_two_gamma():
    gamma = 0.7
    c = Operator(TWO, np.sqrt(2 * gamma) * np.array([[0, 1], [0, 0]]))
    rho0 = DensityMatrix(TWO, np.diag([0.0, 1.0]))
    traj = evolve(rho0, GeneratorSpec((), (), [(c, 1.0)]), (0.0, 4.0), observables={"pe": EXC})
    assert _rms(traj.traces["pe"], np.exp(-2 * gamma * traj.times)) < 1e-6


def test_cavity_decay_rate_two_kappa_and_flux():
    kappa = 1.3
    layout = compose_spaces([("cavH", 3)])
    a = fock_lowering(3, "cavH")
    rho0 = DensityMatrix(layout, np.diag([0.0, 1.0, 0.0]))
    n = a.dag() @ a
    c = Operator(layout, np.sqrt(2 * kappa) * a.elements)
    traj = evolve(rho0, GeneratorSpec((), (), [(c, 1.0)]), (0.0, 3.0), observables={"n": n},
                  fluxes={"H": photon_flux_operator(layout, "cavH", kappa, atom_label="cavH")})
    assert _rms(traj.traces["n"], np.exp(-2 * kappa * traj.times)) < 1e-6
    assert emission_efficiency(traj, "H") == pytest.approx(1 - np.exp(-2 * kappa * 3.0), abs=1e-7)
    with pytest.raises(MissingTraceError):
        emission_efficiency(traj, "pi")


def test_zero_generator_has_zero_derivative():
    gen = GeneratorSpec([Operator(TWO, np.zeros((2, 2)))])
    assert np.allclose(lindblad_rhs(gen, _ground(), 0.0), 0.0)


def test_compiled_rhs_matches_reference():
    s = build_scheme("ideal")
    cav = CavityConfig.from_transition_coupling(s, 3.0, 2.0)
    gen = vstirap_generator(s, cav, vstirap_pulse(s, 5.0, 10.0, 0.4))
    rng = np.random.default_rng(1)
    n = gen.layout.total_dim
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = x @ x.conj().T
    rho /= np.trace(rho)
    comp = _CompiledGenerator(gen, np.arange(n))
    np.testing.assert_allclose(comp.rhs(3.0, rho), lindblad_rhs(gen, rho, 3.0), atol=1e-10)


def test_generator_layout_checks():
    other = compose_spaces([("x", 3)])
    with pytest.raises(LayoutError):
        GeneratorSpec([identity(TWO), identity(other)])
    with pytest.raises(ValueError):
        GeneratorSpec((), (), [(EXC, -1.0)])
    with pytest.raises(LayoutError):
        evolve(DensityMatrix(other, np.eye(3) / 3), GeneratorSpec([EXC]), (0, 1))


def test_reachable_subspace_is_closed():
    s = build_scheme("rb_d2")
    cav = cooperativity_cavity(s)
    gen = vstirap_generator(s, cav, vstirap_pulse(s, mhz(40), 0.5))
    rho = with_cavity_vacuum(atomic_state(s, index=s.g2), gen.layout)
    idx = reachable_indices(gen, np.flatnonzero(np.diag(rho.elements)))
    assert len(idx) < gen.layout.total_dim / 4
    out = np.setdiff1d(np.arange(gen.layout.total_dim), idx)
    h = gen.hamiltonian(0.25)
    assert np.allclose(h[np.ix_(out, idx)], 0.0)


def test_restriction_is_exact():
    s = build_scheme("ideal")
    cav = CavityConfig.from_transition_coupling(s, 5.0, 3.0)
    pulse = vstirap_pulse(s, 10.0, 10.0)
    a = run_vstirap(s, cav, pulse, restrict=True, keep_trajectory=True)
    b = run_vstirap(s, cav, pulse, restrict=False, keep_trajectory=True)
    assert a.trajectory.subspace_dim < b.trajectory.subspace_dim
    assert a.p_H == pytest.approx(b.p_H, abs=1e-9)
    np.testing.assert_allclose(a.trajectory.final_rho.elements, b.trajectory.final_rho.elements, atol=1e-9)


def test_tolerance_halving_stability():
    s = build_scheme("rb_d2")
    cav = cooperativity_cavity(s)
    pulse = vstirap_pulse(s, mhz(43), 0.5)
    a = run_vstirap(s, cav, pulse)
    b = run_vstirap(s, cav, pulse, rtol=5e-9, atol=5e-11)
    assert abs(a.p_H - b.p_H) < 1e-4


def test_invariant_checks_catch_trace_loss():
    lossy = Operator(TWO, np.diag([0.0, -0.5j]))
    rho0 = DensityMatrix(TWO, np.diag([0.0, 1.0]))
    with pytest.raises(InvariantViolation):
        evolve(rho0, GeneratorSpec([lossy]), (0.0, 1.0))
    traj = evolve(rho0, GeneratorSpec([lossy]), (0.0, 1.0), check=False)
    assert traj.max_trace_drift > 0.5


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_integration_failure_is_reported():
    h = Operator(TWO, np.array([[0, 1], [1, 0]]))
    with pytest.raises(IntegrationError):
        evolve(_ground(), GeneratorSpec((), [(h, lambda t: np.nan if t > 0.5 else 1.0)]), (0.0, 1.0))


def test_fock_leakage_flag():
    # a strongly driven oscillator climbs to the truncation edge
    layout = compose_spaces([("cavH", 3)])
    a = fock_lowering(3, "cavH")
    drive = Operator(layout, 5.0 * (a.elements + a.elements.conj().T))
    rho0 = DensityMatrix(layout, np.diag([1.0, 0.0, 0.0]))
    traj = evolve(rho0, GeneratorSpec([drive]), (0.0, 1.0))
    assert "fock_leakage" in traj.flags
    assert traj.leakage > 1e-6


def test_trajectory_csv():
    h = Operator(TWO, 0.5 * np.array([[0, 1], [1, 0]]))
    traj = evolve(_ground(), GeneratorSpec([h]), (0.0, 1.0), observables={"pe": EXC}, n_out=5)
    lines = traj.to_csv().strip().split("\n")
    assert lines[0] == "t_us,pe,trace"
    assert len(lines) == 6


def test_vstirap_never_makes_two_photons():
    s = build_scheme("rb_d2")
    cav = cooperativity_cavity(s)
    r = run_vstirap(s, cav, vstirap_pulse(s, mhz(43), 0.5), keep_trajectory=True)
    assert r.trajectory.leakage == 0.0

"""Experiments built on the engine: photon shots, re-preparation, pumping, bursts."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import pi, sqrt
from typing import Sequence

import numpy as np

from .atoms import (
    ATOM,
    AtomicScheme,
    BFieldConfig,
    CavityConfig,
    SchemeKind,
    build_scheme,
    mhz,
    system_layout,
)
from .lindblad import Trajectory, emission_efficiency, evolve
from .operators import DensityMatrix, compose_spaces, tensor
from .pulses import PI_POL, MaskedStirapPair, PulseSpec, Sin2, TopHat, pump_polarization
from .system import (
    atomic_generator,
    atomic_part,
    atomic_state,
    flux_operators,
    ground_mixture,
    ground_populations,
    relax_to_ground,
    transfer_ground_state,
    vstirap_generator,
    with_cavity_vacuum,
)

# ----------------------------------------------------------------------------
# presets

TABLE1_KAPPA = mhz(2.0)
TABLE1_COOPERATIVITY = 10.0


def cooperativity_cavity(scheme: AtomicScheme, C: float = TABLE1_COOPERATIVITY, kappa: float = TABLE1_KAPPA,
                         **kw) -> CavityConfig:
    """Cavity whose g1(+/-) <-> x coupling gives cooperativity C = g^2 / (2 kappa gamma)."""
    g = sqrt(2 * C * kappa * scheme.gamma)
    return CavityConfig.from_transition_coupling(scheme, g, kappa, **kw)


def vstirap_pulse(scheme: AtomicScheme, omega_max: float, T: float, detuning: float = 0.0) -> PulseSpec:
    """pi-polarised sin^2 drive on g2 -> x."""
    return PulseSpec(Sin2(omega_max, T), scheme.initial_ground_F, scheme.emitter_F, PI_POL, detuning,
                     label="vstirap")


@dataclass(frozen=True)
class StirapConfig:
    omega_max: float
    T: float
    n: int = 6
    a: float = 11.0
    phase: float = pi  # phi of the |Phi_phi> being transferred
    target_F: float | None = None  # excited level; emitter level when None

    def pair(self) -> MaskedStirapPair:
        return MaskedStirapPair(self.omega_max, self.T, self.n, self.a)


#: masked-pair settings for 150 ns Rb re-preparation
STIRAP_PRESETS = {
    SchemeKind.RB_D1: StirapConfig(mhz(41.0), 0.15, 6, 11.0),
    SchemeKind.RB_D2: StirapConfig(mhz(49.0), 0.15, 6, 11.0),
}


@dataclass(frozen=True)
class PumpingConfig:
    """Two constant pi-polarised fields, F=1 -> F'=2 and F=2 -> F'=2.

    Rabi frequencies are per unit dipole amplitude (each channel sees d * omega).
    """

    delta1: float
    delta2: float
    omega1: float
    omega2: float
    target_F: float = 2
    normalization: str = "raw"

    def pulses(self, duration: float) -> list[PulseSpec]:
        return [
            PulseSpec(TopHat(self.omega1, duration), 1, self.target_F, PI_POL, self.delta1,
                      self.normalization, "pump_F1"),
            PulseSpec(TopHat(self.omega2, duration), 2, self.target_F, PI_POL, self.delta2,
                      self.normalization, "pump_F2"),
        ]


PUMPING_PRESETS = {
    SchemeKind.RB_D1: PumpingConfig(mhz(4.0), mhz(-7.5), mhz(34.0), mhz(24.0)),
    SchemeKind.RB_D2: PumpingConfig(mhz(4.0), mhz(-7.5), mhz(57.5), mhz(25.5)),
}


@dataclass(frozen=True)
class BurstTiming:
    vstirap_T: float
    vstirap_omega: float
    repetition_rate: float  # Hz
    stirap: StirapConfig | None = None  # coherent re-preparation
    pumping_T: float | None = None  # incoherent re-preparation

    @property
    def mode(self) -> str:
        return "coherent" if self.stirap is not None else "incoherent"


BURST_PRESETS = {
    "coherent-2mhz": BurstTiming(0.36, mhz(105.0), 2e6, stirap=StirapConfig(mhz(41.0), 0.14, 6, 11.0)),
    "coherent-1mhz": BurstTiming(0.86, mhz(69.0), 1e6, stirap=StirapConfig(mhz(41.0), 0.14, 6, 11.0)),
    "incoherent": BurstTiming(0.5, mhz(43.0), 1e6 / 3.0, pumping_T=2.5),
}

# ----------------------------------------------------------------------------
# single photon window


@dataclass
class CycleResult:
    p_H: float
    p_pi: float
    post_rho: DensityMatrix  # atomic state, excited population relaxed, cavity in vacuum
    ground_populations: dict
    trajectory: Trajectory | None = None

    @property
    def purity(self) -> float:
        tot = self.p_H + self.p_pi
        return self.p_H / tot if tot > 0 else 0.0

    def to_dict(self) -> dict:
        return {
            "p_H": self.p_H,
            "p_pi": self.p_pi,
            "purity": self.purity,
            "ground_populations": {f"{F},{mF}": p for (F, mF), p in sorted(self.ground_populations.items())},
        }


def _as_atomic(scheme: AtomicScheme, rho0) -> DensityMatrix:
    if isinstance(rho0, DensityMatrix):
        return atomic_part(rho0)
    if isinstance(rho0, (int, np.integer)):
        return atomic_state(scheme, index=int(rho0))
    vec = np.asarray(rho0, dtype=complex)
    if vec.ndim == 1:
        return atomic_state(scheme, vec)
    return DensityMatrix(compose_spaces([(ATOM, scheme.dim)]), vec)


def run_vstirap(scheme: AtomicScheme, cavity: CavityConfig, pulse: PulseSpec, rho0=None, *,
                rtol: float = 1e-8, atol: float = 1e-10, n_out: int = 101, keep_trajectory: bool = False,
                restrict: bool = True) -> CycleResult:
    """One photon window [0, T]; the photon probability per mode is 2 kappa int <n> dt."""
    rho_a = _as_atomic(scheme, scheme.g2 if rho0 is None else rho0)
    gen = vstirap_generator(scheme, cavity, pulse)
    layout = gen.layout
    T = pulse.envelope.T
    traj = evolve(with_cavity_vacuum(rho_a, layout), gen, (0.0, T), rtol=rtol, atol=atol, n_out=n_out,
                  fluxes=flux_operators(scheme, cavity, layout), restrict=restrict)
    post = relax_to_ground(scheme, atomic_part(traj.final_rho))
    return CycleResult(
        p_H=emission_efficiency(traj, "H"),
        p_pi=emission_efficiency(traj, "pi"),
        post_rho=post,
        ground_populations=ground_populations(scheme, post),
        trajectory=traj if keep_trajectory else traj_summary(traj),
    )


def traj_summary(traj: Trajectory) -> Trajectory:
    """Trajectory without the density-matrix payload (keeps integrals and invariants)."""
    return replace(traj, snapshots=[])


def eta2(scheme: AtomicScheme, rho: DensityMatrix) -> float:
    """<Phi_pi,0|rho|Phi_pi,0> - <Phi_0,0|rho|Phi_0,0> on the final state of a window."""
    layout = rho.layout
    n_cav = layout.total_dim // scheme.dim
    r = rho.elements.reshape(scheme.dim, n_cav, scheme.dim, n_cav)[:, 0, :, 0]
    out = 0.0
    for phase, sign in ((pi, 1.0), (0.0, -1.0)):
        v = scheme.phi_state(phase)
        out += sign * float(np.real(v.conj() @ r @ v))
    return out


# ----------------------------------------------------------------------------
# coherent re-preparation


@dataclass
class ReprepResult:
    target_population: float
    post_rho: DensityMatrix
    trajectory: Trajectory | None = None


def stirap_pulses(scheme: AtomicScheme, cfg: StirapConfig) -> list[PulseSpec]:
    """Counter-intuitive pair taking |Phi_phi> to g2.

    The leading envelope (M cos theta) drives the pi transition g2 <-> x that
    the population ends in; the trailing one (M sin theta) drives the
    |Phi_phi> <-> x transition with matching sigma phase.
    """
    pair = cfg.pair()
    target = scheme.emitter_F if cfg.target_F is None else cfg.target_F
    return [
        PulseSpec(pair.pump, scheme.initial_ground_F, target, PI_POL, 0.0, label="stirap_g2"),
        PulseSpec(pair.stokes, scheme.cavity_ground_F, target, pump_polarization(cfg.phase), 0.0,
                  label="stirap_phi"),
    ]


def run_stirap_reprep(scheme: AtomicScheme, cfg: StirapConfig, rho0=None, *, rtol: float = 1e-8,
                      atol: float = 1e-10, n_out: int = 101, keep_trajectory: bool = False) -> ReprepResult:
    """Masked-pair STIRAP on the bare atom (the cavity is far detuned from these lines)."""
    rho_a = _as_atomic(scheme, scheme.phi_state(cfg.phase) if rho0 is None else rho0)
    layout = rho_a.layout
    gen = atomic_generator(scheme, layout, stirap_pulses(scheme, cfg))
    g2 = scheme.g2
    proj = np.zeros((scheme.dim, scheme.dim))
    proj[g2, g2] = 1.0
    traj = evolve(rho_a, gen, (0.0, cfg.T), rtol=rtol, atol=atol, n_out=n_out,
                  observables={"target": tensor(layout, {ATOM: proj})})
    return ReprepResult(float(traj.traces["target"][-1]), traj.final_rho, traj if keep_trajectory else None)


# ----------------------------------------------------------------------------
# incoherent re-preparation


@dataclass
class PumpingTrace:
    times: np.ndarray
    population: np.ndarray
    final_rho: DensityMatrix

    def threshold_time(self, level: float = 0.95) -> float | None:
        """First time the target population reaches ``level`` (linear interpolation)."""
        above = np.flatnonzero(self.population >= level)
        if len(above) == 0:
            return None
        i = int(above[0])
        if i == 0:
            return float(self.times[0])
        t0, t1 = self.times[i - 1], self.times[i]
        p0, p1 = self.population[i - 1], self.population[i]
        return float(t0 + (level - p0) * (t1 - t0) / (p1 - p0))


def pumping_initial_states(scheme: AtomicScheme) -> dict[str, DensityMatrix]:
    return {
        "phi_pi": atomic_state(scheme, scheme.phi_state(pi)),
        "mixed_F1": ground_mixture(scheme, 1),
        "mixed_F2": ground_mixture(scheme, 2),
    }


def run_optical_pumping(scheme: AtomicScheme, cfg: PumpingConfig, rho0, duration: float, *,
                        dt: float = 0.01, rtol: float = 1e-8, atol: float = 1e-10) -> PumpingTrace:
    """Population of (F=2, mF=0) under constant pumping, sampled every ``dt`` us."""
    if scheme.kind is SchemeKind.IDEAL:
        raise ValueError("optical pumping needs a Rb scheme")
    rho_a = _as_atomic(scheme, rho0)
    layout = rho_a.layout
    gen = atomic_generator(scheme, layout, cfg.pulses(duration))
    proj = np.zeros((scheme.dim, scheme.dim))
    proj[scheme.g2, scheme.g2] = 1.0
    n_out = int(round(duration / dt)) + 1
    traj = evolve(rho_a, gen, (0.0, duration), rtol=rtol, atol=atol, n_out=n_out,
                  observables={"target": tensor(layout, {ATOM: proj})})
    return PumpingTrace(traj.times, traj.traces["target"], traj.final_rho)


# ----------------------------------------------------------------------------
# phase of the photon-emitting superposition


@dataclass(frozen=True)
class CoherencePhase:
    phase: float  # nan when undefined
    magnitude: float

    @property
    def defined(self) -> bool:
        return self.magnitude >= 1e-6


def coherence_phase(scheme: AtomicScheme, rho: DensityMatrix) -> CoherencePhase:
    """arg <-1|rho|+1> of the cavity ground level, in [0, 2 pi)."""
    r = atomic_part(rho).elements
    F = scheme.cavity_ground_F
    c = r[scheme.ground(F, -1), scheme.ground(F, 1)]
    mag = float(abs(c))
    if mag < 1e-6:
        return CoherencePhase(float("nan"), mag)
    return CoherencePhase(float(np.angle(c)) % (2 * pi), mag)


@dataclass(frozen=True)
class ScanPoint:
    splitting: float
    phase: float
    efficiency: float
    coherence: float


def bfield_scan(kind: SchemeKind | str, splittings: Sequence[float], *, T: float = 0.5,
                omega_max: float = mhz(30.0), C: float = TABLE1_COOPERATIVITY,
                kappa: float = TABLE1_KAPPA) -> list[ScanPoint]:
    """Phase and H efficiency of one V-STIRAP window vs Zeeman splitting.

    The phase is read from the atom at the end of the window; it is unwrapped
    along the scan, starting from its value in [0, 2 pi).
    """
    raw = []
    for s in splittings:
        scheme = build_scheme(kind, BFieldConfig(s))
        cavity = cooperativity_cavity(scheme, C, kappa)
        res = run_vstirap(scheme, cavity, vstirap_pulse(scheme, omega_max, T))
        ph = coherence_phase(scheme, res.post_rho)
        raw.append((s, ph, res.p_H))
    phases = np.array([p.phase for _, p, _ in raw])
    ok = np.isfinite(phases)
    if ok.any():
        phases[ok] = np.unwrap(phases[ok])
    return [ScanPoint(float(s), float(phases[i]), float(eta), p.magnitude) for i, (s, p, eta) in enumerate(raw)]


# ----------------------------------------------------------------------------
# bursts


@dataclass
class BurstReport:
    mode: str
    repetition_rate: float
    per_cycle: list = field(default_factory=list)
    ground_after_cycle: list = field(default_factory=list)  # F=2 populations after each re-preparation
    reprep_efficiency: list = field(default_factory=list)

    @property
    def cumulative_eff(self) -> list[float]:
        return list(np.cumprod([c.p_H for c in self.per_cycle]))

    @property
    def coincidence_rate(self) -> list[float]:
        return [eff * self.repetition_rate / (n + 1) for n, eff in enumerate(self.cumulative_eff)]

    @property
    def pi_events(self) -> list[float]:
        """Per-cycle probability of a wrongly polarised photon (a re-pump trigger)."""
        return [c.p_pi for c in self.per_cycle]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "repetition_rate_hz": self.repetition_rate,
            "cumulative_eff": self.cumulative_eff,
            "coincidence_rate_hz": self.coincidence_rate,
            "pi_events": self.pi_events,
            "reprep_efficiency": self.reprep_efficiency,
            "per_cycle": [c.to_dict() for c in self.per_cycle],
            "ground_after_cycle": [
                {f"{F},{mF}": p for (F, mF), p in sorted(g.items())} for g in self.ground_after_cycle
            ],
        }


def run_burst(N: int, timing: BurstTiming | str = "incoherent", *, C: float = TABLE1_COOPERATIVITY,
              kappa: float = TABLE1_KAPPA, rho0=None, pumping: PumpingConfig | None = None) -> BurstReport:
    """N chained cycles of D2 photon production and D1 re-preparation.

    Chaining is unconditional: after each window the cavity is reset to
    vacuum and the atomic state (excited population relaxed) is carried on.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if isinstance(timing, str):
        timing = BURST_PRESETS[timing]
    d2 = build_scheme(SchemeKind.RB_D2)
    d1 = build_scheme(SchemeKind.RB_D1)
    cavity = cooperativity_cavity(d2, C, kappa)
    pulse = vstirap_pulse(d2, timing.vstirap_omega, timing.vstirap_T)
    pumping = pumping or PUMPING_PRESETS[SchemeKind.RB_D1]
    report = BurstReport(timing.mode, timing.repetition_rate)
    rho = _as_atomic(d2, d2.g2 if rho0 is None else rho0)
    for _ in range(N):
        cycle = run_vstirap(d2, cavity, pulse, rho)
        report.per_cycle.append(cycle)
        rho1 = transfer_ground_state(cycle.post_rho, d2, d1)
        if timing.stirap is not None:
            rep = run_stirap_reprep(d1, timing.stirap, rho1)
            after, eff = rep.post_rho, rep.target_population
        else:
            trace = run_optical_pumping(d1, pumping, rho1, timing.pumping_T)
            after, eff = trace.final_rho, float(trace.population[-1])
        report.reprep_efficiency.append(eff)
        rho = transfer_ground_state(after, d1, d2)
        pops = ground_populations(d2, rho)
        report.ground_after_cycle.append({k: v for k, v in pops.items() if k[0] == 2})
    return report

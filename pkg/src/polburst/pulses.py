"""Classical drive envelopes and their rotating-frame Hamiltonian terms."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from math import exp, pi, sin, cos, sqrt
from typing import Callable, Sequence

import numpy as np

from .atoms import ATOM, AtomicScheme, manifold_frame_term
from .operators import Operator, SpaceLayout, tensor


# polarisation vectors over (sigma-, pi, sigma+), i.e. q = -1, 0, +1
PI_POL = (0.0, 1.0, 0.0)
SIGMA_MINUS = (1.0, 0.0, 0.0)
SIGMA_PLUS = (0.0, 0.0, 1.0)


def linear_pol(phase: float = 0.0) -> tuple[complex, complex, complex]:
    """(sigma- + e^{i phase} sigma+)/sqrt(2); phase 0 is the cavity H direction."""
    return (1 / sqrt(2), 0.0, np.exp(1j * phase) / sqrt(2))


def pump_polarization(phi: float = pi) -> tuple[complex, complex, complex]:
    """Pump polarisation that bright-couples |Phi_phi> to x.

    For |Phi_pi> this is the H polarisation; the relative sigma phase is pi - phi.
    """
    return linear_pol(pi - phi)


@dataclass(frozen=True)
class Sin2:
    omega_max: float
    T: float
    t_on: float = 0.0

    def __call__(self, t: float) -> float:
        return sin2_envelope(self, t)


@dataclass(frozen=True)
class TopHat:
    omega: float
    T: float
    t_on: float = 0.0

    def __call__(self, t: float) -> float:
        return tophat_envelope(self, t)


@dataclass(frozen=True)
class MaskedStirapPair:
    """Interleaved pair with constant rms amplitude under a hyper-Gaussian mask.

    ``c`` defaults to T/3 when None.
    """

    omega_max: float
    T: float
    n: int = 6
    a: float = 14.0
    c: float | None = None
    t_on: float = 0.0

    @property
    def width(self) -> float:
        return self.T / 3 if self.c is None else self.c

    def mask(self, t: float) -> float:
        return exp(-(((t - self.t_on - self.T / 2) / self.width) ** (2 * self.n)))

    def stokes(self, t: float) -> float:
        return masked_stirap_pair(self, t)[0]

    def pump(self, t: float) -> float:
        return masked_stirap_pair(self, t)[1]


def sin2_envelope(spec: Sin2, t: float) -> float:
    s = t - spec.t_on
    if s < 0 or s > spec.T:
        return 0.0
    return spec.omega_max * sin(pi * s / spec.T) ** 2


def tophat_envelope(spec: TopHat, t: float) -> float:
    s = t - spec.t_on
    return spec.omega if 0.0 <= s <= spec.T else 0.0


def masked_stirap_pair(spec: MaskedStirapPair, t: float) -> tuple[float, float]:
    """(Omega_S, Omega_P) = Omega_max M(t) (sin theta, cos theta)."""
    s = t - spec.t_on
    if s < 0 or s > spec.T:
        return 0.0, 0.0
    u = s - spec.T / 2
    arg = -spec.a * u / spec.T
    # logistic in a numerically safe form
    theta = pi / (2 * (1 + exp(arg))) if arg < 700 else 0.0
    m = spec.omega_max * spec.mask(t)
    return m * sin(theta), m * cos(theta)


Envelope = Callable[[float], float]


@dataclass(frozen=True)
class PulseSpec:
    """A drive of one polarisation addressing transitions out of ``ground_F``.

    ``envelope`` gives the effective Rabi frequency (rad/us).  With
    ``normalization="strongest"`` it equals the coupling of the strongest
    bright superposition of ``ground_F`` to a state of ``target_F``; with
    ``"raw"`` each channel carries ``envelope * pol_q * d``.
    ``detuning`` is from ``ground_F -> target_F``, blue positive.
    """

    envelope: Envelope
    ground_F: float
    target_F: float
    polarization: tuple = PI_POL
    detuning: float = 0.0
    normalization: str = "strongest"
    label: str = "drive"

    def __post_init__(self):
        pol = np.asarray(self.polarization, dtype=complex)
        if pol.shape != (3,):
            raise ValueError("polarization must be a 3-vector over (sigma-, pi, sigma+)")
        if abs(np.linalg.norm(pol) - 1.0) > 1e-12:
            raise ValueError("polarization must have unit norm")
        if self.normalization not in ("strongest", "raw"):
            raise ValueError(f"unknown normalization {self.normalization!r}")


def coupling_matrix(scheme: AtomicScheme, spec: PulseSpec) -> np.ndarray:
    """Atomic raising part sum_q pol_q d |e><g| for unit envelope, before normalisation."""
    ground = set(scheme.manifold_indices("ground", spec.ground_F))
    if not ground:
        raise KeyError(f"ground level F={spec.ground_F} absent from {scheme.kind.value} scheme")
    if spec.target_F not in scheme.excited_splittings:
        raise KeyError(f"excited level F'={spec.target_F} absent from {scheme.kind.value} scheme")
    pol = np.asarray(spec.polarization, dtype=complex)
    m = np.zeros((scheme.dim, scheme.dim), dtype=complex)
    for (g, e, q), amp in scheme.couplings.items():
        if g in ground:
            m[e, g] += pol[q + 1] * amp
    return m


def rabi_scale(scheme: AtomicScheme, spec: PulseSpec) -> float:
    if spec.normalization == "raw":
        return 1.0
    m = coupling_matrix(scheme, spec)
    rows = scheme.manifold_indices("excited", spec.target_F)
    strongest = max(np.linalg.norm(m[e]) for e in rows)
    if strongest == 0.0:
        raise ValueError(f"drive {spec.label!r} couples nothing in F'={spec.target_F}")
    return 1.0 / strongest


def drive_operators(scheme: AtomicScheme, spec: PulseSpec, layout: SpaceLayout) -> tuple[Operator, Operator]:
    """(static frame term, coupling term for unit envelope)."""
    raise_op = 0.5 * rabi_scale(scheme, spec) * coupling_matrix(scheme, spec)
    coupling = tensor(layout, {ATOM: raise_op + raise_op.conj().T})
    frame = tensor(layout, {ATOM: manifold_frame_term(scheme, spec.ground_F, spec.detuning, spec.target_F)})
    return frame, coupling


def drive_hamiltonian(scheme: AtomicScheme, spec: PulseSpec, layout: SpaceLayout, t: float) -> Operator:
    frame, coupling = drive_operators(scheme, spec, layout)
    return frame + coupling * spec.envelope(t)


def envelope_csv(pair: MaskedStirapPair, samples: int = 201) -> str:
    """CSV trace ``t_us, omega_s_mhz, omega_p_mhz`` of a masked pair."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t_us", "omega_s_mhz", "omega_p_mhz"])
    for t in np.linspace(pair.t_on, pair.t_on + pair.T, samples):
        s, p = masked_stirap_pair(pair, float(t))
        w.writerow([f"{t:.9g}", f"{s / (2 * pi):.9g}", f"{p / (2 * pi):.9g}"])
    return buf.getvalue()

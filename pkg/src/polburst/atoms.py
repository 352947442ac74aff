"""Level schemes, dipole couplings and the atom-side operators.

Frequencies are angular, in rad/us; ``mhz(x)`` converts a value quoted as
"x MHz" (i.e. x * 2pi) into that unit.

The quantisation axis is perpendicular to the cavity axis, so the two cavity
modes are pi (q = 0) and H = (sigma+ + sigma-)/sqrt(2).  ``q`` always labels
the absorbed polarisation, ``q = mF' - mF``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from math import pi, sqrt
from typing import Iterable

import numpy as np

from .angular import wigner3j, wigner6j
from .operators import LayoutError, Operator, SpaceLayout, compose_spaces, tensor

TWO_PI = 2 * pi
NUCLEAR_SPIN = 1.5
#: Ground-state splitting per gauss between mF = +1 and -1 of F = 1.
MHZ_PER_GAUSS = 0.7


def mhz(x: float) -> float:
    """Angular frequency (rad/us) of a quantity quoted as ``x`` MHz x 2pi."""
    return TWO_PI * x


def to_mhz(w: float) -> float:
    return w / TWO_PI


class SchemeKind(str, Enum):
    IDEAL = "ideal"
    RB_D1 = "rb_d1"
    RB_D2 = "rb_d2"


@dataclass(frozen=True)
class Level:
    manifold: str  # "ground" | "excited"
    F: float
    mF: float
    energy_shift: float = 0.0

    @property
    def key(self) -> tuple[str, float, float]:
        return (self.manifold, self.F, self.mF)

    def label(self) -> str:
        prime = "'" if self.manifold == "excited" else ""
        return f"F{prime}={_fmt(self.F)},mF={_fmt(self.mF)}"


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else f"{int(2 * x)}/2"


# line data: (J', excited F' levels, hyperfine energies relative to F'=1)
LINE_DATA = {
    SchemeKind.RB_D1: {"J_exc": 0.5, "F_exc": (1, 2), "gamma_mhz": 2.87},
    SchemeKind.RB_D2: {"J_exc": 1.5, "F_exc": (0, 1, 2, 3), "gamma_mhz": 3.03},
}
#: F' energies (MHz x 2pi) relative to F' = 1.
DEFAULT_EXCITED_SHIFTS_MHZ = {
    SchemeKind.RB_D1: {1: 0.0, 2: 816.0},
    SchemeKind.RB_D2: {0: -72.0, 1: 0.0, 2: 160.0, 3: 427.0},
}


@dataclass(frozen=True)
class BFieldConfig:
    """Weak field along the quantisation axis.

    ``splitting`` is the energy difference between mF = +1 and mF = -1 of the
    F = 1 ground level (rad/us).
    """

    splitting: float = 0.0

    def __post_init__(self):
        if self.splitting < 0:
            raise ValueError("splitting must be non-negative")

    @classmethod
    def from_gauss(cls, gauss: float) -> "BFieldConfig":
        return cls(mhz(MHZ_PER_GAUSS * gauss))

    @property
    def gauss(self) -> float:
        return to_mhz(self.splitting) / MHZ_PER_GAUSS


@dataclass(frozen=True)
class AtomicScheme:
    kind: SchemeKind
    states: tuple[Level, ...]
    couplings: dict  # (ground index, excited index, q) -> amplitude
    gamma: float
    excited_splittings: dict  # F' -> energy of that manifold (rad/us)
    ideal_F: float | None = None

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def ground_indices(self) -> list[int]:
        return [i for i, s in enumerate(self.states) if s.manifold == "ground"]

    @property
    def excited_indices(self) -> list[int]:
        return [i for i, s in enumerate(self.states) if s.manifold == "excited"]

    def index(self, manifold: str, F: float, mF: float) -> int:
        for i, s in enumerate(self.states):
            if s.manifold == manifold and s.F == F and s.mF == mF:
                return i
        raise KeyError(f"no {manifold} state F={F}, mF={mF} in {self.kind.value} scheme")

    def ground(self, F: float, mF: float) -> int:
        return self.index("ground", F, mF)

    def excited(self, F: float, mF: float) -> int:
        return self.index("excited", F, mF)

    def manifold_indices(self, manifold: str, F: float) -> list[int]:
        return [i for i, s in enumerate(self.states) if s.manifold == manifold and s.F == F]

    def coupling(self, g: int, e: int, q: int) -> float:
        return self.couplings.get((g, e, q), 0.0)

    @property
    def cavity_ground_F(self) -> float:
        """Ground level the cavity (and the photon's final atomic state) lives on."""
        return self.ideal_F if self.kind is SchemeKind.IDEAL else 1

    @property
    def initial_ground_F(self) -> float:
        return self.ideal_F + 1 if self.kind is SchemeKind.IDEAL else 2

    @property
    def emitter_F(self) -> float:
        """Excited level used for photon production (x)."""
        return self.ideal_F if self.kind is SchemeKind.IDEAL else 1

    @property
    def g2(self) -> int:
        return self.ground(self.initial_ground_F, 0)

    @property
    def x(self) -> int:
        return self.excited(self.emitter_F, 0)

    def phi_state(self, phase: float) -> np.ndarray:
        """Atomic vector (|g1+> + e^{i phase}|g1->)/sqrt(2)."""
        vec = np.zeros(self.dim, dtype=complex)
        F = self.cavity_ground_F
        vec[self.ground(F, 1)] = 1 / sqrt(2)
        vec[self.ground(F, -1)] = np.exp(1j * phase) / sqrt(2)
        return vec

    def basis(self, index: int) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=complex)
        vec[index] = 1.0
        return vec

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "gamma_rad_per_us": self.gamma,
            "excited_splittings_mhz": {_fmt(F): to_mhz(w) for F, w in sorted(self.excited_splittings.items())},
            "states": [
                {"index": i, "manifold": s.manifold, "F": s.F, "mF": s.mF, "energy_shift_rad_per_us": s.energy_shift}
                for i, s in enumerate(self.states)
            ],
            "couplings": [
                {"ground": g, "excited": e, "q": q, "amplitude": a}
                for (g, e, q), a in sorted(self.couplings.items())
            ],
        }

    def dump_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, **kwargs)


# ----------------------------------------------------------------------------
# couplings


def _rb_raw_amplitude(J_exc: float, Fg: float, mg: float, Fe: float, me: float, q: int) -> float:
    """<F' mF'| d_q |F mF> up to the reduced J matrix element (J = 1/2, I = 3/2)."""
    if me - mg != q:
        return 0.0
    J = 0.5
    line = (-1) ** int(round(Fe + J + 1 + NUCLEAR_SPIN)) * sqrt((2 * Fe + 1) * (2 * J + 1)) * wigner6j(
        J, J_exc, 1, Fe, Fg, NUCLEAR_SPIN
    )
    ang = (-1) ** int(round(Fe - 1 + mg)) * sqrt(2 * Fg + 1) * wigner3j(Fe, 1, Fg, me, -q, -mg)
    return line * ang


def _ideal_raw_amplitude(Fg: float, mg: float, Fe: float, me: float, q: int) -> float:
    if me - mg != q:
        return 0.0
    return (-1) ** int(round(Fe - 1 + mg)) * sqrt(2 * Fg + 1) * wigner3j(Fe, 1, Fg, me, -q, -mg)


def _normalise(states, raw) -> dict:
    couplings = {}
    for e, se in enumerate(states):
        if se.manifold != "excited":
            continue
        row = {k: v for k, v in raw.items() if k[1] == e and v != 0.0}
        norm = sqrt(sum(v * v for v in row.values()))
        for k, v in row.items():
            couplings[k] = v / norm
    return couplings


def dipole_coupling(kind: SchemeKind | str, ground: tuple[float, float], excited: tuple[float, float], q: int,
                    ideal_F: float = 1) -> float:
    """Normalised transition amplitude between ground (F, mF) and excited (F', mF')."""
    scheme = build_scheme(kind, ideal_F=ideal_F)
    try:
        g = scheme.ground(*ground)
        e = scheme.excited(*excited)
    except KeyError as err:
        raise KeyError(str(err)) from None
    return scheme.coupling(g, e, q)


def zeeman_shift(manifold: str, F: float, mF: float, splitting: float, kind: SchemeKind) -> float:
    """Linear ground-state Zeeman shift; g_F(F=2) = -g_F(F=1) for 87Rb."""
    if manifold != "ground" or splitting == 0.0:
        return 0.0
    if kind is SchemeKind.IDEAL:
        return 0.5 * splitting * mF
    return 0.5 * splitting * mF * (1.0 if F == 1 else -1.0)


def build_scheme(
    kind: SchemeKind | str,
    bfield: BFieldConfig | None = None,
    *,
    ideal_F: float = 1,
    gamma: float | None = None,
    excited_shifts: dict | None = None,
) -> AtomicScheme:
    """Construct a level scheme.

    The ideal scheme holds g1-, g1^0, g1+ (F), g2 (F+1, mF=0) and x (F'=F, mF'=0).
    The Rb schemes hold all 8 ground states plus every hyperfine state of the
    D1 (F'=1,2) or D2 (F'=0..3) excited level.
    """
    kind = SchemeKind(kind)
    bfield = bfield or BFieldConfig()
    split = bfield.splitting

    if kind is SchemeKind.IDEAL:
        F = ideal_F
        levels = [
            ("ground", F, -1),
            ("ground", F, 0),
            ("ground", F, 1),
            ("ground", F + 1, 0),
            ("excited", F, 0),
        ]
        states = tuple(Level(m, f, mf, zeeman_shift(m, f, mf, split, kind) if (m, f) == ("ground", F) else 0.0)
                       for m, f, mf in levels)
        raw = {}
        for gi, sg in enumerate(states[:4]):
            for q in (-1, 0, 1):
                raw[(gi, 4, q)] = _ideal_raw_amplitude(sg.F, sg.mF, F, 0, q)
        couplings = _normalise(states, raw)
        return AtomicScheme(kind, states, couplings, gamma if gamma is not None else 1.0, {F: 0.0}, ideal_F=F)

    data = LINE_DATA[kind]
    shifts_mhz = dict(DEFAULT_EXCITED_SHIFTS_MHZ[kind])
    if excited_shifts:
        shifts_mhz.update({int(k): to_mhz(v) for k, v in excited_shifts.items()})
    splittings = {F: mhz(shifts_mhz[F]) for F in data["F_exc"]}
    states = []
    for Fg in (1, 2):
        for mg in range(-Fg, Fg + 1):
            states.append(Level("ground", Fg, mg, zeeman_shift("ground", Fg, mg, split, kind)))
    for Fe in data["F_exc"]:
        for me in range(-Fe, Fe + 1):
            states.append(Level("excited", Fe, me, splittings[Fe]))
    states = tuple(states)
    raw = {}
    for g, sg in enumerate(states):
        if sg.manifold != "ground":
            continue
        for e, se in enumerate(states):
            if se.manifold != "excited":
                continue
            for q in (-1, 0, 1):
                amp = _rb_raw_amplitude(data["J_exc"], sg.F, sg.mF, se.F, se.mF, q)
                if amp != 0.0:
                    raw[(g, e, q)] = amp
    couplings = _normalise(states, raw)
    return AtomicScheme(kind, states, couplings, gamma if gamma is not None else mhz(data["gamma_mhz"]), splittings)


# ----------------------------------------------------------------------------
# operators on the composite space


ATOM = "atom"
CAV_H = "cavH"
CAV_PI = "cavPi"


def system_layout(scheme: AtomicScheme, fock_dim: int | None = 3) -> SpaceLayout:
    """atom x cavH x cavPi, or the bare atom when ``fock_dim`` is None."""
    if fock_dim is None:
        return compose_spaces([(ATOM, scheme.dim)])
    return compose_spaces([(ATOM, scheme.dim), (CAV_H, fock_dim), (CAV_PI, fock_dim)])


def atomic_operator(layout: SpaceLayout, matrix: np.ndarray) -> Operator:
    return tensor(layout, {ATOM: matrix})


def atomic_projector(scheme: AtomicScheme, vectors: Iterable[np.ndarray]) -> np.ndarray:
    return sum(np.outer(v, v.conj()) for v in vectors)


def transition(scheme: AtomicScheme, to: int, frm: int) -> np.ndarray:
    m = np.zeros((scheme.dim, scheme.dim), dtype=complex)
    m[to, frm] = 1.0
    return m


@dataclass(frozen=True)
class CollapseSpec:
    excited: int
    ground: int
    q: int
    amplitude: float  # sqrt(2 gamma) * dipole amplitude

    def matrix(self, dim: int) -> np.ndarray:
        m = np.zeros((dim, dim), dtype=complex)
        m[self.ground, self.excited] = self.amplitude
        return m


def decay_channels(scheme: AtomicScheme) -> list[CollapseSpec]:
    """One jump per (excited -> ground, q) channel; each excited state decays at 2 gamma."""
    rate = sqrt(2 * scheme.gamma)
    return [
        CollapseSpec(e, g, q, rate * amp)
        for (g, e, q), amp in sorted(scheme.couplings.items())
        if amp != 0.0
    ]


def bare_hamiltonian(scheme: AtomicScheme) -> np.ndarray:
    """Diagonal atomic energies: excited hyperfine offsets and ground Zeeman shifts."""
    return np.diag([s.energy_shift for s in scheme.states]).astype(complex)


def manifold_frame_term(scheme: AtomicScheme, ground_F: float, detuning: float, target_excited_F: float) -> np.ndarray:
    """Rotating-frame energy of a ground level addressed by one field.

    A field detuned by ``detuning`` (blue positive) from ``ground_F -> target_excited_F``
    puts that ground level at ``detuning + E(F')``.
    """
    if target_excited_F not in scheme.excited_splittings:
        raise KeyError(f"excited level F'={target_excited_F} absent from {scheme.kind.value} scheme")
    idx = scheme.manifold_indices("ground", ground_F)
    if not idx:
        raise KeyError(f"ground level F={ground_F} absent from {scheme.kind.value} scheme")
    m = np.zeros((scheme.dim, scheme.dim), dtype=complex)
    for i in idx:
        m[i, i] = detuning + scheme.excited_splittings[target_excited_F]
    return m


@dataclass(frozen=True)
class CavityConfig:
    """Two degenerate cavity modes {H, pi} sharing kappa and detuning.

    ``detuning`` is measured from the F_cav -> F'(emitter) transition, blue positive.
    """

    g_max: float
    kappa: float
    detuning: float = 0.0
    fock_dim: int = 3

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.g_max < 0:
            raise ValueError("g_max must be non-negative")
        if self.fock_dim < 2:
            raise ValueError("fock_dim must be at least 2")

    @classmethod
    def from_transition_coupling(cls, scheme: AtomicScheme, g: float, kappa: float, **kw) -> "CavityConfig":
        """Config whose coupling on the g1(+/-) <-> x transition equals ``g``."""
        return cls(g_max=g / reference_sigma_amplitude(scheme), kappa=kappa, **kw)

    def transition_coupling(self, scheme: AtomicScheme) -> float:
        return self.g_max * reference_sigma_amplitude(scheme)

    def cooperativity(self, scheme: AtomicScheme) -> float:
        g = self.transition_coupling(scheme)
        return g * g / (2 * self.kappa * scheme.gamma)


def reference_sigma_amplitude(scheme: AtomicScheme) -> float:
    """|d| of the sigma transition between g1(+/-) and x."""
    F = scheme.cavity_ground_F
    return abs(scheme.coupling(scheme.ground(F, -1), scheme.x, 1))


def cavity_interaction(scheme: AtomicScheme, cavity: CavityConfig, layout: SpaceLayout) -> list[Operator]:
    """H-mode and pi-mode Jaynes-Cummings terms on the cavity ground level.

    Only transitions from the ground level the cavity is tuned to are kept; the
    other ground level is several GHz away.
    """
    for label in (CAV_H, CAV_PI):
        if label not in layout:
            raise LayoutError(f"layout lacks cavity subsystem {label!r}")
    Fc = scheme.cavity_ground_F
    ground = set(scheme.manifold_indices("ground", Fc))
    weights = {CAV_H: {1: 1 / sqrt(2), -1: 1 / sqrt(2)}, CAV_PI: {0: 1.0}}
    terms = []
    for mode in (CAV_H, CAV_PI):
        sigma = np.zeros((scheme.dim, scheme.dim), dtype=complex)  # lowering: |g><e|
        for (g, e, q), amp in scheme.couplings.items():
            if g in ground and q in weights[mode]:
                sigma[g, e] += weights[mode][q] * amp
        dim = layout.dim(mode)
        a = np.diag(np.sqrt(np.arange(1, dim)), k=1)
        emit = tensor(layout, {ATOM: sigma, mode: a.conj().T}).elements
        terms.append(Operator(layout, cavity.g_max * (emit + emit.conj().T)))
    return terms


def cavity_frame_term(scheme: AtomicScheme, cavity: CavityConfig, layout: SpaceLayout) -> Operator:
    m = manifold_frame_term(scheme, scheme.cavity_ground_F, cavity.detuning, scheme.emitter_F)
    return tensor(layout, {ATOM: m})


def cavity_decay_ops(cavity: CavityConfig, layout: SpaceLayout) -> list[tuple[str, Operator]]:
    out = []
    for mode in (CAV_H, CAV_PI):
        dim = layout.dim(mode)
        a = np.diag(np.sqrt(np.arange(1, dim)), k=1)
        out.append((mode, tensor(layout, {mode: sqrt(2 * cavity.kappa) * a})))
    return out


def number_operator(layout: SpaceLayout, mode: str) -> Operator:
    dim = layout.dim(mode)
    return tensor(layout, {mode: np.diag(np.arange(dim, dtype=float))})


def coupling_for_mode_volume(volume: float, line: str, calib: tuple[float, float]) -> float:
    """g = g0 sqrt(V0 / V), with D2 couplings 2.3x those of D1 for the same mirrors.

    ``calib`` is a D1-referenced (V0, g0) pair.
    """
    if volume <= 0:
        raise ValueError("mode volume must be positive")
    v0, g0 = calib
    if v0 <= 0:
        raise ValueError("calibration volume must be positive")
    line = line.upper()
    if line not in ("D1", "D2"):
        raise ValueError(f"unknown line {line!r}")
    g = g0 * sqrt(v0 / volume)
    return g * D2_OVER_D1_COUPLING if line == "D2" else g


D2_OVER_D1_COUPLING = 2.3

"""Assembly of master-equation generators for the atom-cavity experiments."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .atoms import (
    ATOM,
    CAV_H,
    CAV_PI,
    AtomicScheme,
    CavityConfig,
    bare_hamiltonian,
    cavity_decay_ops,
    cavity_frame_term,
    cavity_interaction,
    decay_channels,
    system_layout,
)
from .lindblad import GeneratorSpec, photon_flux_operator
from .operators import DensityMatrix, Operator, SpaceLayout, compose_spaces, tensor
from .pulses import PulseSpec, drive_operators


def atomic_generator(scheme: AtomicScheme, layout: SpaceLayout, drives: Sequence[PulseSpec]) -> GeneratorSpec:
    """Bare atom + drives + spontaneous decay on ``layout``."""
    static = [tensor(layout, {ATOM: bare_hamiltonian(scheme)})]
    driven = []
    addressed = set()
    for spec in drives:
        if spec.ground_F in addressed:
            raise ValueError(f"ground level F={spec.ground_F} addressed by two fields")
        addressed.add(spec.ground_F)
        frame, coupling = drive_operators(scheme, spec, layout)
        static.append(frame)
        driven.append((coupling, spec.envelope))
    collapse = [(tensor(layout, {ATOM: c.matrix(scheme.dim)}), 1.0) for c in decay_channels(scheme)]
    return GeneratorSpec(static, driven, collapse)


def cavity_generator(scheme: AtomicScheme, cavity: CavityConfig, layout: SpaceLayout) -> GeneratorSpec:
    static = [cavity_frame_term(scheme, cavity, layout), *cavity_interaction(scheme, cavity, layout)]
    collapse = [(op, 1.0) for _, op in cavity_decay_ops(cavity, layout)]
    return GeneratorSpec(static, (), collapse)


def vstirap_generator(scheme: AtomicScheme, cavity: CavityConfig, pulse: PulseSpec) -> GeneratorSpec:
    if pulse.ground_F == scheme.cavity_ground_F:
        raise ValueError("drive and cavity address the same ground level")
    layout = system_layout(scheme, cavity.fock_dim)
    return atomic_generator(scheme, layout, [pulse]).combined(cavity_generator(scheme, cavity, layout))


def vacuum(layout: SpaceLayout) -> np.ndarray:
    dims = [(label, dim) for label, dim in layout.subsystems if label != ATOM]
    vec = np.zeros(int(np.prod([d for _, d in dims])), dtype=complex)
    vec[0] = 1.0
    return vec


def with_cavity_vacuum(rho_atom: DensityMatrix, layout: SpaceLayout) -> DensityMatrix:
    vac = vacuum(layout)
    return DensityMatrix(layout, np.kron(rho_atom.elements, np.outer(vac, vac)), validate=False)


def atomic_part(rho: DensityMatrix) -> DensityMatrix:
    if rho.layout.labels == (ATOM,):
        return rho
    reduced = rho.partial_trace([ATOM])
    return DensityMatrix(compose_spaces([(ATOM, reduced.shape[0])]), reduced, validate=False)


def relax_to_ground(scheme: AtomicScheme, rho_atom: DensityMatrix) -> DensityMatrix:
    """Let any excited population decay (no drives): populations follow the branching ratios."""
    r = np.array(rho_atom.elements)
    ground = scheme.ground_indices
    out = np.zeros_like(r)
    out[np.ix_(ground, ground)] = r[np.ix_(ground, ground)]
    for (g, e, q), amp in scheme.couplings.items():
        out[g, g] += amp * amp * r[e, e].real
    return DensityMatrix(rho_atom.layout, out, validate=False)


def transfer_ground_state(rho_atom: DensityMatrix, src: AtomicScheme, dst: AtomicScheme) -> DensityMatrix:
    """Carry the (relaxed) ground-state block from one level scheme to another."""
    relaxed = relax_to_ground(src, rho_atom).elements
    out = np.zeros((dst.dim, dst.dim), dtype=complex)
    src_keys = [src.states[i] for i in src.ground_indices]
    dst_idx = []
    for lvl in src_keys:
        dst_idx.append(dst.ground(lvl.F, lvl.mF))
    sg = src.ground_indices
    out[np.ix_(dst_idx, dst_idx)] = relaxed[np.ix_(sg, sg)]
    return DensityMatrix(compose_spaces([(ATOM, dst.dim)]), out, validate=False)


def atomic_state(scheme: AtomicScheme, vector=None, index: int | None = None) -> DensityMatrix:
    layout = compose_spaces([(ATOM, scheme.dim)])
    if index is not None:
        vector = scheme.basis(index)
    return DensityMatrix.pure(layout, vector)


def ground_mixture(scheme: AtomicScheme, F: float) -> DensityMatrix:
    layout = compose_spaces([(ATOM, scheme.dim)])
    return DensityMatrix.mixture(layout, [scheme.basis(i) for i in scheme.manifold_indices("ground", F)])


def ground_populations(scheme: AtomicScheme, rho_atom: DensityMatrix) -> dict:
    diag = np.real(np.diag(rho_atom.elements))
    return {(scheme.states[i].F, scheme.states[i].mF): float(diag[i]) for i in scheme.ground_indices}


def flux_operators(scheme: AtomicScheme, cavity: CavityConfig, layout: SpaceLayout) -> dict[str, Operator]:
    """Mode-resolved emitted-photon flux 2 kappa <n>, plus the H flux projected on |Phi_pi>."""
    phi = scheme.phi_state(np.pi)
    return {
        "H": photon_flux_operator(layout, CAV_H, cavity.kappa),
        "pi": photon_flux_operator(layout, CAV_PI, cavity.kappa),
        "H|phi_pi": photon_flux_operator(layout, CAV_H, cavity.kappa, np.outer(phi, phi.conj())),
    }

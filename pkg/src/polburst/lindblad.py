"""Time-dependent Lindblad integration and photon-flux efficiencies.

The master equation is

    drho/dt = -i[H(t), rho] + sum_k w_k (C_k rho C_k^+ - 1/2 {C_k^+ C_k, rho})

with H(t) = sum(static) + sum_j f_j(t) H_j.  It is integrated with an
adaptive 8th-order Dormand-Prince scheme; photon-flux integrals are carried
as extra ODE components so they share the integrator's error control.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .operators import DensityMatrix, LayoutError, Operator, SpaceLayout

log = logging.getLogger(__name__)

DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-10


class IntegrationError(RuntimeError):
    pass


class InvariantViolation(RuntimeError):
    pass


class MissingTraceError(KeyError):
    pass


@dataclass(frozen=True)
class GeneratorSpec:
    static_terms: tuple = ()
    driven_terms: tuple = ()  # (Operator, envelope)
    collapse_ops: tuple = ()  # (Operator, weight)

    def __post_init__(self):
        object.__setattr__(self, "static_terms", tuple(self.static_terms))
        object.__setattr__(self, "driven_terms", tuple(self.driven_terms))
        object.__setattr__(self, "collapse_ops", tuple(self.collapse_ops))
        for _, w in self.collapse_ops:
            if w < 0:
                raise ValueError("collapse weights must be non-negative")
        if self.layout is None:
            raise ValueError("generator needs at least one term")
        for op in self._operators():
            if op.layout != self.layout:
                raise LayoutError("generator terms live on different layouts")

    def _operators(self):
        yield from self.static_terms
        yield from (op for op, _ in self.driven_terms)
        yield from (op for op, _ in self.collapse_ops)

    @property
    def layout(self) -> SpaceLayout | None:
        for op in self._operators():
            return op.layout
        return None

    def hamiltonian(self, t: float) -> np.ndarray:
        n = self.layout.total_dim
        h = np.zeros((n, n), dtype=complex)
        for op in self.static_terms:
            h += op.elements
        for op, f in self.driven_terms:
            h += f(t) * op.elements
        return h

    def combined(self, other: "GeneratorSpec") -> "GeneratorSpec":
        return GeneratorSpec(
            self.static_terms + other.static_terms,
            self.driven_terms + other.driven_terms,
            self.collapse_ops + other.collapse_ops,
        )


def lindblad_rhs(gen: GeneratorSpec, rho, t: float) -> np.ndarray:
    """Reference (unoptimised) right-hand side."""
    r = rho.elements if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    n = gen.layout.total_dim
    if r.shape != (n, n):
        raise LayoutError(f"rho of shape {r.shape} does not match generator dimension {n}")
    h = gen.hamiltonian(t)
    out = -1j * (h @ r - r @ h)
    for op, w in gen.collapse_ops:
        c = op.elements
        cdc = c.conj().T @ c
        out += w * (c @ r @ c.conj().T - 0.5 * (cdc @ r + r @ cdc))
    return out


# ----------------------------------------------------------------------------


def reachable_indices(gen: GeneratorSpec, support: np.ndarray) -> np.ndarray:
    """Basis states reachable from ``support`` under H(t) and the jumps.

    Evolution started inside the returned set never leaves it, so restricting
    every operator to it is exact.
    """
    n = gen.layout.total_dim
    pattern = np.zeros((n, n), dtype=bool)
    for op in gen.static_terms:
        pattern |= op.elements != 0
    for op, _ in gen.driven_terms:
        pattern |= op.elements != 0
    herm = pattern | pattern.T
    jumps = np.zeros((n, n), dtype=bool)
    for op, w in gen.collapse_ops:
        if w != 0:
            jumps |= op.elements != 0
    adj = sp.csr_matrix(herm | jumps)  # adj[i, j]: j feeds i
    seen = np.zeros(n, dtype=bool)
    seen[support] = True
    frontier = seen.copy()
    while frontier.any():
        new = (adj @ frontier.astype(np.int8)) > 0
        frontier = new & ~seen
        seen |= new
    return np.flatnonzero(seen)


class _CompiledGenerator:
    def __init__(self, gen: GeneratorSpec, idx: np.ndarray):
        sel = np.ix_(idx, idx)
        self.n = len(idx)
        n = self.n
        h0 = np.zeros((n, n), dtype=complex)
        for op in gen.static_terms:
            h0 += op.elements[sel]
        decay = np.zeros((n, n), dtype=complex)
        jump_super = sp.csr_matrix((n * n, n * n), dtype=complex)
        for op, w in gen.collapse_ops:
            if w == 0:
                continue
            c = sp.csr_matrix(op.elements[sel])
            if c.nnz == 0:
                continue
            decay += w * (c.conj().T @ c).toarray()
            # row-major vec(C rho C^+) = (C kron conj(C)) vec(rho)
            jump_super = jump_super + w * sp.kron(c, c.conj(), format="csr")
        self.heff0 = h0 - 0.5j * decay
        self.driven = [(op.elements[sel].copy(), f) for op, f in gen.driven_terms]
        self.jump_super = jump_super.tocsr()

    def heff(self, t: float) -> np.ndarray:
        h = self.heff0.copy()
        for m, f in self.driven:
            v = f(t)
            if v != 0.0:
                h += v * m
        return h

    def rhs(self, t: float, rho: np.ndarray) -> np.ndarray:
        # -i(H rho - rho H^+) written as -i(A - A^+): exact on Hermitian rho,
        # and keeps the integrated state Hermitian to rounding
        a = self.heff(t) @ rho
        out = -1j * (a - a.conj().T)
        out += (self.jump_super @ rho.ravel()).reshape(self.n, self.n)
        return out


@dataclass
class Trajectory:
    times: np.ndarray
    traces: dict
    final_rho: DensityMatrix
    integrals: dict
    snapshots: list = field(default_factory=list)
    leakage: float = 0.0
    max_trace_drift: float = 0.0
    hermiticity_error: float = 0.0
    min_eigenvalue: float = 0.0
    nfev: int = 0
    subspace_dim: int = 0
    flags: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        labels = sorted(self.traces)
        w.writerow(["t_us", *labels])
        for i, t in enumerate(self.times):
            w.writerow([f"{t:.9g}", *(f"{self.traces[k][i]:.12g}" for k in labels)])
        return buf.getvalue()


def _restrict(op: Operator, idx: np.ndarray) -> np.ndarray:
    return op.elements[np.ix_(idx, idx)]


def _top_fock_projectors(layout: SpaceLayout) -> dict:
    out = {}
    for label, dim in layout.subsystems:
        if label.startswith("cav") and dim >= 3:
            diag = np.zeros(layout.dims, dtype=float)
            sl = [slice(None)] * len(layout.dims)
            sl[layout.index(label)] = dim - 1
            diag[tuple(sl)] = 1.0
            out[label] = diag.ravel()
    return out


def evolve(
    rho0: DensityMatrix,
    gen: GeneratorSpec,
    t_span: tuple[float, float],
    *,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    n_out: int = 201,
    observables: Mapping[str, Operator] | None = None,
    fluxes: Mapping[str, Operator] | None = None,
    n_snapshots: int = 0,
    restrict: bool = True,
    check: bool = True,
    trace_tol: float = 1e-7,
    leakage_tol: float = 1e-6,
    method: str = "DOP853",
    first_step: float | None = None,
) -> Trajectory:
    """Integrate the master equation over ``t_span`` (us).

    ``observables`` are sampled on a uniform grid of ``n_out`` points;
    ``fluxes`` are integrated over the whole span.
    """
    layout = gen.layout
    if rho0.layout != layout:
        raise LayoutError("initial state and generator layouts differ")
    t0, t1 = map(float, t_span)
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    observables = dict(observables or {})
    fluxes = dict(fluxes or {})
    n_full = layout.total_dim

    if restrict:
        support = np.flatnonzero(np.abs(np.diag(rho0.elements)) > 0)
        idx = reachable_indices(gen, support)
    else:
        idx = np.arange(n_full)
    comp = _CompiledGenerator(gen, idx)
    n = comp.n
    nn = n * n

    flux_labels = list(fluxes)
    # Tr(rho O) = sum_ij rho_ij O_ji = vec(rho) . vec(O^T)
    flux_vecs = np.array([_restrict(fluxes[k], idx).T.ravel() for k in flux_labels]).reshape(len(flux_labels), nn)

    def f(t, y):
        rho = y[:nn].reshape(n, n)
        dy = np.empty_like(y)
        dy[:nn] = comp.rhs(t, rho).ravel()
        if flux_labels:
            dy[nn:] = flux_vecs @ y[:nn]
        return dy

    y0 = np.zeros(nn + len(flux_labels), dtype=complex)
    y0[:nn] = rho0.elements[np.ix_(idx, idx)].ravel()
    t_eval = np.linspace(t0, t1, max(n_out, 2))
    sol = solve_ivp(f, (t0, t1), y0, method=method, t_eval=t_eval, rtol=rtol, atol=atol, first_step=first_step)
    if sol.status != 0:
        t_fail = sol.t[-1] if len(sol.t) else t0
        raise IntegrationError(f"integration failed near t = {t_fail:.6g} us: {sol.message}")

    rhos = sol.y[:nn].T.reshape(-1, n, n)
    traces = {}
    for label, op in observables.items():
        o = _restrict(op, idx)
        traces[label] = np.real(np.einsum("tij,ji->t", rhos, o))
    trace_series = np.real(np.einsum("tii->t", rhos))
    traces.setdefault("trace", trace_series)

    leak = 0.0
    for label, diag in _top_fock_projectors(layout).items():
        d = diag[idx]
        pops = np.real(np.einsum("tii,i->t", rhos, d))
        traces.setdefault(f"top_fock_{label}", pops)
        leak = max(leak, float(pops.max()))

    integrals = {label: float(np.real(sol.y[nn + k, -1])) for k, label in enumerate(flux_labels)}

    final = np.zeros((n_full, n_full), dtype=complex)
    final[np.ix_(idx, idx)] = rhos[-1]
    final_rho = DensityMatrix(layout, final, validate=False)

    snaps = []
    if n_snapshots:
        picks = np.unique(np.linspace(0, len(t_eval) - 1, n_snapshots).round().astype(int))
        for i in picks:
            full = np.zeros((n_full, n_full), dtype=complex)
            full[np.ix_(idx, idx)] = rhos[i]
            snaps.append((float(t_eval[i]), DensityMatrix(layout, full, validate=False)))

    drift = float(np.max(np.abs(trace_series - 1.0)))
    herm = float(np.max(np.abs(rhos - np.conj(np.transpose(rhos, (0, 2, 1))))))
    min_eig = float(np.linalg.eigvalsh(0.5 * (rhos[-1] + rhos[-1].conj().T))[0])
    traj = Trajectory(
        times=t_eval,
        traces=traces,
        final_rho=final_rho,
        integrals=integrals,
        snapshots=snaps,
        leakage=leak,
        max_trace_drift=drift,
        hermiticity_error=herm,
        min_eigenvalue=min_eig,
        nfev=int(sol.nfev),
        subspace_dim=n,
    )
    if leak > leakage_tol:
        traj.flags.append("fock_leakage")
    if check:
        if drift > trace_tol:
            raise InvariantViolation(f"trace drift {drift:.2e} exceeds {trace_tol:.1e}")
        if herm > 1e-9:
            raise InvariantViolation(f"hermiticity error {herm:.2e}")
        if min_eig < -1e-7:
            raise InvariantViolation(f"negative eigenvalue {min_eig:.2e}")
    return traj


# ----------------------------------------------------------------------------
# efficiency functionals


def emission_efficiency(traj: Trajectory, mode: str, atomic_projector: str | None = None) -> float:
    """2 kappa * integral of <P_atom (x) n_mode> over the window.

    The 2 kappa factor lives in the flux operator registered with
    :func:`photon_flux_operator`; the key is ``mode`` or ``mode|projector``.
    """
    key = mode if atomic_projector is None else f"{mode}|{atomic_projector}"
    try:
        return traj.integrals[key]
    except KeyError:
        raise MissingTraceError(f"trajectory has no flux integral {key!r}") from None


def photon_flux_operator(layout: SpaceLayout, mode_label: str, kappa: float,
                         atomic_projector: np.ndarray | None = None, atom_label: str = "atom") -> Operator:
    from .operators import tensor

    dim = layout.dim(mode_label)
    factors = {mode_label: 2 * kappa * np.diag(np.arange(dim, dtype=float))}
    if atomic_projector is not None:
        factors[atom_label] = atomic_projector
    return tensor(layout, factors)

"""Deterministic local maximisation: coarse grid seeding, then Nelder-Mead."""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .atoms import AtomicScheme, CavityConfig, SchemeKind
from .protocols import (
    PumpingConfig,
    StirapConfig,
    run_optical_pumping,
    run_stirap_reprep,
    run_vstirap,
    vstirap_pulse,
)

log = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], float]


@dataclass
class OptimProblem:
    objective: Objective
    bounds: Sequence[tuple[float, float]]
    seeds: int | Sequence[int] = 8  # grid points per dimension
    budget: int = 400
    xatol: float = 1e-4  # simplex size at convergence, relative to the box
    fatol: float = 1e-7

    def __post_init__(self):
        self.bounds = [(float(lo), float(hi)) for lo, hi in self.bounds]
        for lo, hi in self.bounds:
            if not (np.isfinite(lo) and np.isfinite(hi)) or hi < lo:
                raise ValueError(f"invalid bound ({lo}, {hi})")
        if self.budget < self.n_seeds:
            raise ValueError(f"budget {self.budget} is smaller than the {self.n_seeds} grid seeds")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def seeds_per_dim(self) -> list[int]:
        if isinstance(self.seeds, int):
            return [self.seeds] * self.dim
        if len(self.seeds) != self.dim:
            raise ValueError("one seed count per dimension")
        return [int(s) for s in self.seeds]

    @property
    def n_seeds(self) -> int:
        return int(np.prod(self.seeds_per_dim))

    def grid(self) -> list[np.ndarray]:
        axes = []
        for (lo, hi), k in zip(self.bounds, self.seeds_per_dim):
            if k < 1:
                raise ValueError("need at least one seed per dimension")
            # cell centres: interior points, evenly spread
            axes.append(lo + (hi - lo) * (np.arange(k) + 0.5) / k)
        return [np.array(p) for p in itertools.product(*axes)]


@dataclass
class OptimResult:
    best_params: np.ndarray
    best_value: float
    evaluations: int
    history: list = field(default_factory=list)  # (params, value)
    flags: list = field(default_factory=list)
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "best_params": [float(x) for x in self.best_params],
            "best_value": self.best_value,
            "evaluations": self.evaluations,
            "flags": list(self.flags),
            "converged": self.converged,
            "history": [[[float(x) for x in p], v] for p, v in self.history],
        }


class _Budget(Exception):
    pass


def maximize(problem: OptimProblem, executor: Executor | None = None) -> OptimResult:
    """Maximise over the box; never worse than the best grid seed.

    Flags: ``budget_exhausted`` when the simplex ran out of evaluations,
    ``zero_gradient`` when every seed scored the same.
    """
    history: list = []
    grid = problem.grid()
    if executor is not None:
        values = list(executor.map(problem.objective, grid))
    else:
        values = [problem.objective(p) for p in grid]
    for p, v in zip(grid, values):
        history.append((p, float(v)))
    best_i = int(np.argmax(values))  # first maximum: deterministic tie-break
    best_x, best_v = grid[best_i], float(values[best_i])
    flags = []
    if np.ptp(values) == 0.0:
        flags.append("zero_gradient")
        return OptimResult(best_x, best_v, len(history), history, flags)

    lo = np.array([b[0] for b in problem.bounds])
    hi = np.array([b[1] for b in problem.bounds])
    span = np.where(hi > lo, hi - lo, 1.0)
    free = hi > lo
    remaining = problem.budget - len(history)

    # work in unit-box coordinates of the free dimensions
    def to_x(u):
        x = best_x.copy()
        x[free] = lo[free] + np.clip(u, 0.0, 1.0) * span[free]
        return x

    state = {"x": best_x, "v": best_v}

    def neg(u):
        if len(history) >= problem.budget:
            raise _Budget
        x = to_x(u)
        v = float(problem.objective(x))
        history.append((x, v))
        if v > state["v"]:
            state["x"], state["v"] = x, v
        return -v

    u0 = (best_x[free] - lo[free]) / span[free]
    step = 0.5 / np.array(problem.seeds_per_dim, dtype=float)[free]
    simplex = [u0]
    for k in range(len(u0)):
        u = u0.copy()
        u[k] = u[k] + step[k] if u[k] + step[k] <= 1.0 else u[k] - step[k]
        simplex.append(u)
    converged = True
    if remaining > 0 and free.any():
        try:
            res = minimize(
                neg, u0, method="Nelder-Mead", bounds=[(0.0, 1.0)] * len(u0),
                options={"initial_simplex": np.array(simplex), "xatol": problem.xatol, "fatol": problem.fatol,
                         "maxfev": remaining},
            )
            converged = bool(res.success)
            if not converged:
                flags.append("budget_exhausted")
        except _Budget:
            converged = False
            flags.append("budget_exhausted")
    return OptimResult(state["x"], state["v"], len(history), history, flags, converged)


# ----------------------------------------------------------------------------
# physics objectives


def optimize_vstirap(scheme: AtomicScheme, cavity: CavityConfig, T: float,
                     bounds: Sequence[tuple[float, float]], *, seeds=(6, 3), budget: int = 120,
                     executor: Executor | None = None, rtol: float = 1e-7, atol: float = 1e-9) -> OptimResult:
    """Maximise the H-mode photon efficiency over (Omega_max, Delta)."""

    def objective(p):
        return run_vstirap(scheme, cavity, vstirap_pulse(scheme, p[0], T, p[1]), rtol=rtol, atol=atol).p_H

    return maximize(OptimProblem(objective, bounds, seeds, budget), executor)


def optimize_stirap(scheme: AtomicScheme, T: float, bounds: Sequence[tuple[float, float]], *,
                    n_values: Sequence[int] = (4, 5, 6, 7, 8), seeds=(4, 4), budget: int = 80,
                    executor: Executor | None = None, rtol: float = 1e-7, atol: float = 1e-9) -> OptimResult:
    """Maximise re-preparation over (n, a, Omega_max); n is looped over integers.

    ``bounds`` gives (a, Omega_max) ranges, optionally preceded by an n range.
    """
    bounds = list(bounds)
    if len(bounds) == 3:
        n_lo, n_hi = bounds.pop(0)
        n_values = [n for n in n_values if n_lo <= n <= n_hi] or list(range(int(n_lo), int(n_hi) + 1))
    for n in n_values:
        if not 1 <= n <= 10:
            raise ValueError("n must lie in 1..10")
    runs = []
    for n in n_values:
        def objective(p, n=n):
            cfg = StirapConfig(omega_max=p[1], T=T, n=n, a=p[0])
            return run_stirap_reprep(scheme, cfg, rtol=rtol, atol=atol, n_out=2).target_population

        res = maximize(OptimProblem(objective, bounds, seeds, budget), executor)
        log.debug("stirap n=%d: %.5f", n, res.best_value)
        runs.append((n, res))
    n_best, best = max(runs, key=lambda r: r[1].best_value)  # first n wins ties
    history = [(np.array([float(n), *p]), v) for n, r in runs for p, v in r.history]
    flags = sorted({f for _, r in runs for f in r.flags})
    return OptimResult(np.array([float(n_best), *best.best_params]), best.best_value, len(history), history,
                       flags, all(r.converged for _, r in runs))


def optimize_pumping(scheme: AtomicScheme, T: float, bounds: Sequence[tuple[float, float]], rho0, *,
                     seeds=3, budget: int = 200, executor: Executor | None = None,
                     rtol: float = 1e-6, atol: float = 1e-8) -> OptimResult:
    """Maximise the (F=2, mF=0) population after a pumping window of length T.

    Parameters are (Delta1, Delta2, Omega1, Omega2).
    """
    if scheme.kind is SchemeKind.IDEAL:
        raise ValueError("optical pumping needs a Rb scheme")

    def objective(p):
        cfg = PumpingConfig(*p)
        return float(run_optical_pumping(scheme, cfg, rho0, T, dt=T, rtol=rtol, atol=atol).population[-1])

    return maximize(OptimProblem(objective, bounds, seeds, budget), executor)

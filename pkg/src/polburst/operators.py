"""Dense operator algebra on composite (atom x cavity modes) Hilbert spaces."""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np


class LayoutError(ValueError):
    pass


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class SpaceLayout:
    subsystems: tuple[tuple[str, int], ...]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.subsystems)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=int))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown subsystem {label!r}") from None

    def dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def __contains__(self, label: str) -> bool:
        return label in self.labels


def compose_spaces(subsystems: Iterable[tuple[str, int]]) -> SpaceLayout:
    subsystems = tuple((str(label), int(dim)) for label, dim in subsystems)
    if not subsystems:
        raise LayoutError("at least one subsystem required")
    labels = [label for label, _ in subsystems]
    if len(set(labels)) != len(labels):
        raise LayoutError(f"duplicate subsystem labels in {labels}")
    for label, dim in subsystems:
        if dim < 1:
            raise LayoutError(f"subsystem {label!r} has dimension {dim}")
    return SpaceLayout(subsystems)


class Operator:
    """Square complex matrix tied to a :class:`SpaceLayout`. Immutable."""

    __slots__ = ("layout", "elements")

    def __init__(self, layout: SpaceLayout, elements):
        elements = _frozen(elements)
        n = layout.total_dim
        if elements.shape != (n, n):
            raise LayoutError(f"operator shape {elements.shape} does not match layout dimension {n}")
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "elements", elements)

    def __setattr__(self, name, value):
        raise AttributeError("Operator is immutable")

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    def dag(self) -> "Operator":
        return Operator(self.layout, self.elements.conj().T)

    def _check(self, other: "Operator") -> None:
        if other.layout != self.layout:
            raise LayoutError("operator layouts differ")

    def __add__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.layout, self.elements + other.elements)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.layout, self.elements - other.elements)

    def __neg__(self) -> "Operator":
        return Operator(self.layout, -self.elements)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.layout, self.elements * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.layout, self.elements @ other.elements)

    def hermiticity_error(self) -> float:
        """Relative Frobenius norm of the anti-Hermitian part."""
        norm = np.linalg.norm(self.elements)
        if norm == 0.0:
            return 0.0
        return float(np.linalg.norm(self.elements - self.elements.conj().T) / norm)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return self.hermiticity_error() <= tol

    def __repr__(self) -> str:
        return f"Operator(layout={self.layout.subsystems}, dim={self.dim})"


def zero(layout: SpaceLayout) -> Operator:
    n = layout.total_dim
    return Operator(layout, np.zeros((n, n)))


def identity(layout: SpaceLayout) -> Operator:
    return Operator(layout, np.eye(layout.total_dim))


def single_space(dim: int, label: str = "mode") -> SpaceLayout:
    return compose_spaces([(label, dim)])


def fock_lowering(dim: int, label: str = "mode") -> Operator:
    """Truncated annihilation operator with ``a[n-1, n] = sqrt(n)``."""
    if dim < 2:
        raise LayoutError("Fock truncation needs at least 2 levels")
    return Operator(single_space(dim, label), np.diag(np.sqrt(np.arange(1, dim)), k=1))


def embed(op, target: str, layout: SpaceLayout) -> Operator:
    """Kronecker-embed a single-subsystem operator, identities elsewhere."""
    mat = op.elements if isinstance(op, Operator) else np.asarray(op, dtype=complex)
    k = layout.index(target)
    if mat.shape != (layout.dims[k], layout.dims[k]):
        raise LayoutError(
            f"operator of shape {mat.shape} cannot act on {target!r} of dimension {layout.dims[k]}"
        )
    factors = [mat if i == k else np.eye(d) for i, d in enumerate(layout.dims)]
    return Operator(layout, reduce(np.kron, factors))


def tensor(layout: SpaceLayout, factors: dict[str, np.ndarray]) -> Operator:
    """Product operator with the given factors (identity on unnamed subsystems)."""
    for label in factors:
        layout.index(label)
    mats = [np.asarray(factors.get(label, np.eye(dim)), dtype=complex) for label, dim in layout.subsystems]
    return Operator(layout, reduce(np.kron, mats))


def basis_vector(layout: SpaceLayout, indices: dict[str, int] | Sequence[int]) -> np.ndarray:
    if isinstance(indices, dict):
        indices = [indices.get(label, 0) for label in layout.labels]
    flat = int(np.ravel_multi_index(tuple(indices), layout.dims))
    vec = np.zeros(layout.total_dim, dtype=complex)
    vec[flat] = 1.0
    return vec


class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix on a layout."""

    __slots__ = ("layout", "elements")

    def __init__(self, layout: SpaceLayout, elements, *, validate: bool = True):
        elements = _frozen(elements)
        n = layout.total_dim
        if elements.shape != (n, n):
            raise LayoutError(f"density matrix shape {elements.shape} does not match layout dimension {n}")
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "elements", elements)
        if validate:
            self.validate()

    def __setattr__(self, name, value):
        raise AttributeError("DensityMatrix is immutable")

    @classmethod
    def pure(cls, layout: SpaceLayout, vector) -> "DensityMatrix":
        vec = np.asarray(vector, dtype=complex)
        vec = vec / np.linalg.norm(vec)
        return cls(layout, np.outer(vec, vec.conj()))

    @classmethod
    def mixture(cls, layout: SpaceLayout, vectors, weights=None) -> "DensityMatrix":
        vectors = [np.asarray(v, dtype=complex) for v in vectors]
        if weights is None:
            weights = np.full(len(vectors), 1.0 / len(vectors))
        rho = sum(w * np.outer(v / np.linalg.norm(v), (v / np.linalg.norm(v)).conj()) for v, w in zip(vectors, weights))
        return cls(layout, rho / np.trace(rho).real)

    @property
    def trace(self) -> float:
        return float(np.trace(self.elements).real)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.elements - self.elements.conj().T), initial=0.0))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.elements + self.elements.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])

    def validate(self, herm_tol: float = 1e-10, trace_tol: float = 1e-8, eig_tol: float = 1e-8) -> None:
        if self.hermiticity_error() > herm_tol:
            raise ValueError(f"density matrix not Hermitian (error {self.hermiticity_error():.2e})")
        if abs(self.trace - 1.0) > trace_tol:
            raise ValueError(f"density matrix trace {self.trace!r} != 1")
        if self.min_eigenvalue() < -eig_tol:
            raise ValueError(f"density matrix has negative eigenvalue {self.min_eigenvalue():.2e}")

    def population(self, vector) -> float:
        vec = np.asarray(vector, dtype=complex)
        return float(np.real(vec.conj() @ self.elements @ vec))

    def partial_trace(self, keep: Sequence[str]) -> np.ndarray:
        """Reduced matrix on the ``keep`` subsystems (in layout order)."""
        dims = self.layout.dims
        keep_idx = [self.layout.index(label) for label in keep]
        n = len(dims)
        t = self.elements.reshape(dims + dims)
        traced = [i for i in range(n) if i not in keep_idx]
        # contract traced subsystems pairwise, highest index first
        for offset, i in enumerate(sorted(traced, reverse=True)):
            m = n - offset
            t = np.trace(t, axis1=i, axis2=i + m)
        d = int(np.prod([dims[i] for i in sorted(keep_idx)], dtype=int))
        return t.reshape(d, d)

    def __repr__(self) -> str:
        return f"DensityMatrix(layout={self.layout.subsystems}, trace={self.trace:.6f})"


def expectation(rho: DensityMatrix, op: Operator) -> complex:
    if rho.layout != op.layout:
        raise LayoutError("density matrix and operator live on different layouts")
    return complex(np.einsum("ij,ji->", rho.elements, op.elements))

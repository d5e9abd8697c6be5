"""Coherence-vector coordinates on the trace-one hyperplane and state diagnostics.

A point ``x`` (length n² − 1) stands for ``xi = I/n + Σ_j x[j] e_j``, i.e. the
``e_0`` coordinate is pinned to ``1/sqrt(n)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import HermitianBasis, PAULI_SCALE, dagger, random_unitary
from .errors import DimensionError, InvariantError, NotOnTraceOneError

RANK_TOL = 1e-8
STATE_TOL = 1e-10


@dataclass(frozen=True)
class CoherencePoint:
    x: np.ndarray
    n: int

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1)
        if x.shape != (self.n * self.n - 1,):
            raise DimensionError(f"n={self.n} needs {self.n * self.n - 1} coordinates, got {x.size}")
        if not np.all(np.isfinite(x)):
            raise InvariantError("coherence coordinates must be finite")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @classmethod
    def maximally_mixed(cls, n: int) -> "CoherencePoint":
        return cls(np.zeros(n * n - 1), n)

    @classmethod
    def from_pauli(cls, bloch) -> "CoherencePoint":
        """Qubit point from a Bloch vector in the ``rho = (I + x·sigma)/2`` convention."""
        return cls(np.asarray(bloch, dtype=float) / PAULI_SCALE, 2)

    def to_pauli(self) -> np.ndarray:
        if self.n != 2:
            raise DimensionError("the Pauli convention exists only for n=2")
        return self.x * PAULI_SCALE


def _coords(p, basis: HermitianBasis) -> np.ndarray:
    x = p.x if isinstance(p, CoherencePoint) else np.asarray(p, dtype=float)
    if x.shape[-1] != basis.m:
        raise DimensionError(f"{x.shape[-1]} coordinates for basis with n={basis.n}")
    return x


def to_matrix(p, basis: HermitianBasis) -> np.ndarray:
    """Matrix of a point (or a stack of coordinate rows)."""
    x = _coords(p, basis)
    return np.eye(basis.n) / basis.n + np.tensordot(x, basis.elements[1:], axes=1)


def from_matrix(a, basis: HermitianBasis, trace_tol: float = 1e-10) -> CoherencePoint:
    a = np.asarray(a, dtype=complex)
    if a.shape != (basis.n, basis.n):
        raise DimensionError(f"matrix of shape {a.shape} for n={basis.n}")
    if np.linalg.norm(a - dagger(a)) > 1e-10:
        raise InvariantError("matrix is not self-adjoint")
    tr = np.trace(a).real
    if abs(tr - 1.0) > trace_tol:
        raise NotOnTraceOneError(f"trace is {tr}, not 1")
    return CoherencePoint(basis.components(a)[1:], basis.n)


def coords_from_matrices(rhos, basis: HermitianBasis) -> np.ndarray:
    """Coordinates of a stack of matrices, without validation."""
    return np.einsum("...ij,kji->...k", rhos, basis.elements[1:]).real


@dataclass(frozen=True)
class StateDiagnostics:
    purity: float
    purity_spectral: float
    spectrum: np.ndarray
    rank: int
    min_eigenvalue: float
    is_state: bool

    @property
    def stratum(self) -> int:
        return self.rank


def coordinate_purity(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return 1.0 / n + np.sum(x * x, axis=-1)


def diagnostics(p, basis: HermitianBasis, rank_tol: float = RANK_TOL,
                state_tol: float = STATE_TOL) -> StateDiagnostics:
    if rank_tol <= 0 or state_tol <= 0:
        raise ValueError("tolerances must be positive")
    x = _coords(p, basis)
    spec = np.linalg.eigvalsh(to_matrix(x, basis))
    pur = float(coordinate_purity(x, basis.n))
    pur_spec = float(np.sum(spec ** 2))
    if abs(pur - pur_spec) > 1e-10 * max(1.0, pur):
        raise InvariantError(f"purity mismatch: coordinates {pur} vs spectrum {pur_spec}")
    return StateDiagnostics(
        purity=pur,
        purity_spectral=pur_spec,
        spectrum=spec,
        rank=int(np.sum(spec > rank_tol)),
        min_eigenvalue=float(spec[0]),
        is_state=bool(spec[0] >= -state_tol),
    )


def sample_state(n: int, k: int, seed=None, basis: HermitianBasis | None = None) -> CoherencePoint:
    """Rank-``k`` state: Dirichlet(1,…,1) eigenvalues conjugated by a Haar unitary.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if not 1 <= k <= n:
        raise ValueError(f"stratum k={k} outside 1..{n}")
    from .algebra import build_gellmann_basis

    basis = basis or build_gellmann_basis(n)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    lam = np.zeros(n)
    lam[:k] = rng.dirichlet(np.ones(k)) if k > 1 else 1.0
    if k > 1:
        # keep the sampled spectrum clear of the rank threshold
        lam[:k] = np.maximum(lam[:k], 1e-6)
        lam /= lam.sum()
    u = random_unitary(n, rng)
    rho = (u * lam) @ dagger(u)
    return CoherencePoint(coords_from_matrices(rho, basis), n)


def sample_states(n: int, count: int, seed=None, basis: HermitianBasis | None = None,
                  ranks=None) -> np.ndarray:
    """``count`` coordinate rows with ranks cycling through ``ranks`` (default 1..n)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    ranks = list(ranks or range(1, n + 1))
    return np.array([sample_state(n, ranks[i % len(ranks)], rng, basis).x for i in range(count)])

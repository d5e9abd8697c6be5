"""Hermitian operator bases, Lie/Jordan products and structure constants.

Conventions used throughout the package:

* Jordan product   ``a ⊙ b = (ab + ba) / 2``
* Lie product      ``[[a, b]] = i (ab - ba) / 2``

Note the factor 1/2 in the Lie product: with it, ``2 c`` (not ``c``) are the
structure constants of u(n) in the usual normalization.

Superoperators are stored in the column-stacking convention,
``vec(A X B) = (B^T ⊗ A) vec(X)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .errors import DimensionError, InvariantError

ORTHONORMAL_TOL = 1e-12


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    return a


def _check_pair(a, b):
    a, b = _as_matrix(a), _as_matrix(b)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def is_hermitian(a, tol: float = 1e-12) -> bool:
    a = _as_matrix(a)
    return bool(np.linalg.norm(a - dagger(a)) <= tol)


def jordan_product(a, b) -> np.ndarray:
    a, b = _check_pair(a, b)
    return 0.5 * (a @ b + b @ a)


def lie_product(a, b) -> np.ndarray:
    a, b = _check_pair(a, b)
    return 0.5j * (a @ b - b @ a)


# ---------------------------------------------------------------------------
# Bases
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HermitianBasis:
    """Orthonormal self-adjoint basis ``e[0] = I/sqrt(n)``, ``e[1:]`` traceless."""

    n: int
    elements: np.ndarray  # shape (n*n, n, n), complex

    def __post_init__(self):
        elements = np.asarray(self.elements, dtype=complex)
        elements.setflags(write=False)
        object.__setattr__(self, "elements", elements)

    @property
    def dim(self) -> int:
        """Number of basis elements, n²."""
        return self.n * self.n

    @property
    def m(self) -> int:
        """Number of coordinates on the trace-one hyperplane, n² − 1."""
        return self.n * self.n - 1

    def __len__(self):
        return self.dim

    def __getitem__(self, i):
        return self.elements[i]

    def components(self, a) -> np.ndarray:
        """Real components ``a_mu = Tr(a e_mu)`` of a self-adjoint matrix."""
        a = _as_matrix(a)
        if a.shape != (self.n, self.n):
            raise DimensionError(f"matrix of shape {a.shape} for basis of n={self.n}")
        # Tr(a e) = sum_ij a_ij e_ji
        return np.einsum("ij,kji->k", a, self.elements).real

    def compose(self, comps) -> np.ndarray:
        comps = np.asarray(comps, dtype=float)
        if comps.shape != (self.dim,):
            raise DimensionError(f"expected {self.dim} components, got {comps.shape}")
        return np.tensordot(comps, self.elements, axes=1)

    def gram(self) -> np.ndarray:
        return np.einsum("aij,bji->ab", self.elements, self.elements)

    def check(self, tol: float = ORTHONORMAL_TOL) -> None:
        """Raise :class:`InvariantError` if any basis invariant fails."""
        e = self.elements
        if e.shape != (self.dim, self.n, self.n):
            raise InvariantError(f"basis has shape {e.shape}")
        if np.abs(e[0] - np.eye(self.n) / np.sqrt(self.n)).max() > tol:
            raise InvariantError("e[0] is not I/sqrt(n)")
        if np.abs(e - dagger(e)).max() > tol:
            raise InvariantError("basis element not self-adjoint")
        if np.abs(np.trace(e[1:], axis1=1, axis2=2)).max(initial=0.0) > tol:
            raise InvariantError("basis element e[j>0] not traceless")
        if np.abs(self.gram() - np.eye(self.dim)).max() > tol:
            raise InvariantError("basis is not orthonormal")

    def conjugated(self, u) -> "HermitianBasis":
        """Basis ``u e u^†``; orthonormal again when ``u`` is unitary."""
        u = _as_matrix(u)
        return HermitianBasis(self.n, u @ self.elements @ dagger(u))


def build_gellmann_basis(n: int) -> HermitianBasis:
    """Identity plus generalized Gell-Mann matrices, normalized to Tr(e e) = 1.

    Order after ``I/sqrt(n)``: symmetric family (j<k), antisymmetric family
    (j<k), diagonal family. For n=2 this is ``(I, s1, s2, s3) / sqrt(2)``.
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise DimensionError(f"invalid dimension n={n!r}; need an integer n >= 2")
    n = int(n)
    inv = 1.0 / np.sqrt(2.0)
    elements = [np.eye(n, dtype=complex) / np.sqrt(n)]
    pairs = [(j, k) for j in range(n) for k in range(j + 1, n)]
    for j, k in pairs:
        e = np.zeros((n, n), dtype=complex)
        e[j, k] = e[k, j] = inv
        elements.append(e)
    for j, k in pairs:
        e = np.zeros((n, n), dtype=complex)
        e[j, k] = -1j * inv
        e[k, j] = 1j * inv
        elements.append(e)
    for l in range(1, n):
        diag = np.zeros(n)
        diag[:l] = 1.0
        diag[l] = -l
        elements.append(np.diag(diag / np.sqrt(l * (l + 1))).astype(complex))
    return HermitianBasis(n, np.array(elements))


PAULI = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

# Pauli-convention coordinates x_P^k = Tr(rho sigma_k) relate to orthonormal
# ones by x_P = sqrt(2) x.
PAULI_SCALE = np.sqrt(2.0)


# ---------------------------------------------------------------------------
# Structure constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StructureConstants:
    """``c[mu, nu, s] = Tr([[e_mu, e_nu]] e_s)``, ``d[mu, nu, s] = Tr((e_mu ⊙ e_nu) e_s)``."""

    n: int
    c: np.ndarray
    d: np.ndarray


def structure_constants(basis: HermitianBasis) -> StructureConstants:
    e = basis.elements
    prod = np.einsum("aij,bjk->abik", e, e)  # e_a e_b
    # Tr(e_a e_b e_s) for all a, b, s
    t = np.einsum("abik,ski->abs", prod, e)
    tt = np.swapaxes(t, 0, 1)  # Tr(e_b e_a e_s)
    d = 0.5 * (t + tt)
    c = 0.5j * (t - tt)
    if np.abs(d.imag).max() > 1e-10 or np.abs(c.imag).max() > 1e-10:
        raise InvariantError("structure constants are not real; basis not self-adjoint?")
    c, d = c.real.copy(), d.real.copy()
    c.setflags(write=False)
    d.setflags(write=False)
    return StructureConstants(basis.n, c, d)


def reconstruction_residual(basis: HermitianBasis, sc: StructureConstants) -> float:
    """max over mu,nu of ‖e_mu e_nu − Σ_s (d − i c)[mu,nu,s] e_s‖_F."""
    e = basis.elements
    lhs = np.einsum("aij,bjk->abik", e, e)
    rhs = np.einsum("abs,sik->abik", sc.d - 1j * sc.c, e)
    return float(np.sqrt((np.abs(lhs - rhs) ** 2).sum(axis=(2, 3))).max())


# ---------------------------------------------------------------------------
# Lie-Jordan identities
# ---------------------------------------------------------------------------


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (a + dagger(a))


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with phase correction."""
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


@dataclass
class LieJordanReport:
    n: int
    trials: int
    leibniz_residual: float
    associator_residual: float
    tol: float = 1e-10

    @property
    def passed(self) -> bool:
        return self.leibniz_residual < self.tol and self.associator_residual < self.tol


def lie_jordan_residuals(a, b, c) -> tuple[float, float]:
    """Residuals of the derivation rule and the associator identity.

    ``[[a, b⊙c]] = [[a,b]]⊙c + b⊙[[a,c]]`` and
    ``(a⊙b)⊙c − a⊙(b⊙c) = [[b, [[c, a]]]]``.
    """
    J, L = jordan_product, lie_product
    leib = L(a, J(b, c)) - J(L(a, b), c) - J(b, L(a, c))
    assoc = J(J(a, b), c) - J(a, J(b, c)) - L(b, L(c, a))
    return float(np.linalg.norm(leib)), float(np.linalg.norm(assoc))


def verify_lie_jordan(basis: HermitianBasis, trials: int = 20, seed: int = 0) -> LieJordanReport:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    worst_l = worst_a = 0.0
    for _ in range(trials):
        comps = rng.normal(size=(3, basis.dim))
        a, b, c = (basis.compose(x) for x in comps)
        rl, ra = lie_jordan_residuals(a, b, c)
        worst_l, worst_a = max(worst_l, rl), max(worst_a, ra)
    return LieJordanReport(basis.n, trials, worst_l, worst_a)


# ---------------------------------------------------------------------------
# Kraus sets, Choi matrices, complete positivity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KrausSet:
    ops: tuple = field()

    def __init__(self, ops: Sequence):
        arrs = tuple(_as_matrix(v).copy() for v in ops)
        if not arrs:
            raise InvariantError("a Kraus set needs at least one operator")
        if len({a.shape for a in arrs}) != 1:
            raise DimensionError("Kraus operators of different shapes")
        for a in arrs:
            a.setflags(write=False)
        object.__setattr__(self, "ops", arrs)

    @property
    def n(self) -> int:
        return self.ops[0].shape[0]

    @property
    def V(self) -> np.ndarray:
        return sum(dagger(v) @ v for v in self.ops)

    def apply(self, x) -> np.ndarray:
        return sum(v @ x @ dagger(v) for v in self.ops)

    def apply_dual(self, x) -> np.ndarray:
        """``x -> Σ v^† x v`` (the map written A♯ for the Kraus-field prescription)."""
        return sum(dagger(v) @ x @ v for v in self.ops)

    def superoperator(self) -> np.ndarray:
        return sum(np.kron(np.conj(v), v) for v in self.ops)

    def check(self) -> None:
        V = self.V
        if np.abs(V - dagger(V)).max() > 1e-12:
            raise InvariantError("V = Σ v^† v is not self-adjoint")
        if np.linalg.eigvalsh(V).min() < -1e-10:
            raise InvariantError("V = Σ v^† v is not positive semidefinite")


MapSpec = Union[KrausSet, np.ndarray, Callable[[np.ndarray], np.ndarray]]


def _map_callable(map_spec: MapSpec, n: int | None):
    if isinstance(map_spec, KrausSet):
        return map_spec.apply, map_spec.n
    if callable(map_spec):
        if n is None:
            raise DimensionError("dimension n is required for a callable map")
        return map_spec, n
    s = np.asarray(map_spec, dtype=complex)
    nn = s.shape[0]
    dim = int(round(np.sqrt(nn)))
    if s.ndim != 2 or s.shape != (nn, nn) or dim * dim != nn:
        raise DimensionError(f"superoperator must be n²×n², got shape {s.shape}")
    if n is not None and n != dim:
        raise DimensionError(f"superoperator acts on n={dim}, expected n={n}")
    # column stacking: vec(X) = X.T.ravel()
    return (lambda x: (s @ x.T.reshape(-1)).reshape(dim, dim).T), dim


def choi_matrix(map_spec: MapSpec, n: int | None = None) -> np.ndarray:
    """``C = Σ_kl E_kl ⊗ Φ(E_kl)`` for matrix units ``E_kl``."""
    phi, n = _map_callable(map_spec, n)
    C = np.zeros((n * n, n * n), dtype=complex)
    for k in range(n):
        for l in range(n):
            E = np.zeros((n, n), dtype=complex)
            E[k, l] = 1.0
            C[k * n:(k + 1) * n, l * n:(l + 1) * n] = phi(E)
    return C


def choi_min_eigenvalue(map_spec: MapSpec, n: int | None = None) -> float:
    C = choi_matrix(map_spec, n)
    return float(np.linalg.eigvalsh(0.5 * (C + dagger(C))).min())


def is_completely_positive(map_spec: MapSpec, tol: float = 1e-8, n: int | None = None) -> bool:
    if tol <= 0:
        raise ValueError("tol must be positive")
    return choi_min_eigenvalue(map_spec, n) >= -tol


def transpose_superoperator(n: int) -> np.ndarray:
    """Superoperator of ``X -> X^T`` (column stacking); the swap operator."""
    S = np.zeros((n * n, n * n))
    for i in range(n):
        for j in range(n):
            S[i * n + j, j * n + i] = 1.0
    return S

"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the package's structure constants and
superoperator code: they work with plain matrices, row-stacking vectorization
and finite differences.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from scipy.linalg import expm

from geoflow.algebra import build_gellmann_basis, structure_constants

ROOT = Path(__file__).resolve().parents[1]
MODELS = ROOT / "models"
DATA = Path(__file__).resolve().parent / "data"

S0 = np.eye(2, dtype=complex)
S1 = np.array([[0, 1], [1, 0]], dtype=complex)
S2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
S3 = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA = (S1, S2, S3)


@pytest.fixture(scope="session")
def ctx():
    """``ctx(n) -> (basis, structure constants)``, cached per n."""
    cache = {}

    def get(n):
        if n not in cache:
            b = build_gellmann_basis(n)
            cache[n] = (b, structure_constants(b))
        return cache[n]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def herm(n, rng, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (a + a.conj().T) / 2


def traceless_herm(n, rng, scale=1.0):
    a = herm(n, rng, scale)
    return a - np.trace(a).real / n * np.eye(n)


def haar(n, rng):
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / abs(d))


def rand_state(n, rng, rank=None):
    rank = rank or n
    g = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def coords(rho, basis):
    """x^j = Tr(rho e_j), j >= 1."""
    return np.array([np.trace(rho @ e).real for e in basis.elements[1:]])


def matrix(x, basis):
    return np.eye(basis.n) / basis.n + sum(xi * e for xi, e in zip(x, basis.elements[1:]))


def lindblad_rhs(H, kraus, rho):
    V = sum(k.conj().T @ k for k in kraus)
    return (-1j * (H @ rho - rho @ H) - 0.5 * (V @ rho + rho @ V)
            + sum(k @ rho @ k.conj().T for k in kraus))


def superop_rowmajor(H, kraus):
    """Row-stacking superoperator: vec_r(A X B) = (A ⊗ B^T) vec_r(X)."""
    n = H.shape[0]
    I = np.eye(n)
    V = sum(k.conj().T @ k for k in kraus)
    L = -1j * (np.kron(H, I) - np.kron(I, H.T)) - 0.5 * (np.kron(V, I) + np.kron(I, V.T))
    for k in kraus:
        L = L + np.kron(k, k.conj())
    return L


def evolve(H, kraus, rho, t):
    n = rho.shape[0]
    return (expm(t * superop_rowmajor(H, kraus)) @ rho.reshape(-1)).reshape(n, n)


def choi_oracle(H, kraus, t):
    """Choi matrix Σ E_kl ⊗ Φ_t(E_kl) from row-stacked evolution."""
    n = H.shape[0]
    P = expm(t * superop_rowmajor(H, kraus))
    C = np.zeros((n * n, n * n), dtype=complex)
    for k in range(n):
        for l in range(n):
            E = np.zeros((n, n))
            E[k, l] = 1
            C += np.kron(E, (P @ E.reshape(-1)).reshape(n, n))
    return C


def field_from_matrix_map(fun, basis):
    """Tangent vector at x of the field whose matrix form is ``xi -> fun(xi)``."""
    return lambda x: coords(fun(matrix(x, basis)), basis)


def jacobian_fd(f, x, h=1e-5):
    m = x.size
    J = np.zeros((m, m))
    for i in range(m):
        e = np.zeros(m)
        e[i] = h
        J[:, i] = (f(x + e) - f(x - e)) / (2 * h)
    return J


def bracket_fd(f, g, x):
    """[f, g](x) = Dg(x) f(x) − Df(x) g(x) by central differences."""
    return jacobian_fd(g, x) @ f(x) - jacobian_fd(f, x) @ g(x)


def pauli_coords(rho):
    return np.array([np.trace(rho @ s).real for s in SIGMA])


def from_pauli(x):
    return 0.5 * (S0 + x[0] * S1 + x[1] * S2 + x[2] * S3)

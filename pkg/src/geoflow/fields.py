"""Polynomial vector fields on the trace-one hyperplane.

Every field is stored as exact coefficient tensors in the orthonormal
coherence coordinates::

    v(x)^k = c0[k] + c1[k,i] x_i + c2[k,i,j] x_i x_j + c3[k,i,j,l] x_i x_j x_l

with ``c2``/``c3`` symmetric in their input slots. Hamiltonian fields are
linear, gradient-like and Kraus fields are quadratic, and brackets of two
quadratic fields are cubic; nothing goes beyond degree 3.

Sign conventions (derived from ``L(rho) = -i[H,rho] - V⊙rho + Σ v rho v^†``):

* ``X_a`` has matrix form ``xi -> [[xi, a]]`` so that ``X_a(f_b) = f_{[[a,b]]}``.
  The Hamiltonian part of a GKLS generator is therefore ``X_{2H}``.
* ``Y_b`` has matrix form ``xi -> b⊙xi − Tr(b xi) xi``.
* ``Z_K`` has matrix form ``xi -> K(xi) − Tr(V xi) xi``, ``V = K^♯(I)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import _kernels
from .algebra import (
    PAULI_SCALE,
    HermitianBasis,
    KrausSet,
    StructureConstants,
    dagger,
    is_hermitian,
)
from .errors import (
    AffinityError,
    BlowUpError,
    DimensionError,
    InvariantError,
    UnsupportedDegreeError,
)
from .statespace import CoherencePoint, coords_from_matrices, to_matrix

AFFINE_TOL = 1e-10
MAX_DEGREE = 3


def _symmetrize(t: np.ndarray) -> np.ndarray:
    """Average ``t`` over permutations of all axes but the first."""
    p = t.ndim - 1
    if p < 2:
        return t
    perms = list(itertools.permutations(range(1, p + 1)))
    return sum(np.transpose(t, (0,) + q) for q in perms) / len(perms)


class PolyField:
    """Polynomial vector field of degree ≤ 3 in coherence coordinates."""

    __slots__ = ("m", "coeffs")

    def __init__(self, coeff0, coeff1=None, coeff2=None, coeff3=None):
        c0 = np.array(coeff0, dtype=float).reshape(-1)
        m = c0.size
        shapes = [(m,), (m, m), (m, m, m), (m, m, m, m)]
        coeffs = [c0]
        for p, c in enumerate((coeff1, coeff2, coeff3), start=1):
            c = np.zeros(shapes[p]) if c is None else np.array(c, dtype=float)
            if c.shape != shapes[p]:
                raise DimensionError(f"degree-{p} coefficient has shape {c.shape}, expected {shapes[p]}")
            coeffs.append(_symmetrize(c))
        for c in coeffs:
            c.setflags(write=False)
        self.m = m
        self.coeffs = tuple(coeffs)

    # -- construction helpers -------------------------------------------
    @classmethod
    def zero(cls, m: int) -> "PolyField":
        return cls(np.zeros(m))

    @classmethod
    def from_parts(cls, parts) -> "PolyField":
        parts = list(parts) + [None] * (4 - len(parts))
        return cls(*parts)

    @property
    def coeff0(self):
        return self.coeffs[0]

    @property
    def coeff1(self):
        return self.coeffs[1]

    @property
    def coeff2(self):
        return self.coeffs[2]

    @property
    def coeff3(self):
        return self.coeffs[3]

    @property
    def degree(self) -> int:
        for p in (3, 2, 1, 0):
            if np.any(self.coeffs[p] != 0.0):
                return p
        return 0

    def is_affine(self, tol: float = AFFINE_TOL) -> bool:
        return affinity_report(self, tol).is_affine

    # -- algebra ----------------------------------------------------------
    def _check(self, other):
        if not isinstance(other, PolyField):
            return NotImplemented
        if other.m != self.m:
            raise DimensionError(f"fields on {self.m} and {other.m} coordinates")
        return other

    def __add__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return PolyField(*(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return PolyField(*(a - b for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self):
        return PolyField(*(-a for a in self.coeffs))

    def __mul__(self, s):
        s = float(s)
        return PolyField(*(s * a for a in self.coeffs))

    __rmul__ = __mul__

    def __call__(self, x):
        return evaluate(self, x)

    def max_abs_diff(self, other: "PolyField") -> float:
        other = self._check(other)
        return max(float(np.abs(a - b).max()) for a, b in zip(self.coeffs, other.coeffs))

    def linear_matrix(self) -> np.ndarray:
        """Augmented ``(m+1)×(m+1)`` matrix ``[[c1, c0], [0, 0]]`` of an affine field."""
        M = np.zeros((self.m + 1, self.m + 1))
        M[:-1, :-1] = self.coeff1
        M[:-1, -1] = self.coeff0
        return M

    def kernel_args(self):
        deg = self.degree
        c2 = np.ascontiguousarray(self.coeff2) if deg >= 2 else np.zeros((1, 1, 1))
        c3 = np.ascontiguousarray(self.coeff3) if deg >= 3 else np.zeros((1, 1, 1, 1))
        return (np.ascontiguousarray(self.coeff0), np.ascontiguousarray(self.coeff1), c2, c3, max(deg, 1))

    def __repr__(self):
        return f"PolyField(m={self.m}, degree={self.degree})"


def evaluate(f: PolyField, p) -> np.ndarray:
    """Tangent vector of ``f`` at a point, or at each row of a coordinate stack."""
    x = p.x if isinstance(p, CoherencePoint) else np.asarray(p, dtype=float)
    if x.shape[-1] != f.m:
        raise DimensionError(f"point has {x.shape[-1]} coordinates, field expects {f.m}")
    if x.ndim == 1:
        return _kernels.poly_eval(*f.kernel_args(), np.ascontiguousarray(x))
    c0, c1, c2, c3 = f.coeffs
    out = c0 + x @ c1.T
    if f.degree >= 2:
        out = out + np.einsum("kij,ni,nj->nk", c2, x, x)
    if f.degree >= 3:
        out = out + np.einsum("kijl,ni,nj,nl->nk", c3, x, x, x)
    return out


@dataclass(frozen=True)
class AffinityReport:
    quadratic_norm: float
    cubic_norm: float
    is_affine: bool


def affinity_report(f: PolyField, tol: float = AFFINE_TOL) -> AffinityReport:
    q = float(np.abs(f.coeff2).max(initial=0.0))
    c = float(np.abs(f.coeff3).max(initial=0.0))
    return AffinityReport(q, c, q < tol and c < tol)


# ---------------------------------------------------------------------------
# Lie bracket
# ---------------------------------------------------------------------------


def _directional(F: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Homogeneous part ``(f·∇) g`` for homogeneous coefficient tensors F (deg p), G (deg q)."""
    q = G.ndim - 1
    if q == 0:
        return None
    # ∂_j g^k = q G[k, j, rest...]; contract j with f^j = F[j, ...]
    t = q * np.tensordot(G, F, axes=([1], [0]))
    return t


def bracket(f: PolyField, g: PolyField) -> PolyField:
    """``[f, g]^k = f^j ∂_j g^k − g^j ∂_j f^k`` (vector fields as derivations)."""
    if f.m != g.m:
        raise DimensionError("bracket of fields on different spaces")
    df, dg = f.degree, g.degree
    if df + dg - 1 > MAX_DEGREE:
        raise UnsupportedDegreeError(f"bracket of degrees {df} and {dg} has degree {df + dg - 1} > 3")
    out = [np.zeros((f.m,) * (d + 1)) for d in range(4)]
    for p in range(df + 1):
        for q in range(dg + 1):
            r = p + q - 1
            if r < 0:
                continue
            a = _directional(f.coeffs[p], g.coeffs[q])
            b = _directional(g.coeffs[q], f.coeffs[p])
            if a is not None:
                out[r] = out[r] + a
            if b is not None:
                out[r] = out[r] - b
    return PolyField(*out)


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------


def _components(a, basis: HermitianBasis) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if not is_hermitian(a, 1e-10):
        raise InvariantError("operator must be self-adjoint")
    return basis.components(a)


def hamiltonian_field(a, basis: HermitianBasis, sc: StructureConstants) -> PolyField:
    """``X_a = c[j,k,l] x^l a_j ∂_k``; the identity component of ``a`` drops out."""
    ac = _components(a, basis)
    n = basis.n
    # sum over the full index mu (the mu=0 row of c vanishes identically)
    lin = np.einsum("j,jkl->kl", ac, sc.c)
    c0 = lin[1:, 0] / np.sqrt(n)
    c1 = lin[1:, 1:]
    return PolyField(c0, c1)


def gradient_field(b, basis: HermitianBasis, sc: StructureConstants) -> PolyField:
    """``Y_b = (d[j,k,l] x^l b_j + δ_jk b_j / n) ∂_k − (x^j b_j) Δ``."""
    bc = _components(b, basis)[1:]
    n, m = basis.n, basis.m
    c0 = bc / n
    c1 = np.einsum("j,jkl->kl", bc, sc.d[1:, 1:, 1:])
    eye = np.eye(m)
    c2 = -0.5 * (np.einsum("i,kj->kij", bc, eye) + np.einsum("j,ki->kij", bc, eye))
    return PolyField(c0, c1, c2)


def hamiltonian_field_full(a, basis: HermitianBasis, sc: StructureConstants) -> PolyField:
    """Linear field ``xi -> [[xi, a]]`` on all ``n²`` coordinates (before restriction to trace one)."""
    ac = _components(a, basis)
    return PolyField(np.zeros(basis.dim), np.einsum("v,uvs->su", ac, sc.c))


def gradient_field_full(b, basis: HermitianBasis, sc: StructureConstants) -> PolyField:
    """Linear field ``xi -> b⊙xi`` on all ``n²`` coordinates."""
    bc = _components(b, basis)
    return PolyField(np.zeros(basis.dim), np.einsum("v,vus->su", bc, sc.d))


def kraus_map_matrix(kraus: KrausSet, basis: HermitianBasis) -> np.ndarray:
    """``A[k, mu] = Tr(K(e_mu) e_k)`` for the map ``K(x) = Σ v x v^†``."""
    images = np.array([kraus.apply(e) for e in basis.elements])
    return np.einsum("mij,kji->km", images, basis.elements).real


def kraus_field(kraus: KrausSet, basis: HermitianBasis) -> PolyField:
    """``Z_A = (A[k,mu] x^mu − x^k f_{A♯(I)}) ∂_k`` with ``x^0 = 1/sqrt(n)``."""
    if kraus.n != basis.n:
        raise DimensionError("Kraus operators and basis differ in dimension")
    n, m = basis.n, basis.m
    A = kraus_map_matrix(kraus, basis)
    vc = basis.components(kraus.apply_dual(np.eye(n, dtype=complex)))
    c0 = A[1:, 0] / np.sqrt(n)
    c1 = A[1:, 1:] - vc[0] / np.sqrt(n) * np.eye(m)
    w = vc[1:]
    eye = np.eye(m)
    c2 = -0.5 * (np.einsum("i,kj->kij", w, eye) + np.einsum("j,ki->kij", w, eye))
    return PolyField(c0, c1, c2)


@dataclass(frozen=True)
class GKLSModel:
    """Hamiltonian plus Kraus operators of ``L(rho) = -i[H,rho] - V⊙rho + Σ v rho v^†``."""

    H: np.ndarray
    kraus: KrausSet

    def __post_init__(self):
        H = np.array(self.H, dtype=complex)
        if H.shape != (self.kraus.n, self.kraus.n):
            raise DimensionError(f"H has shape {H.shape}, Kraus operators are {self.kraus.n}×{self.kraus.n}")
        if np.abs(H - dagger(H)).max() > 1e-12:
            raise InvariantError("Hamiltonian is not self-adjoint")
        H.setflags(write=False)
        object.__setattr__(self, "H", H)
        self.kraus.check()

    @classmethod
    def build(cls, H, kraus_ops) -> "GKLSModel":
        ks = kraus_ops if isinstance(kraus_ops, KrausSet) else KrausSet(kraus_ops)
        if H is None:
            H = np.zeros((ks.n, ks.n))
        return cls(H, ks)

    @property
    def n(self) -> int:
        return self.kraus.n

    @property
    def V(self) -> np.ndarray:
        return self.kraus.V

    def generator(self, rho) -> np.ndarray:
        """Apply the generator directly in matrix space."""
        H, V = self.H, self.V
        return -1j * (H @ rho - rho @ H) - 0.5 * (V @ rho + rho @ V) + self.kraus.apply(rho)


@dataclass(frozen=True)
class GKLSDecomposition:
    hamiltonian: PolyField
    gradient: PolyField
    kraus: PolyField
    total: PolyField


def gkls_decomposition(model: GKLSModel, basis: HermitianBasis, sc: StructureConstants,
                       affine_tol: float = AFFINE_TOL) -> GKLSDecomposition:
    """Split the GKLS field into ``X_{2H} + Y_{-V} + Z_K`` and certify affinity."""
    if model.n != basis.n:
        raise DimensionError("model and basis differ in dimension")
    X = hamiltonian_field(2.0 * model.H, basis, sc)
    Y = gradient_field(-model.V, basis, sc)
    Z = kraus_field(model.kraus, basis)
    total = X + Y + Z
    rep = affinity_report(total, affine_tol)
    if not rep.is_affine:
        raise AffinityError(
            f"GKLS field not affine: quadratic {rep.quadratic_norm:.3e}, cubic {rep.cubic_norm:.3e}")
    return GKLSDecomposition(X, Y, Z, total)


def gkls_field(model: GKLSModel, basis: HermitianBasis, sc: StructureConstants,
               affine_tol: float = AFFINE_TOL) -> PolyField:
    return gkls_decomposition(model, basis, sc, affine_tol).total


# ---------------------------------------------------------------------------
# Qubit Pauli convention
# ---------------------------------------------------------------------------


def to_pauli_convention(f: PolyField) -> PolyField:
    """Re-express a qubit field in coordinates ``x_P = sqrt(2) x``."""
    if f.m != 3:
        raise DimensionError("the Pauli convention exists only for n=2")
    s = PAULI_SCALE
    return PolyField(s * f.coeff0, f.coeff1, f.coeff2 / s, f.coeff3 / s ** 2)


def from_pauli_convention(f: PolyField) -> PolyField:
    if f.m != 3:
        raise DimensionError("the Pauli convention exists only for n=2")
    s = PAULI_SCALE
    return PolyField(f.coeff0 / s, f.coeff1, s * f.coeff2, s ** 2 * f.coeff3)


# ---------------------------------------------------------------------------
# Nonlinear SL(n, C) action
# ---------------------------------------------------------------------------


def sl_action(g, p, basis: HermitianBasis, denom_rel_tol: float = 1e-12) -> CoherencePoint:
    """``rho -> g rho g^† / Tr(g rho g^†)``; raises :class:`BlowUpError` when the trace vanishes."""
    g = np.asarray(g, dtype=complex)
    if g.shape != (basis.n, basis.n):
        raise DimensionError(f"g has shape {g.shape}")
    rho = to_matrix(p, basis)
    num = g @ rho @ dagger(g)
    tr = np.trace(num).real
    if abs(tr) < denom_rel_tol * np.linalg.norm(num):
        raise BlowUpError(f"Tr(g xi g^†) = {tr:.3e} vanishes; the action is undefined here")
    return CoherencePoint(coords_from_matrices(num / tr, basis), basis.n)


def xy_field(a, b, basis: HermitianBasis, sc: StructureConstants) -> PolyField:
    """Field whose flow is ``t -> alpha(exp(t (a + i b) / 2))``; equals ``Y_a − X_b``."""
    return gradient_field(a, basis, sc) - hamiltonian_field(b, basis, sc)


def sl_generator(a, b, t: float) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    return expm(0.5 * t * (a + 1j * b))

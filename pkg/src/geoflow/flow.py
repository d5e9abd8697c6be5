"""Time evolution of polynomial fields and the matrix-space reference dynamics."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from . import _kernels
from .algebra import HermitianBasis, StructureConstants, choi_min_eigenvalue, dagger
from .errors import BlowUpError, DimensionError, IntegrationError, InvariantError, NotOnTraceOneError
from .fields import GKLSModel, PolyField, evaluate, gkls_field, sl_action, sl_generator
from .statespace import CoherencePoint, coords_from_matrices, diagnostics, sample_states, to_matrix


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4"  # "rk4" (fixed step) or "rk45" (adaptive)
    dt: float = 1e-3
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_steps: int = 10_000_000
    save_every: int = 1

    def __post_init__(self):
        if self.method not in ("rk4", "rk45"):
            raise ValueError(f"unknown integrator {self.method!r}")
        if self.dt <= 0 or self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("step size and tolerances must be positive")
        if self.max_steps < 1 or self.save_every < 1:
            raise ValueError("max_steps and save_every must be >= 1")


@dataclass
class Trajectory:
    times: np.ndarray
    points: np.ndarray  # (len(times), m)
    n: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.points = np.asarray(self.points, dtype=float)
        if self.points.shape[0] != self.times.size:
            raise InvariantError("times and points differ in length")
        if self.times.size > 1:
            d = np.diff(self.times)
            if not (np.all(d > 0) or np.all(d < 0)):
                raise InvariantError("trajectory times must be strictly monotone")
        if not np.all(np.isfinite(self.points)):
            raise InvariantError("trajectory contains non-finite points")

    def __len__(self):
        return self.times.size

    @property
    def leaves_state_space_possible(self) -> bool:
        return bool(self.meta.get("leaves_state_space_possible", False))

    def point(self, i: int) -> CoherencePoint:
        return CoherencePoint(self.points[i], self.n)

    @property
    def end(self) -> CoherencePoint:
        return self.point(-1)


def _as_coords(x0, m: int) -> np.ndarray:
    x = x0.x if isinstance(x0, CoherencePoint) else np.asarray(x0, dtype=float)
    if x.shape != (m,):
        raise DimensionError(f"initial point has shape {x.shape}, field expects ({m},)")
    return x


def _n_of(m: int) -> int:
    n = int(round(math.sqrt(m + 1)))
    if n * n - 1 != m:
        raise DimensionError(f"{m} coordinates do not correspond to any n")
    return n


def integrate(f: PolyField, x0, t_end: float, cfg: IntegratorConfig | None = None) -> Trajectory:
    """Integrate ``dx/dt = f(x)`` from ``x0`` up to ``t_end``.

    Negative ``t_end`` integrates backwards; the trajectory is then flagged
    ``leaves_state_space_possible`` since backward flows need not keep states.
    """
    cfg = cfg or IntegratorConfig()
    x = _as_coords(x0, f.m)
    meta = {"method": cfg.method, "leaves_state_space_possible": t_end < 0}
    if t_end < 0:
        warnings.warn("negative-time integration may leave the state space", RuntimeWarning, stacklevel=2)
    n = _n_of(f.m)
    if t_end == 0:
        return Trajectory(np.zeros(1), x[None, :].copy(), n, meta)

    if cfg.method == "rk4":
        nsteps = max(1, math.ceil(abs(t_end) / cfg.dt - 1e-9))
        if nsteps > cfg.max_steps:
            raise IntegrationError(f"{nsteps} steps needed, max_steps={cfg.max_steps}")
        h = t_end / nsteps
        try:
            pts = _kernels.rk4(*f.kernel_args(), np.ascontiguousarray(x), h, nsteps, cfg.save_every)
        except FloatingPointError as exc:
            raise IntegrationError(str(exc)) from exc
        steps = np.arange(0, nsteps + 1, cfg.save_every)
        if steps[-1] != nsteps:
            steps = np.append(steps, nsteps)
        times = steps * h
        times[-1] = t_end
        meta.update(dt=h, steps=nsteps, save_every=cfg.save_every, backend=_kernels.BACKEND)
        return Trajectory(times, pts, n, meta)

    sol = solve_ivp(lambda t, y: evaluate(f, y), (0.0, t_end), x, method="RK45",
                    rtol=cfg.rel_tol, atol=cfg.abs_tol)
    if not sol.success:
        raise IntegrationError(sol.message)
    if sol.t.size - 1 > cfg.max_steps:
        raise IntegrationError(f"{sol.t.size - 1} steps taken, max_steps={cfg.max_steps}")
    meta.update(rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol, steps=int(sol.t.size - 1), nfev=int(sol.nfev))
    return Trajectory(sol.t, sol.y.T, n, meta)


def affine_propagator(f: PolyField, t: float) -> tuple[np.ndarray, np.ndarray]:
    """``(P, q)`` with ``x(t) = P x0 + q`` for an affine field."""
    if not f.is_affine():
        raise InvariantError("closed-form flow needs an affine field")
    E = expm(t * f.linear_matrix())
    return E[:-1, :-1], E[:-1, -1]


def exact_affine_flow(f: PolyField, x0, t: float) -> CoherencePoint:
    x = _as_coords(x0, f.m)
    P, q = affine_propagator(f, t)
    return CoherencePoint(P @ x + q, _n_of(f.m))


# ---------------------------------------------------------------------------
# Matrix-space reference dynamics
# ---------------------------------------------------------------------------


def lindblad_superoperator(model: GKLSModel) -> np.ndarray:
    """Column-stacked superoperator of the generator: ``vec(L(rho)) = Lhat vec(rho)``."""
    n = model.n
    I = np.eye(n)
    H, V = model.H, model.V
    Lhat = -1j * (np.kron(I, H) - np.kron(H.T, I))
    Lhat = Lhat - 0.5 * (np.kron(I, V) + np.kron(V.T, I))
    Lhat = Lhat + model.kraus.superoperator()
    return Lhat


def vec(a: np.ndarray) -> np.ndarray:
    return np.asarray(a).T.reshape(-1)


def unvec(v: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(v).reshape(n, n).T


def channel(model: GKLSModel, t: float) -> np.ndarray:
    """Superoperator of the flow map ``Phi_t = exp(t L)``."""
    return expm(t * lindblad_superoperator(model))


def lindblad_matrix_oracle(model: GKLSModel, rho0, t: float) -> np.ndarray:
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (model.n, model.n):
        raise DimensionError(f"rho0 has shape {rho0.shape}")
    if abs(np.trace(rho0) - 1.0) > 1e-10:
        raise NotOnTraceOneError(f"trace of rho0 is {np.trace(rho0).real}")
    rho = unvec(channel(model, t) @ vec(rho0), model.n)
    return 0.5 * (rho + dagger(rho))


@dataclass
class OracleReport:
    deviation: float
    times: np.ndarray
    trace_error: float
    min_eigenvalue: float

    def passed(self, tol: float = 1e-6) -> bool:
        return self.deviation < tol


def oracle_consistency(model: GKLSModel, x0, t: float, cfg: IntegratorConfig | None = None,
                       basis: HermitianBasis | None = None, sc: StructureConstants | None = None,
                       samples: int = 50) -> OracleReport:
    """Sup over sampled times of ‖to_matrix(integrated Γ) − oracle‖_F."""
    from .algebra import build_gellmann_basis, structure_constants

    basis = basis or build_gellmann_basis(model.n)
    sc = sc or structure_constants(basis)
    cfg = cfg or IntegratorConfig()
    gamma = gkls_field(model, basis, sc)
    x = _as_coords(x0, basis.m)
    nsteps = max(1, math.ceil(t / cfg.dt - 1e-9))
    stride = max(1, nsteps // samples)
    if cfg.method == "rk4":
        cfg = IntegratorConfig("rk4", cfg.dt, max_steps=cfg.max_steps, save_every=stride)
    traj = integrate(gamma, x, t, cfg)
    rho0 = to_matrix(x, basis)
    Lhat = lindblad_superoperator(model)
    dev = tr_err = 0.0
    min_eig = np.inf
    for tau, xp in zip(traj.times, traj.points):
        ref = unvec(expm(tau * Lhat) @ vec(rho0), model.n)
        dev = max(dev, float(np.linalg.norm(to_matrix(xp, basis) - ref)))
        tr_err = max(tr_err, abs(np.trace(ref).real - 1.0))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(0.5 * (ref + dagger(ref))).min()))
    return OracleReport(dev, traj.times, tr_err, min_eig)


def xy_flow(a, b, p, t: float, basis: HermitianBasis) -> CoherencePoint:
    """Point ``alpha(g_t)(rho)`` with ``g_t = exp(t (a + i b) / 2)``.

    This is the flow of ``Y_a − X_b`` (see :func:`geoflow.fields.xy_field`).
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if abs(np.trace(a)) > 1e-10 or abs(np.trace(b)) > 1e-10:
        raise InvariantError("xy_flow needs traceless generators")
    if not diagnostics(p, basis).is_state:
        raise InvariantError("xy_flow is only guaranteed on states")
    try:
        return sl_action(sl_generator(a, b, t), p, basis)
    except BlowUpError as exc:  # pragma: no cover - impossible on states
        raise AssertionError("nonlinear action blew up on a state") from exc


@dataclass
class SemigroupReport:
    t1: float
    t2: float
    composition_error: float
    trace_error: float
    choi_min_eigenvalue: float
    cp_tol: float = 1e-10

    @property
    def is_cptp(self) -> bool:
        return self.choi_min_eigenvalue >= -self.cp_tol and self.trace_error < 1e-10

    def passed(self, tol: float = 1e-8) -> bool:
        return self.composition_error < tol and self.is_cptp


def channel_choi_min_eigenvalue(model: GKLSModel, t: float) -> float:
    return choi_min_eigenvalue(channel(model, t))


def verify_semigroup(model: GKLSModel, t1: float, t2: float, samples: int = 20,
                     seed=0) -> SemigroupReport:
    if t1 < 0 or t2 < 0:
        raise ValueError("semigroup verification needs t1, t2 >= 0")
    from .algebra import build_gellmann_basis

    basis = build_gellmann_basis(model.n)
    xs = sample_states(model.n, samples, seed, basis)
    rhos = to_matrix(xs, basis)
    P1, P2, P12 = channel(model, t1), channel(model, t2), channel(model, t1 + t2)
    comp = tr_err = 0.0
    for rho in rhos:
        v = vec(rho)
        comp = max(comp, float(np.linalg.norm(P12 @ v - P1 @ (P2 @ v))))
        tr_err = max(tr_err, abs(np.trace(unvec(P12 @ v, model.n)) - 1.0))
    return SemigroupReport(t1, t2, comp, float(tr_err), choi_min_eigenvalue(P12))


def spectral_abscissa(f: PolyField) -> float:
    return float(np.linalg.eigvals(f.coeff1).real.max())


def trajectory_from_oracle(model: GKLSModel, x0, times, basis: HermitianBasis) -> np.ndarray:
    """Oracle coordinates at the given times (rows)."""
    rho0 = to_matrix(_as_coords(x0, basis.m), basis)
    Lhat = lindblad_superoperator(model)
    rhos = np.array([unvec(expm(t * Lhat) @ vec(rho0), model.n) for t in times])
    return coords_from_matrices(rhos, basis)

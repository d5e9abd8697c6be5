"""Pure numpy implementations of the compiled kernels (same signatures)."""
import numpy as np


def poly_eval(c0, c1, c2, c3, deg, x):
    out = c0 + c1 @ x
    if deg >= 2:
        out = out + (c2 @ x) @ x
    if deg >= 3:
        out = out + ((c3 @ x) @ x) @ x
    return out


def rk4(c0, c1, c2, c3, deg, x0, dt, nsteps, save_every):
    nsave = nsteps // save_every + 1 + (1 if nsteps % save_every else 0)
    out = np.empty((nsave, c0.shape[0]))
    x = np.array(x0, dtype=float)
    out[0] = x
    h2, h6 = 0.5 * dt, dt / 6.0
    with np.errstate(over="ignore", invalid="ignore"):
        return _rk4_loop(c0, c1, c2, c3, deg, x, dt, nsteps, save_every, out, h2, h6)


def _rk4_loop(c0, c1, c2, c3, deg, x, dt, nsteps, save_every, out, h2, h6):
    # overflow is reported through the finiteness check, not numpy warnings
    row = 1
    for s in range(1, nsteps + 1):
        k1 = poly_eval(c0, c1, c2, c3, deg, x)
        k2 = poly_eval(c0, c1, c2, c3, deg, x + h2 * k1)
        k3 = poly_eval(c0, c1, c2, c3, deg, x + h2 * k2)
        k4 = poly_eval(c0, c1, c2, c3, deg, x + dt * k3)
        x = x + h6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("non-finite state during RK4 integration")
        if s % save_every == 0 or s == nsteps:
            out[row] = x
            row += 1
    return out

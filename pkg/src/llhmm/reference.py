"""Ground-truth solvers: resolved simulation of the fast system (DNS),
the effective (period-averaged) equation, and the first-order expansion
oracle for the rescaled micro problem.
"""

from dataclasses import dataclass

import numpy as np

from .integrators import NonConvergedError, Trajectory, precession_path
from .vecmath import cross


@dataclass
class DnsConfig:
    eps: float
    beta: float
    gamma: float
    T: float
    dt: float
    field: object
    m0: np.ndarray

    def __post_init__(self):
        self.m0 = np.asarray(self.m0, dtype=float)
        if self.eps <= 0.0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.dt > self.eps / 20 * (1 + 1e-12):
            raise ValueError(
                f"dt must resolve the fast period: dt <= eps/20, got dt={self.dt}, "
                f"eps={self.eps}")
        n = round(self.T / self.dt)
        if n < 1 or abs(n * self.dt - self.T) > 4 * np.finfo(float).eps * self.T:
            raise ValueError(f"T must be an integer multiple of dt, got T={self.T}")
        if abs(np.linalg.norm(self.m0) - 1.0) > 1e-9:
            raise ValueError(f"m0 must be a unit vector, got {self.m0!r}")


def _midpoint_ll_path(h_mids, m0, dt, beta, gamma, fp_tol=1e-12, fp_max_iter=100):
    """Damped-LL midpoint march with the field precomputed at step midpoints.

    Returns (states, rhs_evals). The fixed point starts from the explicit
    Euler predictor; one right-hand-side evaluation per iterate.
    """
    n = len(h_mids)
    out = np.empty((n + 1, 3))
    out[0] = m0
    m = np.asarray(m0, dtype=float)
    evals = 0

    def rhs(u, h):
        mh = cross(u, h)
        return -beta * mh - gamma * cross(u, mh)

    for j in range(n):
        h = h_mids[j]
        x = m + dt * rhs(m, h)
        evals += 1
        converged = False
        for _ in range(fp_max_iter):
            x_new = m + dt * rhs(0.5 * (m + x), h)
            evals += 1
            delta = float(np.max(np.abs(x_new - x)))
            x = x_new
            if delta <= fp_tol:
                converged = True
                break
        if not converged:
            raise NonConvergedError(
                f"step {j}: midpoint fixed point stalled at {delta:.3e}", step_index=j)
        m = x
        out[j + 1] = m
    return out, evals


def dns_single(cfg):
    """Midpoint integration of the full damped equation with the fast field."""
    n = round(cfg.T / cfg.dt)
    t_mid = (np.arange(n) + 0.5) * cfg.dt
    h_mids = cfg.field.eval(t_mid, cfg.eps)
    states, evals = _midpoint_ll_path(h_mids, cfg.m0, cfg.dt, cfg.beta, cfg.gamma)
    return Trajectory(cfg.dt * np.arange(n + 1), states, rhs_evals=evals)


def dns_chain(cfg, dt, T=None):
    """Resolved simulation of all N exchange-coupled spins.

    The implicit midpoint equation couples the whole state through the
    exchange field, so the fixed point iterates over the full (N, 3)
    configuration; each iterate counts N right-hand-side evaluations.
    T overrides cfg.T (e.g. to extend past the final averaging window).
    """
    if T is None:
        T = cfg.T
    if dt > cfg.eps / 20 * (1 + 1e-12):
        raise ValueError(f"dt must satisfy dt <= eps/20, got dt={dt}, eps={cfg.eps}")
    n = round(T / dt)
    if abs(n * dt - T) > 4 * np.finfo(float).eps * T:
        raise ValueError(f"T must be an integer multiple of dt, got T={T}")
    m = np.array(cfg.initial, dtype=float)
    states = np.empty((n + 1,) + m.shape)
    states[0] = m
    t_mid = (np.arange(n) + 0.5) * dt
    h_ext = cfg.field.eval(t_mid, cfg.eps)
    evals = 0
    J, beta, gamma = cfg.J, cfg.beta, cfg.gamma

    def rhs(u, he):
        h = J * (np.roll(u, 1, axis=0) + np.roll(u, -1, axis=0)) + he
        uh = np.cross(u, h)
        return -beta * uh - gamma * np.cross(u, uh)

    for j in range(n):
        he = h_ext[j]
        x = m + dt * rhs(m, he)
        evals += len(m)
        converged = False
        for _ in range(100):
            x_new = m + dt * rhs(0.5 * (m + x), he)
            evals += len(m)
            delta = float(np.max(np.abs(x_new - x)))
            x = x_new
            if delta <= 1e-12:
                converged = True
                break
        if not converged:
            raise NonConvergedError(
                f"chain step {j}: fixed point stalled at {delta:.3e}", step_index=j)
        m = x
        states[j + 1] = m
    return Trajectory(dt * np.arange(n + 1), states, rhs_evals=evals)


def effective_solve(field, m0, T, dt, beta, gamma):
    """Midpoint integration of the period-averaged equation.

    Run at the macro step this is the discrete averaged scheme used as the
    multiscale-error oracle; run at a fine step it approximates the exact
    averaged dynamics.
    """
    n = round(T / dt)
    if abs(n * dt - T) > 4 * np.finfo(float).eps * max(T, 1.0):
        raise ValueError(f"T must be an integer multiple of dt, got T={T}, dt={dt}")
    t_mid = (np.arange(n) + 0.5) * dt
    h_mids = field.effective(t_mid)
    states, evals = _midpoint_ll_path(h_mids, np.asarray(m0, float), dt, beta, gamma)
    return Trajectory(dt * np.arange(n + 1), states, rhs_evals=evals)


def scaled_micro(t_a, r_frac, M, eps, field, n_steps=4000):
    """Rescaled micro problem on the fast time scale.

    Solves dm/dt = -eps m x H(eps t + t_a, t + r_frac) for t in [0, 1]
    (precession with the shifted field, exact midpoint solve per step).
    """
    dt = 1.0 / n_steps
    t_mid = (np.arange(n_steps) + 0.5) * dt
    h_mids = field.eval_split(eps * t_mid + t_a, t_mid + r_frac)
    states = precession_path(np.asarray(M, float), h_mids, dt, eps)
    return Trajectory(dt * np.arange(n_steps + 1), states, rhs_evals=n_steps)


def m1_oracle(t, t_a, r_frac, M, field, nodes_per_unit=20_000):
    """First-order expansion term of the rescaled micro solution.

    m1(t) = -integral_0^t M x H(t_a, s + r_frac) ds, with the slow field
    argument frozen at the window center. Composite trapezoidal rule on a
    fine grid, linearly interpolated to the requested times; absolute
    error <= 1e-8 at the default resolution.
    """
    t = np.asarray(t, dtype=float)
    t_max = float(t.max()) if t.ndim else float(t)
    M = np.asarray(M, dtype=float)
    if t_max == 0.0:
        return np.zeros(t.shape + (3,)) if t.ndim else np.zeros(3)
    n = max(2, int(np.ceil(nodes_per_unit * t_max)))
    grid = np.linspace(0.0, t_max, n + 1)
    h = field.eval_split(t_a, grid + r_frac)
    g = -np.cross(M, h)
    dt = grid[1] - grid[0]
    cum = np.vstack([np.zeros(3), np.cumsum(0.5 * dt * (g[1:] + g[:-1]), axis=0)])
    flat = np.atleast_1d(t).ravel()
    out = np.stack([np.interp(flat, grid, cum[:, c]) for c in range(3)], axis=-1)
    return out.reshape(t.shape + (3,)) if t.ndim else out[0]

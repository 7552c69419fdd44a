"""Implicit midpoint time stepping, forward and backward in time.

The generic stepper solves the midpoint equation

    m' = m + dt * rhs(t + dt/2, (m + m')/2)

by fixed-point iteration started from the explicit Euler predictor.
For the conservative precession right-hand side -beta m x h(t), which
is linear in m, the midpoint equation is instead solved in closed form
(`precession_step` / `precession_path`); that is the same scheme with
an exact inner solve, used in the hot micro-solver loops.
"""

from dataclasses import dataclass, field

import numpy as np

from .vecmath import cross


class NonConvergedError(RuntimeError):
    """Fixed-point iteration failed; dt is too large for the field strength."""

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


@dataclass
class MidpointConfig:
    dt: float
    fp_tol: float = 1e-12
    fp_max_iter: int = 100

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.fp_tol <= 0.0:
            raise ValueError(f"fp_tol must be positive, got {self.fp_tol}")
        if self.fp_max_iter < 1:
            raise ValueError(f"fp_max_iter must be >= 1, got {self.fp_max_iter}")


@dataclass
class Trajectory:
    """Sampled states; times strictly monotone (decreasing for backward runs)."""

    times: np.ndarray
    states: np.ndarray
    rhs_evals: int = 0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if len(self.times) != len(self.states):
            raise ValueError("times and states must have equal length")
        if len(self.times) > 1:
            d = np.diff(self.times)
            if not (np.all(d > 0) or np.all(d < 0)):
                raise ValueError("trajectory times must be strictly monotone")

    def __len__(self):
        return len(self.times)


def midpoint_step(rhs, t, m, dt, cfg):
    """One implicit midpoint step from state m at time t; dt may be negative.

    Returns the new state; raises NonConvergedError if the fixed point
    does not reach cfg.fp_tol within cfg.fp_max_iter iterations.
    """
    t_mid = t + 0.5 * dt
    x = m + dt * rhs(t_mid, m)  # explicit Euler predictor
    for _ in range(cfg.fp_max_iter):
        x_new = m + dt * rhs(t_mid, 0.5 * (m + x))
        delta = float(np.max(np.abs(x_new - x)))
        x = x_new
        if delta <= cfg.fp_tol:
            return x
    raise NonConvergedError(
        f"midpoint fixed point stalled at residual {delta:.3e} > {cfg.fp_tol:.3e} "
        f"(dt = {dt}, t = {t})")


def integrate(rhs, t0, m0, t1, dt_abs, cfg, counter=None):
    """March from t0 to t1 with |step| = dt_abs; (t1 - t0)/dt_abs must be integral.

    The step sign follows sign(t1 - t0); t1 = t0 yields the single-sample
    trajectory [m0]. A failing step re-raises NonConvergedError with its index.
    """
    if dt_abs <= 0.0:
        raise ValueError(f"dt_abs must be positive, got {dt_abs}")
    span = t1 - t0
    n = int(round(abs(span) / dt_abs))
    if abs(abs(span) - n * dt_abs) > 4 * np.finfo(float).eps * max(abs(t0), abs(t1), 1.0):
        raise ValueError(f"({t1} - {t0}) is not an integer multiple of {dt_abs}")
    m0 = np.asarray(m0, dtype=float)
    states = np.empty((n + 1,) + m0.shape)
    states[0] = m0
    dt = dt_abs if span >= 0 else -dt_abs
    times = t0 + dt * np.arange(n + 1)
    evals = 0
    if counter is not None:
        def counted(t, m):
            nonlocal evals
            evals += 1
            return rhs(t, m)
    else:
        counted = rhs
    m = m0
    for i in range(n):
        try:
            m = midpoint_step(counted, times[i], m, dt, cfg)
        except NonConvergedError as exc:
            raise NonConvergedError(f"step {i}: {exc}", step_index=i) from exc
        states[i + 1] = m
    return Trajectory(times, states, rhs_evals=evals)


def precession_step(m, h_mid, dt, beta):
    """Exact solution of the midpoint equation for rhs = -beta m x h.

    With c = beta dt / 2 the equation is linear, m' + c m' x h = m - c m x h,
    and inverts in closed form; the map is a rotation, so |m'| = |m| exactly.
    """
    c = 0.5 * beta * dt
    b = m - c * cross(m, h_mid)
    denom = 1.0 + c * c * (h_mid[0] ** 2 + h_mid[1] ** 2 + h_mid[2] ** 2)
    return (b - c * cross(b, h_mid) + (c * c * np.dot(b, h_mid)) * h_mid) / denom


def precession_path(m0, h_mids, dt, beta):
    """Repeated precession_step; h_mids[j] is the field at the j-th midpoint.

    Returns the (n+1, 3) array of states including m0. Costs one
    right-hand-side evaluation per step.
    """
    n = len(h_mids)
    out = np.empty((n + 1, 3))
    out[0] = m0
    m = np.asarray(m0, dtype=float)
    c = 0.5 * beta * dt
    c2 = c * c
    for j in range(n):
        h = h_mids[j]
        b = m - c * cross(m, h)
        denom = 1.0 + c2 * (h[0] * h[0] + h[1] * h[1] + h[2] * h[2])
        m = (b - c * cross(b, h) + (c2 * (b[0] * h[0] + b[1] * h[1] + b[2] * h[2])) * h) / denom
        out[j + 1] = m
    return out

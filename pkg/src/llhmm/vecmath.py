"""3-vector algebra and the Landau-Lifshitz right-hand side.

All quantities are dimensionless. Vectors are plain numpy arrays of
shape (3,); batched variants of the same formulas live with their
callers (chain solvers operate on (..., 3) arrays via numpy directly).
"""

import numpy as np


def vec3(x, y, z):
    """Build a 3-vector, rejecting non-finite components."""
    v = np.array([x, y, z], dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"vector components must be finite, got {v}")
    return v


def as_spin(v, tol=1e-9):
    """Validate that v is a unit magnetization vector.

    Macro states are allowed to drift off the unit sphere and bypass
    this check; it guards initial data and micro/DNS states only.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ValueError(f"spin must be a finite 3-vector, got {v!r}")
    n = norm(v)
    if abs(n - 1.0) > tol:
        raise ValueError(f"spin must have unit length, |v| = {n!r}")
    return v


def norm(v):
    return float(np.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]))


def cross(a, b):
    # hand-rolled: np.cross has high overhead for single (3,) vectors
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def precession_rhs(m, h, beta):
    """-beta m x h, the conservative precession term."""
    return -beta * cross(m, h)


def ll_rhs(m, h, beta, gamma):
    """Full damped right-hand side -beta m x h - gamma m x (m x h).

    gamma = 0 reduces bitwise to precession_rhs: the damping product
    is skipped entirely rather than multiplied by zero.
    """
    mh = cross(m, h)
    if gamma == 0.0:
        return -beta * mh
    return -beta * mh - gamma * cross(m, mh)

"""Averaging kernels with vanishing moments and tunable boundary smoothness.

A kernel of class (p, q) has compact support [-1/2, 1/2], is even, has
unit mass, p vanishing moments, and its (q+1)-th derivative of bounded
variation. We realize the class as

    K(t) = (c_0 + c_1 t^2 + ... ) * (1 - 4 t^2)^(q+1),

where the window factor forces q+1 derivatives to vanish at the support
boundary and the even polynomial coefficients solve the moment system.
Odd moments vanish by symmetry; the floor(p/2)+1 coefficients enforce
moment 0 = 1 and even moments 2, 4, ..., <= p equal to 0.
"""

from fractions import Fraction
from math import factorial

import numpy as np


def _window_moment(k, q):
    """Exact integral of t^(2k) (1 - 4 t^2)^(q+1) over [-1/2, 1/2].

    Substituting t = u/2 reduces it to a Beta integral with half-integer
    arguments, which is rational up to cancelling sqrt(pi) factors:
    B(k + 1/2, q + 2) = Gamma(k+1/2) Gamma(q+2) / Gamma(k+q+5/2).
    """
    s = q + 2  # Gamma(q + 2) = (q + 1)!
    j = k + s  # Gamma(k + q + 5/2) = Gamma(j + 1/2)
    gamma_k = Fraction(factorial(2 * k), 4 ** k * factorial(k))       # / sqrt(pi)
    gamma_j = Fraction(factorial(2 * j), 4 ** j * factorial(j))       # / sqrt(pi)
    beta = gamma_k * factorial(q + 1) / gamma_j
    return Fraction(1, 2 ** (2 * k + 1)) * beta


def _solve_rational(A, b):
    """Gaussian elimination over Fractions (moment systems are tiny)."""
    n = len(b)
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for col in range(n):
        piv = next(r for r in range(col, n) if M[r][col] != 0)
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [x * inv for x in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


class AveragingKernel:
    """Immutable (p, q) kernel; evaluation is pure and thread-safe."""

    def __init__(self, p, q, coeffs):
        self.p = int(p)
        self.q = int(q)
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.coeffs.setflags(write=False)

    def __repr__(self):
        return f"AveragingKernel(p={self.p}, q={self.q})"

    def __call__(self, t):
        """K(t); exactly zero outside [-1/2, 1/2]."""
        t = np.asarray(t, dtype=float)
        t2 = t * t
        poly = np.zeros_like(t2)
        for c in self.coeffs[::-1]:
            poly = poly * t2 + c
        win = (1.0 - 4.0 * t2) ** (self.q + 1)
        val = poly * win
        return np.where(np.abs(t) <= 0.5, val, 0.0)

    def scaled(self, tau, t):
        """K_tau(t) = K(t / tau) / tau."""
        if tau <= 0.0:
            raise ValueError(f"tau must be positive, got {tau}")
        return self(np.asarray(t, dtype=float) / tau) / tau

    def moment(self, r):
        """Quadrature approximation of the r-th moment, |error| <= 1e-12.

        The integrand is a polynomial of degree 2(n-1) + 2(q+1) + r, so a
        Gauss-Legendre rule of sufficient order integrates it exactly.
        """
        if r < 0:
            raise ValueError(f"moment order must be >= 0, got {r}")
        deg = 2 * (len(self.coeffs) - 1) + 2 * (self.q + 1) + r
        nodes = max(deg // 2 + 2, 16)
        x, w = np.polynomial.legendre.leggauss(nodes)
        x = 0.5 * x
        w = 0.5 * w
        return float(np.sum(w * self(x) * x ** r))


def build_kernel(p, q):
    """Construct the (p, q) kernel by solving the exact moment system.

    The system matrix consists of window moments, computed as exact
    rationals, so the coefficients are correctly rounded floats of the
    exact solution.
    """
    if p < 1:
        raise ValueError(f"moment order p must be >= 1, got {p}")
    if q < -1:
        raise ValueError(f"smoothness index q must be >= -1, got {q}")
    n = p // 2 + 1
    A = [[_window_moment(j + r, q) for j in range(n)] for r in range(n)]
    b = [Fraction(1)] + [Fraction(0)] * (n - 1)
    coeffs = _solve_rational(A, b)
    kernel = AveragingKernel(p, q, [float(c) for c in coeffs])
    for r in range(p + 1):
        target = 1.0 if r == 0 else 0.0
        if abs(kernel.moment(r) - target) > 1e-10:
            raise RuntimeError(f"moment system failed for (p={p}, q={q}), r={r}")
    return kernel


def weighted_average(kernel, tau, f, center, ds=None):
    """Trapezoidal quadrature of integral K_tau(s - center) f(s) ds.

    The grid spacing ds is supplied by the caller so the same samples
    can serve both upscaling and averaging; it must divide tau. Defaults
    to tau / 10^4. The discrete kernel weights are renormalized to unit
    sum, so a constant function is averaged to itself exactly (kernels
    with a boundary derivative jump would otherwise pick up the O(ds^2)
    trapezoidal defect of their own normalization).
    """
    if tau <= 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    if ds is None:
        ds = tau / 10_000
    n = int(round(tau / ds))
    if n < 2 or abs(n * ds - tau) > 4 * np.finfo(float).eps * tau:
        raise ValueError(f"grid spacing {ds} does not divide the window {tau}")
    # kernel argument built on the exact unit grid so the support endpoints
    # land on +-1/2 without roundoff (the scaled arithmetic can push the
    # edge sample outside the support and silently drop it)
    u = np.arange(n + 1) / n - 0.5
    s = center + tau * u
    w = np.full(n + 1, ds)
    w[0] *= 0.5
    w[-1] *= 0.5
    wk = w * (kernel(u) / tau)
    wk /= wk.sum()
    vals = np.asarray(f(s), dtype=float)
    return float(np.sum(wk * vals))

"""Spatio-temporal multiscale solver for a periodic chain of
exchange-coupled spins.

The chain of N = (r + ell) L particles at spacing dx is coarsened to L
macro points X_I = I (r + ell) dx. Each macro cell owns a micro patch of
2r + 1 particles initialized by normalized quadratic interpolation of
the three surrounding macro values; interior patch spins evolve by
precession under exchange plus the external field while the two edge
spins stay pinned at their interpolated values. The macro flux is a
spatial kernel sum over the patch combined with the temporal kernel
average of the analytic right-hand side, and the macro update matches
the single-spin scheme cell by cell.

All L patches within one outer iteration are independent; they are
solved as one batched array with per-patch convergence masking, which
makes a batched run bitwise identical to solving each patch alone.
"""

from dataclasses import dataclass

import numpy as np

from .fields import TwoScaleField
from .integrators import NonConvergedError, Trajectory
from .kernels import AveragingKernel


class DegenerateInterpolantError(ValueError):
    """Quadratic interpolant of the macro values vanished; cannot normalize."""


class WindowOutOfRangeError(ValueError):
    """Trajectory does not cover the requested temporal averaging window."""


class MacroNonConvergedError(RuntimeError):
    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


_EPS = np.finfo(float).eps


@dataclass
class ChainConfig:
    N: int
    L: int
    r: int
    ell: int
    dx: float
    J: float
    eps: float
    tau: float
    macro_dt: float
    micro_dt: float
    beta: float
    gamma: float
    T: float
    kernel_time: AveragingKernel
    kernel_space: AveragingKernel
    field: TwoScaleField
    initial: np.ndarray           # (N, 3) unit spins
    macro_fp_tol: float = 1e-10
    macro_fp_max_iter: int = 60
    micro_fp_tol: float = 1e-12
    micro_fp_max_iter: int = 100

    def __post_init__(self):
        if self.r < 1 or self.ell < 0 or self.L < 1:
            raise ValueError(f"need r >= 1, ell >= 0, L >= 1; got r={self.r}, "
                             f"ell={self.ell}, L={self.L}")
        if self.N != (self.r + self.ell) * self.L:
            raise ValueError(
                f"N must equal (r + ell) L, got N={self.N}, "
                f"(r + ell) L = {(self.r + self.ell) * self.L}")
        if self.dx <= 0.0:
            raise ValueError(f"dx must be positive, got {self.dx}")
        if self.eps <= 0.0 or not self.eps < self.tau:
            raise ValueError(f"tau must exceed eps, got tau={self.tau}, eps={self.eps}")
        if not self.tau < self.macro_dt:
            raise ValueError(
                f"macro_dt must exceed tau, got macro_dt={self.macro_dt}, tau={self.tau}")
        if self.beta == 0.0:
            raise ValueError("beta must be nonzero")
        half = 0.5 * self.tau
        n = round(half / self.micro_dt)
        if n < 1 or abs(n * self.micro_dt - half) > 4 * _EPS * half:
            raise ValueError(
                f"micro_dt must divide tau/2, got micro_dt={self.micro_dt}, tau={self.tau}")
        self.initial = self._materialize_initial(self.initial)

    def _materialize_initial(self, init):
        if callable(init):
            init = np.array([init(i) for i in range(self.N)], dtype=float)
        init = np.asarray(init, dtype=float)
        if init.shape != (self.N, 3):
            raise ValueError(f"initial state must have shape ({self.N}, 3)")
        norms = np.linalg.norm(init, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-9:
            raise ValueError("initial chain spins must have unit length")
        return init

    @property
    def eta(self):
        """Spatial averaging window, 2 r dx."""
        return 2 * self.r * self.dx

    @property
    def stride(self):
        return self.r + self.ell

    @property
    def half_window_steps(self):
        return round(0.5 * self.tau / self.micro_dt)

    def positions(self):
        return self.dx * np.arange(self.N)

    def macro_positions(self):
        return self.dx * self.stride * np.arange(self.L)

    def spatial_weights(self):
        """Discrete kernel weights on patch offsets -r..r, renormalized to sum 1.

        The continuum normalization of K_eta does not survive sampling at a
        handful of sites, so the weights are rescaled; a uniform state is
        then averaged to itself exactly.
        """
        u = np.arange(-self.r, self.r + 1) / (2 * self.r)  # exact +-1/2 at edges
        w = (self.kernel_space(u) / self.eta) * self.dx
        total = w.sum()
        if total <= 0.0:
            raise ValueError("spatial kernel weights sum to zero")
        return w / total


@dataclass
class ChainMacroTrajectory:
    times: np.ndarray     # (n+1,)
    states: np.ndarray    # (n+1, L, 3)
    fluxes: np.ndarray    # (n, L, 3)
    iters: np.ndarray     # (n,)
    rhs_evals: int = 0


def exchange_field(state, i, t, cfg):
    """Effective field at site i: J (m_{i-1} + m_{i+1}) + external field.

    Nearest-neighbor coupling with periodic index arithmetic; the site
    index is accepted so spatially nonuniform external fields can slot in
    later, but the named fields are uniform across the chain.
    """
    n = len(state)
    return cfg.J * (state[(i - 1) % n] + state[(i + 1) % n]) + cfg.field.eval(t, cfg.eps)


def interpolate_macro(m_left, m_center, m_right, offset, cfg):
    """Normalized componentwise quadratic through the three macro values.

    The nodes sit at -(r+ell) dx, 0, +(r+ell) dx relative to the cell
    center (unwrapped periodically); `offset` is the евaluation abscissa in
    the same local coordinate. Returns unit vectors.
    """
    dX = cfg.stride * cfg.dx
    offset = np.asarray(offset, dtype=float)
    a = (m_right - 2.0 * m_center + m_left) / (2.0 * dX * dX)
    b = (m_right - m_left) / (2.0 * dX)
    v = m_center + np.multiply.outer(offset, b) + np.multiply.outer(offset * offset, a)
    nv = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(nv < 1e-12):
        raise DegenerateInterpolantError(
            "macro interpolant vanished inside the patch; cannot normalize")
    return v / nv


def _patch_init(macro_mid, cfg):
    """Interpolated micro initial data for all L patches, shape (L, 2r+1, 3)."""
    offsets = cfg.dx * np.arange(-cfg.r, cfg.r + 1)
    left = np.roll(macro_mid, 1, axis=0)
    right = np.roll(macro_mid, -1, axis=0)
    out = np.empty((cfg.L, 2 * cfg.r + 1, 3))
    for I in range(cfg.L):
        out[I] = interpolate_macro(left[I], macro_mid[I], right[I], offsets, cfg)
    return out


def _march_patches(init, t_a, sign, cfg):
    """Precession march of pinned-boundary patches, one half-window.

    init has shape (batch, 2r+1, 3). Interior spins follow the implicit
    midpoint rule solved by fixed point over each patch; edge spins stay
    at their initial values. Patches whose residual has dropped below the
    micro tolerance are frozen (masked out), so every patch reproduces its
    standalone solution bitwise. Returns (states over samples 0..nh,
    rhs_evals), where one evaluation covers the 2r-1 interior spins of one
    patch at one iterate.
    """
    nh = cfg.half_window_steps
    dt = sign * cfg.micro_dt
    batch = init.shape[0]
    states = np.empty((nh + 1,) + init.shape)
    states[0] = init
    m = init.copy()
    evals = 0
    beta, J = cfg.beta, cfg.J
    for j in range(nh):
        t_mid = t_a + (j + 0.5) * dt
        h_ext = cfg.field.eval(t_mid, cfg.eps)

        def interior_rhs(u):
            h = J * (u[:, :-2] + u[:, 2:]) + h_ext
            return -beta * np.cross(u[:, 1:-1], h)

        x = m.copy()
        x[:, 1:-1] = m[:, 1:-1] + dt * interior_rhs(m)
        evals += batch
        active = np.ones(batch, dtype=bool)
        converged = False
        for _ in range(cfg.micro_fp_max_iter):
            mid = 0.5 * (m[active] + x[active])
            h = J * (mid[:, :-2] + mid[:, 2:]) + h_ext
            upd = m[active][:, 1:-1] + dt * (-beta * np.cross(mid[:, 1:-1], h))
            evals += int(active.sum())
            delta = np.max(np.abs(upd - x[active][:, 1:-1]), axis=(1, 2))
            xa = x[active]
            xa[:, 1:-1] = upd
            x[active] = xa
            still = delta > cfg.micro_fp_tol
            if not still.any():
                converged = True
                break
            active[np.flatnonzero(active)[~still]] = False
        if not converged:
            raise NonConvergedError(
                f"patch micro step {j}: fixed point stalled", step_index=j)
        m = x
        states[j + 1] = m
    return states, evals


def _micro_solve_batch(t_a, macro_mid, cfg):
    """All L micro problems at once; returns (s, states (2nh+1, L, 2r+1, 3), evals)."""
    init = _patch_init(macro_mid, cfg)
    fwd, ef = _march_patches(init, t_a, +1, cfg)
    bwd, eb = _march_patches(init, t_a, -1, cfg)
    nh = cfg.half_window_steps
    s = cfg.micro_dt * np.arange(-nh, nh + 1)
    states = np.concatenate([bwd[:0:-1], fwd])
    return s, states, ef + eb


def chain_micro_solve(I, t_a, macro, cfg):
    """Micro trajectory of the 2r+1 patch spins of cell I.

    Initial data interpolates the macro values of cells I-1, I, I+1;
    boundary spins are held at their initial values over the whole window.
    """
    macro = np.asarray(macro, dtype=float)
    stencil = np.stack([macro[(I - 1) % cfg.L], macro[I % cfg.L],
                        macro[(I + 1) % cfg.L]])
    offsets = cfg.dx * np.arange(-cfg.r, cfg.r + 1)
    init = interpolate_macro(stencil[0], stencil[1], stencil[2], offsets, cfg)[None]
    fwd, ef = _march_patches(init, t_a, +1, cfg)
    bwd, eb = _march_patches(init, t_a, -1, cfg)
    nh = cfg.half_window_steps
    s = cfg.micro_dt * np.arange(-nh, nh + 1)
    states = np.concatenate([bwd[:0:-1], fwd])[:, 0]
    return Trajectory(s, states, rhs_evals=ef + eb)


def _upscale_batch(s, states, t_a, cfg):
    """Spatio-temporal kernel average of the analytic right-hand side.

    states has shape (samples, L, 2r+1, 3). Interior spins contribute
    their precession right-hand side; the pinned edge spins do not move,
    so their derivative is zero (for smooth spatial kernels their weight
    vanishes at the patch edge anyway).
    """
    wsp = cfg.spatial_weights()[1:-1]
    h_ext = cfg.field.eval(s + t_a, cfg.eps)               # (samples, 3)
    mid = states[:, :, 1:-1]                               # interior spins
    h = cfg.J * (states[:, :, :-2] + states[:, :, 2:]) + h_ext[:, None, None, :]
    rhs = -cfg.beta * np.cross(mid, h)                     # (samples, L, 2r-1, 3)
    w = np.full(len(s), cfg.micro_dt)
    w[0] *= 0.5
    w[-1] *= 0.5
    n = len(s) - 1
    u = np.arange(n + 1) / n - 0.5     # exact unit grid, endpoints at +-1/2
    wk = w * (cfg.kernel_time(u) / cfg.tau)
    return np.einsum("t,j,tljc->lc", wk, wsp, rhs)


def chain_upscale(traj, I, t_a, cfg):
    """Flux for cell I from its patch trajectory (see _upscale_batch)."""
    return _upscale_batch(traj.times, traj.states[:, None], t_a, cfg)[0]


def chain_macro_step(t_n, macro, cfg):
    """One macro step for all cells; outer fixed point over the whole vector.

    Every outer iteration re-solves the L independent micro problems at the
    midpoint macro states. Returns (next state (L,3), fluxes, iterations,
    rhs_evals).
    """
    dt = cfg.macro_dt
    t_mid = t_n + 0.5 * dt
    gb = cfg.gamma / cfg.beta
    x = np.array(macro, dtype=float)
    evals = 0
    for k in range(cfg.macro_fp_max_iter):
        m_mid = 0.5 * (macro + x)
        s, states, ev = _micro_solve_batch(t_mid, m_mid, cfg)
        flux = _upscale_batch(s, states, t_mid, cfg)
        evals += ev + len(s) * cfg.L
        x_new = macro + dt * flux + gb * dt * np.cross(m_mid, flux)
        delta = float(np.max(np.abs(x_new - x)))
        x = x_new
        if delta <= cfg.macro_fp_tol:
            return x, flux, k + 1, evals
    raise MacroNonConvergedError(
        f"chain macro fixed point stalled at residual {delta:.3e} at t = {t_n}")


def chain_run(cfg):
    """Full chain evolution; M_I(0) is the spatial average of the initial chain.

    The temporal kernel cannot be applied at t = 0 (no micro history), so
    the initial macro values use the spatial-only average.
    """
    n_steps = round(cfg.T / cfg.macro_dt)
    if abs(n_steps * cfg.macro_dt - cfg.T) > 4 * _EPS * cfg.T:
        raise ValueError(
            f"T must be an integer multiple of macro_dt, got T={cfg.T}, "
            f"macro_dt={cfg.macro_dt}")
    times = cfg.macro_dt * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1, cfg.L, 3))
    fluxes = np.empty((n_steps, cfg.L, 3))
    iters = np.empty(n_steps, dtype=int)
    states[0] = macro_average_state(cfg.initial, cfg)
    total = 0
    m = states[0]
    for n in range(n_steps):
        try:
            m, flux, its, ev = chain_macro_step(times[n], m, cfg)
        except MacroNonConvergedError as exc:
            raise MacroNonConvergedError(f"macro step {n}: {exc}", step_index=n) from exc
        states[n + 1] = m
        fluxes[n] = flux
        iters[n] = its
        total += ev
    return ChainMacroTrajectory(times, states, fluxes, iters, rhs_evals=total)


def macro_average_state(state, cfg):
    """Spatial-only kernel average of a chain state at every macro point."""
    state = np.asarray(state, dtype=float)
    wsp = cfg.spatial_weights()
    idx = (cfg.stride * np.arange(cfg.L)[:, None]
           + np.arange(-cfg.r, cfg.r + 1)[None, :]) % cfg.N
    return np.einsum("j,ljc->lc", wsp, state[idx])


def macro_average(traj, I, cfg, t=None):
    """Spatio-temporal average of resolved chain data at macro point I.

    With t given, applies the temporal kernel over [t - tau/2, t + tau/2],
    which the trajectory must cover on a commensurate grid; without t, the
    input is a plain state and the average is spatial only.
    """
    if t is None:
        return macro_average_state(traj, cfg)[I]
    dt = traj.times[1] - traj.times[0]
    lo = (t - 0.5 * cfg.tau - traj.times[0]) / dt
    hi = (t + 0.5 * cfg.tau - traj.times[0]) / dt
    i_lo, i_hi = round(lo), round(hi)
    if (abs(lo - i_lo) > 1e-9 or abs(hi - i_hi) > 1e-9
            or i_lo < 0 or i_hi >= len(traj.times)):
        raise WindowOutOfRangeError(
            f"trajectory does not cover [t - tau/2, t + tau/2] for t = {t}")
    n = i_hi - i_lo
    u = np.arange(n + 1) / n - 0.5     # exact unit grid, endpoints at +-1/2
    w = np.full(n + 1, dt)
    w[0] *= 0.5
    w[-1] *= 0.5
    wk = w * (cfg.kernel_time(u) / cfg.tau)
    # temporal kernel applied to the spatial average of each stored sample
    idx = (cfg.stride * I + np.arange(-cfg.r, cfg.r + 1)) % cfg.N
    wsp = cfg.spatial_weights()
    return np.einsum("t,j,tjc->c", wk, wsp, traj.states[i_lo:i_hi + 1][:, idx])

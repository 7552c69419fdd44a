import numpy as np
import pytest

from llhmm.integrators import (MidpointConfig, NonConvergedError, Trajectory,
                               integrate, midpoint_step, precession_path,
                               precession_step)
from llhmm.vecmath import ll_rhs, precession_rhs

CFG = MidpointConfig(dt=0.01)
ZHAT = np.array([0.0, 0.0, 1.0])


def rhs_precession_z(t, m):
    return precession_rhs(m, ZHAT, 1.0)


def test_zero_rhs_returns_same_state():
    m = np.array([0.3, 0.4, 0.5])
    out = midpoint_step(lambda t, u: np.zeros(3), 0.0, m, 0.01, CFG)
    assert np.allclose(out, m, atol=1e-15)


def test_precession_step_norm_and_angle():
    m = np.array([1.0, 0.0, 0.0])
    out = midpoint_step(rhs_precession_z, 0.0, m, 0.01, CFG)
    assert abs(np.linalg.norm(out) - 1.0) <= 1e-12
    # closed form: m(t) = (cos t, sin t, 0)
    angle = np.arctan2(out[1], out[0])
    assert angle == pytest.approx(0.01, abs=1e-6)


def test_forward_backward_round_trip():
    m = np.array([0.6, 0.0, 0.8])
    fwd = midpoint_step(rhs_precession_z, 0.0, m, 0.05, CFG)
    back = midpoint_step(rhs_precession_z, 0.05, fwd, -0.05, CFG)
    assert np.max(np.abs(back - m)) <= 1e-10


def test_non_converged_raises():
    cfg = MidpointConfig(dt=1.0, fp_max_iter=3)
    strong = lambda t, m: precession_rhs(m, 50 * ZHAT, 1.0)
    with pytest.raises(NonConvergedError):
        midpoint_step(strong, 0.0, np.array([1.0, 0, 0]), 1.0, cfg)


def test_integrate_single_sample_when_span_zero():
    traj = integrate(rhs_precession_z, 1.0, np.array([1.0, 0, 0]), 1.0, 0.1, CFG)
    assert len(traj) == 1
    assert np.allclose(traj.states[0], [1, 0, 0])


def test_integrate_full_period_precession():
    T = 2 * np.pi
    dt = T / 10_000
    traj = integrate(rhs_precession_z, 0.0, np.array([1.0, 0, 0]), T, dt,
                     MidpointConfig(dt=dt))
    assert np.max(np.abs(traj.states[-1] - [1, 0, 0])) <= 1e-4


def test_integrate_damped_long_time_alignment():
    rhs = lambda t, m: ll_rhs(m, ZHAT, 1.0, 1.0)
    dt = 0.01
    traj = integrate(rhs, 0.0, np.array([1.0, 0, 0]), 20.0, dt, MidpointConfig(dt=dt))
    assert np.linalg.norm(traj.states[-1] - ZHAT) <= 1e-3


def test_integrate_backward_times_decreasing():
    traj = integrate(rhs_precession_z, 0.0, np.array([1.0, 0, 0]), -0.5, 0.05,
                     MidpointConfig(dt=0.05))
    assert np.all(np.diff(traj.times) < 0)
    assert traj.times[-1] == pytest.approx(-0.5)


def test_integrate_rejects_incommensurate_span():
    with pytest.raises(ValueError):
        integrate(rhs_precession_z, 0.0, np.array([1.0, 0, 0]), 1.0, 0.3,
                  MidpointConfig(dt=0.3))


def test_norm_conservation_damped_rhs():
    cfg = MidpointConfig(dt=0.02, fp_tol=1e-13)
    rng = np.random.default_rng(7)
    m = np.array([0.0, 0.6, 0.8])
    t = 0.0
    for _ in range(200):
        h = rng.normal(size=3)
        rhs = lambda tt, u: ll_rhs(u, h, 1.0, 0.7)
        m2 = midpoint_step(rhs, t, m, 0.02, cfg)
        assert abs(np.linalg.norm(m2) - np.linalg.norm(m)) <= 10 * cfg.fp_tol
        m, t = m2, t + 0.02


def test_second_order_accuracy_on_precession():
    errs, dts = [], []
    for n in [640, 1280, 2560, 5120]:
        T = 2 * np.pi
        dt = T / n
        traj = integrate(rhs_precession_z, 0.0, np.array([1.0, 0, 0]), T, dt,
                         MidpointConfig(dt=dt))
        exact = np.stack([np.cos(traj.times), np.sin(traj.times),
                          np.zeros_like(traj.times)], axis=1)
        errs.append(np.max(np.linalg.norm(traj.states - exact, axis=1)))
        dts.append(dt)
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.1)


def test_time_symmetry_round_trip_many_steps():
    cfg = MidpointConfig(dt=0.02, fp_tol=1e-13)
    rhs = lambda t, m: ll_rhs(m, np.array([np.sin(t), np.cos(t), 1.0]), 1.0, 0.5)
    m0 = np.array([1.0, 0.0, 0.0])
    fwd = integrate(rhs, 0.0, m0, 1.0, 0.02, cfg)
    back = integrate(rhs, 1.0, fwd.states[-1], 0.0, 0.02, cfg)
    assert np.max(np.abs(back.states[-1] - m0)) <= 100 * cfg.fp_tol


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 1.0, 0.5]), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 1.0]), np.zeros((3, 3)))


def test_midpoint_config_validation():
    with pytest.raises(ValueError):
        MidpointConfig(dt=-0.1)
    with pytest.raises(ValueError):
        MidpointConfig(dt=0.1, fp_tol=0.0)
    with pytest.raises(ValueError):
        MidpointConfig(dt=0.1, fp_max_iter=0)


def test_precession_step_solves_midpoint_equation_exactly():
    rng = np.random.default_rng(8)
    for _ in range(25):
        m = rng.normal(size=3)
        h = rng.normal(size=3)
        dt, beta = 0.05, 1.3
        out = precession_step(m, h, dt, beta)
        mid = 0.5 * (m + out)
        residual = out - m - dt * precession_rhs(mid, h, beta)
        assert np.max(np.abs(residual)) <= 1e-14
        assert abs(np.linalg.norm(out) - np.linalg.norm(m)) <= 1e-13


def test_precession_path_matches_fixed_point_midpoint():
    dt = 1e-3
    n = 200
    t_mid = (np.arange(n) + 0.5) * dt
    h_mids = np.stack([np.sin(40 * t_mid), np.cos(40 * t_mid),
                       np.ones_like(t_mid)], axis=1)
    m0 = np.array([1.0, 0.0, 0.0])
    path = precession_path(m0, h_mids, dt, 1.0)

    def rhs(t, m):
        j = int(round((t - 0.5 * dt) / dt))
        return precession_rhs(m, h_mids[j], 1.0)

    ref = integrate(rhs, 0.0, m0, n * dt, dt, MidpointConfig(dt=dt, fp_tol=1e-14))
    assert np.max(np.abs(path - ref.states)) <= 1e-12

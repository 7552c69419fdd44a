import numpy as np
import pytest

from llhmm.vecmath import as_spin, cross, ll_rhs, norm, precession_rhs, vec3


def test_cross_right_handed_basis():
    assert np.array_equal(cross(vec3(1, 0, 0), vec3(0, 1, 0)), vec3(0, 0, 1))
    assert np.array_equal(cross(vec3(0, 0, 1), vec3(1, 0, 0)), vec3(0, 1, 0))


def test_cross_self_vanishes():
    a = vec3(0.3, -1.2, 2.5)
    assert np.array_equal(cross(a, a), np.zeros(3))


def test_cross_orthogonality_random():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a, b = rng.normal(size=3), rng.normal(size=3)
        c = cross(a, b)
        assert abs(np.dot(c, a)) <= 1e-14 * np.linalg.norm(c) * np.linalg.norm(a) + 1e-300
        assert abs(np.dot(c, b)) <= 1e-14 * np.linalg.norm(c) * np.linalg.norm(b) + 1e-300


def test_ll_rhs_aligned_state_is_stationary():
    m = vec3(0, 0, 1)
    for beta, gamma in [(1.0, 0.0), (2.0, 3.0), (0.5, 0.1)]:
        assert np.allclose(ll_rhs(m, m, beta, gamma), 0.0)


def test_ll_rhs_hand_evaluated():
    m, h = vec3(1, 0, 0), vec3(0, 0, 1)
    assert np.allclose(ll_rhs(m, h, 1.0, 0.0), vec3(0, 1, 0))
    assert np.allclose(ll_rhs(m, h, 1.0, 1.0), vec3(0, 1, 1))


def test_ll_rhs_orthogonal_to_m():
    rng = np.random.default_rng(1)
    for _ in range(100):
        m, h = rng.normal(size=3), rng.normal(size=3)
        r = ll_rhs(m, h, 1.3, 0.7)
        assert abs(np.dot(r, m)) <= 1e-14 * np.linalg.norm(r) * np.linalg.norm(m) + 1e-300


def test_precession_matches_ll_rhs_with_zero_damping_bitwise():
    rng = np.random.default_rng(2)
    for _ in range(20):
        m, h = rng.normal(size=3), rng.normal(size=3)
        assert np.array_equal(ll_rhs(m, h, 1.7, 0.0), precession_rhs(m, h, 1.7))


def test_precession_examples():
    assert np.allclose(precession_rhs(vec3(1, 0, 0), vec3(0, 0, 1), 1.0), vec3(0, 1, 0))
    assert np.allclose(precession_rhs(vec3(0, 0, 2), vec3(0, 0, 1), 1.0), 0.0)
    assert np.allclose(precession_rhs(vec3(1, 0, 0), vec3(0, 0, 1), 0.0), 0.0)


def test_precession_linear_in_field():
    rng = np.random.default_rng(3)
    for _ in range(20):
        m, h = rng.normal(size=3), rng.normal(size=3)
        a = rng.normal()
        assert np.allclose(precession_rhs(m, a * h, 1.0),
                           a * precession_rhs(m, h, 1.0), rtol=1e-13, atol=1e-15)


def test_vec3_rejects_non_finite():
    with pytest.raises(ValueError):
        vec3(np.nan, 0, 0)
    with pytest.raises(ValueError):
        vec3(0, np.inf, 0)


def test_as_spin_enforces_unit_length():
    assert np.allclose(as_spin(vec3(1, 0, 0)), vec3(1, 0, 0))
    with pytest.raises(ValueError):
        as_spin(vec3(1.0 + 1e-6, 0, 0))
    v = vec3(1, 1, 1) / np.sqrt(3)
    assert norm(as_spin(v)) == pytest.approx(1.0, abs=1e-12)

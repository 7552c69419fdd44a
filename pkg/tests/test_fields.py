import numpy as np
import pytest

from llhmm.fields import (FIELD_BUILDERS, chain_pulse_field, circular_cos_field,
                          circular_field, constant_field, make_field, squared_field)

ALL_FIELDS = [
    constant_field([0.3, -0.4, 1.1]),
    circular_field(),
    circular_cos_field(),
    squared_field(),
    chain_pulse_field(),
]


def test_circular_eval_known_points():
    f = circular_field()
    assert np.allclose(f.eval(0.0, 0.01), [0, 1, 1])
    eps = 0.02
    assert np.allclose(f.eval(eps / 4, eps), [1, 0, 1], atol=1e-12)


def test_constant_eval():
    h = np.array([0.5, 0.25, -1.0])
    f = constant_field(h)
    for t in [0.0, 0.77, 123.4]:
        assert np.allclose(f.eval(t, 0.3), h)
    assert np.allclose(f.effective(5.0), h)


def test_eval_rejects_bad_eps():
    with pytest.raises(ValueError):
        circular_field().eval(0.0, 0.0)
    with pytest.raises(ValueError):
        circular_field().eval(0.0, -1.0)


def test_effective_known_means():
    assert np.allclose(circular_field().effective(0.3), [0, 0, 1], atol=1e-12)
    assert np.allclose(circular_cos_field().effective(1.1), [0, 0, 1], atol=1e-12)
    assert np.allclose(squared_field().effective(0.0), [0.5, 0.5, 1.0], atol=1e-12)
    t = 0.9
    want = (1.0 + np.cos(0.43 * t) + 0.5) * np.array([0, 0, 1.0])
    assert np.allclose(chain_pulse_field().effective(t), want, atol=1e-12)


def test_fast_part_is_one_periodic():
    rng = np.random.default_rng(5)
    z = rng.uniform(-3, 3, size=64)
    for f in ALL_FIELDS:
        assert np.allclose(f.fast(z + 1.0), f.fast(z), atol=1e-12)


def test_analytic_mean_matches_quadrature():
    rng = np.random.default_rng(6)
    z = (np.arange(4000) + 0.5) / 4000
    for f in ALL_FIELDS:
        quad_mean = f.fast(z).mean(axis=0)
        for t in rng.uniform(0, 2 * np.pi, size=10):
            assert np.allclose(f.effective(t), f.slow(t) + quad_mean, atol=1e-10)


def test_two_scale_eval_consistent_with_split_parts():
    eps = 0.007
    t = np.linspace(0, 1, 57)
    for f in ALL_FIELDS:
        assert np.allclose(f.eval(t, eps), f.slow(t) + f.fast(t / eps), atol=1e-14)


def test_boundedness_of_named_fields():
    t = np.linspace(0, 2 * np.pi, 20001)
    for f in ALL_FIELDS:
        mags = np.linalg.norm(f.eval(t, 0.01), axis=-1)
        assert np.max(mags) <= 4.0


def test_vectorized_eval_shapes():
    f = squared_field()
    assert f.eval(0.1, 0.01).shape == (3,)
    assert f.eval(np.zeros(7), 0.01).shape == (7, 3)
    assert f.eval(np.zeros((2, 5)), 0.01).shape == (2, 5, 3)


def test_make_field_registry():
    assert set(FIELD_BUILDERS) == {"constant", "circular", "circular_cos",
                                   "squared", "chain_pulse"}
    assert make_field("circular").name == "circular"
    assert np.allclose(make_field("constant", h=[1, 2, 3]).eval(0.0, 1.0), [1, 2, 3])
    with pytest.raises(ValueError):
        make_field("constant")
    with pytest.raises(ValueError):
        make_field("nope")

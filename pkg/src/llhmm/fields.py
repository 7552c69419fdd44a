"""Two-scale external fields H(t, t/eps) and their effective averages.

A field is a sum of a slowly varying part H0(t) and a 1-periodic fast
part H1(z) evaluated at z = t/eps. Both parts take scalar or array
arguments of shape (...,) and return (..., 3). The effective field is
the average of the fast part over one period, added to the slow part;
it is analytic for every named field and falls back to quadrature for
custom ones.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


def _vectorize3(fx, fy, fz):
    def f(t):
        t = np.asarray(t, dtype=float)
        return np.stack([fx(t), fy(t), fz(t)], axis=-1)
    return f


_zero = lambda t: np.zeros_like(t)
_one = lambda t: np.ones_like(t)


@dataclass(frozen=True)
class TwoScaleField:
    name: str
    slow: Callable[[np.ndarray], np.ndarray]
    fast: Callable[[np.ndarray], np.ndarray]
    fast_mean: Optional[np.ndarray] = None  # mean of fast over one period, if known

    def eval(self, t, eps):
        """H(t, t/eps) = slow(t) + fast(t/eps)."""
        if eps <= 0.0:
            raise ValueError(f"eps must be positive, got {eps}")
        t = np.asarray(t, dtype=float)
        return self.slow(t) + self.fast(t / eps)

    def eval_split(self, t_slow, z):
        """H(t_slow, z) with the two arguments decoupled (analysis form)."""
        return self.slow(np.asarray(t_slow, dtype=float)) + self.fast(np.asarray(z, dtype=float))

    def effective(self, t):
        """Hbar(t) = slow(t) + mean of fast over one period."""
        if self.fast_mean is not None:
            mean = self.fast_mean
        else:
            # 1e3-node rectangle rule; spectrally accurate for smooth
            # 1-periodic fast parts, error well below 1e-10
            z = (np.arange(1000) + 0.5) / 1000
            mean = self.fast(z).mean(axis=0)
        return self.slow(np.asarray(t, dtype=float)) + mean


def constant_field(h):
    h = np.asarray(h, dtype=float).copy()
    if h.shape != (3,) or not np.all(np.isfinite(h)):
        raise ValueError(f"constant field must be a finite 3-vector, got {h!r}")
    h.setflags(write=False)

    def slow(t):
        return np.broadcast_to(h, np.shape(t) + (3,))

    return TwoScaleField("constant", slow,
                         lambda z: np.zeros(np.shape(z) + (3,)),
                         fast_mean=np.zeros(3))


def circular_field():
    """H0 = z-hat, H1(z) = (sin 2 pi z, cos 2 pi z, 0)."""
    slow = _vectorize3(_zero, _zero, _one)
    fast = _vectorize3(lambda z: np.sin(2 * np.pi * z),
                       lambda z: np.cos(2 * np.pi * z), _zero)
    return TwoScaleField("circular", slow, fast, fast_mean=np.zeros(3))


def circular_cos_field():
    """H0 = z-hat, H1(z) = (cos 2 pi z, cos 2 pi z, 0)."""
    slow = _vectorize3(_zero, _zero, _one)
    fast = _vectorize3(lambda z: np.cos(2 * np.pi * z),
                       lambda z: np.cos(2 * np.pi * z), _zero)
    return TwoScaleField("circular_cos", slow, fast, fast_mean=np.zeros(3))


def squared_field():
    """H0 = z-hat, H1(z) = (sin^2 2 pi z, cos^2 2 pi z, 0); mean (1/2, 1/2, 0)."""
    slow = _vectorize3(_zero, _zero, _one)
    fast = _vectorize3(lambda z: np.sin(2 * np.pi * z) ** 2,
                       lambda z: np.cos(2 * np.pi * z) ** 2, _zero)
    return TwoScaleField("squared", slow, fast, fast_mean=np.array([0.5, 0.5, 0.0]))


def chain_pulse_field():
    """(1 + cos(0.43 t) + cos^2(2 pi t/eps)) z-hat, split additively."""
    slow = _vectorize3(_zero, _zero, lambda t: 1.0 + np.cos(0.43 * t))
    fast = _vectorize3(_zero, _zero, lambda z: np.cos(2 * np.pi * z) ** 2)
    return TwoScaleField("chain_pulse", slow, fast, fast_mean=np.array([0.0, 0.0, 0.5]))


FIELD_BUILDERS = {
    "constant": constant_field,
    "circular": circular_field,
    "circular_cos": circular_cos_field,
    "squared": squared_field,
    "chain_pulse": chain_pulse_field,
}


def make_field(name, h=None):
    """Look up a named field; CONSTANT requires its vector parameter h."""
    if name not in FIELD_BUILDERS:
        raise ValueError(f"unknown field {name!r}; choose from {sorted(FIELD_BUILDERS)}")
    if name == "constant":
        if h is None:
            raise ValueError("field 'constant' requires the parameter h")
        return constant_field(h)
    return FIELD_BUILDERS[name]()

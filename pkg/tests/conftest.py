import numpy as np
import pytest

from logode import tensor
from logode.fields import PolynomialVectorField
from logode.fields import _Poly
from logode.paths import SamplePath, lift_piecewise_linear


def random_tensor(rng, d, n, zero_scalar=False, scale=0.6):
    """Random element with geometrically damped levels (keeps products tame)."""
    levels = [np.array([0.0 if zero_scalar else rng.normal()])]
    for k in range(1, n + 1):
        levels.append(rng.normal(size=d**k) * scale**k)
    return tensor.TruncatedTensor(d, n, tuple(levels))


def random_group_like(rng, d, n, segments=4, scale=0.5):
    """Signature of a random piecewise-linear path: a product of segment exponentials."""
    g = tensor.unit(d, n)
    for _ in range(segments):
        step = tensor.from_level_one(rng.normal(size=d) * scale, n)
        g = tensor.mul(g, tensor.exp(step))
    return g


def planar_driver(n_segments, degree=2, span=1.0):
    """Smooth planar loop sampled on a uniform grid and lifted segmentwise."""
    t = np.linspace(0.0, span, n_segments + 1)
    points = np.stack(
        [np.sin(2 * np.pi * t) + 0.25 * t, np.cos(2 * np.pi * t) - 0.4 * np.sin(6 * np.pi * t)],
        axis=1,
    )
    return lift_piecewise_linear(SamplePath(t, points), degree)


def cubic_planar_field(gamma=3.0, box_radius=3.0):
    """Two cubic fields on R^2 with a healthy commutator, tame on the unit box."""

    def poly(terms):
        return _Poly(2, {tuple(k): v for k, v in terms.items()})

    f1 = (
        poly({(0, 0): 0.5, (0, 2): 0.12, (1, 1): -0.08}),
        poly({(0, 0): -0.2, (1, 0): 0.15, (0, 1): 0.1, (3, 0): 0.02}),
    )
    f2 = (
        poly({(0, 1): 0.3, (2, 0): -0.05, (0, 3): 0.015}),
        poly({(0, 0): 0.4, (1, 0): -0.25, (2, 1): 0.03}),
    )
    return PolynomialVectorField(2, 2, gamma, box_radius, (f1, f2))


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)

import numpy as np
import pytest

from plnet.errors import ConfigError
from plnet.harness.data import (
    gen_rosenbrock2d,
    gen_rosenbrock_nd,
    gen_step,
    rosenbrock,
    rosenbrock_nd,
    sine_term,
    step_target,
)

from oracles import rosenbrock_ref


def test_step_values():
    np.testing.assert_array_equal(step_target([1.5, -0.01]), [2.0, -2.0])
    d = gen_step(500, seed=1)
    assert d.inputs.shape == (500, 1) and d.targets.shape == (500, 1)
    assert np.all(np.abs(d.inputs) <= 2.0)
    np.testing.assert_array_equal(d.targets, step_target(d.inputs))


def test_rosenbrock_hand_values():
    assert rosenbrock(1.0, 1.0) == 0.0
    assert rosenbrock(0.0, 0.0) == pytest.approx(0.005)
    assert sine_term(1.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert rosenbrock_nd(np.zeros(2)) == pytest.approx(0.005)
    assert rosenbrock_nd(np.ones(20)) == 0.0


def test_rosenbrock_against_reference():
    rng = np.random.default_rng(0)
    x, y, a, b = rng.uniform(-2, 2, (4, 50))
    np.testing.assert_allclose(rosenbrock(x, y, a, b), rosenbrock_ref(x, y, a, b), rtol=1e-13)
    X = rng.uniform(-2, 2, (10, 6))
    ref = np.mean([rosenbrock_ref(X[:, i], X[:, i + 1]) for i in range(5)], axis=0)
    np.testing.assert_allclose(rosenbrock_nd(X), ref, rtol=1e-14)


@pytest.mark.parametrize("variant", ["plain", "plus_sine", "parametric"])
def test_rosenbrock2d_variants(variant):
    d = gen_rosenbrock2d(variant, 300, seed=2)
    x, y = d.x[:, 0], d.x[:, 1]
    assert np.all((x >= -2) & (x <= 2) & (y >= -1) & (y <= 3))
    if variant == "parametric":
        assert d.cond_dim == 2 and d.inputs.shape == (300, 4)
        a, b = d.p[:, 0], d.p[:, 1]
        assert np.all(np.abs(d.p) <= 1)
        expected = rosenbrock_ref(x, y, a, b)
    else:
        expected = rosenbrock_ref(x, y)
        if variant == "plus_sine":
            expected = expected + 0.25 * (np.sin(8 * (x - 1) - np.pi / 2) + np.sin(8 * (y - 1) - np.pi / 2) + 2)
    np.testing.assert_allclose(d.targets[:, 0], expected, rtol=1e-14)


def test_generators_are_deterministic():
    for make in (lambda s: gen_step(100, s), lambda s: gen_rosenbrock2d("plain", 100, s), lambda s: gen_rosenbrock_nd(5, 100, s)):
        a, b, c = make(3), make(3), make(4)
        np.testing.assert_array_equal(a.inputs, b.inputs)
        np.testing.assert_array_equal(a.targets, b.targets)
        assert not np.array_equal(a.inputs, c.inputs)
    assert not np.array_equal(gen_step(100, 3, stream=0).inputs, gen_step(100, 3, stream=1).inputs)


def test_nd_training_minimum_band():
    # smallest target among 10K samples in 20D sits well above the true minimum 0
    mins = [gen_rosenbrock_nd(20, 10_000, seed).targets.min() for seed in range(3)]
    maxs = [gen_rosenbrock_nd(20, 10_000, seed).targets.max() for seed in range(3)]
    assert all(0.2 <= m <= 0.7 for m in mins)
    assert all(5.0 <= m <= 8.0 for m in maxs)


def test_generator_errors():
    with pytest.raises(ConfigError):
        gen_step(0)
    with pytest.raises(ConfigError):
        gen_rosenbrock2d("banana", 10)
    with pytest.raises(ConfigError):
        gen_rosenbrock_nd(1, 10)

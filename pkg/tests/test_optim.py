import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plnet.errors import ConfigError
from plnet.harness.optim import Adam, one_cycle

from oracles import adam_reference


def test_adam_single_hand_step():
    # f = w^2 / 2, w0 = 1: the first bias-corrected step moves by lr * g/|g|
    opt = Adam()
    w = opt.step({"w": np.array(1.0)}, {"w": np.array(1.0)}, 0.1)["w"]
    assert w == pytest.approx(1.0 - 0.1 / (1.0 + 1e-8), rel=1e-12)
    assert 0 < w < 1


def test_adam_matches_reference_trajectory():
    opt = Adam()
    w = {"w": np.array(1.0)}
    for _ in range(25):
        w = opt.step(w, {"w": w["w"]}, 0.05)
    assert float(w["w"]) == pytest.approx(adam_reference(lambda v: v, 1.0, 0.05, 25), rel=1e-12)


def test_one_cycle_shape():
    T, peak = 100, 0.2
    lrs = [one_cycle(t, T, peak) for t in range(T + 1)]
    assert lrs[0] == pytest.approx(0.01 * peak)
    assert lrs[50] == pytest.approx(peak)
    assert lrs[-1] == pytest.approx(0.0, abs=1e-15)
    d = np.diff(lrs)
    assert np.all(d[:50] > 0) and np.all(d[50:] < 0)
    np.testing.assert_allclose(np.diff(d[:50]), 0.0, atol=1e-15)
    np.testing.assert_allclose(np.diff(d[50:]), 0.0, atol=1e-15)


@given(st.integers(1, 10_000), st.floats(1e-5, 1.0))
def test_one_cycle_bounded(total, peak):
    for t in (0, total // 3, total // 2, total):
        assert 0 <= one_cycle(t, total, peak) <= peak * (1 + 1e-12)


def test_one_cycle_rejects_empty_schedule():
    with pytest.raises(ConfigError):
        one_cycle(0, 0, 0.1)

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phcq import environment as env
from phcq.environment import ParamDraw, StateVec, step_deterministic

P = ParamDraw(0.75, 0.25, 0.5, 2.0)


def test_step_examples():
    assert step_deterministic((0, 0, 0), 0.0, P) == (0, 0, 0)
    assert step_deterministic((1, 0, 0), 0.0, P) == pytest.approx((0.75, 0, 0.75))
    assert step_deterministic((0, 1, 0), 0.0, P) == pytest.approx((0, 0.75, 1.5))


@given(st.floats(0.6, 0.9), st.floats(0.1, 0.4), st.floats(0.4, 0.6), st.floats(1.5, 2.5))
def test_origin_is_fixed_point(kappa, theta, zeta, upsilon):
    p = (kappa, theta, zeta, upsilon)
    assert step_deterministic(StateVec(0.0, 0.0, 0.0), 0.0, p) == (0.0, 0.0, 0.0)


def test_x2_geometric_decay_exact():
    # 0.75**t is exact in binary for these t
    x = StateVec(0.0, 1.0, 0.0)
    for t in range(1, 31):
        x = step_deterministic(x, 0.0, P)
        assert x.x2 == 0.75 ** t


def test_vectorised_step_matches_scalar(rng):
    S = rng.normal(size=(20, 3))
    a = rng.normal(size=20)
    p = env.draw_params(rng, 20)
    out = env.step_states(S, a, p)
    for j in range(20):
        assert tuple(out[j]) == pytest.approx(step_deterministic(S[j], a[j], p[j]), abs=1e-15)


def test_params_inside_ranges(rng):
    p = env.draw_params(rng, 10_000)
    for col, (lo, hi) in enumerate(env.PARAM_RANGES):
        assert lo <= p[:, col].min() and p[:, col].max() <= hi
    assert isinstance(env.draw_param(rng), ParamDraw)


def test_step_sample_examples(rng):
    assert np.array_equal(env.step_sample([[0, 0, 0]], [0.0], rng), [[0, 0, 0]])
    S = env.step_sample(np.tile([1.0, 0, 0], (50, 1)), np.zeros(50), rng)
    assert 0.70 <= S[:, 0].mean() <= 0.80


def test_step_sample_mean_large():
    S = env.step_sample(np.tile([1.0, 0, 0], (100_000, 1)), np.zeros(100_000), np.random.default_rng(9))
    assert S[:, 0].mean() == pytest.approx(0.75, abs=0.003)


def test_step_sample_length_mismatch(rng):
    with pytest.raises(ValueError):
        env.step_sample([[1, 0, 0]], [], rng)
    with pytest.raises(ValueError):
        env.step_sample([[1, 0, 0], [0, 0, 0]], [0.0], rng)


def test_step_sample_reproducible():
    S = np.tile([1.0, 0.5, -0.2], (5, 1))
    a = np.arange(5.0)
    a1 = env.step_sample(S, a, np.random.default_rng(4))
    a2 = env.step_sample(S, a, np.random.default_rng(4))
    assert np.array_equal(a1, a2)


def test_shock_examples():
    S = np.array([[0.3, 1.0, 2.0]])
    assert np.array_equal(env.apply_shock(S, 0.0), S)
    assert np.array_equal(env.apply_shock([[0, 0, 0]], 1.0), [[1, 0, 0]])
    assert np.array_equal(env.apply_shock([[2, 1, 3]], -2.0), [[0, 1, 3]])
    with pytest.raises(ValueError):
        env.apply_shock(S, float("nan"))


def test_bad_samples_rejected():
    with pytest.raises(ValueError):
        env.as_sample(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        env.as_sample([[np.inf, 0, 0]])
    with pytest.raises(ValueError):
        env.initial_sample(0)


def test_rollout_kernel_matches_reference():
    S = np.array([[1.0, 0.0, 0.0], [0.2, -0.3, 0.4], [0.0, 0.0, 0.0]])
    g1, g2 = np.random.default_rng(5), np.random.default_rng(5)
    a = env.rollout_returns(S, -0.6, 4, 9, 0.988, -5.0, -5.0, g1)
    b = env.rollout_returns_reference(S, -0.6, 4, 9, 0.988, -5.0, -5.0, g2)
    assert a.shape == (4, 3)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
    assert np.all(a[:, 2] == 0.0)
    # both consumed the generator identically
    assert g1.random() == g2.random()


def test_rollout_single_step_is_instant_cost():
    S = np.array([[1.0, 0.0, 0.0]])
    q = env.rollout_returns(S, 0.0, 1, 1, 0.988, -5.0, -5.0, np.random.default_rng(0))
    g = np.random.default_rng(0)
    p = env.PARAM_RANGES[:, 0] + np.ptp(env.PARAM_RANGES, axis=1) * g.random(4)
    x = step_deterministic(S[0], 0.0, p)
    assert q[0, 0] == pytest.approx(-5 * x.x2 ** 2 - 5 * x.x3 ** 2, abs=1e-14)

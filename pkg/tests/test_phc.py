import logging
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import ConstantSampler
from phcq.phc import (
    PhcConfig,
    SemiUniformConfig,
    delta_schedule,
    epsilon_schedule,
    phc_explore,
    semi_uniform_choose,
    semi_uniform_step,
)
from phcq.policy import Policy, PolicyCatalog, TransformSet
from phcq.selftest import grid_argmax


def noiseless(f):
    return lambda pi: ConstantSampler(f(pi.c))


def test_identity_only_transform_returns_pi0():
    res = phc_explore(Policy(0.4), noiseless(lambda c: -c * c), TransformSet(0.1, 1), PhcConfig())
    assert res.policy == Policy(0.4)
    assert len(res.rounds) == 1 and res.reselected


@settings(max_examples=60, deadline=None)
@given(st.floats(-1.5, 1.5), st.floats(-1.0, 1.0), st.sampled_from([0.01, 0.05, 0.1]),
       st.sampled_from([3, 5]))
def test_noiseless_hill_climb_matches_grid_search(target, c0, step, arity):
    # avoid exact ties between two grid points
    frac = ((target - c0) / step) % 1.0
    assume(abs(frac - 0.5) > 1e-3)
    f = lambda c: -((c - target) ** 2)
    res = phc_explore(Policy(c0), noiseless(f), TransformSet(step, arity), PhcConfig(max_iters=1000))
    assert res.reselected
    best = grid_argmax(f, c0, step, -4.0, 4.0)
    assert res.policy.c == pytest.approx(best, abs=1e-9)


def test_reaches_grid_point_nearest_target():
    f = lambda c: -((c + 0.69) ** 2)
    res = phc_explore(Policy(0.0), noiseless(f), TransformSet(0.05, 3), PhcConfig(max_iters=100))
    assert res.policy.c == pytest.approx(-0.70, abs=1e-9)
    # every noiseless population stops at the n0 + 1 floor
    assert all(n == 11 for r in res.rounds for n in r.n_i)
    assert res.samples == 11 * 3 * len(res.rounds)


def test_truncation_is_flagged_and_logged(caplog):
    with caplog.at_level(logging.INFO, logger="phcq.phc"):
        res = phc_explore(Policy(0.0), noiseless(lambda c: c), TransformSet(0.1, 3), PhcConfig(max_iters=4))
    assert res.truncated and not res.reselected
    assert res.policy.c == pytest.approx(0.4)
    assert "truncated" in caplog.text


def test_sampler_failure_propagates():
    def boom(pi):
        raise RuntimeError("sampler down")

    with pytest.raises(RuntimeError, match="sampler down"):
        phc_explore(Policy(0.0), boom, TransformSet(), PhcConfig())


def test_incumbent_kept_on_ties():
    res = phc_explore(Policy(0.2), noiseless(lambda c: 1.0), TransformSet(0.1, 3), PhcConfig())
    assert res.policy == Policy(0.2) and len(res.rounds) == 1


def test_long_climbs_floor_the_h_budget():
    from phcq.phc import H_DELTA_FLOOR
    f = lambda c: -((c - 0.6) ** 2)
    res = phc_explore(Policy(0.0), noiseless(f), TransformSet(0.01, 3), PhcConfig(max_iters=100))
    assert res.policy.c == pytest.approx(0.6, abs=1e-9)
    assert res.rounds[-1].delta < H_DELTA_FLOOR
    assert res.rounds[-1].h == res.rounds[-2].h


def test_rounds_use_halving_delta():
    f = lambda c: -((c - 0.3) ** 2)
    res = phc_explore(Policy(0.0), noiseless(f), TransformSet(0.1, 3), PhcConfig())
    assert [r.delta for r in res.rounds] == [0.04 / 2 ** (i + 1) for i in range(len(res.rounds))]
    assert all(r.h > 0 for r in res.rounds)


# --- schedules --------------------------------------------------------------

def test_delta_schedule_examples():
    cfg = PhcConfig(delta_total=0.04)
    assert delta_schedule(0, cfg) == 0.02
    assert delta_schedule(1, cfg) == 0.01
    assert sum(delta_schedule(w, cfg) for w in range(11)) <= 0.04
    with pytest.raises(ValueError):
        delta_schedule(-1, cfg)


@given(st.floats(1e-4, 0.99), st.integers(0, 60))
def test_delta_partial_sums_bounded(total, n):
    cfg = PhcConfig(delta_total=total)
    assert sum(delta_schedule(w, cfg) for w in range(n + 1)) <= total


def test_epsilon_schedule_examples():
    cfg = PhcConfig(spread_fraction=0.1, epsilon_floor=0.01)
    assert epsilon_schedule([2.0, 2.0, 2.0], cfg) == 0.01
    assert epsilon_schedule([0.0, 10.0], cfg) == 1.0
    assert epsilon_schedule([5.0], cfg) == 0.01


@given(st.lists(st.floats(-1e4, 1e4), min_size=0, max_size=8))
def test_epsilon_schedule_positive(means):
    assert epsilon_schedule(means, PhcConfig()) >= PhcConfig().epsilon_floor


@pytest.mark.parametrize("kw", [dict(delta_total=0.0), dict(n0=1), dict(max_iters=0),
                                dict(epsilon_floor=0.0), dict(spread_fraction=-1.0), dict(h=0.0)])
def test_phc_config_validation(kw):
    with pytest.raises(ValueError):
        PhcConfig(**kw)


# --- semi-uniform baseline ------------------------------------------------------

def test_semi_uniform_frequency():
    cfg = SemiUniformConfig(0.1, PolicyCatalog.discretized())
    best = cfg.catalog[150]
    g = np.random.default_rng(21)
    n = 100_000
    freq = sum(semi_uniform_choose(best, cfg, g) == best for _ in range(n)) / n
    p = 0.9 + 0.1 / 271
    assert abs(freq - p) <= 3 * math.sqrt(p * (1 - p) / n)
    assert abs(freq - p) <= 0.01


def test_semi_uniform_small_xi_always_exploits():
    cfg = SemiUniformConfig(1e-12, PolicyCatalog.discretized())
    g = np.random.default_rng(0)
    best = Policy(-0.33)
    assert all(semi_uniform_choose(best, cfg, g) == best for _ in range(1000))


@pytest.mark.parametrize("xi", [0.0, 1.0, 1.5])
def test_semi_uniform_xi_bounds(xi):
    with pytest.raises(ValueError):
        SemiUniformConfig(xi, PolicyCatalog.discretized())


def test_semi_uniform_empty_catalog():
    with pytest.raises(ValueError):
        SemiUniformConfig(0.1, PolicyCatalog(()))


def test_semi_uniform_step_adopts_better_policy():
    cfg = SemiUniformConfig(0.999999, PolicyCatalog((Policy(-0.7),)))
    f = noiseless(lambda c: -((c + 0.7) ** 2))
    step = semi_uniform_step(Policy(0.0), f, cfg, np.random.default_rng(0), n_eval=4)
    assert step.active == Policy(-0.7) == step.best
    assert step.samples == 8
    # a worse explored policy is tried but not adopted
    step = semi_uniform_step(Policy(-0.7), noiseless(lambda c: -abs(c + 0.7)),
                             SemiUniformConfig(0.999999, PolicyCatalog((Policy(1.0),))),
                             np.random.default_rng(0), n_eval=4)
    assert step.active == Policy(1.0) and step.best == Policy(-0.7)


def test_noiseless_incumbent_values_never_decrease():
    f = lambda c: -abs(c + 0.37)
    res = phc_explore(Policy(0.5), noiseless(f), TransformSet(0.1, 3), PhcConfig(max_iters=100))
    values = [f(r.candidates[0]) for r in res.rounds] + [f(res.policy.c)]
    assert all(a <= b for a, b in zip(values, values[1:]))


def test_final_round_keeps_a_best_incumbent(rng):
    from phcq.selftest import NormalSampler
    res = phc_explore(Policy(0.0), lambda pi: NormalSampler(-((pi.c - 0.2) ** 2), 0.05, rng),
                      TransformSet(0.1, 3), PhcConfig())
    last = res.rounds[-1]
    assert last.winner == last.candidates[0] == res.policy.c
    assert last.means[0] == max(last.means)

"""Partially known three-state linear model with uniformly uncertain parameters.

    x1' = kappa * x1 + (1 - kappa) * x3
    x2' = (1 - theta) * x2 + theta * zeta * a
    x3' = x1' + upsilon * x2'

Parameters are redrawn independently for every state at every step.  A
sample of states is stored as an ``(N, 3)`` float array; :class:`StateVec`
is the scalar view used by the pure single-step function.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from numba import njit

KAPPA_RANGE = (0.6, 0.9)
THETA_RANGE = (0.1, 0.4)
ZETA_RANGE = (0.4, 0.6)
UPSILON_RANGE = (1.5, 2.5)
PARAM_RANGES = np.array([KAPPA_RANGE, THETA_RANGE, ZETA_RANGE, UPSILON_RANGE])


class StateVec(NamedTuple):
    x1: float
    x2: float
    x3: float


class ParamDraw(NamedTuple):
    kappa: float
    theta: float
    zeta: float
    upsilon: float


def step_deterministic(x, a: float, p) -> StateVec:
    kappa, theta, zeta, upsilon = p
    x1, x2, x3 = x
    n1 = kappa * x1 + (1.0 - kappa) * x3
    n2 = (1.0 - theta) * x2 + theta * zeta * a
    return StateVec(n1, n2, n1 + upsilon * n2)


def draw_params(rng: np.random.Generator, shape=()) -> np.ndarray:
    """Uniform parameter draws; the last axis holds (kappa, theta, zeta, upsilon)."""
    shape = (shape,) if isinstance(shape, int) else tuple(shape)
    u = rng.random(shape + (4,))
    lo, hi = PARAM_RANGES[:, 0], PARAM_RANGES[:, 1]
    return lo + (hi - lo) * u


def draw_param(rng: np.random.Generator) -> ParamDraw:
    return ParamDraw(*draw_params(rng).tolist())


def step_states(states: np.ndarray, actions: np.ndarray, params: np.ndarray) -> np.ndarray:
    """Vectorised ``step_deterministic`` over any leading batch shape."""
    kappa, theta, zeta, upsilon = np.moveaxis(params, -1, 0)
    x1, x2, x3 = np.moveaxis(states, -1, 0)
    n1 = kappa * x1 + (1.0 - kappa) * x3
    n2 = (1.0 - theta) * x2 + theta * zeta * actions
    return np.stack([n1, n2, n1 + upsilon * n2], axis=-1)


def as_sample(states) -> np.ndarray:
    arr = np.array(states, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 1:
        raise ValueError(f"a state sample must have shape (N, 3) with N >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("state sample contains non-finite values")
    return arr


def initial_sample(n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("sample size must be at least 1")
    return np.zeros((n, 3))


def step_sample(sample, actions, rng: np.random.Generator) -> np.ndarray:
    """Advance each state one step with its own freshly drawn parameters."""
    sample = as_sample(sample)
    actions = np.asarray(actions, dtype=float).reshape(-1)
    if actions.shape[0] != sample.shape[0]:
        raise ValueError(
            f"got {actions.shape[0]} actions for a sample of {sample.shape[0]} states"
        )
    return step_states(sample, actions, draw_params(rng, sample.shape[0]))


def apply_shock(sample, magnitude: float) -> np.ndarray:
    if not np.isfinite(magnitude):
        raise ValueError("shock magnitude must be finite")
    out = as_sample(sample).copy()
    out[:, 0] += magnitude
    return out


@njit(cache=True)
def _rollout_kernel(states, c, m, horizon, gamma, tau1, tau2, ranges, rng):
    n = states.shape[0]
    q = np.zeros((m, n))
    k_lo, k_w = ranges[0, 0], ranges[0, 1] - ranges[0, 0]
    t_lo, t_w = ranges[1, 0], ranges[1, 1] - ranges[1, 0]
    z_lo, z_w = ranges[2, 0], ranges[2, 1] - ranges[2, 0]
    u_lo, u_w = ranges[3, 0], ranges[3, 1] - ranges[3, 0]
    for i in range(m):
        for j in range(n):
            x1 = states[j, 0]
            x2 = states[j, 1]
            x3 = states[j, 2]
            disc = 1.0
            acc = 0.0
            for _ in range(horizon):
                kappa = k_lo + k_w * rng.random()
                theta = t_lo + t_w * rng.random()
                zeta = z_lo + z_w * rng.random()
                upsilon = u_lo + u_w * rng.random()
                a = c * x1
                x1 = kappa * x1 + (1.0 - kappa) * x3
                x2 = (1.0 - theta) * x2 + theta * zeta * a
                x3 = x1 + upsilon * x2
                acc += disc * (tau1 * x2 * x2 + tau2 * x3 * x3)
                disc *= gamma
            q[i, j] = acc
    return q


def rollout_returns(states, c: float, m: int, horizon: int, gamma: float,
                    tau1: float, tau2: float, rng: np.random.Generator) -> np.ndarray:
    """Discounted ``horizon``-step returns of ``a = c * x1`` from every state, ``m`` times.

    Returns an ``(m, N)`` array.  Row ``i`` column ``j`` rolls state ``j``
    forward with fresh parameters each step and sums
    ``gamma^s * (tau1 * x2^2 + tau2 * x3^2)`` over the visited states.
    Parameters are consumed from ``rng`` in the order (kappa, theta, zeta,
    upsilon) per step, state by state, row by row, which
    :func:`rollout_returns_reference` reproduces in plain Python.
    """
    states = as_sample(states)
    return _rollout_kernel(states, float(c), int(m), int(horizon), float(gamma),
                           float(tau1), float(tau2), PARAM_RANGES, rng)


def rollout_returns_reference(states, c, m, horizon, gamma, tau1, tau2, rng):
    states = as_sample(states)
    lo, hi = PARAM_RANGES[:, 0], PARAM_RANGES[:, 1]
    q = np.zeros((m, states.shape[0]))
    for i in range(m):
        for j, x in enumerate(states):
            x = StateVec(*x)
            disc, acc = 1.0, 0.0
            for _ in range(horizon):
                p = [lo[r] + (hi[r] - lo[r]) * rng.random() for r in range(4)]
                x = step_deterministic(x, c * x.x1, p)
                acc += disc * (tau1 * x.x2 ** 2 + tau2 * x.x3 ** 2)
                disc *= gamma
            q[i, j] = acc
    return q

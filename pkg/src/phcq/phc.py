"""Probabilistic hill-climbing over policy transformations, and the semi-uniform baseline."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .policy import Policy, PolicyCatalog, TransformSet, neighbors
from .selection import PopulationSampler, SelectionConfig, default_h, draw_batch, select_best

log = logging.getLogger(__name__)

# h is looked up at no less than this error budget; past it the quadrature
# loses accuracy and the per-round overspend is at most this much
H_DELTA_FLOOR = 1e-12


@dataclass(frozen=True)
class PhcConfig:
    delta_total: float = 0.04
    n0: int = 10
    max_iters: int = 20
    epsilon_floor: float = 0.01
    spread_fraction: float = 0.5
    # None: derive h from (arity, delta_omega, n0) every round
    h: float | None = None

    def __post_init__(self):
        if not 0.0 < self.delta_total < 1.0:
            raise ValueError("delta_total must lie in (0, 1)")
        if int(self.n0) != self.n0 or self.n0 < 2:
            raise ValueError("n0 must be an integer >= 2")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.epsilon_floor > 0:
            raise ValueError("epsilon_floor must be positive")
        if self.spread_fraction < 0:
            raise ValueError("spread_fraction must be non-negative")
        if self.h is not None and not self.h > 0:
            raise ValueError("h must be positive")


@dataclass(frozen=True)
class SemiUniformConfig:
    xi: float = 0.1
    catalog: PolicyCatalog = field(default_factory=PolicyCatalog.discretized)

    def __post_init__(self):
        if not 0.0 < self.xi < 1.0:
            raise ValueError(f"xi must lie in (0, 1), got {self.xi!r}")
        if len(self.catalog) == 0:
            raise ValueError("the policy catalog is empty")


def delta_schedule(omega: int, cfg: PhcConfig) -> float:
    """Error budget of round ``omega``; halves every round so the total stays below delta."""
    if omega < 0:
        raise ValueError("omega must be non-negative")
    return cfg.delta_total / 2.0 ** (omega + 1)


def epsilon_schedule(first_stage_means: Sequence[float], cfg: PhcConfig) -> float:
    if len(first_stage_means) < 2:
        return cfg.epsilon_floor
    spread = max(first_stage_means) - min(first_stage_means)
    return max(cfg.epsilon_floor, cfg.spread_fraction * spread)


@dataclass
class PhcRound:
    omega: int
    candidates: list[float]
    means: list[float]
    n_i: list[int]
    epsilon: float
    delta: float
    h: float
    winner: float


@dataclass
class PhcResult:
    policy: Policy
    rounds: list[PhcRound]
    reselected: bool
    truncated: bool

    @property
    def samples(self) -> int:
        return sum(sum(r.n_i) for r in self.rounds)


def phc_explore(pi0: Policy, sampler_factory: Callable[[Policy], PopulationSampler],
                ts: TransformSet, cfg: PhcConfig) -> PhcResult:
    """Hill-climb from ``pi0`` until the selection keeps the incumbent.

    Each round builds the transformation set around the incumbent, asks
    ``sampler_factory`` for one fresh sampler per candidate and selects the
    best one.  The incumbent is listed first so that, between equally
    scored candidates, the procedure stays put.
    """
    pi = pi0
    rounds: list[PhcRound] = []
    omega = 0
    while True:
        near = neighbors(pi, ts)
        cands = [pi] + [p for p in near if p != pi]
        delta = delta_schedule(omega, cfg)
        k = len(cands)
        if cfg.h is not None:
            h = cfg.h
        else:
            h = default_h(k, max(delta, H_DELTA_FLOOR), cfg.n0) if k > 1 else 1.0
        scfg = SelectionConfig(cfg.n0, delta, cfg.epsilon_floor, h)
        res = select_best([sampler_factory(p) for p in cands], scfg,
                          epsilon_rule=lambda m: epsilon_schedule(m, cfg))
        winner = cands[res.best_index]
        rounds.append(PhcRound(omega, [p.c for p in cands], res.means,
                               [s.n_i for s in res.per_population], res.epsilon, delta, h, winner.c))
        omega += 1
        if winner == pi:
            return PhcResult(pi, rounds, reselected=True, truncated=False)
        pi = winner
        if omega >= cfg.max_iters:
            log.info("PHC truncated after %d rounds at c=%r", omega, pi.c)
            return PhcResult(pi, rounds, reselected=False, truncated=True)


def semi_uniform_choose(best: Policy, cfg: SemiUniformConfig, rng: np.random.Generator) -> Policy:
    """Exploit ``best`` with probability ``1 - xi``, else a uniform catalog draw."""
    if len(cfg.catalog) == 0:
        raise ValueError("the policy catalog is empty")
    if rng.random() < cfg.xi:
        return cfg.catalog[int(rng.integers(len(cfg.catalog)))]
    return best


@dataclass
class SemiUniformStep:
    active: Policy
    best: Policy
    samples: int


def semi_uniform_step(best: Policy, sampler_factory: Callable[[Policy], PopulationSampler],
                      cfg: SemiUniformConfig, rng: np.random.Generator,
                      n_eval: int) -> SemiUniformStep:
    """One period of the baseline: choose, and if exploring, compare against the best.

    The explored policy replaces ``best`` when its mean over ``n_eval``
    observations beats the best policy's mean over as many observations.
    """
    active = semi_uniform_choose(best, cfg, rng)
    if active == best:
        return SemiUniformStep(active, best, 0)
    m_best = float(np.mean(draw_batch(sampler_factory(best), n_eval)))
    m_new = float(np.mean(draw_batch(sampler_factory(active), n_eval)))
    return SemiUniformStep(active, active if m_new > m_best else best, 2 * n_eval)

"""Two-stage indifference-zone selection of the population with the largest mean.

The classical two-stage procedure: take ``n0`` observations from each
population, use their sample variance to fix a population-specific total
sample size, take the remaining observations, and compare weighted means.
The weights are chosen so that

    (weighted_mean_i - mu_i) / (epsilon / h)

is exactly Student-t with ``n0 - 1`` degrees of freedom for every population,
independently of the unknown variances.  The constant ``h`` is then the
``1 - delta`` quantile of ``max_{j<k} T_j - T_k`` for i.i.d. t variates, which
is what :func:`h_quadrature` and :func:`h_monte_carlo` compute.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Protocol, Sequence

import numpy as np
from scipy import integrate, optimize, special


class SelectionConsistencyError(RuntimeError):
    """Raised when the stopping time and the weight constraint disagree."""


@dataclass(frozen=True)
class SelectionConfig:
    n0: int
    delta: float
    epsilon: float
    h: float

    def __post_init__(self):
        if int(self.n0) != self.n0 or self.n0 < 2:
            raise ValueError(f"n0 must be an integer >= 2, got {self.n0!r}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta!r}")
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        if not self.h > 0.0:
            raise ValueError(f"h must be positive, got {self.h!r}")

    @property
    def p_star(self) -> float:
        return 1.0 - self.delta


class PopulationSampler(Protocol):
    """Anything with a ``draw()`` returning one observation.

    Samplers may also provide ``draw_many(m)`` returning ``m`` observations
    at once; :func:`select_best` uses it when present.
    """

    def draw(self) -> float: ...


@dataclass
class PopulationStats:
    n_i: int
    sample_variance: float
    weighted_mean: float
    weights: list[float] = field(repr=False)
    first_stage_mean: float = 0.0


@dataclass
class SelectionResult:
    best_index: int
    per_population: list[PopulationStats]
    total_samples: int
    epsilon: float

    @property
    def means(self) -> list[float]:
        return [p.weighted_mean for p in self.per_population]


def first_stage_variance(samples: Sequence[float]) -> float:
    """Unbiased sample variance ``1/(n-1) * sum (x - mean)^2``."""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need at least 2 first-stage samples")
    if np.ptp(x) == 0.0:
        # exact zero; a rounded mean would leave ~1e-33 and wreck the weights
        return 0.0
    dev = x - x.mean()
    return float(dev @ dev / (x.size - 1))


def _ratio(S2: float, h: float, epsilon: float) -> float:
    # (S h / eps)^2
    return S2 * (h / epsilon) ** 2


def stopping_time(S2: float, cfg: SelectionConfig) -> int:
    """Total sample size ``max{n0 + 1, ceil((S h / eps)^2)}``."""
    if S2 < 0:
        raise ValueError("variance must be non-negative")
    r = _ratio(S2, cfg.h, cfg.epsilon)
    if not math.isfinite(r):
        raise ValueError("stopping time is not finite")
    # guard against 16.000000000000004 -> 17
    need = math.ceil(r * (1.0 - 1e-13))
    return max(cfg.n0 + 1, need)


def dd_weights(n_i: int, n0: int, S2: float, cfg: SelectionConfig) -> list[float]:
    """Weights for the second-stage weighted mean.

    The first ``n0`` observations share weight ``a`` and the remaining
    ``n_i - n0`` share weight ``b``, with ``n0*a + (n_i-n0)*b = 1`` and
    ``S2 * (n0*a^2 + (n_i-n0)*b^2) = (eps/h)^2``.  The larger root for ``a``
    is used.  With zero variance the constraint is vacuous and the weights
    are uniform.
    """
    if S2 < 0:
        raise ValueError("variance must be non-negative")
    if S2 == 0.0:
        return [1.0 / n_i] * n_i
    if n_i < n0 + 1:
        raise ValueError(f"n_i={n_i} must be at least n0+1={n0 + 1}")
    m = n_i - n0
    z = (cfg.epsilon / cfg.h) ** 2 / S2
    disc = m * (n_i * z - 1.0) / n0
    if disc < 0.0:
        if disc > -1e-9:
            disc = 0.0
        else:
            raise SelectionConsistencyError(
                f"n_i={n_i} is too small for S2={S2}, h={cfg.h}, eps={cfg.epsilon}"
            )
    a = (1.0 + math.sqrt(disc)) / n_i
    b = (1.0 - n0 * a) / m
    return [a] * n0 + [b] * m


def draw_batch(oracle, m: int) -> np.ndarray:
    """``m`` observations from a sampler, batched when it supports ``draw_many``."""
    if m <= 0:
        return np.empty(0)
    many = getattr(oracle, "draw_many", None)
    if many is not None:
        out = np.asarray(many(m), dtype=float)
        if out.shape != (m,):
            raise RuntimeError(f"draw_many({m}) returned shape {out.shape}")
        return out
    return np.array([oracle.draw() for _ in range(m)], dtype=float)


def select_best(
    oracles: Sequence[PopulationSampler],
    cfg: SelectionConfig,
    epsilon_rule: Callable[[list[float]], float] | None = None,
) -> SelectionResult:
    """Run the two-stage procedure and return the index of the best population.

    Parameters
    ----------
    oracles : sequence of samplers, one per population.
    cfg : selection parameters.
    epsilon_rule : optional callable mapping the first-stage means to the
        indifference-zone width for this call, overriding ``cfg.epsilon``.

    A single population is returned after the first stage without a second
    stage, so its ``n_i`` equals ``n0``.
    """
    k = len(oracles)
    if k == 0:
        raise ValueError("at least one population is required")

    first = [draw_batch(o, cfg.n0) for o in oracles]
    fmeans = [float(f.mean()) for f in first]

    if k == 1:
        x = first[0]
        st = PopulationStats(
            n_i=cfg.n0,
            sample_variance=first_stage_variance(x),
            weighted_mean=fmeans[0],
            weights=[1.0 / cfg.n0] * cfg.n0,
            first_stage_mean=fmeans[0],
        )
        return SelectionResult(0, [st], cfg.n0, cfg.epsilon)

    eps = cfg.epsilon
    if epsilon_rule is not None:
        eps = float(epsilon_rule(fmeans))
        cfg = SelectionConfig(cfg.n0, cfg.delta, eps, cfg.h)

    per_pop = []
    for oracle, x0, fm in zip(oracles, first, fmeans):
        S2 = first_stage_variance(x0)
        n_i = stopping_time(S2, cfg)
        x = np.concatenate([x0, draw_batch(oracle, n_i - cfg.n0)])
        w = dd_weights(n_i, cfg.n0, S2, cfg)
        per_pop.append(
            PopulationStats(
                n_i=n_i,
                sample_variance=S2,
                weighted_mean=float(np.dot(w, x)),
                weights=w,
                first_stage_mean=fm,
            )
        )

    means = [p.weighted_mean for p in per_pop]
    best = int(np.argmax(means))  # first maximum wins ties
    return SelectionResult(best, per_pop, sum(p.n_i for p in per_pop), eps)


# --- the constant h -------------------------------------------------------


def _t_log_norm(nu: float) -> float:
    return special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2) - 0.5 * math.log(nu * math.pi)


def incorrect_selection_probability(h: float, k: int, n0: int, abs_tol: float = 1e-13) -> float:
    """``1 - P{CS}`` at the least-favourable configuration.

    Integrates ``f(u) * (1 - F(u + h)^(k-1))`` with the bracket written via
    ``expm1``/``log1p`` of the survival function, so tiny error budgets
    stay resolvable long after ``1 - delta`` has rounded to 1.
    """
    if k < 2:
        return 0.0
    nu = float(n0 - 1)
    c = _t_log_norm(nu)

    def miss(u):
        sf = special.stdtr(nu, -(u + h))
        pdf = math.exp(c - (nu + 1) / 2 * math.log1p(u * u / nu))
        return pdf * -math.expm1((k - 1) * math.log1p(-sf)) if sf < 1.0 else pdf

    # the heavy-tailed mass sits near u = -h (T_k low) and u = 0 (some T_j high)
    kw = dict(epsabs=abs_tol, epsrel=1e-9, limit=200)
    cuts = [-np.inf, -h - 1.0, -h / 2, 1.0, np.inf]
    return float(sum(integrate.quad(miss, a, b, **kw)[0] for a, b in zip(cuts, cuts[1:])))


def correct_selection_probability(h: float, k: int, n0: int) -> float:
    """P{CS} at the least-favourable configuration: E[F(T + h)^(k-1)]."""
    return 1.0 - incorrect_selection_probability(h, k, n0)


@lru_cache(maxsize=1024)
def h_quadrature(k: int, delta: float, n0: int) -> float:
    """Solve ``incorrect_selection_probability(h, k, n0) = delta`` for h."""
    if k < 2:
        raise ValueError("h is only defined for k >= 2 populations")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if 1.0 - delta <= 1.0 / k:
        raise ValueError(f"1 - delta must exceed 1/k = {1.0 / k}")
    if delta < 1e-14:
        raise ValueError(f"delta={delta!r} is below what the quadrature resolves (1e-14)")
    log_delta = math.log(delta)
    f = lambda h: math.log(incorrect_selection_probability(h, k, n0, abs_tol=delta * 1e-9)) - log_delta
    hi = 1.0
    while f(hi) > 0:
        hi *= 2.0
    return float(optimize.brentq(f, 1e-9, hi, xtol=1e-12, rtol=1e-12))


def h_monte_carlo(k: int, delta: float, n0: int, reps: int = 1_000_000,
                  rng: np.random.Generator | None = None) -> tuple[float, float]:
    """Monte Carlo estimate of h with an approximate standard error.

    Each replicate builds k independent pivots, a standard normal over
    sqrt(chi2_nu / nu) with nu = n0 - 1, and records ``max_{j<k} T_j - T_k``;
    h is the ``1 - delta`` empirical quantile.  No t distribution function
    is used, which keeps it independent of :func:`h_quadrature`.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    nu = n0 - 1
    z = rng.standard_normal((reps, k))
    chi = rng.chisquare(nu, (reps, k))
    T = z / np.sqrt(chi / nu)
    D = T[:, :-1].max(axis=1) - T[:, -1]
    h = float(np.quantile(D, 1.0 - delta))
    # density at the quantile by a local histogram, for the quantile s.e.
    bw = 0.05
    dens = np.mean(np.abs(D - h) < bw) / (2 * bw)
    se = math.sqrt(delta * (1 - delta) / reps) / dens
    return h, se


# Frozen output of scripts/compute_h_table.py (Monte Carlo, 4e6 replicates,
# standard error about 0.002).  Keyed by (k, delta, n0).
H_TABLE: dict[tuple[int, float, int], float] = {
    (2, 0.05, 10): 2.6147,
    (3, 0.05, 10): 3.0834,
    (2, 0.05, 20): 2.4532,
    (3, 0.05, 20): 2.8691,
}


def default_h(k: int, delta: float, n0: int) -> float:
    """Frozen Monte Carlo h when tabulated, quadrature otherwise."""
    return H_TABLE.get((k, delta, n0)) or h_quadrature(k, delta, n0)

"""Robust Q-learning experiment on the shocked three-state model.

One period of :func:`run_experiment`:

1. take the current state sample (the first one is all zeros plus the shock),
2. pick a policy with PHC or with semi-uniform exploration,
3. apply it to every state of the sample,
4. score the new sample with the risk-adjusted reward,
5. update the q-value of every instance and fold it into the policy's clusters,
6. merge that policy's clusters that have drifted together.

Candidate policies are judged by Monte Carlo rollouts: one observation is
the risk-adjusted score of ``N`` discounted rollout returns.  By default the
rollouts start from the shocked initial sample, so every period scores a
candidate on the whole control task; ``rollout_start = current`` starts
them from the period's own sample instead.  The best feedback gain of a
policy that only sees ``x1`` depends on where the rollout starts, so the
two settings converge to different coefficients.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import math
import os
from dataclasses import dataclass, fields
from pathlib import Path
from statistics import median
from typing import Sequence

import numpy as np

from . import environment as env
from .learner import (
    LearnParams,
    QTable,
    RewardParams,
    eta_rows,
    instant_reward,
    robust_q_update,
    robust_reward,
    robust_value,
    state_weights,
)
from .phc import PhcConfig, SemiUniformConfig, phc_explore, semi_uniform_step
from .policy import Policy, PolicyCatalog, TransformSet, neighbors
from .rng import StreamFactory


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


STRATEGIES = ("phc", "semi_uniform")
# "shock": candidates are scored on the whole task from the shocked initial sample;
# "current": from the period's own state sample
ROLLOUT_STARTS = ("shock", "current")

# config-file section of every ExperimentConfig field
SECTIONS = {
    "experiment": ("seed", "strategy", "periods", "N", "shock", "initial_c"),
    "learner": ("gamma", "tau1", "tau2", "phi", "beta", "match_radius"),
    "policy": ("step", "arity", "step_decay"),
    "phc": ("delta", "n0", "h", "epsilon_floor", "spread_fraction", "max_iters", "horizon",
            "rollout_start"),
    "semi_uniform": ("xi", "n_eval"),
    "harness": ("convergence_band",),
}


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    strategy: str = "phc"
    periods: int = 30
    N: int = 50
    shock: float = 1.0
    initial_c: float = 0.0
    gamma: float = 0.988
    tau1: float = -5.0
    tau2: float = -5.0
    phi: float = 0.5
    beta: float = 0.2
    match_radius: float = 0.25
    step: float = 0.05
    arity: int = 3
    step_decay: float = 0.5
    delta: float = 0.04
    n0: int = 10
    h: float | None = None
    epsilon_floor: float = 0.01
    spread_fraction: float = 0.5
    max_iters: int = 20
    horizon: int = 40
    rollout_start: str = "shock"
    xi: float = 0.1
    n_eval: int = 10
    convergence_band: float = 0.05

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def need(ok, name, msg):
            if not ok:
                raise ConfigError(name, msg)

        need(isinstance(self.seed, int) and self.seed >= 0, "seed", "must be a non-negative integer")
        need(self.strategy in STRATEGIES, "strategy", f"must be one of {STRATEGIES}")
        need(self.periods >= 0, "periods", "must be non-negative")
        need(self.N >= 2, "N", "sample size must be at least 2")
        for name in ("shock", "initial_c", "tau1", "tau2"):
            need(math.isfinite(getattr(self, name)), name, "must be finite")
        need(0 < self.gamma < 1, "gamma", "must lie in (0, 1)")
        need(0 < self.phi < 1, "phi", "must lie in (0, 1)")
        need(0 < self.beta <= 1, "beta", "must lie in (0, 1]")
        need(self.match_radius > 0, "match_radius", "must be positive")
        need(self.step > 0, "step", "must be positive")
        need(self.arity >= 1, "arity", "must be at least 1")
        need(0 < self.step_decay <= 1, "step_decay", "must lie in (0, 1]")
        need(0 < self.delta < 1, "delta", "must lie in (0, 1)")
        need(self.n0 >= 2, "n0", "must be at least 2")
        need(self.h is None or self.h > 0, "h", "must be positive (or omitted)")
        need(self.epsilon_floor > 0, "epsilon_floor", "must be positive")
        need(self.spread_fraction >= 0, "spread_fraction", "must be non-negative")
        need(self.max_iters >= 1, "max_iters", "must be at least 1")
        need(self.horizon >= 1, "horizon", "must be at least 1")
        need(self.rollout_start in ROLLOUT_STARTS, "rollout_start", f"must be one of {ROLLOUT_STARTS}")
        need(0 < self.xi < 1, "xi", "must lie in (0, 1)")
        need(self.n_eval >= 2, "n_eval", "must be at least 2")
        need(self.convergence_band > 0, "convergence_band", "must be positive")

    # --- parameter bundles for the other modules ---------------------------

    @property
    def reward_params(self) -> RewardParams:
        return RewardParams(self.tau1, self.tau2, self.gamma, self.phi)

    @property
    def phc_config(self) -> PhcConfig:
        return PhcConfig(self.delta, self.n0, self.max_iters, self.epsilon_floor,
                         self.spread_fraction, self.h)

    @property
    def semi_config(self) -> SemiUniformConfig:
        return SemiUniformConfig(self.xi, PolicyCatalog.discretized())

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    # --- config files -------------------------------------------------------

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        parser.optionxform = str
        if not parser.read(path):
            raise ConfigError("config", f"cannot read {path}")
        types = {f.name: f.type for f in fields(cls)}
        owner = {name: sec for sec, names in SECTIONS.items() for name in names}
        values = {}
        for section in parser.sections():
            if section not in SECTIONS:
                raise ConfigError(section, "unknown section")
            for key, raw in parser.items(section):
                if owner.get(key) != section:
                    raise ConfigError(f"{section}.{key}", "unknown key")
                values[key] = _parse_value(key, raw, types[key])
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def to_file(self, path) -> None:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        for sec, names in SECTIONS.items():
            parser[sec] = {n: ("auto" if getattr(self, n) is None else repr(getattr(self, n))
                               if not isinstance(getattr(self, n), str) else getattr(self, n))
                           for n in names}
        with open(path, "w") as fh:
            parser.write(fh)


def _parse_value(key, raw: str, typ):
    raw = raw.strip()
    try:
        if "None" in str(typ):
            return None if raw.lower() in ("auto", "none", "") else float(raw)
        if typ in (int, "int"):
            return int(raw)
        if typ in (float, "float"):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r}") from None


# --- rollout sampler ----------------------------------------------------------


class RolloutSampler:
    """η observations of one policy from Monte Carlo rollouts of a state sample.

    Each observation rolls every state of the sample forward ``horizon``
    steps under the policy, discounts the per-period utility, and scores
    the resulting ``N`` returns with ``eta``.
    """

    def __init__(self, states: np.ndarray, pi: Policy, rp: RewardParams, horizon: int,
                 rng: np.random.Generator):
        self.states = np.asarray(states, dtype=float)
        self.pi = pi
        self.rp = rp
        self.horizon = horizon
        self.rng = rng
        self.draws = 0
        self.transitions = 0

    def q_samples(self, m: int) -> np.ndarray:
        """``(m, N)`` discounted returns."""
        rp = self.rp
        return env.rollout_returns(self.states, self.pi.c, m, self.horizon, rp.gamma,
                                   rp.tau1, rp.tau2, self.rng)

    def draw_many(self, m: int) -> np.ndarray:
        out = eta_rows(self.q_samples(m), self.rp.phi) if m > 0 else np.empty(0)
        self.draws += m
        self.transitions += m * self.states.shape[0] * self.horizon
        return out

    def draw(self) -> float:
        return float(self.draw_many(1)[0])


class _SamplerFactory:
    def __init__(self, streams: StreamFactory, tag: str, period: int, states, cfg: ExperimentConfig):
        self.streams, self.tag, self.period = streams, tag, period
        self.states, self.cfg = states, cfg
        self.made: list[RolloutSampler] = []

    def __call__(self, pi: Policy) -> RolloutSampler:
        rng = self.streams.stream(self.tag, self.period, len(self.made))
        s = RolloutSampler(self.states, pi, self.cfg.reward_params, self.cfg.horizon, rng)
        self.made.append(s)
        return s

    @property
    def draws(self) -> int:
        return sum(s.draws for s in self.made)

    @property
    def transitions(self) -> int:
        return sum(s.transitions for s in self.made)


# --- the experiment -----------------------------------------------------------


@dataclass
class RunRecord:
    period: int
    coefficient: float
    reward: float
    cumulative_reward: float
    avg_policy_reward: float
    env_samples: int
    selection_samples: int


RECORD_FIELDS = [f.name for f in fields(RunRecord)]


@dataclass
class RunTrace:
    """Everything a run produced beyond the per-period records."""

    records: list[RunRecord]
    table: QTable
    phc_rounds: list[list] = dataclasses.field(default_factory=list)
    truncations: int = 0


def run_trace(cfg: ExperimentConfig) -> RunTrace:
    streams = StreamFactory(cfg.seed)
    rp = cfg.reward_params
    lp = LearnParams(cfg.beta)
    phc_cfg = cfg.phc_config
    semi_cfg = cfg.semi_config if cfg.strategy == "semi_uniform" else None

    S = env.apply_shock(env.initial_sample(cfg.N), cfg.shock)
    S_task = S.copy()
    pi = Policy(cfg.initial_c)
    ts = TransformSet(cfg.step, cfg.arity)
    table = QTable(cfg.match_radius)
    trace = RunTrace([], table)

    cum = 0.0
    env_samples = sel_samples = 0
    by_policy: dict[Policy, list[float]] = {}

    for t in range(cfg.periods):
        tag = "phc" if semi_cfg is None else "semi"
        start = S_task if cfg.rollout_start == "shock" else S
        factory = _SamplerFactory(streams, tag, t, start, cfg)
        if semi_cfg is None:
            res = phc_explore(pi, factory, ts, phc_cfg)
            pi = res.policy
            if res.reselected:
                ts = ts.scaled(cfg.step_decay)
            trace.truncations += res.truncated
            trace.phc_rounds.append(res.rounds)
            assert res.samples == factory.draws
        else:
            step = semi_uniform_step(pi, factory, semi_cfg, streams.stream("explore", t), cfg.n_eval)
            active, pi = step.active, step.best
        applied = pi if semi_cfg is None else active
        sel_samples += factory.draws
        env_samples += factory.transitions

        S_next = env.step_sample(S, applied.c * S[:, 0], streams.stream("env", t))
        env_samples += S.shape[0]
        R = robust_reward(instant_reward(S_next, rp), rp.phi)

        P = state_weights(S, table, applied)
        cands = neighbors(applied, ts)
        q_new = []
        for j in range(S.shape[0]):
            c = table.match(applied, S[j])
            q_old = 0.0 if c is None else c.q_mean
            v = robust_value(S_next[j], cands, table, rp.phi)
            q_new.append(robust_q_update(q_old, R, v, float(P[j]), lp, rp.gamma))
        for j in range(S.shape[0]):
            table.absorb(applied, S[j], q_new[j])
        table.maintain(applied)

        cum += rp.gamma ** t * R
        by_policy.setdefault(applied, []).append(R)
        hist = by_policy[applied]
        trace.records.append(RunRecord(t, applied.c, R, cum, sum(hist) / len(hist),
                                       env_samples, sel_samples))
        S = S_next
    return trace


def run_experiment(cfg: ExperimentConfig) -> list[RunRecord]:
    return run_trace(cfg).records


# --- convergence comparison -------------------------------------------------


def periods_to_convergence(coefs: Sequence[float], band: float = 0.05) -> int:
    """Number of periods until the coefficient stays within ``band`` of its final value."""
    if not coefs:
        return 0
    final = coefs[-1]
    t = len(coefs) - 1
    while t > 0 and abs(coefs[t - 1] - final) <= band:
        t -= 1
    return t + 1


@dataclass
class ComparisonSummary:
    seeds: list[int]
    phc_periods: list[int]
    semi_periods: list[int]
    phc_final: list[float]
    semi_final: list[float]

    @property
    def median_phc(self) -> float:
        return median(self.phc_periods)

    @property
    def median_semi(self) -> float:
        return median(self.semi_periods)

    @property
    def speedup(self) -> float:
        """Median semi-uniform periods over median PHC periods."""
        return self.median_semi / self.median_phc

    @property
    def median_ratio(self) -> float:
        return median(s / p for s, p in zip(self.semi_periods, self.phc_periods))


def compare_strategies(cfg_phc: ExperimentConfig, cfg_semi: ExperimentConfig,
                       seeds: Sequence[int], out_dir=None) -> ComparisonSummary:
    if cfg_phc.replace(strategy="phc", seed=0) != cfg_semi.replace(strategy="phc", seed=0):
        diff = [f.name for f in fields(ExperimentConfig)
                if f.name not in ("strategy", "seed")
                and getattr(cfg_phc, f.name) != getattr(cfg_semi, f.name)]
        raise ValueError(f"configurations differ beyond the strategy: {diff}")
    if not seeds:
        raise ValueError("need at least one seed")
    out = ComparisonSummary(list(seeds), [], [], [], [])
    for seed in seeds:
        for cfg, per, fin in ((cfg_phc, out.phc_periods, out.phc_final),
                              (cfg_semi, out.semi_periods, out.semi_final)):
            recs = run_experiment(cfg.replace(seed=seed))
            coefs = [r.coefficient for r in recs]
            per.append(periods_to_convergence(coefs, cfg.convergence_band))
            fin.append(coefs[-1] if coefs else math.nan)
            if out_dir is not None:
                emit_csv(recs, Path(out_dir) / f"{cfg.strategy}_seed{seed}.csv")
    return out


# --- output -----------------------------------------------------------------


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def emit_csv(records: Sequence[RunRecord], path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RECORD_FIELDS)
            for r in records:
                w.writerow([_fmt(getattr(r, f)) for f in RECORD_FIELDS])
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror or e}") from e


def read_csv(path) -> list[RunRecord]:
    types = {f.name: f.type for f in fields(RunRecord)}
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    conv = {"int": int, "float": float, int: int, float: float}
    return [RunRecord(**{k: conv[types[k]](v) for k, v in row.items()}) for row in rows]


PLOT_TEMPLATE = '''\
"""Coefficient and average cumulative reward per period, one line per run."""
import csv
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
RUNS = {runs!r}


def load(rel):
    with open(os.path.join(HERE, rel), newline="") as fh:
        rows = list(csv.DictReader(fh))
    return ([int(r["period"]) for r in rows],
            [float(r["coefficient"]) for r in rows],
            [float(r["avg_policy_reward"]) for r in rows])


fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
for label, rel in RUNS:
    t, c, avg = load(rel)
    style = "--" if "semi" in label else "-"
    ax1.plot(t, c, style, label=label)
    ax2.plot(t, avg, style, label=label)
ax1.set_xlabel("period")
ax1.set_ylabel("policy coefficient")
ax1.set_title("Convergence of the policy coefficient")
ax2.set_xlabel("period")
ax2.set_ylabel("average reward of the active policy")
ax2.set_title("Average cumulative reward")
for ax in (ax1, ax2):
    ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(HERE, {png!r}))
'''


def emit_plot_script(csv_paths: Sequence, out) -> None:
    if not csv_paths:
        raise ValueError("need at least one CSV to plot")
    out = Path(out)
    base = out.parent.resolve()
    runs = [(Path(p).stem, os.path.relpath(Path(p).resolve(), base)) for p in csv_paths]
    try:
        out.write_text(PLOT_TEMPLATE.format(runs=runs, png=out.stem + ".png"))
    except OSError as e:
        raise OSError(f"cannot write {out}: {e.strerror or e}") from e

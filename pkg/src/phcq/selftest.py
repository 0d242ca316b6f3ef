"""Independent-oracle checks runnable from an installed package (``phcq selftest``)."""

from __future__ import annotations

import math
import tempfile
from pathlib import Path

import numpy as np

from . import environment as env
from .harness import ExperimentConfig, emit_csv, read_csv, run_experiment
from .learner import QTable
from .phc import PhcConfig, SemiUniformConfig, phc_explore, semi_uniform_choose
from .policy import Policy, PolicyCatalog, TransformSet
from .selection import (
    SelectionConfig,
    dd_weights,
    first_stage_variance,
    h_monte_carlo,
    h_quadrature,
    select_best,
    stopping_time,
)


class ConstantSampler:
    def __init__(self, value):
        self.value = value
        self.draws = 0

    def draw(self):
        self.draws += 1
        return self.value


class NormalSampler:
    def __init__(self, mean, sd, rng):
        self.mean, self.sd, self.rng = mean, sd, rng
        self.draws = 0

    def draw(self):
        self.draws += 1
        return float(self.rng.normal(self.mean, self.sd))

    def draw_many(self, m):
        self.draws += m
        return self.rng.normal(self.mean, self.sd, m)


def two_pass_variance(xs):
    n = len(xs)
    mean = sum(xs) / n
    return sum((x - mean) ** 2 for x in xs) / (n - 1)


def batch_clusters(stream, radius):
    """Replay ``absorb``/``maintain`` with explicit member lists.

    Returns ``(centroid, q_mean, q_var, count)`` per final cluster, all
    recomputed from the raw members.
    """
    groups: list[list[tuple[np.ndarray, float]]] = []

    def centroid(g):
        return np.mean([x for x, _ in g], axis=0)

    for x, q in stream:
        x = np.asarray(x, dtype=float)
        if groups:
            d = [np.linalg.norm(centroid(g) - x) for g in groups]
            i = int(np.argmin(d))
            if d[i] <= radius:
                groups[i].append((x, q))
                continue
        groups.append([(x, q)])
    while len(groups) > 1:
        best = None
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                d = np.linalg.norm(centroid(groups[i]) - centroid(groups[j]))
                if best is None or d < best[0]:
                    best = (d, i, j)
        if best[0] > radius:
            break
        _, i, j = best
        groups[i] = groups[i] + groups[j]
        del groups[j]
    out = []
    for g in groups:
        qs = [q for _, q in g]
        var = two_pass_variance(qs) if len(qs) > 1 else 0.0
        out.append((centroid(g), sum(qs) / len(qs), var, len(qs)))
    return out


def grid_argmax(f, c0, step, lo, hi):
    """Best point of ``f`` on the grid ``c0 + k * step`` inside [lo, hi]."""
    ks = range(int(math.floor((lo - c0) / step)), int(math.ceil((hi - c0) / step)) + 1)
    grid = [c0 + k * step for k in ks if lo <= c0 + k * step <= hi]
    return max(grid, key=f)


# --- checks -------------------------------------------------------------


def check_variance():
    x = np.random.default_rng(1).standard_normal(1000)
    v = first_stage_variance(x)
    return abs(v - two_pass_variance(list(x))) < 1e-9 and 0.8 <= v <= 1.2, f"S2={v:.6f}"


def check_weights():
    cfg = SelectionConfig(n0=10, delta=0.05, epsilon=1.5, h=3.0)
    n_i = stopping_time(4.0, cfg)
    w = np.array(dd_weights(n_i, 10, 4.0, cfg))
    lhs = 4.0 * float(w @ w)
    return n_i == 16 and abs(lhs - 0.25) < 1e-9 and abs(w.sum() - 1) < 1e-9, f"4*sum(w^2)={lhs!r}"


def check_h():
    hq = h_quadrature(3, 0.05, 10)
    hm, se = h_monte_carlo(3, 0.05, 10, reps=400_000, rng=np.random.default_rng(7))
    return abs(hq - hm) < 4 * se, f"quadrature={hq:.4f} mc={hm:.4f}±{se:.4f}"


def check_correct_selection(trials=400):
    rng = np.random.default_rng(11)
    cfg = SelectionConfig(n0=10, delta=0.05, epsilon=1.0, h=h_quadrature(3, 0.05, 10))
    hits = 0
    for _ in range(trials):
        pops = [NormalSampler(0, 1, rng), NormalSampler(0, 2, rng), NormalSampler(1, 3, rng)]
        hits += select_best(pops, cfg).best_index == 2
    rate = hits / trials
    return rate >= 0.95 - 3 * math.sqrt(0.05 * 0.95 / trials), f"rate={rate:.3f}"


def check_env_mean():
    rng = np.random.default_rng(3)
    s = env.step_sample(np.tile([1.0, 0.0, 0.0], (100_000, 1)), np.zeros(100_000), rng)
    m = float(s[:, 0].mean())
    return abs(m - 0.75) < 0.003, f"mean x1'={m:.5f}"


def check_rollout_kernel():
    S = np.array([[1.0, 0.0, 0.0], [0.2, -0.3, 0.4]])
    a = env.rollout_returns(S, -0.6, 3, 7, 0.988, -5.0, -5.0, np.random.default_rng(5))
    b = env.rollout_returns_reference(S, -0.6, 3, 7, 0.988, -5.0, -5.0, np.random.default_rng(5))
    err = float(np.abs(a - b).max())
    return err < 1e-12, f"max diff {err:.2e}"


def check_clusters():
    rng = np.random.default_rng(4)
    stream = [(rng.normal(0, 0.3, 3), float(rng.normal())) for _ in range(60)]
    table = QTable(0.25)
    pi = Policy(-0.5)
    for x, q in stream:
        table.absorb(pi, x, q)
    table.maintain(pi)
    ref = batch_clusters(stream, 0.25)
    got = table.clusters(pi)
    ok = len(ref) == len(got) and all(
        np.allclose(c.centroid, r[0], atol=1e-9) and abs(c.q_mean - r[1]) < 1e-9
        and abs(c.variance - r[2]) < 1e-9 and c.count == r[3]
        for c, r in zip(got, ref)
    )
    return ok, f"{len(got)} clusters"


def check_semi_uniform(draws=100_000):
    cfg = SemiUniformConfig(0.1, PolicyCatalog.discretized())
    best = cfg.catalog[100]
    rng = np.random.default_rng(8)
    freq = sum(semi_uniform_choose(best, cfg, rng) == best for _ in range(draws)) / draws
    p = 0.9 + 0.1 / len(cfg.catalog)
    return abs(freq - p) <= 3 * math.sqrt(p * (1 - p) / draws), f"freq={freq:.4f} expected {p:.4f}"


def check_hill_climb():
    target = -0.69
    f = lambda c: -(c - target) ** 2
    factory = lambda pi: ConstantSampler(f(pi.c))
    ts = TransformSet(0.05, 3)
    res = phc_explore(Policy(0.0), factory, ts, PhcConfig(max_iters=100))
    best = grid_argmax(f, 0.0, ts.step, -3.0, 3.0)
    return abs(res.policy.c - best) < 1e-9, f"phc={res.policy.c:.4f} grid={best:.4f}"


def check_csv_roundtrip():
    recs = run_experiment(ExperimentConfig(seed=1, periods=3, strategy="semi_uniform"))
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "run.csv"
        emit_csv(recs, path)
        back = read_csv(path)
    return back == recs, f"{len(recs)} records"


CHECKS = [
    ("first-stage variance vs two-pass", check_variance),
    ("weight constraint S2*sum(w^2)=(eps/h)^2", check_weights),
    ("h: quadrature vs Monte Carlo", check_h),
    ("correct-selection frequency, k=3", check_correct_selection),
    ("environment mean of x1' vs E[kappa]", check_env_mean),
    ("compiled rollout vs reference loop", check_rollout_kernel),
    ("cluster absorb/maintain vs batch", check_clusters),
    ("semi-uniform exploitation frequency", check_semi_uniform),
    ("noiseless PHC vs grid search", check_hill_climb),
    ("CSV round trip", check_csv_roundtrip),
]


def run_all(out=print) -> bool:
    all_ok = True
    for name, fn in CHECKS:
        ok, detail = fn()
        all_ok &= bool(ok)
        out(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
    return all_ok

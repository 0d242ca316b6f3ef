"""Robust (mean-variance) Q-learning pieces and the cluster Q-function approximator.

Rewards and values are scored as ``phi * mean - (1 - phi) * variance``.
Q-values of a policy are approximated by clusters of states; each cluster
keeps a running centroid and Welford statistics of the q-values folded into
it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .policy import Policy


@dataclass(frozen=True)
class RewardParams:
    tau1: float = -5.0
    tau2: float = -5.0
    gamma: float = 0.988
    phi: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma!r}")
        if not 0.0 < self.phi < 1.0:
            raise ValueError(f"phi must lie in (0, 1), got {self.phi!r}")


@dataclass(frozen=True)
class LearnParams:
    beta: float = 0.2

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta!r}")


def instant_reward(x, p: RewardParams = RewardParams()):
    """Per-period utility ``tau1 * x2^2 + tau2 * x3^2``; accepts ``(..., 3)`` arrays."""
    if isinstance(x, np.ndarray):
        return p.tau1 * x[..., 1] ** 2 + p.tau2 * x[..., 2] ** 2
    return p.tau1 * x[1] ** 2 + p.tau2 * x[2] ** 2


def _mean_var(values: Sequence[float]) -> tuple[float, float]:
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size == 0:
        raise ValueError("need at least one value")
    mean = float(v.mean())
    var = float(v.var(ddof=1)) if v.size > 1 else 0.0
    return mean, var


def mean_variance_score(values: Sequence[float], phi: float) -> float:
    if not 0.0 <= phi <= 1.0:
        raise ValueError(f"phi must lie in [0, 1], got {phi!r}")
    mean, var = _mean_var(values)
    return phi * mean - (1.0 - phi) * var


def robust_reward(rewards: Sequence[float], phi: float) -> float:
    """Risk-adjusted reward of a sample: ``phi * mean - (1 - phi) * S^2``."""
    return mean_variance_score(rewards, phi)


def eta(q_samples: Sequence[float], phi: float) -> float:
    """One observation of the risk-adjusted Q statistic from a batch of q-values."""
    return mean_variance_score(q_samples, phi)


def eta_rows(q: np.ndarray, phi: float) -> np.ndarray:
    """Row-wise :func:`eta` for an ``(m, N)`` array of q-value batches."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    var = q.var(axis=1, ddof=1) if q.shape[1] > 1 else np.zeros(q.shape[0])
    return phi * q.mean(axis=1) - (1.0 - phi) * var


def robust_q_update(q: float, reward_tilde: float, v_next: float, p_weight: float,
                    lp: LearnParams, gamma: float) -> float:
    if not 0.0 <= p_weight <= 1.0:
        raise ValueError(f"state weight must lie in [0, 1], got {p_weight!r}")
    return q + lp.beta * p_weight * (reward_tilde + gamma * v_next - q)


def standard_q_update(q: float, r: float, v_next: float, lp: LearnParams, gamma: float) -> float:
    return (1.0 - lp.beta) * q + lp.beta * (r + gamma * v_next)


# --- clusters -------------------------------------------------------------


@dataclass
class QCluster:
    centroid: np.ndarray
    q_mean: float
    q_m2: float = 0.0
    count: int = 1

    @classmethod
    def singleton(cls, x, q: float) -> "QCluster":
        return cls(np.array(x, dtype=float), float(q))

    @property
    def variance(self) -> float:
        return self.q_m2 / (self.count - 1) if self.count >= 2 else 0.0

    def add(self, x, q: float) -> None:
        self.count += 1
        d = q - self.q_mean
        self.q_mean += d / self.count
        self.q_m2 += d * (q - self.q_mean)
        self.centroid = self.centroid + (np.asarray(x, dtype=float) - self.centroid) / self.count

    def merge(self, other: "QCluster") -> None:
        # Chan et al. pairwise combination
        n = self.count + other.count
        d = other.q_mean - self.q_mean
        self.q_m2 += other.q_m2 + d * d * self.count * other.count / n
        self.q_mean += d * other.count / n
        self.centroid = (self.centroid * self.count + other.centroid * other.count) / n
        self.count = n


class QTable:
    """Per-policy lists of :class:`QCluster` with a Euclidean matching radius."""

    def __init__(self, match_radius: float = 0.25):
        if not match_radius > 0:
            raise ValueError("match_radius must be positive")
        self.match_radius = float(match_radius)
        self._clusters: dict[Policy, list[QCluster]] = {}

    def __contains__(self, pi: Policy) -> bool:
        return bool(self._clusters.get(pi))

    def __len__(self) -> int:
        return sum(len(v) for v in self._clusters.values())

    def policies(self) -> list[Policy]:
        return list(self._clusters)

    def clusters(self, pi: Policy) -> list[QCluster]:
        return self._clusters.get(pi, [])

    def _centroids(self, pi: Policy) -> np.ndarray:
        cl = self.clusters(pi)
        if not cl:
            return np.empty((0, 3))
        return np.stack([c.centroid for c in cl])

    def match_index(self, pi: Policy, x) -> int | None:
        """Index of the nearest centroid of ``pi`` within the radius, if any."""
        cents = self._centroids(pi)
        if cents.shape[0] == 0:
            return None
        d = np.linalg.norm(cents - np.asarray(x, dtype=float), axis=1)
        i = int(np.argmin(d))
        return i if d[i] <= self.match_radius else None

    def match(self, pi: Policy, x) -> QCluster | None:
        i = self.match_index(pi, x)
        return None if i is None else self._clusters[pi][i]

    def absorb(self, pi: Policy, x, q_new: float) -> "QTable":
        """Fold ``(x, q_new)`` into the matching cluster or open a new one."""
        c = self.match(pi, x)
        if c is None:
            self._clusters.setdefault(pi, []).append(QCluster.singleton(x, q_new))
        else:
            c.add(x, q_new)
        return self

    def maintain(self, pi: Policy) -> "QTable":
        """Merge the closest pair of matching clusters until none lie within the radius."""
        cl = self._clusters.get(pi)
        while cl and len(cl) > 1:
            cents = np.stack([c.centroid for c in cl])
            d = np.linalg.norm(cents[:, None, :] - cents[None, :, :], axis=2)
            d[np.tril_indices(len(cl))] = np.inf
            i, j = np.unravel_index(int(np.argmin(d)), d.shape)
            if d[i, j] > self.match_radius:
                break
            cl[i].merge(cl[j])
            del cl[j]
        return self

    def value(self, pi: Policy, x, phi: float) -> float:
        """Risk-penalised value ``Q - (1 - phi) S^2`` at ``x``; 0 when nothing matches."""
        c = self.match(pi, x)
        if c is None:
            return 0.0
        return c.q_mean - (1.0 - phi) * c.variance

    # --- debug snapshot ----------------------------------------------------

    def snapshot(self, path) -> None:
        """Write one cluster per line: c x1 x2 x3 q_mean variance count."""
        with open(path, "w") as fh:
            fh.write(f"# match_radius {self.match_radius!r}\n")
            for pi, cl in self._clusters.items():
                for c in cl:
                    x1, x2, x3 = c.centroid.tolist()
                    fh.write(f"{pi.c!r} {x1!r} {x2!r} {x3!r} {c.q_mean!r} {c.variance!r} {c.count}\n")

    @classmethod
    def load(cls, path) -> "QTable":
        with open(path) as fh:
            header = fh.readline().split()
            table = cls(float(header[2]))
            for line in fh:
                if not line.strip():
                    continue
                c, x1, x2, x3, qm, var, n = line.split()
                n = int(n)
                cl = QCluster(np.array([float(x1), float(x2), float(x3)]), float(qm),
                              float(var) * (n - 1) if n > 1 else 0.0, n)
                table._clusters.setdefault(Policy(float(c)), []).append(cl)
        return table


def absorb(table: QTable, pi: Policy, x, q_new: float) -> QTable:
    return table.absorb(pi, x, q_new)


def maintain(table: QTable, pi: Policy) -> QTable:
    return table.maintain(pi)


def robust_value(x_next, candidates: Sequence[Policy], table: QTable, phi: float) -> float:
    """Best risk-penalised cluster value over the candidate policies at ``x_next``."""
    if not candidates:
        raise ValueError("need at least one candidate policy")
    return max(table.value(pi, x_next, phi) for pi in candidates)


def cluster_labels(sample: np.ndarray, table: QTable, pi: Policy) -> list:
    """Assign each state to its matching cluster of ``pi``.

    Unmatched states are grouped among themselves by leader clustering
    with the same radius, so every state receives a label.
    """
    cents = table._centroids(pi)
    r = table.match_radius
    leaders: list[np.ndarray] = []
    labels = []
    for x in np.asarray(sample, dtype=float):
        if cents.shape[0]:
            d = np.linalg.norm(cents - x, axis=1)
            i = int(np.argmin(d))
            if d[i] <= r:
                labels.append(("c", i))
                continue
        if leaders:
            d = np.linalg.norm(np.stack(leaders) - x, axis=1)
            i = int(np.argmin(d))
            if d[i] <= r:
                labels.append(("n", i))
                continue
        leaders.append(x)
        labels.append(("n", len(leaders) - 1))
    return labels


def state_weights(sample: np.ndarray, table: QTable, pi: Policy) -> np.ndarray:
    """Empirical cluster frequency of every state in the sample."""
    labels = cluster_labels(sample, table, pi)
    counts: dict = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    n = len(labels)
    return np.array([counts[lab] / n for lab in labels])


def state_weight(x, sample: np.ndarray, table: QTable, pi: Policy) -> float:
    sample = np.asarray(sample, dtype=float)
    hits = np.flatnonzero(np.all(sample == np.asarray(x, dtype=float), axis=1))
    if hits.size == 0:
        raise ValueError("x must be a member of the sample")
    return float(state_weights(sample, table, pi)[hits[0]])

"""Linear feedback policies ``a = c * x1`` and their local neighbourhoods."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, order=True)
class Policy:
    c: float

    def __post_init__(self):
        if not math.isfinite(self.c):
            raise ValueError(f"policy coefficient must be finite, got {self.c!r}")

    def __call__(self, x):
        return act(self, x)


def act(pi: Policy, x):
    """Action for one state or, elementwise, for an ``(..., 3)`` array of states."""
    if isinstance(x, np.ndarray):
        return pi.c * x[..., 0]
    return pi.c * x[0]


@dataclass(frozen=True)
class TransformSet:
    step: float = 0.05
    arity: int = 3

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("transformation step must be positive")
        if int(self.arity) != self.arity or self.arity < 1:
            raise ValueError("arity must be an integer >= 1")

    def scaled(self, factor: float) -> "TransformSet":
        return TransformSet(self.step * factor, self.arity)


def _offsets(arity: int) -> list[int]:
    # symmetric fan about 0; an even arity adds the extra point on the + side
    half = (arity - 1) // 2
    offs = list(range(-half, half + 1))
    if arity % 2 == 0:
        offs.append(half + 1)
    return offs


def neighbors(pi: Policy, ts: TransformSet) -> list[Policy]:
    """The incumbent plus ``arity - 1`` perturbations, sorted by coefficient.

    >>> [p.c for p in neighbors(Policy(0.0), TransformSet(0.1, 5))]
    [-0.2, -0.1, 0.0, 0.1, 0.2]
    """
    return [pi if o == 0 else Policy(pi.c + o * ts.step) for o in _offsets(ts.arity)]


@dataclass(frozen=True)
class PolicyCatalog:
    policies: tuple[Policy, ...]

    def __len__(self):
        return len(self.policies)

    def __getitem__(self, i):
        return self.policies[i]

    @classmethod
    def discretized(cls, lo: float = -2.40, hi: float = 0.30, spacing: float = 0.01) -> "PolicyCatalog":
        n = int(round((hi - lo) / spacing)) + 1
        # round away accumulated binary error so catalog entries compare cleanly
        return cls(tuple(Policy(round(lo + i * spacing, 10)) for i in range(n)))

"""Welfare estimates and closed-form welfare bounds."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats


class Method(enum.Enum):
    MONTE_CARLO = "monte_carlo"
    EXACT_AMC = "exact_amc"
    CLOSED_FORM = "closed_form"


@dataclass(frozen=True)
class WelfareEstimate:
    mean: float
    stderr: float
    ci95: tuple[float, float]
    epochs_used: int
    replicas: int
    method: Method
    replica_means: tuple[float, ...] = field(default=(), compare=False)
    dof: int | None = field(default=None, compare=False)

    @classmethod
    def exact(cls, value: float, method: Method = Method.EXACT_AMC) -> WelfareEstimate:
        return cls(float(value), 0.0, (float(value), float(value)), 0, 0, method)

    @classmethod
    def from_replicas(cls, replica_means: Sequence[float], epochs_per_replica: int,
                      batch_stderr: float | None = None,
                      batches: int | None = None) -> WelfareEstimate:
        """Pool equal-length replicas; stderr is taken across replica means.

        With a single replica the caller must supply ``batch_stderr`` and
        the number of ``batches`` it was computed from.
        """
        x = np.asarray(replica_means, dtype=float)
        mean = float(x.mean())
        if len(x) > 1:
            se = float(x.std(ddof=1) / math.sqrt(len(x)))
            dof = len(x) - 1
        else:
            se = float(batch_stderr if batch_stderr is not None else math.nan)
            dof = (batches - 1) if batches and batches > 1 else None
        half = 1.959963984540054 * se
        return cls(mean, se, (mean - half, mean + half), epochs_per_replica * len(x),
                   len(x), Method.MONTE_CARLO, tuple(x.tolist()), dof)

    def ci(self, level: float = 0.95) -> tuple[float, float]:
        """Two-sided Student t interval (replicas - 1 or batches - 1 dof)."""
        if self.method is not Method.MONTE_CARLO:
            return self.ci95
        df = self.dof if self.dof else max(self.replicas - 1, 1)
        half = float(stats.t.ppf(0.5 + level / 2, df)) * self.stderr
        return (self.mean - half, self.mean + half)

    def contains(self, value: float, level: float = 0.99) -> bool:
        lo, hi = self.ci(level)
        return lo <= value <= hi


def tremble_learn_prob(lam: float, epsilon: float) -> float:
    """Probability that a tremble fires before the next payoff shock."""
    if lam <= 0 or epsilon < 0:
        raise ValueError("need lam > 0 and epsilon >= 0")
    return epsilon / (lam + epsilon)


def bound_no_weak(lam: float, epsilon: float) -> float:
    """Welfare ceiling for networks without weak links, 1/2 (1 + q)."""
    return 0.5 + epsilon / (2.0 * (lam + epsilon))


def island_bound_terms(p: float, lam: float, epsilon: float, gamma: float,
                       sizes: Sequence[int]) -> tuple[float, float, float]:
    """The conformal term, diverse-state weight and diverse-state welfare cap."""
    sizes = [int(s) for s in sizes]
    if not sizes or any(s < 1 for s in sizes):
        raise ValueError(f"sizes must be positive: {sizes}")
    if any(a < b for a, b in zip(sizes, sizes[1:])):
        raise ValueError(f"sizes must be sorted descending: {sizes}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if lam <= 0 or gamma < 0 or epsilon < 0:
        raise ValueError("rates must be positive")
    if epsilon == 0.0:
        if p > 0:
            conformal, weight = 0.5, 0.0
        else:
            conformal, weight = 0.0, 1.0
    else:
        r = lam / epsilon
        denom = 1.0 + 2.0 * p + 2.0 * r * p
        conformal = (2.0 * p + r * p) / denom
        weight = 1.0 / denom
    top = min(math.ceil(gamma / lam), len(sizes))
    diverse = 0.5 + sum(sizes[:top]) / sum(sizes)
    return conformal, weight, diverse


def bound_island(p: float, lam: float, epsilon: float, gamma: float,
                 sizes: Sequence[int]) -> float:
    """Upper bound on island-network welfare, clipped at 1."""
    conformal, weight, diverse = island_bound_terms(p, lam, epsilon, gamma, sizes)
    return min(1.0, conformal + weight * diverse)


def bound_discount(tau: float, d_min: int, d_max: int) -> float:
    """Largest discount factor for which agents never experiment."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if d_min < 1:
        raise ValueError("d_min must be at least 1")
    if d_min > d_max:
        raise ValueError(f"d_min={d_min} exceeds d_max={d_max}")
    return tau * d_min / (2.0 + tau * d_max)

"""Closed-form average age under the waiting-room (WQ) discipline.

Every quantity is evaluated by O(depth) recursions: factorial ratios and the
``mu**j / prod(a_0..a_j)`` weights are built multiplicatively, and the
stationary law is normalised in log space so large depths do not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import AgeReport, Discipline, SystemConfig, check_depth, check_rates


@dataclass(frozen=True)
class ClosedFormBreakdown:
    depth: int
    pi: np.ndarray
    a_seq: np.ndarray
    v01: float  # monitor-independent packet-age correlation at state 0
    v_row0: np.ndarray  # monitor-age correlations v_00 .. v_i0

    @property
    def age(self) -> float:
        return float(self.v_row0.sum())


def stationary_distribution(depth: int, lam: float, mu: float) -> np.ndarray:
    """Birth-death law of the number of higher-priority packets ahead of the stream.

    ``pi_k / pi_{k-1} = lam * (depth - k + 1) / mu``.
    """
    check_depth(depth)
    check_rates(lam, mu)
    i = int(depth)
    log_w = np.zeros(i + 1)
    for k in range(1, i + 1):
        log_w[k] = log_w[k - 1] + math.log(lam * (i - k + 1) / mu)
    w = np.exp(log_w - log_w.max())
    return w / w.sum()


def a_sequence(depth: int, lam: float, mu: float) -> np.ndarray:
    """Backward recursion a_i, a_{i-1}, ..., a_0 (returned in index order)."""
    check_depth(depth)
    check_rates(lam, mu)
    i = int(depth)
    a = np.empty(i + 1)
    if i == 0:
        a[0] = lam
        return a
    a[i] = lam + mu
    for h in range(i - 1, 0, -1):
        a[h] = (i - h + 1) * lam + mu - (i - h) * lam * mu / a[h + 1]
    a[0] = (i + 1) * lam - i * lam * mu / a[1]
    return a


def wq_age(depth: int, lam: float, mu: float) -> ClosedFormBreakdown:
    pi = stationary_distribution(depth, lam, mu)
    a = a_sequence(depth, lam, mu)
    i = int(depth)

    weight = 1.0 / a[0]  # mu**j / prod(a_0..a_j), updated per j
    v01 = weight * pi[0]
    for j in range(1, i + 1):
        weight *= mu / a[j]
        v01 += weight * pi[j]

    tail = np.cumsum(pi[::-1])[::-1]  # tail[k] = sum_{j>=k} pi_j
    v = np.empty(i + 1)
    v[0] = 1.0 / mu + v01
    for k in range(1, i + 1):
        v[k] = (i - k + 1) * lam / mu * v[k - 1] + tail[k] / mu

    if i == 0:
        assert math.isclose(v[0], 1.0 / lam + 1.0 / mu, rel_tol=1e-12)
    return ClosedFormBreakdown(i, pi, a, float(v01), v)


def total_wq_age(config: SystemConfig) -> AgeReport:
    ages = tuple(wq_age(i, config.lam, config.mu).age for i in config.depths)
    return AgeReport(config, Discipline.WQ, ages)

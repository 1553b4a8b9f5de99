"""Event-driven simulation of N prioritised streams on one preemptive server.

Stream 1 has the highest priority.  Every stream holds at most one packet in
the system: under WQ a preempted packet waits in its stream's slot and
resumes with its remaining work, and a new arrival replaces whatever packet
the stream holds (taking the server if that packet was in service).  Under
NQ preempted packets and arrivals that find a higher-priority packet in
service are discarded.

Age at each monitor is piecewise linear with unit slope, so its area is
accumulated exactly at delivery instants.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .errors import InvalidConfig
from .models import Discipline, SystemConfig

log = logging.getLogger(__name__)

DEFAULT_SEED = 2019
NONCONVERGENCE_RATIO = 0.05
SERVICE_POLICIES = ("resume", "restart")

CSV_COLUMNS = ("replication", "stream", "discipline", "lambda", "mu", "N", "age", "area", "measured_time")


@numba.njit(nogil=True, cache=True)
def _area_piece(t0, t1, stamp):
    # integral of (u - stamp) du over [t0, t1]
    return 0.5 * (t1 - t0) * ((t1 - stamp) + (t0 - stamp))


@numba.njit(nogil=True, cache=True)
def _run_path(n, lam, mu, horizon, warmup, discard, restart, arrival_rngs, service_rngs):
    inv_lam = 1.0 / lam
    inv_mu = 1.0 / mu
    next_arrival = np.empty(n)
    for k in range(n):
        next_arrival[k] = arrival_rngs[k].exponential(inv_lam)

    has_packet = np.zeros(n, dtype=np.bool_)
    was_preempted = np.zeros(n, dtype=np.bool_)
    stamp = np.zeros(n)  # generation time of the packet the stream holds
    remaining = np.zeros(n)
    delivered = np.zeros(n)  # timestamp of last delivered packet per monitor
    mark = np.full(n, warmup)  # area is accumulated from here on
    area = np.zeros(n)
    deliveries = np.zeros(n, dtype=np.int64)

    serving = -1
    started = 0.0
    completion = np.inf

    while True:
        # completion wins ties, then lower stream index
        t = completion
        kind = -1
        for k in range(n):
            if next_arrival[k] < t:
                t = next_arrival[k]
                kind = k
        if t > horizon:
            break

        if kind == -1:
            s = serving
            if t > warmup:
                area[s] += _area_piece(mark[s], t, delivered[s])
                mark[s] = t
            delivered[s] = stamp[s]
            deliveries[s] += 1
            has_packet[s] = False
            serving = -1
            completion = np.inf
            for k in range(n):
                if has_packet[k]:
                    serving = k
                    if restart and was_preempted[k]:
                        remaining[k] = service_rngs[k].exponential(inv_mu)
                    was_preempted[k] = False
                    started = t
                    completion = t + remaining[k]
                    break
            continue

        k = kind
        next_arrival[k] = t + arrival_rngs[k].exponential(inv_lam)
        work = service_rngs[k].exponential(inv_mu)
        if discard:
            if serving == -1 or serving >= k:
                if serving > k:
                    has_packet[serving] = False
                has_packet[k] = True
                stamp[k] = t
                remaining[k] = work
                serving = k
                started = t
                completion = t + work
            continue

        has_packet[k] = True
        stamp[k] = t
        remaining[k] = work
        was_preempted[k] = False
        if serving == -1 or serving == k:
            serving = k
            started = t
            completion = t + work
        elif k < serving:
            remaining[serving] = max(remaining[serving] - (t - started), 0.0)
            was_preempted[serving] = True
            serving = k
            started = t
            completion = t + work

    for k in range(n):
        area[k] += _area_piece(mark[k], horizon, delivered[k])
    return area, deliveries


@dataclass(frozen=True)
class SimConfig:
    system: SystemConfig
    discipline: Discipline = Discipline.WQ
    horizon: float = 1e5
    warmup_fraction: float = 0.1
    seed: int = DEFAULT_SEED
    replications: int = 5
    service: str = "resume"  # "restart" redraws work on resume

    def __post_init__(self):
        object.__setattr__(self, "discipline", Discipline.parse(self.discipline))
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise InvalidConfig(f"horizon must be positive, got {self.horizon!r}")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise InvalidConfig(f"warmup_fraction must lie in [0, 1), got {self.warmup_fraction!r}")
        if int(self.replications) != self.replications or self.replications < 1:
            raise InvalidConfig(f"replications must be a positive integer, got {self.replications!r}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise InvalidConfig(f"seed must be a nonnegative integer, got {self.seed!r}")
        if self.service not in SERVICE_POLICIES:
            raise InvalidConfig(f"service policy must be one of {SERVICE_POLICIES}")

    @property
    def warmup(self) -> float:
        return self.horizon * self.warmup_fraction

    @property
    def measured_time(self) -> float:
        return self.horizon - self.warmup


@dataclass(frozen=True)
class SimEstimate:
    config: SimConfig
    areas: np.ndarray  # (replications, streams)
    deliveries: np.ndarray = field(repr=False)

    @property
    def replication_ages(self) -> np.ndarray:
        return self.areas / self.config.measured_time

    @property
    def per_stream_age(self) -> np.ndarray:
        return self.replication_ages.mean(axis=0)

    @property
    def stderr(self) -> np.ndarray:
        ages = self.replication_ages
        if ages.shape[0] < 2:
            return np.full(ages.shape[1], np.nan)
        return ages.std(axis=0, ddof=1) / math.sqrt(ages.shape[0])

    @property
    def total_age(self) -> float:
        return float(self.per_stream_age.sum())

    @property
    def non_converged(self) -> bool:
        """True if any stream's stderr exceeds 5% of its mean (never with one replication)."""
        ratio = self.stderr / self.per_stream_age
        return bool(np.any(ratio > NONCONVERGENCE_RATIO))

    def to_dict(self) -> dict:
        sysc = self.config.system
        return {
            "N": sysc.streams,
            "lambda": sysc.lam,
            "mu": sysc.mu,
            "discipline": self.config.discipline.value,
            "horizon": self.config.horizon,
            "replications": self.config.replications,
            "seed": self.config.seed,
            "per_stream_age": self.per_stream_age.tolist(),
            "stderr": [None if math.isnan(x) else x for x in self.stderr.tolist()],
            "total_age": self.total_age,
            "non_converged": self.non_converged,
        }

    def csv_rows(self):
        sysc = self.config.system
        ages = self.replication_ages
        for r in range(ages.shape[0]):
            for k in range(ages.shape[1]):
                yield {
                    "replication": r,
                    "stream": k + 1,
                    "discipline": self.config.discipline.value,
                    "lambda": sysc.lam,
                    "mu": sysc.mu,
                    "N": sysc.streams,
                    "age": float(ages[r, k]),
                    "area": float(self.areas[r, k]),
                    "measured_time": self.config.measured_time,
                }


def write_replications_csv(estimate: SimEstimate, sink) -> None:
    writer = csv.DictWriter(sink, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(estimate.csv_rows())


def _replication_rngs(seed: int, replications: int, streams: int):
    """Per replication: independent arrival and service generators for every stream.

    Substream keys do not depend on the discipline or on the stream count, so
    runs sharing a seed see common random numbers.
    """
    out = []
    for rep in np.random.SeedSequence(seed).spawn(replications):
        arrivals, service = rep.spawn(2)
        out.append((
            tuple(np.random.default_rng(s) for s in arrivals.spawn(streams)),
            tuple(np.random.default_rng(s) for s in service.spawn(streams)),
        ))
    return out


def simulate(config: SimConfig, workers: int = 1) -> SimEstimate:
    sysc = config.system
    rngs = _replication_rngs(config.seed, config.replications, sysc.streams)

    def one(pair):
        arr, svc = pair
        return _run_path(
            sysc.streams, float(sysc.lam), float(sysc.mu), float(config.horizon), float(config.warmup),
            config.discipline is Discipline.NQ, config.service == "restart", arr, svc,
        )

    if workers > 1 and config.replications > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, rngs))
    else:
        results = [one(p) for p in rngs]

    est = SimEstimate(
        config,
        np.array([r[0] for r in results]),
        np.array([r[1] for r in results]),
    )
    if est.non_converged:
        log.warning("simulation not converged: stderr/mean > %.0f%% on some stream", 100 * NONCONVERGENCE_RATIO)
    return est


def sweep_simulate(configs, workers: int = 1) -> list[SimEstimate]:
    """Simulate each config, the j-th one with seed ``config.seed + j``."""
    configs = list(configs)
    if not configs:
        raise InvalidConfig("sweep needs at least one configuration")
    return [simulate(replace(cfg, seed=cfg.seed + j), workers=workers) for j, cfg in enumerate(configs)]

"""SHS chains for a stream of interest with ``depth`` higher-priority streams.

Both chains use the two-component age vector ``[x0, x1]``: ``x0`` is the age at
the monitor, ``x1`` the age of the stream's packet in the system.  When the
stream has no real packet in the system a fake one carrying the timestamp of
the last delivery stands in, so packet presence is never tracked.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig
from .shs import ShsModel, Transition, average_age

KEEP_MONITOR = np.array([[1.0, 0.0], [0.0, 0.0]])  # [x0, 0]: fresh packet
IDENTITY = np.eye(2)
DELIVER = np.array([[0.0, 0.0], [1.0, 1.0]])  # [x1, x1]
FAKE_FROM_MONITOR = np.array([[1.0, 1.0], [0.0, 0.0]])  # [x0, x0]


class Discipline(str, enum.Enum):
    WQ = "wq"  # preempted packets wait in a per-stream slot and resume
    NQ = "nq"  # preempted or blocked packets are discarded

    @classmethod
    def parse(cls, value) -> "Discipline":
        try:
            return cls(value.lower() if isinstance(value, str) else value)
        except ValueError:
            raise InvalidConfig(f"unknown discipline {value!r} (expected wq or nq)") from None


def check_rates(lam: float, mu: float) -> None:
    for name, val in (("lambda", lam), ("mu", mu)):
        if not (isinstance(val, (int, float, np.floating, np.integer)) and np.isfinite(val) and val > 0):
            raise InvalidConfig(f"{name} must be a finite positive rate, got {val!r}")


def check_depth(depth: int) -> None:
    if int(depth) != depth or depth < 0:
        raise InvalidConfig(f"priority depth must be a nonnegative integer, got {depth!r}")


@dataclass(frozen=True)
class SystemConfig:
    """Common arrival rate ``lam`` per stream, service rate ``mu``, ``streams`` streams."""

    lam: float
    mu: float
    streams: int = 1

    def __post_init__(self):
        check_rates(self.lam, self.mu)
        if int(self.streams) != self.streams or self.streams < 1:
            raise InvalidConfig(f"stream count must be a positive integer, got {self.streams!r}")

    @property
    def depths(self) -> range:
        return range(self.streams)


@dataclass(frozen=True)
class AgeReport:
    config: SystemConfig
    discipline: Discipline
    per_stream: tuple[float, ...]

    @property
    def total(self) -> float:
        return float(sum(self.per_stream))

    def to_dict(self) -> dict:
        return {
            "N": self.config.streams,
            "lambda": self.config.lam,
            "mu": self.config.mu,
            "discipline": self.discipline.value,
            "per_stream": list(self.per_stream),
            "total": self.total,
        }


def build_wq_chain(depth: int, lam: float, mu: float) -> ShsModel:
    """Waiting-room chain: state q counts higher-priority packets ahead of the stream.

    Transitions, in order: own arrivals in every state, escalations
    ``q -> q+1`` at ``(depth - q) * lam``, completions ``q -> q-1`` at ``mu``,
    and the delivery self-loop at state 0.
    """
    check_depth(depth)
    check_rates(lam, mu)
    i = int(depth)
    trans = [Transition(q, q, lam, KEEP_MONITOR) for q in range(i + 1)]
    trans += [Transition(q, q + 1, (i - q) * lam, IDENTITY) for q in range(i)]
    trans += [Transition(q, q - 1, mu, IDENTITY) for q in range(i, 0, -1)]
    trans.append(Transition(0, 0, mu, DELIVER))
    return ShsModel(i + 1, 2, tuple(trans), np.ones((i + 1, 2)))


def build_nq_chain(depth: int, lam: float, mu: float) -> ShsModel:
    """Bufferless chain: state 0 serves the stream (real or fake), state 1 a higher packet.

    A higher-priority arrival discards the stream's packet; while state 1
    lasts, own arrivals are dropped and further higher-priority arrivals only
    replace the packet in service, so they are invisible here.  Leaving state
    1 restores a fake packet with the last delivered timestamp.
    """
    check_depth(depth)
    check_rates(lam, mu)
    i = int(depth)
    if i == 0:
        return build_wq_chain(0, lam, mu)
    trans = (
        Transition(0, 0, lam, KEEP_MONITOR),
        Transition(0, 1, i * lam, IDENTITY),
        Transition(1, 0, mu, FAKE_FROM_MONITOR),
        Transition(0, 0, mu, DELIVER),
    )
    return ShsModel(2, 2, trans, np.ones((2, 2)))


def build_chain(depth: int, lam: float, mu: float, discipline) -> ShsModel:
    if Discipline.parse(discipline) is Discipline.WQ:
        return build_wq_chain(depth, lam, mu)
    return build_nq_chain(depth, lam, mu)


def shs_stream_age(depth: int, lam: float, mu: float, discipline) -> float:
    return average_age(build_chain(depth, lam, mu, discipline), 0)


def shs_report(config: SystemConfig, discipline) -> AgeReport:
    """Per-stream ages from the generic solver, stream k having k-1 streams above it."""
    disc = Discipline.parse(discipline)
    ages = tuple(shs_stream_age(i, config.lam, config.mu, disc) for i in config.depths)
    return AgeReport(config, disc, ages)

"""Arrival-rate searches on total age: the minimiser per discipline and the WQ/NQ crossing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .closed_form import total_wq_age, wq_age
from .errors import BracketError, InvalidConfig, MultipleCrossings, NoSignChange
from .models import AgeReport, Discipline, SystemConfig, shs_stream_age

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
DEFAULT_TOL = 1e-4
SCAN_POINTS = 64
CROSSING_FTOL = 1e-6


@dataclass(frozen=True)
class CurvePoint:
    lam: float
    discipline: Discipline
    per_stream: tuple[float, ...]

    @property
    def total(self) -> float:
        return float(sum(self.per_stream))


@dataclass(frozen=True)
class OptimumResult:
    streams: int
    mu: float
    discipline: Discipline
    lambda_opt: float
    age_opt: float

    def to_dict(self) -> dict:
        return {
            "N": self.streams,
            "mu": self.mu,
            "discipline": self.discipline.value,
            "lambda_opt": self.lambda_opt,
            "age_opt": self.age_opt,
        }


@dataclass(frozen=True)
class CrossingResult:
    lambda_pass: float
    bracket: tuple[float, float]
    achieved_tolerance: float

    def to_dict(self) -> dict:
        return {"lambda_pass": self.lambda_pass, "bracket": list(self.bracket)}


def age_report(streams: int, mu: float, lam: float, discipline) -> AgeReport:
    """WQ from the closed form, NQ from the generic solver on the bufferless chain.

    The top-priority stream sees the same chain under both disciplines, so
    its age is taken from the closed form in both cases.
    """
    cfg = SystemConfig(lam, mu, streams)
    if Discipline.parse(discipline) is Discipline.WQ:
        return total_wq_age(cfg)
    ages = [wq_age(0, lam, mu).age]
    ages += [shs_stream_age(i, lam, mu, Discipline.NQ) for i in range(1, streams)]
    return AgeReport(cfg, Discipline.NQ, tuple(ages))


def total_age(streams: int, mu: float, lam: float, discipline) -> float:
    return age_report(streams, mu, lam, discipline).total


def total_age_curve(streams: int, mu: float, lambdas, discipline) -> list[CurvePoint]:
    disc = Discipline.parse(discipline)
    lambdas = [float(x) for x in lambdas]
    if not lambdas:
        raise InvalidConfig("empty arrival-rate grid")
    return [CurvePoint(lam, disc, age_report(streams, mu, lam, disc).per_stream) for lam in lambdas]


def _check_bracket(lo: float, hi: float) -> None:
    if not (0 < lo < hi and math.isfinite(hi)):
        raise InvalidConfig(f"bracket must satisfy 0 < lo < hi, got ({lo}, {hi})")


def golden_section(f, lo: float, hi: float, tol: float) -> float:
    """Minimiser of a unimodal ``f`` on [lo, hi] to within ``tol``."""
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - INV_PHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + INV_PHI * (hi - lo)
            fd = f(d)
    return 0.5 * (lo + hi)


def find_optimum(streams: int, mu: float, discipline, bracket=(0.01, 3.0), tol: float = DEFAULT_TOL) -> OptimumResult:
    """Arrival rate minimising the total age of ``streams`` streams.

    Golden-section search assumes unimodality, so the result is checked
    against a log-spaced scan of the bracket; if the scan finds a lower
    point, the search is redone between that point's neighbours.
    """
    disc = Discipline.parse(discipline)
    lo, hi = map(float, bracket)
    _check_bracket(lo, hi)

    def f(lam):
        return total_age(streams, mu, lam, disc)

    step = tol
    if f(lo + step) > f(lo) or f(hi - step) > f(hi):
        raise BracketError(f"no interior minimum in ({lo}, {hi}) for N={streams}, {disc.value}")

    lam = golden_section(f, lo, hi, tol)
    best = f(lam)
    grid = np.geomspace(lo, hi, SCAN_POINTS)
    ages = np.array([f(x) for x in grid])
    j = int(ages.argmin())
    if ages[j] < best:
        lam = golden_section(f, grid[max(j - 1, 0)], grid[min(j + 1, SCAN_POINTS - 1)], tol)
        best = f(lam)
    return OptimumResult(streams, mu, disc, lam, best)


def age_gap(streams: int, mu: float, lam: float) -> float:
    """Total WQ age minus total NQ age; negative where buffering pays off."""
    return total_age(streams, mu, lam, Discipline.WQ) - total_age(streams, mu, lam, Discipline.NQ)


def sign_changes(values) -> int:
    s = np.sign(np.asarray(values, dtype=float))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def find_crossing(streams: int, mu: float, bracket=(0.05, 10.0), tol: float = DEFAULT_TOL,
                  ftol: float = CROSSING_FTOL) -> CrossingResult:
    """Bisection for the rate where total WQ and NQ ages meet.

    Stops once the bracket is narrower than ``tol`` and the gap is within
    ``ftol`` of the total age.
    """
    lo, hi = map(float, bracket)
    _check_bracket(lo, hi)
    g_lo, g_hi = age_gap(streams, mu, lo), age_gap(streams, mu, hi)
    if g_lo == 0.0:
        return CrossingResult(lo, (lo, hi), 0.0)
    if g_hi == 0.0:
        return CrossingResult(hi, (lo, hi), 0.0)
    if np.sign(g_lo) == np.sign(g_hi):
        raise NoSignChange(f"WQ-NQ gap has one sign on ({lo}, {hi}) for N={streams}")
    grid = np.geomspace(lo, hi, SCAN_POINTS)
    if sign_changes([age_gap(streams, mu, x) for x in grid]) > 1:
        raise MultipleCrossings(f"WQ-NQ gap changes sign more than once on ({lo}, {hi})")

    a, b = lo, hi
    mid = 0.5 * (a + b)
    for _ in range(200):
        mid = 0.5 * (a + b)
        g = age_gap(streams, mu, mid)
        scale = total_age(streams, mu, mid, Discipline.WQ)
        if g == 0.0 or (b - a <= tol and abs(g) <= ftol * scale):
            break
        if np.sign(g) == np.sign(g_lo):
            a = mid
        else:
            b = mid
    return CrossingResult(mid, (lo, hi), b - a)

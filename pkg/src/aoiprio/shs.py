"""Generic stochastic hybrid system (SHS) solver for average age of information.

A chain is a finite set of discrete states, a list of transitions carrying a
rate and a linear reset map ``x' = x @ A``, and one binary drift vector per
state.  The stationary probabilities ``pi`` and the correlation vectors
``v[q] = E[x 1{q(t) = q}]`` follow from two dense linear systems; the average
age seen by a monitor is the sum over states of its component of ``v``.
"""

from __future__ import annotations

import json
import warnings
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.linalg.lapack import dgecon

from .errors import InvalidModel, SingularChain, SingularSystem

RESIDUAL_TOL = 1e-9
REFINE_STEPS = 4


@dataclass(frozen=True)
class Transition:
    source: int
    dest: int
    rate: float
    reset: np.ndarray

    @property
    def is_self_loop(self) -> bool:
        return self.source == self.dest


@dataclass(frozen=True)
class ShsModel:
    """Finite SHS: ``num_states`` discrete states, ``age_dim`` age components."""

    num_states: int
    age_dim: int
    transitions: tuple[Transition, ...]
    drift: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.num_states < 1 or self.age_dim < 1:
            raise InvalidModel("num_states and age_dim must be positive")
        drift = np.asarray(self.drift, dtype=float)
        if drift.shape != (self.num_states, self.age_dim):
            raise InvalidModel(
                f"drift must be {self.num_states}x{self.age_dim}, got {drift.shape}"
            )
        if not np.all((drift == 0.0) | (drift == 1.0)):
            raise InvalidModel("drift entries must be 0 or 1")
        drift.setflags(write=False)
        object.__setattr__(self, "drift", drift)

        checked = []
        for k, t in enumerate(self.transitions):
            if not (0 <= t.source < self.num_states and 0 <= t.dest < self.num_states):
                raise InvalidModel(f"transition {k}: state index out of range")
            rate = float(t.rate)
            if not np.isfinite(rate) or rate <= 0.0:
                raise InvalidModel(f"transition {k}: rate must be positive, got {t.rate}")
            reset = np.asarray(t.reset, dtype=float)
            if reset.shape != (self.age_dim, self.age_dim):
                raise InvalidModel(
                    f"transition {k}: reset must be {self.age_dim}x{self.age_dim}"
                )
            reset.setflags(write=False)
            checked.append(Transition(int(t.source), int(t.dest), rate, reset))
        object.__setattr__(self, "transitions", tuple(checked))

    def exit_rates(self, include_self_loops: bool = True) -> np.ndarray:
        out = np.zeros(self.num_states)
        for t in self.transitions:
            if include_self_loops or not t.is_self_loop:
                out[t.source] += t.rate
        return out

    def is_strongly_connected(self) -> bool:
        """True when every state reaches every other one (self-loops ignored)."""
        fwd = [[] for _ in range(self.num_states)]
        bwd = [[] for _ in range(self.num_states)]
        for t in self.transitions:
            if not t.is_self_loop:
                fwd[t.source].append(t.dest)
                bwd[t.dest].append(t.source)
        return _reaches_all(fwd) and _reaches_all(bwd)

    def to_dict(self) -> dict:
        return {
            "age_dim": self.age_dim,
            "num_states": self.num_states,
            "drift": self.drift.tolist(),
            "transitions": [
                {"from": t.source, "to": t.dest, "rate": t.rate, "reset": t.reset.tolist()}
                for t in self.transitions
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ShsModel":
        try:
            transitions = tuple(
                Transition(int(t["from"]), int(t["to"]), float(t["rate"]), np.asarray(t["reset"], dtype=float))
                for t in doc["transitions"]
            )
            return cls(int(doc["num_states"]), int(doc["age_dim"]), transitions, np.asarray(doc["drift"], dtype=float))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidModel):
                raise
            raise InvalidModel(f"malformed SHS document: {exc}") from exc


def _reaches_all(adj: list[list[int]]) -> bool:
    seen = {0}
    todo = deque([0])
    while todo:
        for nxt in adj[todo.popleft()]:
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return len(seen) == len(adj)


def load_model(path) -> ShsModel:
    return ShsModel.from_dict(json.loads(Path(path).read_text()))


def dump_model(model: ShsModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class ShsSolution:
    pi: np.ndarray
    v: np.ndarray  # shape (num_states, age_dim)

    def average_age(self, monitor_component: int = 0) -> float:
        return float(self.v[:, monitor_component].sum())


def _solve_dense(matrix: np.ndarray, rhs: np.ndarray, error, what: str) -> np.ndarray:
    """LU with partial pivoting; rejects systems whose reciprocal condition is at eps level."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)  # singularity is reported below
        lu, piv = lu_factor(matrix, check_finite=True)
    anorm = np.abs(matrix).sum(axis=0).max()
    rcond, info = dgecon(lu, anorm, norm="1")
    if info != 0 or not rcond > matrix.shape[0] * np.finfo(float).eps:
        raise error(f"{what} is singular (rcond={rcond:.3g})")
    x = lu_solve((lu, piv), rhs)
    # refinement with extended-precision residuals; low-priority ages reach
    # 1e9 and the plain LU solution loses several digits there
    m_ext = matrix.astype(np.longdouble)
    b_ext = rhs.astype(np.longdouble)
    for _ in range(REFINE_STEPS):
        r = b_ext - m_ext @ x.astype(np.longdouble)
        dx = lu_solve((lu, piv), r.astype(float))
        x = (x.astype(np.longdouble) + dx).astype(float)
        if np.abs(dx).max() <= np.finfo(float).eps * np.abs(x).max():
            break
    res = relative_residual(matrix, x, rhs)
    if res > RESIDUAL_TOL:
        raise error(f"{what}: residual {res:.3g} exceeds {RESIDUAL_TOL}")
    return x


def relative_residual(matrix: np.ndarray, x: np.ndarray, rhs: np.ndarray) -> float:
    """Normwise backward error ||Mx - b|| / (||M|| ||x|| + ||b||) in the inf-norm."""
    r = np.abs(matrix @ x - rhs).max()
    scale = np.abs(matrix).sum(axis=1).max() * np.abs(x).max() + np.abs(rhs).max()
    return float(r / scale) if scale > 0 else float(r)


def balance_matrix(model: ShsModel) -> np.ndarray:
    """Transposed generator ``Q.T``: row q is inflow minus outflow at q."""
    m = model.num_states
    gen = np.zeros((m, m))
    for t in model.transitions:
        if not t.is_self_loop:
            gen[t.source, t.dest] += t.rate
            gen[t.source, t.source] -= t.rate
    return gen.T


def solve_stationary(model: ShsModel) -> np.ndarray:
    """Stationary distribution of the discrete chain (self-loops ignored).

    One balance row is redundant for an ergodic chain, so the last one is
    replaced by the normalisation condition.
    """
    if not model.is_strongly_connected():
        raise SingularChain("chain is not strongly connected, no unique stationary law")
    m = model.num_states
    if m == 1:
        return np.ones(1)
    a = balance_matrix(model)
    a[-1, :] = 1.0
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    pi = _solve_dense(a, rhs, SingularChain, "balance system")
    # tiny negative round-off on states with probability ~eps
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


def correlation_system(model: ShsModel, pi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stacked linear system ``K vec(v) = rhs`` with ``v`` flattened row-major.

    Row ``q*n + c`` reads ``v[q,c] * exit(q) - sum_l rate_l (v[src_l] @ A_l)[c] = b[q,c] pi[q]``
    over transitions ``l`` entering ``q``; self-loops appear on both sides.
    """
    m, n = model.num_states, model.age_dim
    k = np.zeros((m * n, m * n))
    k[np.diag_indices(m * n)] = np.repeat(model.exit_rates(include_self_loops=True), n)
    for t in model.transitions:
        # (v_src @ A)[c] = sum_j v_src[j] A[j, c]
        k[t.dest * n:(t.dest + 1) * n, t.source * n:(t.source + 1) * n] -= t.rate * t.reset.T
    rhs = (model.drift * np.asarray(pi)[:, None]).ravel()
    return k, rhs


def solve_correlations(model: ShsModel, pi: np.ndarray) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (model.num_states,):
        raise InvalidModel("pi length does not match num_states")
    k, rhs = correlation_system(model, pi)
    v = _solve_dense(k, rhs, SingularSystem, "correlation system")
    return v.reshape(model.num_states, model.age_dim)


def solve(model: ShsModel) -> ShsSolution:
    pi = solve_stationary(model)
    return ShsSolution(pi, solve_correlations(model, pi))


def average_age(model: ShsModel, monitor_component: int = 0) -> float:
    if not 0 <= monitor_component < model.age_dim:
        raise InvalidModel(f"monitor component {monitor_component} out of range")
    return solve(model).average_age(monitor_component)


def balance_residuals(model: ShsModel, pi: np.ndarray) -> np.ndarray:
    """Per-state |outflow - inflow| relative to the larger of the two flows."""
    pi = np.asarray(pi, dtype=float)
    outflow = model.exit_rates(include_self_loops=False) * pi
    inflow = np.zeros(model.num_states)
    for t in model.transitions:
        if not t.is_self_loop:
            inflow[t.dest] += t.rate * pi[t.source]
    scale = np.maximum(np.maximum(outflow, inflow), np.finfo(float).tiny)
    return np.abs(outflow - inflow) / scale

"""Discrete optimal transport between a reconstruction law and the target law.

``optimal_coupling`` solves the transport linear program exactly and
``greedy_coupling`` is a fast feasible fallback for large state spaces: it
leaves min(P, Q) in place and routes the surplus by cheapest available cost.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from . import probkit as pk
from .errors import CapExceededError, DimensionError, PreconditionError

EXACT_CAP = 64
MARGINAL_TOL = 1e-9


@dataclass(frozen=True)
class CouplingPlan:
    source: np.ndarray
    target: np.ndarray
    plan: np.ndarray
    cost: float
    method: str

    def row_conditional(self, i: int) -> np.ndarray:
        mass = self.plan[i].sum()
        if not mass > 0:
            raise PreconditionError(f"source symbol {i} has zero mass")
        return self.plan[i] / mass


def _vec(p):
    return np.asarray(p.probs if isinstance(p, pk.Dist) else p, dtype=float)


def _inputs(P, Q, cost):
    p, q = _vec(P), _vec(Q)
    c = np.asarray(cost.matrix if isinstance(cost, pk.DistortionFn) else cost, dtype=float)
    if c.shape != (p.size, q.size):
        raise DimensionError(f"cost matrix is {c.shape}, expected {(p.size, q.size)}")
    if np.any(c < 0) or not np.all(np.isfinite(c)):
        raise ValueError("cost entries must be finite and nonnegative")
    for v, name in ((p, "source"), (q, "target")):
        if np.any(v < 0) or abs(v.sum() - 1.0) > pk.NORM_TOL:
            raise ValueError(f"{name} is not a probability vector")
    return p, q, c


def optimal_coupling(P, Q, cost, cap: int = EXACT_CAP) -> CouplingPlan:
    """Minimum-cost coupling via the HiGHS dual simplex, which pivots
    deterministically."""
    p, q, c = _inputs(P, Q, cost)
    if max(p.size, q.size) > cap:
        raise CapExceededError(
            f"{max(p.size, q.size)} states exceed the exact-solver cap of {cap}; use greedy_coupling"
        )
    a, b = p.size, q.size
    rows = np.zeros((a + b, a * b))
    for i in range(a):
        rows[i, i * b:(i + 1) * b] = 1.0
    for j in range(b):
        rows[a + j, j::b] = 1.0
    # the last equality is implied by the others; dropping it keeps the system full rank
    res = linprog(c.ravel(), A_eq=rows[:-1], b_eq=np.concatenate([p, q])[:-1],
                  bounds=(0, None), method="highs-ds")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    plan = np.clip(res.x.reshape(a, b), 0.0, None)
    return CouplingPlan(p, q, plan, float(np.sum(plan * c)), "exact")


def greedy_coupling(P, Q, cost) -> CouplingPlan:
    """Feasible coupling keeping min(P, Q) on the diagonal.

    Requires a square cost with zero diagonal for the in-place step to be
    free; the surplus of P is then matched to the deficit of Q by repeatedly
    taking the cheapest remaining pair.
    """
    p, q, c = _inputs(P, Q, cost)
    plan = np.zeros_like(c)
    if p.size == q.size:
        keep = np.minimum(p, q)
        plan[np.diag_indices(p.size)] = keep
        src, dst = p - keep, q - keep
    else:
        src, dst = p.copy(), q.copy()
    order = np.argsort(c, axis=None, kind="stable")
    for flat in order:
        i, j = divmod(int(flat), c.shape[1])
        if src[i] <= 0 or dst[j] <= 0:
            continue
        move = min(src[i], dst[j])
        plan[i, j] += move
        src[i] -= move
        dst[j] -= move
    return CouplingPlan(p, q, plan, float(np.sum(plan * c)), "greedy")


def coupling(P, Q, cost, cap: int = EXACT_CAP) -> CouplingPlan:
    """Exact when small enough, greedy otherwise."""
    n = max(_vec(P).size, _vec(Q).size)
    return optimal_coupling(P, Q, cost, cap) if n <= cap else greedy_coupling(P, Q, cost)


def marginal_error(plan: CouplingPlan) -> float:
    return float(max(np.abs(plan.plan.sum(axis=1) - plan.source).max(),
                     np.abs(plan.plan.sum(axis=0) - plan.target).max()))


def wasserstein_bound_check(P, Q, cost) -> dict:
    """Compare the order-1 transport cost with D_max * sum |P - Q|."""
    p, q, c = _inputs(P, Q, cost)
    w1 = optimal_coupling(p, q, c, cap=max(EXACT_CAP, p.size, q.size)).cost
    bound = float(c.max() * np.abs(p - q).sum())
    return {"w1": w1, "bound": bound, "holds": bool(w1 <= bound + 1e-12)}


def apply_coupling(plan: CouplingPlan, sample: int, rng) -> int:
    """Draw a target symbol from the plan row of ``sample``."""
    row = plan.row_conditional(int(sample))
    return int(rng.choice(row.size, p=row))


def sequence_cost(d, n: int) -> np.ndarray:
    """Average per-letter cost between all pairs of length-``n`` sequences."""
    m = np.asarray(d.matrix if isinstance(d, pk.DistortionFn) else d, dtype=float)
    out = np.zeros((1, 1))
    for _ in range(n):
        out = (out[:, None, :, None] + m[None, :, None, :]).reshape(out.shape[0] * m.shape[0], -1)
    return out / n


def corrected_state_pair(pair: np.ndarray, plan: CouplingPlan) -> np.ndarray:
    """Law of (S, Shat') when Shat' is drawn from the plan given Shat.

    ``pair[s, shat]`` is the joint law before correction.
    """
    cond = np.zeros_like(plan.plan)
    mass = plan.plan.sum(axis=1)
    pos = mass > 0
    cond[pos] = plan.plan[pos] / mass[pos, None]
    return pair @ cond

"""Henchman / eavesdropper distortion quantities.

The eavesdropper sees side information (Y, or U and Y) and a rate-r
description of the reconstruction Shat. Its best distortion is the
conditional distortion-rate function with the side information available at
both ends,

    D(r, P) = min E[d(Shat, Shat_E)]  over  P(shat_E | shat, side)
              subject to  I(Shat; Shat_E | side) <= r,

and D(r, P) = inf for r < 0.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels as kn
from . import probkit as pk
from .errors import CapExceededError, DimensionError

INF = math.inf
BETA_LO, BETA_HI = 1e-3, 64.0
BISECT_STEPS = 60
BRUTE_MAX_SIZE = 3
BRUTE_MAX_GRID = 50
BRUTE_KERNEL_BUDGET = 2_000_000


@dataclass(frozen=True)
class SideInfoRDProblem:
    """``joint[shat, k]`` is the law of the source and the combined side
    symbol k; ``distortion`` is |Shat| x |Shat_E|."""

    joint: np.ndarray
    distortion: np.ndarray

    def __post_init__(self):
        j = np.array(self.joint, dtype=float)
        d = np.array(self.distortion, dtype=float)
        if j.ndim == 1:
            j = j[:, None]
        if j.ndim != 2 or d.ndim != 2 or d.shape[0] != j.shape[0]:
            raise DimensionError(f"joint {j.shape} and distortion {d.shape} do not match")
        if np.any(j < 0) or abs(j.sum() - 1.0) > pk.NORM_TOL:
            raise ValueError("joint must be a probability array")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ValueError("distortion entries must be finite and nonnegative")
        j.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "joint", j)
        object.__setattr__(self, "distortion", d)

    @classmethod
    def from_joint(cls, joint: pk.Joint, source="Shat", side=("Y",), distortion=None):
        side = (side,) if isinstance(side, str) else tuple(side)
        arr = pk.marginalize(joint, (source,) + side) if side else pk.marginalize(joint, source)
        probs = arr.probs.reshape(joint.size(source), -1)
        if distortion is None:
            distortion = pk.DistortionFn.hamming(joint.size(source))
        d = distortion.matrix if isinstance(distortion, pk.DistortionFn) else distortion
        return cls(probs, d)

    @property
    def p_side(self):
        return self.joint.sum(axis=0)

    def conditional_entropy(self) -> float:
        """H(Shat | side) in bits."""
        return pk.entropy(self.joint) - pk.entropy(self.p_side)

    def zero_rate_distortion(self) -> float:
        """Best distortion with no description: one reproduction per side symbol."""
        return float(sum((self.distortion.T @ self.joint[:, k]).min() for k in range(self.joint.shape[1])))

    def min_distortion(self) -> float:
        return float(self.joint.sum(axis=1) @ self.distortion.min(axis=1))

    def mix(self, other: "SideInfoRDProblem", lam: float) -> "SideInfoRDProblem":
        if self.joint.shape != other.joint.shape or not np.array_equal(self.distortion, other.distortion):
            raise DimensionError("problems must share shape and distortion")
        j = lam * self.joint + (1.0 - lam) * other.joint
        return SideInfoRDProblem(j / j.sum(), self.distortion)


@dataclass(frozen=True)
class RDCurve:
    points: list
    betas: list = field(default_factory=list)


def _slope_point(problem: SideInfoRDProblem, beta: float):
    """(rate, distortion) of the common-slope solution at ``beta``."""
    rate = dist = 0.0
    for k in range(problem.joint.shape[1]):
        pk_ = problem.joint[:, k]
        w = pk_.sum()
        if w <= 0:
            continue
        r, d, _, _ = kn.blahut_arimoto(pk_ / w, problem.distortion, beta)
        rate += w * r
        dist += w * d
    return rate, dist


def rd_curve(problem: SideInfoRDProblem, betas=None) -> RDCurve:
    """Points of the distortion-rate curve over a slope grid (nats per unit)."""
    if betas is None:
        betas = np.geomspace(BETA_LO, BETA_HI, 80)
    pts = [_slope_point(problem, float(b)) for b in betas]
    pts.append((0.0, problem.zero_rate_distortion()))
    pts.append((max(problem.conditional_entropy(), 0.0), problem.min_distortion()))
    pts = sorted(set(pts))
    # lower convex envelope, which is the curve itself up to solver error
    hull = []
    for p in pts:
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) <= 0:
            hull.pop()
        hull.append(p)
    mono = []
    for p in hull:
        if not mono or p[1] < mono[-1][1]:
            mono.append(p)
    return RDCurve(mono, list(map(float, betas)))


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def distortion_rate(problem: SideInfoRDProblem, r: float) -> float:
    """D(r, P) by bisection on the common Lagrange slope, then linear
    interpolation between the bracketing curve points."""
    if r < 0:
        return INF
    if r >= problem.conditional_entropy() - 1e-12:
        return problem.min_distortion()
    d0 = problem.zero_rate_distortion()
    if r == 0:
        return d0
    lo_b, hi_b = BETA_LO, BETA_HI
    lo = _slope_point(problem, lo_b)
    hi = _slope_point(problem, hi_b)
    if lo[0] >= r:
        lo = (0.0, d0)
    if hi[0] <= r:
        return hi[1]
    for _ in range(BISECT_STEPS):
        mid_b = math.sqrt(lo_b * hi_b)
        mid = _slope_point(problem, mid_b)
        if mid[0] <= r:
            lo, lo_b = mid, mid_b
        else:
            hi, hi_b = mid, mid_b
        if hi[0] - lo[0] < 1e-10:
            break
    if hi[0] - lo[0] <= 0:
        return lo[1]
    t = (r - lo[0]) / (hi[0] - lo[0])
    return float(max(lo[1] + t * (hi[1] - lo[1]), problem.min_distortion()))


# ------------------------------------------------------------------ oracle


def _simplex_grid(k, steps):
    pts = [c for c in itertools.product(range(steps + 1), repeat=k - 1) if sum(c) <= steps]
    return np.array([list(c) + [steps - sum(c)] for c in pts], dtype=float) / steps


def _staircase(rates, dists):
    """Pareto points (nondecreasing rate, strictly decreasing distortion)."""
    order = np.lexsort((dists, rates))
    out_r, out_d = [], []
    best = math.inf
    for i in order:
        if dists[i] < best - 1e-15:
            out_r.append(rates[i])
            out_d.append(dists[i])
            best = dists[i]
    return np.array(out_r), np.array(out_d)


def rd_bruteforce_staircase(problem: SideInfoRDProblem, grid_steps: int):
    """Achievable (rate, distortion) staircase from gridded test kernels."""
    n_src, n_side = problem.joint.shape
    n_rep = problem.distortion.shape[1]
    if max(n_src, n_side, n_rep) > BRUTE_MAX_SIZE or grid_steps > BRUTE_MAX_GRID:
        raise CapExceededError(f"brute force limited to alphabets <= {BRUTE_MAX_SIZE} and grid <= {BRUTE_MAX_GRID}")
    rows = _simplex_grid(n_rep, grid_steps)
    n_kernels = rows.shape[0] ** n_src
    if n_kernels > BRUTE_KERNEL_BUDGET:
        raise CapExceededError(f"{n_kernels} test kernels exceed the budget of {BRUTE_KERNEL_BUDGET}")
    idx = np.array(list(itertools.product(range(rows.shape[0]), repeat=n_src)))
    kern = rows[idx]  # (kernels, src, rep)
    stair_r, stair_d = np.zeros(1), np.zeros(1)
    for k in range(n_side):
        col = problem.joint[:, k]
        w = col.sum()
        if w <= 0:
            continue
        p = col / w
        joint = p[None, :, None] * kern
        q = joint.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(joint > 0, kern / q[:, None, :], 1.0)
            mi = np.sum(np.where(joint > 0, joint * np.log2(ratio), 0.0), axis=(1, 2))
        dist = np.einsum("ksr,sr->k", joint, problem.distortion)
        r_k, d_k = _staircase(np.maximum(mi, 0.0) * w, dist * w)
        # min-plus merge of the running staircase with this side symbol's
        tot_r = (stair_r[:, None] + r_k[None, :]).ravel()
        tot_d = (stair_d[:, None] + d_k[None, :]).ravel()
        stair_r, stair_d = _staircase(tot_r, tot_d)
    return stair_r, stair_d


def _envelope_at(rates, dists, r):
    """Lower convex envelope of a staircase evaluated at ``r``."""
    hull = []
    for p in zip(rates.tolist(), dists.tolist()):
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) <= 0:
            hull.pop()
        hull.append(p)
    best = min(d for x, d in hull if x <= r + 1e-12)
    for (r0, d0), (r1, d1) in zip(hull, hull[1:]):
        if r0 <= r <= r1 and r1 > r0:
            best = min(best, d0 + (r - r0) * (d1 - d0) / (r1 - r0))
    return best


def rd_bruteforce(problem: SideInfoRDProblem, r: float, grid_steps: int = 40, convexify: bool = True) -> float:
    """Upper bound on D(r) from a simplex grid of test kernels.

    With ``convexify`` the staircase is replaced by its lower convex
    envelope. Mixing two test kernels costs at most the mixed rate (mutual
    information is convex in the channel), so the envelope is still
    achievable and still an upper bound.
    """
    if r < 0:
        return INF
    rates, dists = rd_bruteforce_staircase(problem, grid_steps)
    if convexify:
        return float(_envelope_at(rates, dists, r))
    ok = rates <= r + 1e-12
    return float(dists[ok].min())


def henchman_DE(R_E: float, R_c: float, p_shat_y: SideInfoRDProblem, p_u_shat_y: SideInfoRDProblem) -> float:
    """Eavesdropper distortion guaranteed by the secure inner bound.

    Below the common-randomness rate the codeword stays hidden and only Y
    helps; at or above it the eavesdropper may also spend R_c bits to learn U.
    """
    if R_E < 0 or R_c < 0:
        raise ValueError("R_E and R_c must be nonnegative")
    d_y = distortion_rate(p_shat_y, R_E)
    if R_E < R_c:
        return d_y
    return min(d_y, distortion_rate(p_u_shat_y, R_E - R_c))


def secrecy_problems(sys):
    j = sys.joint
    d = sys.distortion
    return (
        SideInfoRDProblem.from_joint(j, "Shat", ("Y",), d),
        SideInfoRDProblem.from_joint(j, "Shat", ("U", "Y"), d),
    )


def secure_region_point(sys, R_E: float, R_c: float | None = None):
    """Theorem-1 point with the eavesdropper distortion attached.

    ``R_c`` defaults to the smallest admissible common-randomness rate;
    supplying less makes the point infeasible.
    """
    from .regions import RATE_TOL, RegionPoint, theorem1_point

    base = theorem1_point(sys)
    rc = base.R_c if R_c is None else float(R_c)
    p1, p2 = secrecy_problems(sys)
    de = henchman_DE(R_E, rc, p1, p2)
    diag = dict(base.diagnostics, R_E=R_E, Rc_min=base.R_c)
    feasible = base.feasible and rc >= base.R_c - RATE_TOL
    if rc < base.R_c - RATE_TOL:
        diag["reason"] = "R_c below the required minimum"
    return RegionPoint(R=base.R, R_c=rc, D=base.D, D_E=de, feasible=feasible, diagnostics=diag)


def secure_deterministic_point(sys, R_E: float):
    """Deterministic-channel capacity point with D_E = D(R_E, P_{Shat Y})."""
    from .regions import RegionPoint, deterministic_capacity_point

    base = deterministic_capacity_point(sys)
    p1, _ = secrecy_problems(sys)
    de = distortion_rate(p1, R_E)
    return RegionPoint(R=base.R, R_c=0.0, D=base.D, D_E=de, feasible=base.feasible,
                       diagnostics=dict(base.diagnostics, R_E=R_E))


def concavity_probe(P1: SideInfoRDProblem, P2: SideInfoRDProblem, r: float, lambda_grid=None, tol: float = 5e-4) -> dict:
    """Check D(r, mix) >= lam D(r, P1) + (1 - lam) D(r, P2) - tol on a grid."""
    if lambda_grid is None:
        lambda_grid = np.linspace(0.0, 1.0, 11)
    d1, d2 = distortion_rate(P1, r), distortion_rate(P2, r)
    rows, violations = [], []
    for lam in lambda_grid:
        lam = float(lam)
        if lam == 1.0:
            dm = d1
        elif lam == 0.0:
            dm = d2
        else:
            dm = distortion_rate(P1.mix(P2, lam), r)
        chord = lam * d1 + (1.0 - lam) * d2
        gap = dm - chord
        rows.append((lam, dm, chord, gap))
        if gap < -tol:
            violations.append(lam)
    return {"rows": rows, "violations": violations, "min_gap": min(g for *_, g in rows), "tol": tol}


# ------------------------------------------------- eavesdropper decoders


def decoder_distortion(p_src_obs: np.ndarray, d: np.ndarray, decoder: np.ndarray) -> float:
    """E[d(Shat, Shat_E)] for a (possibly randomized) decoder
    ``decoder[obs, shat_E]`` and joint ``p_src_obs[shat, obs]``."""
    return float(np.einsum("so,or,sr->", p_src_obs, decoder, d))


def best_deterministic_decoder(p_src_obs: np.ndarray, d: np.ndarray):
    """Per-observation argmin map and its distortion."""
    cost = d.T @ p_src_obs  # (rep, obs)
    choice = cost.argmin(axis=0)
    dec = np.zeros((p_src_obs.shape[1], d.shape[1]))
    dec[np.arange(choice.size), choice] = 1.0
    return dec, decoder_distortion(p_src_obs, d, dec)


def best_randomized_decoder_grid(p_src_obs: np.ndarray, d: np.ndarray, steps: int = 20) -> float:
    """Smallest distortion over a grid of randomized decoders."""
    rows = _simplex_grid(d.shape[1], steps)
    best = math.inf
    for combo in itertools.product(range(rows.shape[0]), repeat=p_src_obs.shape[1]):
        best = min(best, decoder_distortion(p_src_obs, d, rows[list(combo)]))
    return best

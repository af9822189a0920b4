"""Rate / common-randomness / distortion regions of a discrete ISAC system.

An :class:`IsacSystem` is the five-factor chain

    P(se, s) P(u | se) P(x | u, se) P(y, z | x, s) P(shat | x, se, z)

together with a distortion matrix on S x Shat. Every region evaluator reads
its mutual-information terms off the seven-axis joint built from that chain.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import probkit as pk
from ._parallel import ordered_map
from .errors import DimensionError, PreconditionError

AXES = ("Se", "S", "U", "X", "Y", "Z", "Shat")
PRESERVE_TOL = 1e-9
RATE_TOL = 1e-12
CSV_HEADER = "R_bits,Rc_bits,D,DE,feasible"


@dataclass(frozen=True)
class RegionPoint:
    R: float
    R_c: float
    D: float
    D_E: float | None = None
    feasible: bool = True
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.R < 0 or self.R_c < 0 or self.D < 0:
            raise ValueError("R, R_c and D must be nonnegative")

    def csv_row(self, rate_digits=6, prob_digits=12) -> str:
        de = "" if self.D_E is None else _fmt(self.D_E, prob_digits)
        return ",".join([
            _fmt(self.R, rate_digits),
            _fmt(self.R_c, rate_digits),
            _fmt(self.D, prob_digits),
            de,
            "true" if self.feasible else "false",
        ])

    def as_dict(self):
        return {
            "R_bits": self.R,
            "Rc_bits": self.R_c,
            "D": self.D,
            "DE": self.D_E,
            "feasible": self.feasible,
            "diagnostics": dict(self.diagnostics),
        }


def _fmt(x, digits):
    if x is None:
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.{digits}g}"


def points_to_csv(points) -> str:
    lines = [CSV_HEADER] + [p.csv_row() for p in points]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class MembershipReport:
    tv_s_vs_shat: float
    in_P: bool
    in_P_ncr: bool
    in_P_de: bool
    in_P_de_prime: bool
    tv_sse_vs_shatse: float = 0.0


@dataclass(frozen=True)
class IsacSystem:
    """Discrete ISAC system; see the module docstring for the factor order.

    Kernel input/output axes are fixed: ``u_given_se`` is (Se)->U,
    ``x_given_use`` is (U, Se)->X, ``channel`` is (X, S)->(Y, Z) and
    ``estimator`` is (X, Se, Z)->Shat, where Shat shares the alphabet of S.
    """

    state_joint: pk.Joint
    u_given_se: pk.Kernel
    x_given_use: pk.Kernel
    channel: pk.Kernel
    estimator: pk.Kernel
    distortion: pk.DistortionFn

    def __post_init__(self):
        sj = self.state_joint
        if sj.axes != ("Se", "S"):
            raise DimensionError(f"state joint must have axes ('Se', 'S'), got {sj.axes}")
        n_se, n_s = sj.size("Se"), sj.size("S")
        n_u = self.u_given_se.outputs[0].size
        n_x = self.x_given_use.outputs[0].size
        checks = [
            ("u_given_se", self.u_given_se, (n_se,), None),
            ("x_given_use", self.x_given_use, (n_u, n_se), None),
            ("channel", self.channel, (n_x, n_s), 2),
            ("estimator", self.estimator, None, 1),
        ]
        for name, k, ins, n_out in checks:
            if ins is not None and tuple(a.size for a in k.inputs) != ins:
                raise DimensionError(f"{name} inputs have sizes {tuple(a.size for a in k.inputs)}, expected {ins}")
            if n_out is not None and len(k.outputs) != n_out:
                raise DimensionError(f"{name} must have {n_out} output axes")
            if n_out is None and len(k.outputs) != 1:
                raise DimensionError(f"{name} must have one output axis")
        n_z = self.channel.outputs[1].size
        est_in = tuple(a.size for a in self.estimator.inputs)
        if est_in != (n_x, n_se, n_z):
            raise DimensionError(f"estimator inputs have sizes {est_in}, expected {(n_x, n_se, n_z)}")
        if self.estimator.outputs[0].size != n_s:
            raise DimensionError("estimator output alphabet must equal the state alphabet")
        if self.distortion.shape != (n_s, n_s):
            raise DimensionError(f"distortion must be {n_s}x{n_s}, got {self.distortion.shape}")

    @classmethod
    def from_arrays(cls, p_se_s, u_given_se, x_given_use, channel, estimator, distortion=None):
        """Build from plain arrays shaped (Se,S), (Se,U), (U,Se,X),
        (X,S,Y,Z) and (X,Se,Z,Shat). Hamming distortion by default."""
        p_se_s = np.asarray(p_se_s, dtype=float)
        if distortion is None:
            distortion = pk.DistortionFn.hamming(p_se_s.shape[1])
        elif not isinstance(distortion, pk.DistortionFn):
            distortion = pk.DistortionFn(distortion)
        return cls(
            pk.Joint.from_array(("Se", "S"), p_se_s),
            pk.Kernel.from_array(u_given_se, 1),
            pk.Kernel.from_array(x_given_use, 2),
            pk.Kernel.from_array(channel, 2),
            pk.Kernel.from_array(estimator, 3),
            distortion,
        )

    def replace(self, **changes) -> "IsacSystem":
        return replace(self, **changes)

    @cached_property
    def joint(self) -> pk.Joint:
        return build_joint(self)

    @cached_property
    def terms(self) -> dict:
        """Information terms shared by all region formulas (bits)."""
        j = self.joint
        return {
            "I_UY": pk.mutual_information(j, "U", "Y"),
            "I_USe": pk.mutual_information(j, "U", "Se"),
            "I_UShat": pk.mutual_information(j, "U", "Shat"),
            "I_UShatSe": pk.mutual_information(j, "U", ("Shat", "Se")),
            "H_Y_given_Se": pk.conditional_entropy(j, "Y", "Se"),
            "tv_S_Shat": pk.total_variation(pk.marginalize(j, "S"), pk.marginalize(j, "Shat")),
        }

    @property
    def sizes(self) -> dict:
        j = self.joint
        return {a: j.size(a) for a in AXES}


def build_joint(sys: IsacSystem) -> pk.Joint:
    """Seven-axis joint over (Se, S, U, X, Y, Z, Shat)."""
    return pk.chain_join([
        pk.factor(sys.state_joint, ("Se", "S")),
        pk.factor(sys.u_given_se, "U", ("Se",)),
        pk.factor(sys.x_given_use, "X", ("U", "Se")),
        pk.factor(sys.channel, ("Y", "Z"), ("X", "S")),
        pk.factor(sys.estimator, "Shat", ("X", "Se", "Z")),
    ])


def distortion_of(sys: IsacSystem) -> float:
    return pk.expected_distortion(sys.joint, sys.distortion, "S", "Shat")


def encoder_issues(sys: IsacSystem) -> list[str]:
    """Reasons the encoder is not of the deterministic form: U independent of
    Se and X a function of (U, Se). Empty when the form holds."""
    issues = []
    j = sys.joint
    p_se = pk.marginalize(j, "Se").probs
    p_u = pk.marginalize(j, "U").probs
    rows = sys.u_given_se.table
    for se in range(rows.shape[0]):
        if p_se[se] > 0:
            tv = 0.5 * float(np.abs(rows[se] - p_u).sum())
            if tv > PRESERVE_TOL:
                issues.append(f"P(U|Se={se}) differs from P(U) by TV {tv:.3g}")
    p_u_se = pk.marginalize(j, ("U", "Se")).probs
    x_rows = sys.x_given_use.table
    for u, se in zip(*np.nonzero(p_u_se > 0)):
        if abs(x_rows[u, se].max() - 1.0) > RATE_TOL:
            issues.append(f"P(X|U={u},Se={se}) is not a point mass")
    return issues


def membership(sys: IsacSystem) -> MembershipReport:
    j = sys.joint
    t = sys.terms
    tv = t["tv_S_Shat"]
    in_p = tv <= PRESERVE_TOL
    det_enc = not encoder_issues(sys)
    tv_joint = pk.total_variation(
        pk.marginalize(j, ("Se", "S")).probs, pk.marginalize(j, ("Se", "Shat")).probs
    )
    return MembershipReport(
        tv_s_vs_shat=tv,
        in_P=in_p,
        in_P_ncr=in_p and t["I_UShat"] <= t["I_UY"] + RATE_TOL,
        in_P_de=in_p and det_enc,
        in_P_de_prime=det_enc and tv_joint <= PRESERVE_TOL,
        tv_sse_vs_shatse=tv_joint,
    )


def theorem1_point(sys: IsacSystem) -> RegionPoint:
    """Largest rate and smallest common-randomness rate of the CR-assisted
    inner bound. Infeasible when the estimator does not preserve P_S or when
    I(U;Y) < I(U;Se) leaves no nonnegative rate."""
    t = dict(sys.terms)
    gap = t["I_UY"] - t["I_USe"]
    feasible = t["tv_S_Shat"] <= PRESERVE_TOL and gap >= -RATE_TOL
    if gap < -RATE_TOL:
        t["reason"] = "I(U;Y) < I(U;Se)"
    elif not feasible:
        t["reason"] = "estimator does not preserve P_S"
    return RegionPoint(
        R=max(gap, 0.0),
        R_c=max(t["I_UShat"] - t["I_UY"], 0.0),
        D=distortion_of(sys),
        feasible=feasible,
        diagnostics=t,
    )


def ncr_point(sys: IsacSystem) -> RegionPoint:
    """Inner bound without common randomness."""
    t = dict(sys.terms)
    m = membership(sys)
    gap = t["I_UY"] - t["I_USe"]
    feasible = m.in_P_ncr and gap >= -RATE_TOL
    if not m.in_P_ncr:
        t["reason"] = "not in P_NCR"
    return RegionPoint(R=max(gap, 0.0), R_c=0.0, D=distortion_of(sys), feasible=feasible, diagnostics=t)


def deterministic_channel_issues(sys: IsacSystem) -> list[str]:
    """Rows (x, se) where P(Y | x, se) is not a point mass."""
    p_se_s = sys.state_joint.probs
    p_se = p_se_s.sum(axis=1)
    ch_y = sys.channel.table.sum(axis=3)  # (X, S, Y)
    issues = []
    for se in range(p_se.size):
        if p_se[se] <= 0:
            continue
        p_s = p_se_s[se] / p_se[se]
        rows = np.einsum("s,xsy->xy", p_s, ch_y)
        for x in range(rows.shape[0]):
            if abs(rows[x].max() - 1.0) > RATE_TOL:
                issues.append(f"P(Y|X={x},Se={se}) = {np.round(rows[x], 6).tolist()} is not a point mass")
    return issues


def deterministic_capacity_point(sys: IsacSystem) -> RegionPoint:
    """Capacity without common randomness for a channel with Y = y(X, Se)."""
    issues = deterministic_channel_issues(sys)
    if issues:
        raise PreconditionError("channel is not deterministic in Y given (X, Se): " + "; ".join(issues))
    t = dict(sys.terms)
    return RegionPoint(
        R=t["H_Y_given_Se"],
        R_c=0.0,
        D=distortion_of(sys),
        feasible=t["tv_S_Shat"] <= PRESERVE_TOL,
        diagnostics=t,
    )


def _require_deterministic_encoder(sys):
    issues = encoder_issues(sys)
    if issues:
        raise PreconditionError("encoder is not deterministic with U independent of Se: " + "; ".join(issues))


def deterministic_encoder_point(sys: IsacSystem) -> RegionPoint:
    """Inner bound when the encoder may not randomize."""
    _require_deterministic_encoder(sys)
    t = dict(sys.terms)
    r = t["I_UY"]
    return RegionPoint(
        R=r,
        R_c=max(t["I_UShat"] - r, 0.0),
        D=distortion_of(sys),
        feasible=t["tv_S_Shat"] <= PRESERVE_TOL,
        diagnostics=t,
    )


def causal_strict_point(sys: IsacSystem) -> RegionPoint:
    """Capacity with causal side information when the joint law of (Se, Shat)
    must match that of (Se, S)."""
    _require_deterministic_encoder(sys)
    t = dict(sys.terms)
    m = membership(sys)
    t["tv_SeS_SeShat"] = m.tv_sse_vs_shatse
    r = t["I_UY"]
    return RegionPoint(
        R=r,
        R_c=max(t["I_UShatSe"] - r, 0.0),
        D=distortion_of(sys),
        feasible=m.in_P_de_prime,
        diagnostics=t,
    )


def region_prime_feasible(sys: IsacSystem, R: float, R_p: float, R_c: float, tol: float = RATE_TOL) -> bool:
    """Membership of (R, R_p, R_c) in the region before eliminating R_p."""
    if min(R, R_p, R_c) < 0:
        raise ValueError("rates must be nonnegative")
    t = sys.terms
    return bool(
        R + R_p <= t["I_UY"] + tol
        and R_p >= t["I_USe"] - tol
        and R + R_p + R_c >= t["I_UShat"] - tol
    )


def fme_corner_check(sys: IsacSystem, grid_step: float, include_breakpoints: bool = True) -> bool:
    """Check that both corner points of the eliminated region lift back to
    some R_p on a grid.

    The corners are (0, Rc_min) and (R_max, Rc_min). An empty region
    (I(U;Y) < I(U;Se)) has no corners and passes vacuously.
    """
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    t = sys.terms
    if t["I_UY"] < t["I_USe"] - RATE_TOL:
        return True
    r_max = max(t["I_UY"] - t["I_USe"], 0.0)
    rc_min = max(t["I_UShat"] - t["I_UY"], 0.0)
    top = max(t["I_UY"], t["I_USe"], t["I_UShat"])
    grid = np.arange(0.0, top + 2 * grid_step, grid_step)
    if include_breakpoints:
        grid = np.concatenate([grid, [t["I_USe"], t["I_UY"]]])
    for r in (0.0, r_max):
        if not any(region_prime_feasible(sys, r, float(rp), rc_min) for rp in grid):
            return False
    return True


# ----------------------------------------------------------------- builders


def preserve_estimator(sys: IsacSystem) -> IsacSystem:
    """Mix the estimator with an input-independent law so that P_Shat = P_S.

    With K' = (1 - t) K + t r, the output law is (1 - t) P_Shat + t r; the
    smallest t keeping r a distribution is max_j (1 - P_S(j) / P_Shat(j)).
    """
    j = sys.joint
    p_s = pk.marginalize(j, "S").probs
    p_hat = pk.marginalize(j, "Shat").probs
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(p_hat > 0, 1.0 - p_s / np.where(p_hat > 0, p_hat, 1.0), 0.0)
    t = float(np.clip(ratio.max(), 0.0, 1.0))
    if t == 0.0:
        return sys
    r = np.clip((p_s - (1.0 - t) * p_hat) / t, 0.0, None)
    r /= r.sum()
    table = (1.0 - t) * np.asarray(sys.estimator.table) + t * r
    table /= table.sum(axis=-1, keepdims=True)
    return sys.replace(estimator=pk.Kernel(sys.estimator.inputs, sys.estimator.outputs, table))


def _dirichlet_rows(rng, shape):
    return rng.dirichlet(np.ones(shape[-1]), size=shape[:-1])


def random_system(rng, sizes=None, deterministic_encoder=False, preserve=False) -> IsacSystem:
    """Random system with Dirichlet(1) kernel rows.

    ``sizes`` maps axis names to alphabet sizes (binary by default).
    """
    sz = {"Se": 2, "S": 2, "U": 2, "X": 2, "Y": 2, "Z": 2}
    sz.update(sizes or {})
    rng = np.random.default_rng(rng)
    p_se_s = rng.dirichlet(np.ones(sz["Se"] * sz["S"])).reshape(sz["Se"], sz["S"])
    if deterministic_encoder:
        p_u = rng.dirichlet(np.ones(sz["U"]))
        u = np.tile(p_u, (sz["Se"], 1))
        x = np.zeros((sz["U"], sz["Se"], sz["X"]))
        idx = rng.integers(0, sz["X"], size=(sz["U"], sz["Se"]))
        np.put_along_axis(x, idx[..., None], 1.0, axis=2)
    else:
        u = _dirichlet_rows(rng, (sz["Se"], sz["U"]))
        x = _dirichlet_rows(rng, (sz["U"], sz["Se"], sz["X"]))
    ch = _dirichlet_rows(rng, (sz["X"], sz["S"], sz["Y"] * sz["Z"])).reshape(sz["X"], sz["S"], sz["Y"], sz["Z"])
    est = _dirichlet_rows(rng, (sz["X"], sz["Se"], sz["Z"], sz["S"]))
    sys = IsacSystem.from_arrays(p_se_s, u, x, ch, est)
    return preserve_estimator(sys) if preserve else sys


def binary_example(q: float = 0.25, p_x1: float = 0.75, a: float | None = None) -> IsacSystem:
    """Multiplicative Bernoulli channel Y = Z = S X with the distribution
    preserving reconstruction matrix.

    Encoder side information is absent (singleton Se) and U = X. Matrix rows
    are indexed (x, z) in order (0,0), (0,1), (1,0), (1,1); the first column
    is P(Shat = 1 | x, z). Row (0, 1) never occurs, so ``a`` is free and
    defaults to ``q``.
    """
    if a is None:
        a = q
    c = 2 * q / (3 * (1 - q))
    p1 = np.array([[q, a], [c, 1.0 / 3.0]])  # [x, z] -> P(Shat=1)
    return _multiplicative_system(q, p_x1, p1)


def best_estimator_example(q: float = 0.25, p_x1: float = 0.75) -> IsacSystem:
    """Same channel with the distortion-optimal estimator: Shat = z if x = 1
    and 0 otherwise."""
    p1 = np.array([[0.0, 0.0], [0.0, 1.0]])
    return _multiplicative_system(q, p_x1, p1)


def _multiplicative_system(q, p_x1, p_shat1):
    p_se_s = np.array([[1.0 - q, q]])
    u = np.array([[1.0 - p_x1, p_x1]])
    x = np.eye(2).reshape(2, 1, 2)
    ch = np.zeros((2, 2, 2, 2))
    for xv in range(2):
        for s in range(2):
            y = xv * s
            ch[xv, s, y, y] = 1.0
    est = np.zeros((2, 1, 2, 2))
    est[:, 0, :, 1] = p_shat1
    est[:, 0, :, 0] = 1.0 - p_shat1
    return IsacSystem.from_arrays(p_se_s, u, x, ch, est)


def xor_example(p_se1: float = 0.5, p_x1: float = 0.5) -> IsacSystem:
    """Deterministic channel Y = X xor Se with S = Se and an estimator that
    reads Se directly, so the state is reproduced exactly."""
    p_se_s = np.diag([1.0 - p_se1, p_se1])
    u = np.tile([1.0 - p_x1, p_x1], (2, 1))
    x = np.zeros((2, 2, 2))
    x[0, :, 0] = 1.0
    x[1, :, 1] = 1.0
    ch = np.zeros((2, 2, 2, 2))
    for xv in range(2):
        for s in range(2):
            ch[xv, s, xv ^ s, 0] = 1.0
    est = np.zeros((2, 2, 2, 2))
    for se in range(2):
        est[:, se, :, se] = 1.0
    return IsacSystem.from_arrays(p_se_s, u, x, ch, est)


# ----------------------------------------------------------- boundary search

FREE_ROLES = ("u_given_se", "x_given_use", "channel", "estimator")


@dataclass(frozen=True)
class SystemTemplate:
    """A base system whose listed kernels are free parameters.

    ``preserve=True`` projects each candidate's estimator onto P_Shat = P_S
    with :func:`preserve_estimator` before evaluation.
    """

    base: IsacSystem
    free: tuple = ("u_given_se", "estimator")
    preserve: bool = True

    def __post_init__(self):
        for name in self.free:
            if name not in FREE_ROLES:
                raise ValueError(f"unknown free kernel {name!r}; choose from {FREE_ROLES}")

    def _row_shapes(self):
        out = []
        for name in self.free:
            k = getattr(self.base, name)
            out.append((name, k.rows.shape))
        return out

    @property
    def dimension(self) -> int:
        return sum(n_rows * (n_out - 1) for _, (n_rows, n_out) in self._row_shapes())

    def instantiate(self, rows_by_role: dict) -> IsacSystem:
        changes = {}
        for name, table in rows_by_role.items():
            k = getattr(self.base, name)
            changes[name] = pk.Kernel(k.inputs, k.outputs, np.asarray(table).reshape(k.table.shape))
        sys = self.base.replace(**changes)
        return preserve_estimator(sys) if self.preserve else sys

    def from_cube(self, v) -> IsacSystem:
        """Map a point of the unit cube to kernels by per-row stick breaking."""
        v = np.asarray(v, dtype=float)
        if v.size != self.dimension:
            raise DimensionError(f"need {self.dimension} coordinates, got {v.size}")
        pos = 0
        rows = {}
        for name, (n_rows, n_out) in self._row_shapes():
            tab = np.zeros((n_rows, n_out))
            for r in range(n_rows):
                rest = 1.0
                for c in range(n_out - 1):
                    tab[r, c] = rest * v[pos]
                    rest -= tab[r, c]
                    pos += 1
                tab[r, -1] = max(rest, 0.0)
            rows[name] = tab
        return self.instantiate(rows)

    def random(self, rng) -> IsacSystem:
        rows = {}
        for name, (n_rows, n_out) in self._row_shapes():
            rows[name] = rng.dirichlet(np.ones(n_out), size=n_rows)
        return self.instantiate(rows)


@dataclass(frozen=True)
class Search:
    mode: str = "random"
    budget: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("random", "grid"):
            raise ValueError("search mode must be 'random' or 'grid'")
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")


def _grid_points(dim, budget):
    if dim == 0:
        return [np.zeros(0)][:budget]
    levels = max(2, math.ceil(budget ** (1.0 / dim)))
    axis = np.linspace(0.0, 1.0, levels)
    return [np.array(p) for p in itertools.islice(itertools.product(axis, repeat=dim), budget)]


def pareto_filter(points):
    """Points not dominated in (larger R, smaller R_c), sorted by R."""
    pts = sorted(points, key=lambda p: (-p.R, p.R_c))
    kept = []
    best_rc = math.inf
    for p in pts:
        if p.R_c < best_rc:
            kept.append(p)
            best_rc = p.R_c
    return sorted(kept, key=lambda p: (p.R, p.R_c))


def trace_boundary(template: SystemTemplate, search: Search, fixed_D: float) -> list[RegionPoint]:
    """Pareto boundary of Theorem-1 points over the template's free kernels.

    Only candidates that preserve P_S and meet ``E[d] <= fixed_D`` are kept.
    Candidate ``k`` draws from its own stream ``default_rng([seed, k])``.
    """
    if search.budget == 0:
        return []
    if search.mode == "grid":
        cube = _grid_points(template.dimension, search.budget)
        build = [lambda v=v: template.from_cube(v) for v in cube]
    else:
        build = [
            lambda k=k: template.random(np.random.default_rng([search.seed, k]))
            for k in range(search.budget)
        ]

    def evaluate(make):
        pt = theorem1_point(make())
        return pt if pt.feasible and pt.D <= fixed_D + RATE_TOL else None

    found = [p for p in ordered_map(evaluate, build) if p is not None]
    return pareto_filter(found)

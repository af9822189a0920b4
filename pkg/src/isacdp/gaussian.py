"""Closed-form Gaussian example.

Channel Y = X + S + N with perfect feedback Z = Y, encoder side information
Se correlated with S (coefficient rho), auxiliary U = X + alpha Se and the
linear estimator Shat = a (X + alpha Se + Z) + W. The rate and
common-randomness expressions are evaluated exactly as written, with
sigma_Y^2 = sigma_X^2 + sigma_S^2 + sigma_N^2 (X independent of the state).
``mc_validate`` checks them against Gaussian mutual informations estimated
from sampled covariances.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from ._parallel import ordered_map
from .errors import PreconditionError

CSV_HEADER = "rho,alpha,a,R_bits,Rc_bits,achieved_D,feasible"
RC_FLAG_BITS = 0.05


@dataclass(frozen=True)
class GaussianConfig:
    var_s: float = 2.0
    var_se: float = 3.0
    var_n: float = 1.0
    var_x: float = 2.0
    var_w: float = 0.5
    rho: float = 0.0
    alpha: float = 0.0
    d_max_constraint: float = 3.0

    def __post_init__(self):
        for name in ("var_s", "var_se", "var_n", "var_x"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.var_w < 0:
            raise ValueError("var_w must be nonnegative")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")

    @property
    def var_y(self) -> float:
        return self.var_x + self.var_s + self.var_n

    @property
    def cov_s_se(self) -> float:
        return self.rho * math.sqrt(self.var_s * self.var_se)

    def with_(self, **kw) -> "GaussianConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class GaussianPoint:
    R: float
    R_c: float
    a: float | None
    achieved_D: float
    feasible: bool
    rho: float = 0.0
    alpha: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def R_c_required(self) -> float:
        """Smallest admissible common-randomness rate, max(R_c, 0)."""
        return max(self.R_c, 0.0)

    def csv_row(self) -> str:
        def f(x, d):
            if x is None or (isinstance(x, float) and math.isnan(x)):
                return "nan"
            return f"{x:.{d}g}"

        return ",".join([
            f(self.rho, 12), f(self.alpha, 12), f(self.a, 12),
            f(self.R, 6), f(self.R_c, 6), f(self.achieved_D, 12),
            "true" if self.feasible else "false",
        ])


def _denominator(cfg: GaussianConfig) -> float:
    return (
        4 * cfg.var_x + cfg.alpha ** 2 * cfg.var_se + cfg.var_s + cfg.var_n
        + 2 * cfg.alpha * cfg.cov_s_se
    )


def solve_a(cfg: GaussianConfig) -> float | None:
    """Positive estimator gain that makes Var(Shat) = sigma_S^2.

    Returns None when the quadratic has no real root.
    """
    den = _denominator(cfg)
    num = cfg.var_s - cfg.var_w
    if den <= 0 or num < 0:
        return None
    return math.sqrt(num / den)


def achieved_distortion(cfg: GaussianConfig, a: float) -> float:
    return (2 - 2 * a) * cfg.var_s - 2 * cfg.alpha * a ** 2 * cfg.cov_s_se


def region_point(cfg: GaussianConfig) -> GaussianPoint:
    a = solve_a(cfg)
    if a is None:
        return GaussianPoint(math.nan, math.nan, None, math.nan, False, cfg.rho, cfg.alpha,
                             {"reason": "no real estimator gain"})
    sx, sy, ss, sse = cfg.var_x, cfg.var_y, cfg.var_s, cfg.var_se
    c = cfg.cov_s_se
    al = cfg.alpha
    inner = (sx + al ** 2 * sse) * sy - (sx + al * c) ** 2
    # the second bracket keeps sigma_Se (not its square) next to alpha^2
    lower = (sx + al ** 2 * math.sqrt(sse)) * ss - (2 * a * sx + a * al ** 2 * sse + a * al * c) ** 2
    d = achieved_distortion(cfg, a)
    diag = {"log_arg_R_den": inner, "log_arg_Rc_den": lower}
    R = 0.5 * math.log2(sx * sy / inner) if inner > 0 else math.nan
    Rc = 0.5 * math.log2(ss * inner / (sy * lower)) if inner > 0 and lower > 0 else math.nan
    if math.isnan(R) or math.isnan(Rc):
        diag["reason"] = "nonpositive log argument"
    elif R < 0:
        diag["reason"] = "negative rate"
    elif d > cfg.d_max_constraint:
        diag["reason"] = "distortion constraint violated"
    return GaussianPoint(R, Rc, a, d, "reason" not in diag, cfg.rho, al, diag)


def sweep(cfg_base: GaussianConfig, rho_list, alpha_grid) -> list[GaussianPoint]:
    """One point per (rho, alpha), sorted by (rho, alpha)."""
    pairs = sorted((float(r), float(a)) for r in rho_list for a in alpha_grid)
    return ordered_map(lambda ra: region_point(cfg_base.with_(rho=ra[0], alpha=ra[1])), pairs)


def sweep_csv(points) -> str:
    return "\n".join([CSV_HEADER] + [p.csv_row() for p in points]) + "\n"


def alpha_range(start=0.0, stop=2.0, step=0.01):
    """Inclusive grid; entries are rounded so that 0.01 steps print cleanly."""
    count = int(round((stop - start) / step)) + 1
    return [round(start + k * step, 12) for k in range(count)]


def max_rate_for_budget(points, rc_budget: float) -> float:
    """Largest feasible R whose required R_c fits ``rc_budget`` (-inf if none)."""
    best = -math.inf
    for p in points:
        if p.feasible and p.R_c_required <= rc_budget:
            best = max(best, p.R)
    return best


# ------------------------------------------------------------- Monte Carlo


def _gauss_mi(cov, ia, ib):
    ia, ib = list(ia), list(ib)
    sub = lambda idx: np.linalg.det(cov[np.ix_(idx, idx)])
    da, db, dab = sub(ia), sub(ib), sub(ia + ib)
    if min(da, db, dab) <= 0:
        raise PreconditionError("degenerate covariance matrix")
    return 0.5 * math.log2(da * db / dab)


def model_covariance(cfg: GaussianConfig, a: float) -> np.ndarray:
    """Exact covariance of (U, Se, Y, Shat)."""
    sx, ss, sse, sn, sw = cfg.var_x, cfg.var_s, cfg.var_se, cfg.var_n, cfg.var_w
    c, al = cfg.cov_s_se, cfg.alpha
    # linear maps of the independent block (X, S, Se, N, W) with Cov(S, Se) = c
    base = np.array([
        [sx, 0, 0, 0, 0],
        [0, ss, c, 0, 0],
        [0, c, sse, 0, 0],
        [0, 0, 0, sn, 0],
        [0, 0, 0, 0, sw],
    ])
    lin = np.array([
        [1, 0, al, 0, 0],
        [0, 0, 1, 0, 0],
        [1, 1, 0, 1, 0],
        [2 * a, a, a * al, a, 1],
    ])
    return lin @ base @ lin.T


BLOCK = 1 << 17


def _block_moments(args):
    cfg, a, seed, b, m = args
    rng = np.random.default_rng([seed, b])
    x = rng.normal(0.0, math.sqrt(cfg.var_x), m)
    z1, z2 = rng.standard_normal(m), rng.standard_normal(m)
    s = math.sqrt(cfg.var_s) * z1
    se = math.sqrt(cfg.var_se) * (cfg.rho * z1 + math.sqrt(1.0 - cfg.rho ** 2) * z2)
    n = rng.normal(0.0, math.sqrt(cfg.var_n), m)
    w = rng.normal(0.0, math.sqrt(cfg.var_w), m) if cfg.var_w > 0 else np.zeros(m)
    u = x + cfg.alpha * se
    y = x + s + n
    shat = a * (x + cfg.alpha * se + y) + w
    data = np.stack([u, se, y, shat])
    return data.sum(axis=1), data @ data.T


def mc_validate(cfg: GaussianConfig, n_samples: int, seed: int = 0) -> dict:
    """Empirical-covariance check of the closed-form mutual informations.

    Samples are drawn in fixed-size blocks with seeds ``[seed, block]`` and
    combined in block order, so results do not depend on thread count.
    """
    if n_samples < 10_000:
        raise ValueError("n_samples must be at least 10^4")
    a = solve_a(cfg)
    if a is None:
        raise PreconditionError("no real estimator gain for this configuration")
    sizes = [BLOCK] * (n_samples // BLOCK)
    if n_samples % BLOCK:
        sizes.append(n_samples % BLOCK)
    parts = ordered_map(_block_moments, [(cfg, a, seed, b, m) for b, m in enumerate(sizes)])
    total = sum(p[0] for p in parts)
    second = sum(p[1] for p in parts)
    mean = total / n_samples
    emp = second / n_samples - np.outer(mean, mean)
    U, SE, Y, SH = 0, 1, 2, 3
    est = {
        "I_UY_hat": _gauss_mi(emp, [U], [Y]),
        "I_USe_hat": _gauss_mi(emp, [U], [SE]),
        "I_UShat_hat": _gauss_mi(emp, [U], [SH]),
    }
    exact = model_covariance(cfg, a)
    closed = {
        "I_UY": _gauss_mi(exact, [U], [Y]),
        "I_USe": _gauss_mi(exact, [U], [SE]),
        "I_UShat": _gauss_mi(exact, [U], [SH]),
    }
    pt = region_point(cfg)
    r_gap = abs(est["I_UY_hat"] - est["I_USe_hat"] - pt.R)
    rc_gap = abs(est["I_UShat_hat"] - est["I_UY_hat"] - pt.R_c)
    gaps = {
        "I_UY": abs(est["I_UY_hat"] - closed["I_UY"]),
        "I_USe": abs(est["I_USe_hat"] - closed["I_USe"]),
        "I_UShat": abs(est["I_UShat_hat"] - closed["I_UShat"]),
        "R_vs_formula": r_gap,
        "Rc_vs_formula": rc_gap,
    }
    return {
        **est,
        "closed_form": closed,
        "formula": {"R": pt.R, "R_c": pt.R_c},
        "gaps": gaps,
        "rc_flag": bool(rc_gap > RC_FLAG_BITS),
        "n_samples": int(n_samples),
        "seed": int(seed),
    }


def load_config(path):
    """Read a Gaussian JSON config. Returns the base config plus the rho list
    and alpha grid it names (scalars become one-element lists)."""
    raw = json.loads(Path(path).read_text())
    return config_from_dict(raw)


def config_from_dict(raw: dict):
    raw = dict(raw)
    rho = raw.pop("rho", 0.0)
    alpha = raw.pop("alpha", 0.0)
    rho_list = [float(r) for r in (rho if isinstance(rho, list) else [rho])]
    if isinstance(alpha, dict):
        alpha_grid = alpha_range(alpha.get("start", 0.0), alpha.get("stop", 2.0), alpha.get("step", 0.01))
    elif isinstance(alpha, list):
        alpha_grid = [float(x) for x in alpha]
    else:
        alpha_grid = [float(alpha)]
    known = set(GaussianConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown Gaussian config keys: {sorted(unknown)}")
    base = GaussianConfig(**{k: float(v) for k, v in raw.items()},
                          rho=rho_list[0] if rho_list else 0.0,
                          alpha=alpha_grid[0] if alpha_grid else 0.0)
    return base, rho_list, alpha_grid


def config_dict(cfg: GaussianConfig) -> dict:
    return asdict(cfg)

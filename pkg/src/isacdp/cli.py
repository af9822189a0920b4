"""Command-line front end.

Every output starts with provenance (tool version, seed, sha256 of the
effective configuration). Identical arguments and inputs give byte-identical
output. Exit status: 0 success, 1 valid input whose analysis is infeasible,
2 input error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import codesim, documents, gaussian, regions, secrecy, transport
from . import probkit as pk
from .errors import IsacError

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT = 0, 1, 2
SUBCOMMANDS = ("region", "gaussian", "simulate", "transport", "secure", "binary-example", "validate")
RATE_KEYS = {"R", "R_c", "R_E", "Rc_min", "R_bits", "Rc_bits", "rate_bits", "R_c_required"}


@dataclass
class RunConfig:
    subcommand: str
    input: str | None = None
    output: str | None = None
    seed: int = 0
    overrides: dict = field(default_factory=dict)


# ---------------------------------------------------------------- output


def _is_rate(key):
    return key in RATE_KEYS or key.endswith("_bits") or key.startswith(("I_", "H_"))


def _num(x, digits):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(f"{x:.{digits}g}")


def _clean(obj, key=""):
    """Round floats (rates to 6, everything else to 12 significant digits)."""
    if isinstance(obj, dict):
        return {str(k): _clean(v, str(k)) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v, key) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist(), key)
    if isinstance(obj, (bool, np.bool_, int, float, np.integer, np.floating)):
        return _num(obj, 6 if _is_rate(key) else 12)
    return obj


def _fmt(x, digits=12):
    v = _num(x, digits)
    return v if isinstance(v, str) else f"{v:.{digits}g}"


class Emitter:
    def __init__(self, cfg: RunConfig, config_payload: dict):
        self.cfg = cfg
        blob = json.dumps(config_payload, sort_keys=True, default=str).encode()
        self.provenance = {
            "tool": "isacdp",
            "version": __version__,
            "subcommand": cfg.subcommand,
            "seed": int(cfg.seed),
            "config_sha256": hashlib.sha256(blob).hexdigest(),
        }

    def json(self, payload: dict) -> str:
        body = {"provenance": self.provenance, **_clean(payload)}
        return json.dumps(body, indent=2, sort_keys=False) + "\n"

    def csv(self, text: str) -> str:
        head = "".join(f"# {k}={v}\n" for k, v in self.provenance.items())
        return head + text

    def write(self, text: str, path=None):
        path = path or self.cfg.output
        if path:
            Path(path).write_text(text)
        else:
            sys.stdout.write(text)


def _file_digest(path):
    if path is None:
        return None
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _floats(text):
    return [float(x) for x in str(text).split(",") if x.strip()]


def _payload(cfg, extra=None):
    ov = {k: v for k, v in cfg.overrides.items() if not k.endswith("_out")}
    return {"subcommand": cfg.subcommand, "input_sha256": _file_digest(cfg.input),
            "seed": cfg.seed, "overrides": ov, **(extra or {})}


# ------------------------------------------------------------ subcommands


def _point_kinds():
    return {
        "theorem1": regions.theorem1_point,
        "ncr": regions.ncr_point,
        "deterministic-channel": regions.deterministic_capacity_point,
        "deterministic-encoder": regions.deterministic_encoder_point,
        "causal-strict": regions.causal_strict_point,
    }


def _run_region(cfg: RunConfig) -> int:
    o = cfg.overrides
    sys_ = documents.load_system(cfg.input)
    em = Emitter(cfg, _payload(cfg))
    kinds = _point_kinds()
    if o.get("trace"):
        template = regions.SystemTemplate(sys_, tuple(o["free"].split(",")), preserve=not o.get("no_preserve"))
        search = regions.Search(o["search"], o["budget"], cfg.seed)
        fixed_d = o["fixed_d"] if o["fixed_d"] is not None else math.inf
        points = regions.trace_boundary(template, search, fixed_d)
        labelled = [("trace", p) for p in points]
    elif o["kind"] == "all":
        labelled = []
        for name, fn in kinds.items():
            try:
                labelled.append((name, fn(sys_)))
            except IsacError as exc:
                labelled.append((name, str(exc)))
    else:
        labelled = [(o["kind"], kinds[o["kind"]](sys_))]
    pts = [p for _, p in labelled if isinstance(p, regions.RegionPoint)]
    if o["format"] == "csv":
        em.write(em.csv(regions.points_to_csv(pts)))
    else:
        out = []
        for name, p in labelled:
            out.append({"kind": name, **p.as_dict()} if isinstance(p, regions.RegionPoint)
                       else {"kind": name, "error": p})
        em.write(em.json({"membership": regions.membership(sys_).__dict__, "points": out}))
    return EXIT_OK if any(p.feasible for p in pts) else EXIT_INFEASIBLE


def _run_gaussian(cfg: RunConfig) -> int:
    o = cfg.overrides
    if cfg.input:
        base, rho_list, alpha_grid = gaussian.load_config(cfg.input)
    else:
        text = resources.files("isacdp").joinpath("data/gaussian_defaults.json").read_text()
        base, rho_list, alpha_grid = gaussian.config_from_dict(json.loads(text))
    if o.get("rho") is not None:
        rho_list = _floats(o["rho"])
    if o.get("alpha") is not None:
        alpha_grid = _floats(o["alpha"])
    elif o.get("alpha_step") is not None:
        alpha_grid = gaussian.alpha_range(o["alpha_start"], o["alpha_stop"], o["alpha_step"])
    if o.get("d_max") is not None:
        base = base.with_(d_max_constraint=o["d_max"])
    em = Emitter(cfg, _payload(cfg, {"base": gaussian.config_dict(base), "rho": rho_list, "alpha": alpha_grid}))
    points = gaussian.sweep(base, rho_list, alpha_grid)
    mc = None
    if o.get("mc"):
        mc = gaussian.mc_validate(base.with_(rho=rho_list[0] if rho_list else base.rho,
                                             alpha=alpha_grid[0] if alpha_grid else base.alpha),
                                  o["mc"], cfg.seed)
    companion = {"config": gaussian.config_dict(base), "rho": rho_list, "alpha": alpha_grid}
    if mc is not None:
        companion["mc_validate"] = mc
    if o["format"] == "csv":
        em.write(em.csv(gaussian.sweep_csv(points)))
        if o.get("config_out"):
            em.write(em.json(companion), o["config_out"])
    else:
        rows = [{"rho": p.rho, "alpha": p.alpha, "a": p.a, "R_bits": p.R, "Rc_bits": p.R_c,
                 "achieved_D": p.achieved_D, "feasible": p.feasible} for p in points]
        em.write(em.json({**companion, "points": rows}))
    return EXIT_OK if any(p.feasible for p in points) or not points else EXIT_INFEASIBLE


def _run_simulate(cfg: RunConfig) -> int:
    o = cfg.overrides
    sys_ = documents.load_system(cfg.input)
    sim = codesim.SimConfig(n=o["n"], km=o["km"], ki=o["ki"], kg=o["kg"], delta=o["delta"],
                            trials=o["trials"], seed=cfg.seed, mode=o["mode"], cap=o["cap"])
    em = Emitter(cfg, _payload(cfg))
    report = codesim.run(sys_, sim).as_dict()
    report["config"] = {"n": sim.n, "km": sim.km, "ki": sim.ki, "kg": sim.kg,
                        "rates_bits": list(sim.rates), "delta": sim.delta,
                        "typicality": "entrywise joint-type deviation <= delta",
                        "trials": sim.trials, "mode": sim.mode, "cap": sim.cap}
    if o.get("curve_n"):
        ns = [int(x) for x in _floats(o["curve_n"])]
        from dataclasses import replace
        cfgs = [replace(sim, n=n) for n in ns]
        report["curves"] = codesim.run_curve(sys_, cfgs, o["codebooks"])
        if o.get("curve_out"):
            keys = list(report["curves"])
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(keys)
            for row in zip(*(report["curves"][k] for k in keys)):
                w.writerow(["" if v is None else _fmt(v) for v in row])
            em.write(em.csv(buf.getvalue()), o["curve_out"])
    em.write(em.json(report))
    return EXIT_OK


def _read_cost_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if rec and not rec[0].lstrip().startswith("#"):
                rows.append([float(x) for x in rec])
    return np.array(rows)


def _run_transport(cfg: RunConfig) -> int:
    o = cfg.overrides
    P = documents.load_dist(o["p"], o.get("p_name"))
    Q = documents.load_dist(o["q"], o.get("q_name"))
    cost = _read_cost_csv(o["cost"]) if o.get("cost") else pk.DistortionFn.hamming(P.probs.size).matrix
    payload = _payload(cfg, {"p_sha256": _file_digest(o["p"]), "q_sha256": _file_digest(o["q"]),
                             "cost_sha256": _file_digest(o.get("cost"))})
    em = Emitter(cfg, payload)
    if o.get("greedy"):
        plan = transport.greedy_coupling(P, Q, cost)
    else:
        plan = transport.optimal_coupling(P, Q, cost)
    check = transport.wasserstein_bound_check(P, Q, cost) if not o.get("greedy") else None
    summary = {"method": plan.method, "cost": plan.cost, "tv": pk.total_variation(P, Q),
               "marginal_error": transport.marginal_error(plan),
               "d_max": float(np.max(cost)), "wasserstein_check": check}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["source"] + [f"t{j}" for j in range(plan.plan.shape[1])])
    for i, row in enumerate(plan.plan):
        w.writerow([i] + [_fmt(v) for v in row])
    if o["format"] == "csv":
        em.write(em.csv(buf.getvalue()))
        if o.get("summary_out"):
            em.write(em.json(summary), o["summary_out"])
    else:
        em.write(em.json({**summary, "plan": plan.plan}))
    return EXIT_OK


def _run_secure(cfg: RunConfig) -> int:
    o = cfg.overrides
    sys_ = documents.load_system(cfg.input)
    em = Emitter(cfg, _payload(cfg))
    pt = secrecy.secure_region_point(sys_, o["re"], o.get("rc"))
    p1, p2 = secrecy.secrecy_problems(sys_)
    rates = [round(k * o["curve_step"], 12) for k in range(int(round(o["curve_max"] / o["curve_step"])) + 1)]
    curve = [(r, secrecy.distortion_rate(p1, r)) for r in rates]
    text = "rate_bits,distortion\n" + "".join(f"{_fmt(r, 6)},{_fmt(d)}\n" for r, d in curve)
    if o["format"] == "csv":
        em.write(em.csv(text))
        if o.get("point_out"):
            em.write(em.json({"point": pt.as_dict()}), o["point_out"])
    else:
        if o.get("curve_out"):
            em.write(em.csv(text), o["curve_out"])
        em.write(em.json({"point": pt.as_dict(),
                          "curve": [{"rate_bits": r, "distortion": d} for r, d in curve]}))
    return EXIT_OK if pt.feasible else EXIT_INFEASIBLE


def _run_binary_example(cfg: RunConfig) -> int:
    o = cfg.overrides
    sys_ = regions.binary_example(o["q"], o["px1"])
    best = regions.best_estimator_example(o["q"], o["px1"])
    em = Emitter(cfg, _payload(cfg))
    pt = regions.theorem1_point(sys_)
    bpt = regions.theorem1_point(best)
    if o["format"] == "csv":
        em.write(em.csv(regions.points_to_csv([pt, bpt])))
    else:
        em.write(em.json({
            "system": documents.system_to_document(sys_),
            "estimator_convention": "rows (x,z) = (0,0),(0,1),(1,0),(1,1); P(Shat=1|x,z) = q, a, 2q/(3(1-q)), 1/3",
            "membership": regions.membership(sys_).__dict__,
            "theorem1_point": pt.as_dict(),
            "best_estimator": {
                "P_Shat": pk.marginalize(best.joint, "Shat").probs,
                "membership": regions.membership(best).__dict__,
                "theorem1_point": bpt.as_dict(),
            },
        }))
    return EXIT_OK if pt.feasible else EXIT_INFEASIBLE


GAUSSIAN_KEYS = {"var_s", "var_se", "var_n", "var_x", "var_w"}


def _validate_any(path):
    """Gaussian configs are recognised by their variance keys."""
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, ValueError):
        return documents.validate_document(path)
    if isinstance(raw, dict) and GAUSSIAN_KEYS & set(raw):
        try:
            gaussian.config_from_dict(raw)
        except (TypeError, ValueError) as exc:
            return [f"gaussian config: {exc}"]
        return []
    return documents.validate_document(path)


def _run_validate(cfg: RunConfig) -> int:
    em = Emitter(cfg, _payload(cfg))
    diags = _validate_any(cfg.input)
    em.write(em.json({"path": str(cfg.input), "diagnostics": diags, "valid": not diags}))
    return EXIT_OK if not diags else EXIT_INPUT


HANDLERS = {
    "region": _run_region,
    "gaussian": _run_gaussian,
    "simulate": _run_simulate,
    "transport": _run_transport,
    "secure": _run_secure,
    "binary-example": _run_binary_example,
    "validate": _run_validate,
}


def dispatch(cfg: RunConfig) -> int:
    if cfg.subcommand not in HANDLERS:
        sys.stderr.write(f"isacdp: unknown subcommand {cfg.subcommand!r}\n")
        return EXIT_INPUT
    try:
        return HANDLERS[cfg.subcommand](cfg)
    except (IsacError, ValueError, KeyError, OSError) as exc:
        msg = "; ".join(exc.diagnostics) if hasattr(exc, "diagnostics") else str(exc)
        sys.stderr.write(f"isacdp {cfg.subcommand}: {msg}\n")
        return EXIT_INPUT


# ----------------------------------------------------------------- parser

UNITS = "Rates are in bits per channel use; distortions in the units of the distortion matrix."


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isacdp", description="Distribution-preserving ISAC regions and simulations. " + UNITS)
    p.add_argument("--version", action="version", version=f"isacdp {__version__}")
    sub = p.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")

    def common(sp, fmt_default="json"):
        sp.add_argument("--format", choices=("csv", "json"), default=fmt_default)
        sp.add_argument("--output", "-o", help="write here instead of stdout")
        sp.add_argument("--seed", type=int, default=0, help="64-bit seed (default 0)")

    raw = argparse.RawDescriptionHelpFormatter
    sp = sub.add_parser("region", formatter_class=raw, help="evaluate region points of a system document",
                        epilog="CSV columns: R_bits (bits), Rc_bits (bits), D (distortion units), "
                               "DE (distortion units, empty here), feasible (true/false).")
    sp.add_argument("input", help="system document (JSON)")
    sp.add_argument("--kind", default="theorem1", choices=["all"] + list(_point_kinds()))
    sp.add_argument("--trace", action="store_true", help="search the free kernels for the (R, R_c) boundary")
    sp.add_argument("--free", default="u_given_se,estimator", help="comma-separated free kernels for --trace")
    sp.add_argument("--search", default="random", choices=("random", "grid"))
    sp.add_argument("--budget", type=int, default=200)
    sp.add_argument("--fixed-d", type=float, default=None, help="distortion ceiling for --trace")
    sp.add_argument("--no-preserve", action="store_true", help="do not project estimators onto P_Shat = P_S")
    common(sp)

    sp = sub.add_parser("gaussian", formatter_class=raw, help="Gaussian example sweep",
                        epilog="CSV columns: rho, alpha, a (estimator gain), R_bits (bits), Rc_bits (bits), "
                               "achieved_D (squared-error units), feasible.")
    sp.add_argument("input", nargs="?", help="Gaussian config JSON (bundled defaults if omitted)")
    sp.add_argument("--rho", help="comma-separated correlations, e.g. 0,0.5,0.9")
    sp.add_argument("--alpha", help="comma-separated alpha values")
    sp.add_argument("--alpha-start", type=float, default=0.0)
    sp.add_argument("--alpha-stop", type=float, default=2.0)
    sp.add_argument("--alpha-step", type=float, default=None)
    sp.add_argument("--d-max", type=float, default=None, help="distortion constraint D")
    sp.add_argument("--mc", type=int, default=0, help="Monte-Carlo samples for mc_validate at the first grid point")
    sp.add_argument("--config-out", help="companion JSON path when --format csv")
    common(sp, "csv")

    sp = sub.add_parser("simulate", formatter_class=raw, help="simulate the likelihood-encoder scheme",
                        epilog="Report fields: p_err (probability), mean_distortion (distortion units), "
                               "tv_Q_vs_Qbar and tv_output_vs_iid (total variation, [0,1]), *_ci (95% half-widths). "
                               "Curve CSV columns: n, p_err, mean_distortion, tv_Q_vs_Qbar, tv_output_vs_iid.")
    sp.add_argument("input", help="system document (JSON)")
    sp.add_argument("--n", type=int, required=True, help="block length")
    sp.add_argument("--km", type=int, default=0, help="log2 number of messages")
    sp.add_argument("--ki", type=int, default=0, help="log2 bin size")
    sp.add_argument("--kg", type=int, default=0, help="log2 common-randomness size")
    sp.add_argument("--delta", type=float, default=0.1, help="typicality slack")
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--mode", choices=("exact", "monte_carlo"), default="exact")
    sp.add_argument("--cap", type=int, default=codesim.DEFAULT_CAP)
    sp.add_argument("--curve-n", help="comma-separated block lengths for a per-n curve")
    sp.add_argument("--codebooks", type=int, default=1, help="codebooks averaged per curve point")
    sp.add_argument("--curve-out", help="CSV path for the per-n curve")
    common(sp)

    sp = sub.add_parser("transport", formatter_class=raw, help="optimal coupling between two distributions",
                        epilog="Plan CSV: one row per source symbol, columns t<j> are probabilities. "
                               "Summary: cost (cost units), tv ([0,1]), marginal_error.")
    sp.add_argument("--p", required=True, help="document holding the source distribution")
    sp.add_argument("--q", required=True, help="document holding the target distribution")
    sp.add_argument("--p-name")
    sp.add_argument("--q-name")
    sp.add_argument("--cost", help="cost matrix CSV (Hamming if omitted)")
    sp.add_argument("--greedy", action="store_true")
    sp.add_argument("--summary-out", help="summary JSON path when --format csv")
    common(sp)

    sp = sub.add_parser("secure", formatter_class=raw, help="eavesdropper distortion of a system",
                        epilog="Point: R_bits, Rc_bits (bits), D and DE (distortion units). "
                               "Curve CSV columns: rate_bits (bits), distortion (distortion units).")
    sp.add_argument("input", help="system document (JSON)")
    sp.add_argument("--re", type=float, required=True, help="henchman rate R_E in bits")
    sp.add_argument("--rc", type=float, default=None, help="common-randomness rate in bits (default: minimum)")
    sp.add_argument("--curve-max", type=float, default=1.0)
    sp.add_argument("--curve-step", type=float, default=0.05)
    sp.add_argument("--curve-out")
    sp.add_argument("--point-out")
    common(sp)

    sp = sub.add_parser("binary-example", formatter_class=raw, help="multiplicative Bernoulli channel example",
                        epilog="CSV rows: preserving estimator, then the best estimator. "
                               "Columns R_bits, Rc_bits (bits), D (Hamming distortion), DE (empty), feasible.")
    sp.add_argument("--q", type=float, default=0.25, help="P(S=1)")
    sp.add_argument("--px1", type=float, default=0.75, help="P(X=1)")
    common(sp)

    sp = sub.add_parser("validate", help="list every problem in a document")
    sp.add_argument("input")
    common(sp)
    return p


def parse(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    if ns.subcommand is None:
        raise SystemExit(EXIT_INPUT)
    args = vars(ns)
    sub = args.pop("subcommand")
    return RunConfig(sub, args.pop("input", None), args.pop("output", None), args.pop("seed", 0), args)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else EXIT_INPUT
        return EXIT_INPUT if code not in (0,) else 0
    return dispatch(cfg)


if __name__ == "__main__":
    raise SystemExit(main())

"""JSON documents describing distributions, kernels and whole systems.

Layout::

    {
      "alphabets": {"S": 2, "X": {"size": 2, "labels": ["off", "on"]}},
      "dists":   {"P_S": {"alphabet": "S", "probs": [0.75, 0.25]},
                  "P_SeS": {"alphabet": ["Se", "S"], "probs": [...]}},
      "kernels": {"W": {"from": ["X", "S"], "to": ["Y", "Z"], "rows": [[...], ...]}},
      "distortions": {"d": {"matrix": [[0, 1], [1, 0]]}} or {"d": {"hamming": 2}},
      "system": {"state": "P_SeS", "u_given_se": ..., "x_given_use": ...,
                 "channel": ..., "estimator": ..., "distortion": "d"}
    }

Multi-axis probabilities are flat and row-major. A kernel has one row per
input tuple (row-major over ``from``), each row flat over ``to``. The system
section uses the axis names Se, S, U, X, Y, Z (an estimator writes to S or
Shat). When Se is not declared it is a singleton and may be dropped from
every ``from`` list.

Validation collects every problem before raising, so a document is either
loaded whole or not at all.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import probkit as pk
from .errors import DocumentError

ROLE_SHAPES = {
    "u_given_se": (("Se",), ("U",)),
    "x_given_use": (("U", "Se"), ("X",)),
    "channel": (("X", "S"), ("Y", "Z")),
    "estimator": (("X", "Se", "Z"), ("S",)),
}


@dataclass
class Document:
    alphabets: dict = field(default_factory=dict)
    dists: dict = field(default_factory=dict)
    kernels: dict = field(default_factory=dict)
    distortions: dict = field(default_factory=dict)
    system: object = None
    raw: dict = field(default_factory=dict)


def _listify(x):
    return [x] if isinstance(x, str) else list(x)


def _parse_alphabets(raw, diags):
    out = {}
    for name, spec in (raw or {}).items():
        try:
            if isinstance(spec, dict):
                out[name] = pk.Alphabet(int(spec["size"]), spec.get("labels"))
            else:
                if isinstance(spec, bool) or int(spec) != spec:
                    raise ValueError(f"size must be an integer, got {spec!r}")
                out[name] = pk.Alphabet(int(spec))
        except (KeyError, TypeError, ValueError) as exc:
            diags.append(f"alphabets.{name}: {exc}")
    if "Shat" not in out and "S" in out:
        out["Shat"] = out["S"]
    return out


def _resolve(names, alphabets, where, diags):
    sizes = []
    for n in names:
        if n not in alphabets:
            diags.append(f"{where}: unknown alphabet {n!r}")
            return None
        sizes.append(alphabets[n].size)
    return tuple(sizes)


def _norm_issues(arr, what, axis_label):
    """Diagnostics for negative entries and mis-normalized rows of ``arr``
    (rows along its first axis)."""
    issues = []
    for r, row in enumerate(arr):
        neg = np.nonzero(~np.isfinite(row) | (row < 0))[0]
        for c in neg:
            issues.append(f"{what} {axis_label} {r}, column {int(c)}: invalid entry {row[c]!r}")
        s = float(np.sum(row))
        if not np.isfinite(s) or abs(s - 1.0) > pk.NORM_TOL:
            issues.append(f"{what} {axis_label} {r}: sums to {s!r}, expected 1 within {pk.NORM_TOL:g}")
    return issues


def _parse_dists(raw, alphabets, diags):
    out = {}
    for name, spec in (raw or {}).items():
        where = f"dists.{name}"
        try:
            axes = _listify(spec["alphabet"])
            probs = np.asarray(spec["probs"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            diags.append(f"{where}: malformed entry ({exc})")
            continue
        shape = _resolve(axes, alphabets, where, diags)
        if shape is None:
            continue
        if probs.ndim != 1 or probs.size != int(np.prod(shape)):
            diags.append(f"{where}: expected {int(np.prod(shape))} probabilities, got {probs.size}")
            continue
        issues = _norm_issues(probs[None, :], where, "row")
        if issues:
            diags.extend(issues)
            continue
        if len(axes) == 1:
            out[name] = pk.Dist(alphabets[axes[0]], probs)
        else:
            out[name] = pk.Joint(tuple(axes), tuple(alphabets[a] for a in axes), probs.reshape(shape))
    return out


def _parse_kernels(raw, alphabets, diags):
    out = {}
    for name, spec in (raw or {}).items():
        where = f"kernels.{name}"
        try:
            ins = _listify(spec.get("from", []))
            outs = _listify(spec["to"])
            rows = [np.asarray(r, dtype=float) for r in spec["rows"]]
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            diags.append(f"{where}: malformed entry ({exc})")
            continue
        in_shape = _resolve(ins, alphabets, where, diags)
        out_shape = _resolve(outs, alphabets, where, diags)
        if in_shape is None or out_shape is None:
            continue
        n_rows, width = int(np.prod(in_shape)), int(np.prod(out_shape))
        bad = False
        if len(rows) != n_rows:
            diags.append(f"{where}: expected {n_rows} rows, got {len(rows)}")
            bad = True
        for r, row in enumerate(rows):
            if row.ndim != 1 or row.size != width:
                diags.append(f"{where} row {r}: expected {width} entries, got {row.size}")
                bad = True
        if bad:
            continue
        table = np.vstack(rows) if rows else np.zeros((0, width))
        issues = _norm_issues(table, where, "row")
        if issues:
            diags.extend(issues)
            continue
        out[name] = (tuple(ins), tuple(outs), table.reshape(in_shape + out_shape))
    return out


def _parse_distortions(raw, diags):
    out = {}
    for name, spec in (raw or {}).items():
        where = f"distortions.{name}"
        try:
            if "hamming" in spec:
                out[name] = pk.DistortionFn.hamming(int(spec["hamming"]))
            else:
                out[name] = pk.DistortionFn(np.asarray(spec["matrix"], dtype=float))
        except (KeyError, TypeError, ValueError) as exc:
            diags.append(f"{where}: {exc}")
    return out


def _role_table(role, entry, alphabets, has_se, diags):
    """Reshape a parsed kernel to the canonical axes of ``role``, inserting a
    singleton Se axis where the document leaves it out."""
    ins, outs, table = entry
    want_in, want_out = ROLE_SHAPES[role]
    outs = tuple("S" if o == "Shat" else o for o in outs)
    if outs != want_out:
        diags.append(f"system.{role}: kernel must map to {list(want_out)}, maps to {list(outs)}")
        return None
    if "Se" in want_in and "Se" not in ins and not has_se:
        pos = want_in.index("Se")
        ins = ins[:pos] + ("Se",) + ins[pos:]
        table = np.expand_dims(table, pos)
    if tuple(ins) != want_in:
        diags.append(f"system.{role}: kernel must condition on {list(want_in)}, conditions on {list(ins)}")
        return None
    return table


def _build_system(raw, alphabets, dists, kernels, distortions, diags):
    from .regions import IsacSystem

    has_se = "Se" in alphabets
    if not has_se:
        alphabets = dict(alphabets, Se=pk.Alphabet(1))
    state_name = raw.get("state")
    state = dists.get(state_name)
    if state is None:
        diags.append(f"system.state: unknown distribution {state_name!r}")
        return None
    if isinstance(state, pk.Dist):
        if has_se:
            diags.append("system.state: Se is declared, so the state must be a joint over [Se, S]")
            return None
        state_arr = state.probs[None, :]
    elif state.axes == ("Se", "S"):
        state_arr = state.probs
    else:
        diags.append(f"system.state: must be over [Se, S], got {list(state.axes)}")
        return None
    tables = {}
    for role in ROLE_SHAPES:
        kname = raw.get(role)
        if kname not in kernels:
            diags.append(f"system.{role}: unknown kernel {kname!r}")
            continue
        tab = _role_table(role, kernels[kname], alphabets, has_se, diags)
        if tab is not None:
            tables[role] = tab
    dname = raw.get("distortion")
    if dname is None:
        dist_fn = pk.DistortionFn.hamming(state_arr.shape[1])
    elif dname in distortions:
        dist_fn = distortions[dname]
    else:
        diags.append(f"system.distortion: unknown distortion {dname!r}")
        return None
    if len(tables) != len(ROLE_SHAPES):
        return None
    try:
        return IsacSystem.from_arrays(
            state_arr, tables["u_given_se"], tables["x_given_use"],
            tables["channel"], tables["estimator"], dist_fn,
        )
    except ValueError as exc:
        diags.append(f"system: {exc}")
        return None


def parse_document(raw: dict) -> tuple[Document | None, list[str]]:
    diags: list[str] = []
    if not isinstance(raw, dict):
        return None, ["document root must be a JSON object"]
    known = {"alphabets", "dists", "kernels", "distortions", "system", "provenance", "description"}
    for key in raw:
        if key not in known:
            diags.append(f"unknown top-level key {key!r}")
    alphabets = _parse_alphabets(raw.get("alphabets"), diags)
    dists = _parse_dists(raw.get("dists"), alphabets, diags)
    kernels = _parse_kernels(raw.get("kernels"), alphabets, diags)
    distortions = _parse_distortions(raw.get("distortions"), diags)
    system = None
    if "system" in raw and not diags:
        system = _build_system(raw["system"], alphabets, dists, kernels, distortions, diags)
    if diags:
        return None, diags
    doc = Document(alphabets, dists, kernels, distortions, system, raw)
    return doc, []


def _read(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError([f"{path}: invalid JSON ({exc})"]) from None


def validate_document(path) -> list[str]:
    """Every normalization and shape problem in the document at ``path``.

    Raises OSError only if the file cannot be read.
    """
    try:
        raw = _read(path)
    except DocumentError as exc:
        return exc.diagnostics
    return parse_document(raw)[1]


def load_document(path) -> Document:
    doc, diags = parse_document(_read(path))
    if diags:
        raise DocumentError(diags)
    return doc


def load_system(path):
    doc = load_document(path)
    if doc.system is None:
        raise DocumentError([f"{path}: no 'system' section"])
    return doc.system


def load_dist(path, name=None) -> pk.Dist:
    """A single distribution from a document; ``name`` picks one when the
    document holds several."""
    doc = load_document(path)
    if name is None:
        if len(doc.dists) != 1:
            raise DocumentError([f"{path}: holds {len(doc.dists)} distributions; name one"])
        name = next(iter(doc.dists))
    if name not in doc.dists:
        raise DocumentError([f"{path}: no distribution {name!r}"])
    d = doc.dists[name]
    if isinstance(d, pk.Joint):
        d = pk.Dist(pk.Alphabet(d.probs.size), d.probs.ravel())
    return d


def system_to_document(sys, labels=None) -> dict:
    """Inverse of :func:`load_system` for a full seven-axis system."""
    sj = sys.state_joint
    sizes = {
        "Se": sj.size("Se"), "S": sj.size("S"),
        "U": sys.u_given_se.outputs[0].size, "X": sys.x_given_use.outputs[0].size,
        "Y": sys.channel.outputs[0].size, "Z": sys.channel.outputs[1].size,
    }

    def rows(k):
        return [list(map(float, r)) for r in k.rows]

    return {
        "alphabets": dict(sizes),
        "dists": {"P_SeS": {"alphabet": ["Se", "S"], "probs": list(map(float, sj.probs.ravel()))}},
        "kernels": {
            "P_U|Se": {"from": ["Se"], "to": "U", "rows": rows(sys.u_given_se)},
            "P_X|USe": {"from": ["U", "Se"], "to": "X", "rows": rows(sys.x_given_use)},
            "W_YZ|XS": {"from": ["X", "S"], "to": ["Y", "Z"], "rows": rows(sys.channel)},
            "P_Shat|XSeZ": {"from": ["X", "Se", "Z"], "to": "Shat", "rows": rows(sys.estimator)},
        },
        "distortions": {"d": {"matrix": [list(map(float, r)) for r in sys.distortion.matrix]}},
        "system": {
            "state": "P_SeS", "u_given_se": "P_U|Se", "x_given_use": "P_X|USe",
            "channel": "W_YZ|XS", "estimator": "P_Shat|XSeZ", "distortion": "d",
        },
    }

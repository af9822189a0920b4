"""Finite-blocklength simulation of the likelihood-encoder coding scheme.

A codebook holds sequences u^n(m, i, g) for message m, bin index i and
common-randomness value g. Exact mode enumerates every block sequence and
compares the idealized law Q (codeword picked uniformly, side sequence drawn
through P(se | u)) with the induced law Qbar (side sequence i.i.d., bin index
picked by the likelihood encoder). Given (u_t, se_t) both laws generate the
remaining letters the same way, so the law of (m, i, g, se^n), called the
*head* below, carries all of their difference.

Indices are zero-based throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels as kn
from . import probkit as pk
from ._parallel import ordered_map
from .errors import CapExceededError, CodingError, DimensionError

DEFAULT_CAP = 1 << 20
REST_AXES = ("S", "X", "Y", "Z", "Shat")
MC_BLOCK = 4096


def all_sequences(k: int, n: int) -> np.ndarray:
    """Every length-``n`` sequence over ``range(k)``, lexicographic, shape (k^n, n)."""
    idx = np.arange(k ** n, dtype=np.int64)
    powers = k ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % k


def product_dist(p, n: int) -> np.ndarray:
    """i.i.d. law of length-``n`` sequences in :func:`all_sequences` order."""
    p = np.asarray(p, dtype=float)
    out = np.ones(1)
    for _ in range(n):
        out = np.outer(out, p).ravel()
    return out


@dataclass(frozen=True)
class SimConfig:
    """Block length, integer log2 codebook sizes (km, ki, kg), typicality
    slack, trial count, seed, mode and exact-enumeration cap."""

    n: int
    km: int = 0
    ki: int = 0
    kg: int = 0
    delta: float = 0.1
    trials: int = 1000
    seed: int = 0
    mode: str = "exact"
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("block length must be at least 1")
        if min(self.km, self.ki, self.kg) < 0:
            raise ValueError("log codebook sizes must be nonnegative")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.mode not in ("exact", "monte_carlo"):
            raise ValueError("mode must be 'exact' or 'monte_carlo'")
        if self.trials < 1:
            raise ValueError("trials must be positive")

    @classmethod
    def from_rates(cls, n, R, R_p=0.0, R_c=0.0, **kw):
        """Config from rates in bits; n times each rate must be an integer."""
        ks = []
        for name, r in (("R", R), ("R_p", R_p), ("R_c", R_c)):
            k = n * r
            if r < 0 or abs(k - round(k)) > 1e-9:
                raise ValueError(f"n*{name} = {k} is not a nonnegative integer; codebook size 2^(n{name}) must be integral")
            ks.append(int(round(k)))
        return cls(n, *ks, **kw)

    @property
    def rates(self):
        return (self.km / self.n, self.ki / self.n, self.kg / self.n)


@dataclass(frozen=True)
class Codebook:
    words: np.ndarray  # (M, I, G, n) symbols of U
    n: int
    km: int
    ki: int
    kg: int
    seed: int

    @property
    def sizes(self):
        return self.words.shape[:3]

    @property
    def rates(self):
        return (self.km / self.n, self.ki / self.n, self.kg / self.n)


def generate_codebook(p_u, cfg: SimConfig) -> Codebook:
    """Draw every symbol i.i.d. from ``p_u`` with ``default_rng(cfg.seed)``."""
    p = p_u.probs if isinstance(p_u, pk.Dist) else np.asarray(p_u, dtype=float)
    rng = np.random.default_rng(cfg.seed)
    shape = (1 << cfg.km, 1 << cfg.ki, 1 << cfg.kg, cfg.n)
    words = rng.choice(p.size, size=shape, p=p).astype(np.int64)
    words.setflags(write=False)
    return Codebook(words, cfg.n, cfg.km, cfg.ki, cfg.kg, cfg.seed)


def codebook_from_words(words, seed=-1) -> Codebook:
    words = np.asarray(words, dtype=np.int64)
    if words.ndim != 4:
        raise DimensionError("words must have shape (M, I, G, n)")
    sizes = words.shape[:3]
    ks = []
    for s in sizes:
        k = int(s).bit_length() - 1
        if s != 1 << k:
            raise ValueError("codebook dimensions must be powers of two")
        ks.append(k)
    return Codebook(words, words.shape[3], *ks, seed)


# --------------------------------------------------------- per-letter tables


@dataclass(frozen=True)
class LetterModel:
    """Per-letter quantities of a system used by the simulator."""

    n_u: int
    n_se: int
    p_se: np.ndarray          # (Se,)
    p_s: np.ndarray           # (S,)
    se_given_u: np.ndarray    # (U, Se)
    rest: np.ndarray          # (U, Se, S, X, Y, Z, Shat)
    p_uy: np.ndarray          # (U, Y)
    distortion: np.ndarray    # (S, S)

    @property
    def rest_sizes(self):
        return self.rest.shape[2:]

    def table(self, axes) -> np.ndarray:
        """P(axes | u, se) as a ((U*Se), prod sizes) matrix."""
        axes = (axes,) if isinstance(axes, str) else tuple(axes)
        keep = [REST_AXES.index(a) + 2 for a in axes]
        drop = tuple(i for i in range(2, 7) if i not in keep)
        t = self.rest.sum(axis=drop)
        order = [0, 1] + [2 + sorted(keep).index(k) for k in keep]
        t = np.transpose(t, order)
        return t.reshape(self.n_u * self.n_se, -1)

    def letter_distortion(self) -> np.ndarray:
        """g(u, se) = E[d(S, Shat) | u, se], flattened over (U*Se)."""
        ps = self.table(("S", "Shat")).reshape(self.n_u * self.n_se, *self.distortion.shape)
        return np.einsum("cab,ab->c", ps, self.distortion)


def letter_model(sys) -> LetterModel:
    j = sys.joint
    p_se_s = sys.state_joint.probs
    p_se = p_se_s.sum(axis=1)
    s_given_se = np.where(p_se[:, None] > 0, p_se_s / np.where(p_se > 0, p_se, 1.0)[:, None], 1.0 / p_se_s.shape[1])
    rest = np.einsum(
        "es,uex,xsyz,xezh->uesxyzh",
        s_given_se, sys.x_given_use.table, sys.channel.table, sys.estimator.table,
    )
    return LetterModel(
        n_u=sys.u_given_se.outputs[0].size,
        n_se=p_se.size,
        p_se=p_se,
        p_s=p_se_s.sum(axis=0),
        se_given_u=pk.conditional(j, "Se", "U"),
        rest=rest,
        p_uy=pk.marginalize(j, ("U", "Y")).probs,
        distortion=np.asarray(sys.distortion.matrix),
    )


# ------------------------------------------------------------ the encoder


def likelihood_weights(cb: Codebook, se_given_u, m: int, g: int, se_seq) -> np.ndarray:
    """Normalized likelihood of ``se_seq`` under each codeword of bin (m, g)."""
    se_seq = np.asarray(se_seq, dtype=np.int64)[None, :]
    lik = kn.sequence_likelihoods(cb.words[m, :, g, :], se_seq, np.asarray(se_given_u))[:, 0]
    total = lik.sum()
    if not total > 0:
        raise CodingError(f"side sequence {se_seq[0].tolist()} has zero likelihood under every codeword of bin (m={m}, g={g})")
    return lik / total


def likelihood_encoder(cb: Codebook, se_given_u, m: int, g: int, se_seq, rng) -> int:
    """Bin index drawn with probability proportional to its likelihood."""
    w = likelihood_weights(cb, se_given_u, m, g, se_seq)
    if w.size == 1:
        return 0
    return int(rng.choice(w.size, p=w))


# ------------------------------------------------------------ the decoder


def typicality_decode(cb: Codebook, p_uy, g: int, y_seq, delta: float):
    """Unique (m, i) whose codeword is jointly delta-typical with ``y_seq``.

    Typicality is entrywise: every joint-type entry within ``delta`` of
    ``p_uy``. Returns None when no pair or more than one pair qualifies.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    M, I, _ = cb.sizes
    words = cb.words[:, :, g, :].reshape(M * I, cb.n)
    dev = kn.joint_type_deviations(words, np.asarray(y_seq, dtype=np.int64)[None, :], np.asarray(p_uy, dtype=float))[:, 0]
    hits = np.nonzero(dev <= delta + 1e-12)[0]
    if hits.size != 1:
        return None
    return divmod(int(hits[0]), I)


def _decode_table(cb, p_uy, y_seqs, delta):
    """dec[g, y] = decoded message for every y sequence, or M on failure."""
    M, I, G = cb.sizes
    out = np.full((G, y_seqs.shape[0]), M, dtype=np.int64)
    for g in range(G):
        words = cb.words[:, :, g, :].reshape(M * I, cb.n)
        typ = kn.joint_type_deviations(words, y_seqs, p_uy) <= delta + 1e-12
        count = typ.sum(axis=0)
        first = typ.argmax(axis=0)
        ok = count == 1
        out[g, ok] = first[ok] // I
    return out


# ------------------------------------------------- exact block distributions


@dataclass(frozen=True)
class CodeDistribution:
    """Exact law of a coded block, stored through its head (m, i, g, se^n).

    ``kind`` is "idealized" or "induced".
    """

    kind: str
    head: np.ndarray            # (M, I, G, |Se|^n)
    codebook: Codebook
    model: LetterModel
    cap: int = DEFAULT_CAP

    @property
    def n(self):
        return self.codebook.n

    def _symbols(self):
        """Combined (u, se) letter index for every head entry, (entries, n)."""
        M, I, G, n = self.codebook.words.shape
        se = all_sequences(self.model.n_se, n)
        c = self.codebook.words[:, :, :, None, :] * self.model.n_se + se[None, None, None, :, :]
        return c.reshape(-1, n)

    def _check(self, out_states):
        total = self.head.size * out_states
        if total > self.cap:
            raise CapExceededError(f"exact enumeration needs {total} states, cap is {self.cap}")

    def mgs_marginal(self) -> np.ndarray:
        """Law of (m, g, se^n), shape (M, G, |Se|^n)."""
        return self.head.sum(axis=1)

    def output_marginal(self, axes=("Shat",)) -> np.ndarray:
        """Law of the block sequence of ``axes`` (letters combined row-major)."""
        table = self.model.table(axes)
        k = table.shape[1]
        self._check(k ** self.n)
        seqs = all_sequences(k, self.n)
        w = self.head.ravel()
        keep = w > 0
        return kn.mixture_output(w[keep], self._symbols()[keep], seqs, table)

    def shat_marginal(self) -> np.ndarray:
        return self.output_marginal(("Shat",))

    def state_pair_joint(self) -> np.ndarray:
        """Law of (S^n, Shat^n) as a (|S|^n, |S|^n) matrix."""
        ns = self.model.p_s.size
        flat = self.output_marginal(("S", "Shat"))
        seq = all_sequences(ns * ns, self.n)
        s_idx = _seq_index(seq // ns, ns)
        h_idx = _seq_index(seq % ns, ns)
        out = np.zeros((ns ** self.n, ns ** self.n))
        np.add.at(out, (s_idx, h_idx), flat)
        return out

    def message_pair(self, delta: float) -> np.ndarray:
        """Law of (M, Mhat) with Mhat = M (extra last column) marking failure."""
        M, I, G, _ = self.head.shape
        ny = self.model.p_uy.shape[1]
        self._check(ny ** self.n)
        y_seqs = all_sequences(ny, self.n)
        dec = _decode_table(self.codebook, self.model.p_uy, y_seqs, delta)
        table = self.model.table(("Y",))
        lik = kn.sequence_likelihoods(self._symbols(), y_seqs, table).reshape(M, I, G, -1, y_seqs.shape[0])
        py = np.einsum("migs,migsy->mgy", self.head, lik)
        out = np.zeros((M, M + 1))
        for g in range(G):
            for m in range(M):
                np.add.at(out[m], dec[g], py[m, g])
        return out

    def mean_distortion(self) -> float:
        g = self.model.letter_distortion()
        per_entry = g[self._symbols()].mean(axis=1)
        return float(self.head.ravel() @ per_entry)

    def full_joint(self) -> np.ndarray:
        """Explicit law over (m, i, g, se^n, rest^n), shape (head entries, R^n)
        where R combines (S, X, Y, Z, Shat) per letter."""
        table = self.model.table(REST_AXES)
        k = table.shape[1]
        self._check(k ** self.n)
        seqs = all_sequences(k, self.n)
        lik = kn.sequence_likelihoods(self._symbols(), seqs, table)
        return self.head.ravel()[:, None] * lik


def _seq_index(seq, k):
    n = seq.shape[1]
    powers = k ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return seq @ powers


def _head_check(cb, model, cap):
    size = cb.words[..., 0].size * model.n_se ** cb.n
    if size > cap:
        raise CapExceededError(f"head law has {size} states, cap is {cap}")


def _likelihoods(cb, model):
    M, I, G, n = cb.words.shape
    se = all_sequences(model.n_se, n)
    lik = kn.sequence_likelihoods(cb.words.reshape(-1, n), se, model.se_given_u)
    return lik.reshape(M, I, G, se.shape[0])


def idealized_distribution(sys, cb: Codebook, cap: int = DEFAULT_CAP, model=None) -> CodeDistribution:
    """Q: uniform (m, i, g) and se^n drawn through P(se | u) letter by letter."""
    model = model or letter_model(sys)
    _head_check(cb, model, cap)
    lik = _likelihoods(cb, model)
    head = lik / lik[..., 0].size
    return CodeDistribution("idealized", head, cb, model, cap)


def induced_distribution(sys, cb: Codebook, cap: int = DEFAULT_CAP, model=None) -> CodeDistribution:
    """Qbar: uniform (m, g), i.i.d. se^n, and i from the likelihood encoder."""
    model = model or letter_model(sys)
    _head_check(cb, model, cap)
    lik = _likelihoods(cb, model)
    M, I, G, ns = lik.shape
    p_se_n = product_dist(model.p_se, cb.n)
    z = lik.sum(axis=1, keepdims=True)
    bad = (z[:, 0] <= 0) & (p_se_n[None, None, :] > 0)
    if np.any(bad):
        m, g, s = (int(v[0]) for v in np.nonzero(bad))
        raise CodingError(f"side sequence #{s} has zero likelihood under every codeword of bin (m={m}, g={g})")
    w = np.where(z > 0, lik / np.where(z > 0, z, 1.0), 1.0 / I)
    head = w * p_se_n[None, None, None, :] / (M * G)
    return CodeDistribution("induced", head, cb, model, cap)


def bin_weights_from_idealized(q: CodeDistribution) -> np.ndarray:
    """Q(i | m, g, se^n) obtained by conditioning the idealized head."""
    z = q.head.sum(axis=1, keepdims=True)
    return np.where(z > 0, q.head / np.where(z > 0, z, 1.0), 0.0)


def tv_head(q: CodeDistribution, qbar: CodeDistribution) -> float:
    return 0.5 * float(np.abs(q.head - qbar.head).sum())


def tv_mgs(q: CodeDistribution, qbar: CodeDistribution) -> float:
    return 0.5 * float(np.abs(q.mgs_marginal() - qbar.mgs_marginal()).sum())


# ------------------------------------------------------------------ reports


@dataclass(frozen=True)
class SimReport:
    mode: str
    n: int
    p_err: float
    mean_distortion: float
    tv_Q_vs_Qbar: float | None = None
    tv_output_vs_iid: float | None = None
    p_err_ci: float | None = None
    distortion_ci: float | None = None
    trials: int | None = None
    curves: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "mode": self.mode, "n": self.n, "p_err": self.p_err,
            "mean_distortion": self.mean_distortion,
            "tv_Q_vs_Qbar": self.tv_Q_vs_Qbar, "tv_output_vs_iid": self.tv_output_vs_iid,
            "p_err_ci": self.p_err_ci, "distortion_ci": self.distortion_ci,
            "trials": self.trials, "curves": self.curves,
        }


def _p_u(sys):
    return pk.marginalize(sys.joint, "U").probs


def run(sys, cfg: SimConfig, codebook: Codebook | None = None) -> SimReport:
    """Simulate one codebook (drawn with ``cfg.seed`` unless given)."""
    cb = codebook or generate_codebook(_p_u(sys), cfg)
    model = letter_model(sys)
    if cfg.mode == "exact":
        return _run_exact(sys, cb, cfg, model)
    return _run_mc(cb, cfg, model)


def _run_exact(sys, cb, cfg, model):
    q = idealized_distribution(sys, cb, cfg.cap, model)
    qb = induced_distribution(sys, cb, cfg.cap, model)
    pair = qb.message_pair(cfg.delta)
    p_err = float(max(0.0, 1.0 - np.trace(pair[:, : pair.shape[0]])))
    out = qb.shat_marginal()
    tv_out = 0.5 * float(np.abs(out - product_dist(model.p_s, cb.n)).sum())
    return SimReport(
        mode="exact", n=cb.n, p_err=min(p_err, 1.0),
        mean_distortion=qb.mean_distortion(),
        tv_Q_vs_Qbar=tv_head(q, qb), tv_output_vs_iid=min(tv_out, 1.0),
    )


def _categorical(rng, probs):
    """One draw per row of ``probs`` (rows sum to one)."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0])[:, None] * cdf[:, -1:]
    return np.minimum((u >= cdf).sum(axis=1), probs.shape[1] - 1)


def _mc_block(args):
    cb, cfg, model, b, count = args
    rng = np.random.default_rng([cfg.seed, b])
    M, I, G, n = cb.words.shape
    m = rng.integers(0, M, count)
    g = rng.integers(0, G, count)
    se = rng.choice(model.n_se, size=(count, n), p=model.p_se)
    # likelihood encoder, vectorized over trials
    words = cb.words[m, :, g, :]  # (count, I, n)
    lik = np.prod(model.se_given_u[words, se[:, None, :]], axis=2)
    z = lik.sum(axis=1, keepdims=True)
    if np.any(z <= 0):
        raise CodingError("a sampled side sequence has zero likelihood under its whole bin")
    i = _categorical(rng, lik / z)
    u = words[np.arange(count), i]  # (count, n)
    rest_t = model.table(REST_AXES)
    c = u * model.n_se + se
    rest = _categorical(rng, rest_t[c.ravel()]).reshape(count, n)
    sizes = model.rest_sizes
    coords = np.unravel_index(rest, sizes)
    s, y, shat = coords[0], coords[2], coords[4]
    dist = model.distortion[s, shat].mean(axis=1)
    err = np.ones(count, dtype=bool)
    for gv in range(G):
        sel = np.nonzero(g == gv)[0]
        if sel.size == 0:
            continue
        flat = cb.words[:, :, gv, :].reshape(M * I, n)
        typ = kn.joint_type_deviations(flat, y[sel], model.p_uy) <= cfg.delta + 1e-12
        ok = typ.sum(axis=0) == 1
        dec_m = typ.argmax(axis=0) // I
        err[sel] = ~(ok & (dec_m == m[sel]))
    return err.sum(), float(dist.sum()), float((dist ** 2).sum())


def _run_mc(cb, cfg, model):
    blocks = [min(MC_BLOCK, cfg.trials - s) for s in range(0, cfg.trials, MC_BLOCK)]
    parts = ordered_map(_mc_block, [(cb, cfg, model, b, k) for b, k in enumerate(blocks)])
    t = cfg.trials
    errs = sum(p[0] for p in parts)
    d1 = sum(p[1] for p in parts)
    d2 = sum(p[2] for p in parts)
    p_err = errs / t
    mean_d = d1 / t
    var_d = max(d2 / t - mean_d ** 2, 0.0)
    z = 1.96
    return SimReport(
        mode="monte_carlo", n=cb.n, p_err=float(p_err), mean_distortion=float(mean_d),
        p_err_ci=float(z * math.sqrt(p_err * (1 - p_err) / t)),
        distortion_ci=float(z * math.sqrt(var_d / t)), trials=t,
    )


def run_curve(sys, cfgs, n_codebooks: int = 1) -> dict:
    """Average reports over ``n_codebooks`` codebooks for each config.

    Codebook ``c`` of config ``cfg`` uses seed ``cfg.seed + c``.
    """
    from dataclasses import replace

    rows = {"n": [], "p_err": [], "mean_distortion": [], "tv_Q_vs_Qbar": [], "tv_output_vs_iid": []}
    for cfg in cfgs:
        reps = [run(sys, replace(cfg, seed=cfg.seed + c)) for c in range(n_codebooks)]
        rows["n"].append(cfg.n)
        for key in ("p_err", "mean_distortion", "tv_Q_vs_Qbar", "tv_output_vs_iid"):
            vals = [getattr(r, key) for r in reps]
            rows[key].append(None if any(v is None for v in vals) else float(np.mean(vals)))
    return rows


def soft_covering_tv(p_u, v_given_u: pk.Kernel, R: float, n: int, n_codebooks: int, seed: int = 0,
                     cap: int = DEFAULT_CAP) -> list[float]:
    """Exact TV between a random codebook's output mixture and P_V^n.

    Each codebook has floor(2^(nR)) codewords drawn with
    ``default_rng([seed, c])``.
    """
    p = p_u.probs if isinstance(p_u, pk.Dist) else np.asarray(p_u, dtype=float)
    table = np.asarray(v_given_u.table if isinstance(v_given_u, pk.Kernel) else v_given_u, dtype=float)
    nv = table.shape[1]
    if nv ** n > cap:
        raise CapExceededError(f"|V|^n = {nv ** n} exceeds cap {cap}")
    size = max(1, int(math.floor(2.0 ** (n * R) + 1e-9)))
    seqs = all_sequences(nv, n)
    target = product_dist(p @ table, n)

    def one(c):
        rng = np.random.default_rng([seed, c])
        words = rng.choice(p.size, size=(size, n), p=p)
        mix = kn.mixture_output(np.full(size, 1.0 / size), words, seqs, table)
        return min(1.0, 0.5 * float(np.abs(mix - target).sum()))

    return ordered_map(one, range(n_codebooks))

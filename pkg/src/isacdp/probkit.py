"""Finite-alphabet probability core.

Distributions, stochastic kernels and multi-axis joints with named axes, plus
the information measures used by every region formula. All rates are in bits.
Objects validate on construction and are immutable afterwards; inputs outside
the normalization tolerance are rejected rather than renormalized.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import AxisError, BindingError, DimensionError, NormalizationError

NORM_TOL = 1e-12


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


def _check_probs(arr, what, axis=None):
    if not np.all(np.isfinite(arr)):
        raise NormalizationError(f"{what}: non-finite entries")
    if np.any(arr < 0):
        raise NormalizationError(f"{what}: negative entries")
    sums = arr.sum(axis=axis)
    bad = np.abs(sums - 1.0) > NORM_TOL
    if np.any(bad):
        where = np.argwhere(np.atleast_1d(bad))
        first = tuple(int(i) for i in where[0]) if where.size else ()
        raise NormalizationError(
            f"{what}: mass {np.atleast_1d(sums)[np.atleast_1d(bad)][0]!r} "
            f"differs from 1 by more than {NORM_TOL:g} (at {first})"
        )


@dataclass(frozen=True)
class Alphabet:
    size: int
    labels: tuple | None = None

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise ValueError(f"alphabet size must be a positive integer, got {self.size!r}")
        object.__setattr__(self, "size", int(self.size))
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != self.size:
                raise ValueError("labels must have one entry per symbol")
            if len(set(labels)) != len(labels):
                raise ValueError("labels must be distinct")
            object.__setattr__(self, "labels", labels)


def _alpha(a):
    return a if isinstance(a, Alphabet) else Alphabet(int(a))


@dataclass(frozen=True)
class Dist:
    """Probability vector over one alphabet."""

    alphabet: Alphabet
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alphabet", _alpha(self.alphabet))
        probs = _frozen(self.probs)
        if probs.shape != (self.alphabet.size,):
            raise DimensionError(f"expected {self.alphabet.size} probabilities, got shape {probs.shape}")
        _check_probs(probs, "distribution")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def of(cls, probs, labels=None):
        probs = np.asarray(probs, dtype=float)
        return cls(Alphabet(probs.size, labels), probs)

    @classmethod
    def bernoulli(cls, p1):
        return cls.of([1.0 - p1, p1])

    @classmethod
    def uniform(cls, size):
        return cls.of(np.full(size, 1.0 / size))

    def as_joint(self, name):
        return Joint((name,), (self.alphabet,), self.probs)


@dataclass(frozen=True)
class Kernel:
    """Stochastic map from a product of input alphabets to a product of
    output alphabets. ``table`` has shape ``(*input sizes, *output sizes)``
    and every input row sums to one over the output axes."""

    inputs: tuple
    outputs: tuple
    table: np.ndarray

    def __post_init__(self):
        ins = tuple(_alpha(a) for a in self.inputs)
        outs = tuple(_alpha(a) for a in self.outputs)
        if not outs:
            raise DimensionError("kernel needs at least one output alphabet")
        table = _frozen(self.table)
        shape = tuple(a.size for a in ins + outs)
        if table.shape != shape:
            raise DimensionError(f"kernel table has shape {table.shape}, expected {shape}")
        _check_probs(table, "kernel row", axis=tuple(range(len(ins), len(shape))))
        object.__setattr__(self, "inputs", ins)
        object.__setattr__(self, "outputs", outs)
        object.__setattr__(self, "table", table)

    @classmethod
    def from_array(cls, table, n_inputs):
        table = np.asarray(table, dtype=float)
        shape = table.shape
        return cls(tuple(shape[:n_inputs]), tuple(shape[n_inputs:]), table)

    @property
    def rows(self):
        """Table reshaped to (number of input tuples, number of output tuples)."""
        n_in = int(np.prod([a.size for a in self.inputs], dtype=int))
        return self.table.reshape(n_in, -1)

    def is_deterministic(self, atol=0.0):
        return bool(np.all(np.abs(self.rows.max(axis=1) - 1.0) <= atol))


@dataclass(frozen=True)
class Joint:
    """Joint distribution over named axes."""

    axes: tuple
    alphabets: tuple
    probs: np.ndarray

    def __post_init__(self):
        axes = tuple(str(a) for a in self.axes)
        if len(set(axes)) != len(axes):
            raise AxisError(f"duplicate axis names in {axes}")
        alphabets = tuple(_alpha(a) for a in self.alphabets)
        if len(alphabets) != len(axes):
            raise DimensionError("need one alphabet per axis")
        probs = _frozen(self.probs)
        shape = tuple(a.size for a in alphabets)
        if probs.shape != shape:
            raise DimensionError(f"joint has shape {probs.shape}, expected {shape}")
        _check_probs(probs, "joint")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "alphabets", alphabets)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_array(cls, axes, probs):
        probs = np.asarray(probs, dtype=float)
        return cls(tuple(axes), probs.shape, probs)

    def index(self, name):
        try:
            return self.axes.index(name)
        except ValueError:
            raise AxisError(f"unknown axis {name!r}; have {self.axes}") from None

    def size(self, name):
        return self.alphabets[self.index(name)].size


def _names(group) -> tuple:
    if isinstance(group, str):
        return (group,)
    return tuple(group)


def _marginal_array(joint: Joint, keep: Sequence[str]) -> np.ndarray:
    keep = _names(keep)
    idx = [joint.index(k) for k in keep]
    if len(set(idx)) != len(idx):
        raise AxisError(f"axis listed twice in {keep}")
    drop = tuple(i for i in range(len(joint.axes)) if i not in idx)
    arr = joint.probs.sum(axis=drop) if drop else joint.probs
    remaining = [i for i in range(len(joint.axes)) if i in idx]
    order = [remaining.index(i) for i in idx]
    return np.transpose(arr, order)


def marginalize(joint: Joint, keep) -> Joint | Dist:
    """Sum out every axis not in ``keep``; the order of ``keep`` is kept.

    A single kept axis comes back as a :class:`Dist`.
    """
    keep = _names(keep)
    if not keep:
        raise AxisError("keep must name at least one axis")
    arr = _marginal_array(joint, keep)
    if len(keep) == 1:
        return Dist(joint.alphabets[joint.index(keep[0])], arr)
    return Joint(keep, tuple(joint.alphabets[joint.index(k)] for k in keep), arr)


def _as_array(x):
    if isinstance(x, (Dist, Joint)):
        return x.probs
    return np.asarray(x, dtype=float)


def total_variation(p, q) -> float:
    """Half the L1 distance between two distributions on the same space."""
    if isinstance(p, Joint) and isinstance(q, Joint) and p.axes != q.axes:
        raise DimensionError(f"axes differ: {p.axes} vs {q.axes}")
    a, b = _as_array(p), _as_array(q)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(min(1.0, 0.5 * np.abs(a - b).sum()))


def expectation_gap_bound(upsilon: float, p, q) -> float:
    """Upper bound on ``|E_P k - E_Q k|`` over all ``|k| <= upsilon``.

    Uses the un-halved L1 sum, i.e. ``2 * upsilon * TV(P, Q)``.
    """
    if upsilon < 0:
        raise ValueError("upsilon must be nonnegative")
    a, b = _as_array(p), _as_array(q)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(upsilon * np.abs(a - b).sum())


def _plogp(arr):
    arr = np.asarray(arr, dtype=float)
    out = np.zeros_like(arr)
    pos = arr > 0
    out[pos] = arr[pos] * np.log2(arr[pos])
    return out


def entropy(p) -> float:
    """Shannon entropy in bits, with 0 log 0 = 0."""
    return float(max(0.0, -_plogp(_as_array(p)).sum()))


def binary_entropy(x: float) -> float:
    return entropy([x, 1.0 - x])


def _disjoint(*groups):
    seen = set()
    for g in groups:
        for name in g:
            if name in seen:
                raise AxisError(f"axis {name!r} appears in more than one group")
            seen.add(name)


def _group_entropy(joint, names):
    if not names:
        return 0.0
    return entropy(_marginal_array(joint, names))


def mutual_information(joint: Joint, group_a, group_b) -> float:
    """I(A;B) in bits between two disjoint axis groups."""
    a, b = _names(group_a), _names(group_b)
    _disjoint(a, b)
    pab = _marginal_array(joint, a + b)
    sa = int(np.prod(pab.shape[: len(a)], dtype=int))
    pab = pab.reshape(sa, -1)
    pa = pab.sum(axis=1, keepdims=True)
    pb = pab.sum(axis=0, keepdims=True)
    pos = pab > 0
    val = np.sum(pab[pos] * np.log2(pab[pos] / (pa @ pb)[pos]))
    return float(max(0.0, val))


def conditional_mutual_information(joint: Joint, group_a, group_b, group_c) -> float:
    """I(A;B|C) in bits."""
    a, b, c = _names(group_a), _names(group_b), _names(group_c)
    _disjoint(a, b, c)
    if not c:
        return mutual_information(joint, a, b)
    val = (
        _group_entropy(joint, a + c)
        + _group_entropy(joint, b + c)
        - _group_entropy(joint, a + b + c)
        - _group_entropy(joint, c)
    )
    return float(max(0.0, val))


def conditional_entropy(joint: Joint, group_a, group_c) -> float:
    """H(A|C) in bits."""
    a, c = _names(group_a), _names(group_c)
    _disjoint(a, c)
    return float(max(0.0, _group_entropy(joint, a + c) - _group_entropy(joint, c)))


@dataclass(frozen=True)
class Factor:
    """One link of a chain: ``table`` produces ``target`` axes given ``given``."""

    table: Dist | Joint | Kernel
    target: tuple
    given: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "target", _names(self.target))
        object.__setattr__(self, "given", _names(self.given))


def factor(table, target, given=()) -> Factor:
    return Factor(table, target, given)


def _factor_parts(f: Factor):
    t = f.table
    if isinstance(t, Dist):
        ins, outs, arr = (), (t.alphabet,), t.probs
    elif isinstance(t, Joint):
        ins, outs, arr = (), t.alphabets, t.probs
    elif isinstance(t, Kernel):
        ins, outs, arr = t.inputs, t.outputs, t.table
    else:
        raise TypeError(f"unsupported factor table {type(t).__name__}")
    if len(ins) != len(f.given):
        raise DimensionError(f"factor for {f.target} expects {len(ins)} conditioning axes, bound {len(f.given)}")
    if len(outs) != len(f.target):
        raise DimensionError(f"factor for {f.target} produces {len(outs)} axes")
    return ins, outs, arr


def chain_join(factors: Iterable[Factor]) -> Joint:
    """Multiply a chain of factors into a joint distribution.

    Each factor may only condition on axes produced by earlier factors and
    must not produce an axis twice.
    """
    axes: list[str] = []
    alphabets: list[Alphabet] = []
    cur = np.ones(())
    for f in factors:
        ins, outs, arr = _factor_parts(f)
        for g, alpha in zip(f.given, ins):
            if g not in axes:
                raise BindingError(f"factor for {f.target} conditions on unbound axis {g!r}")
            if alphabets[axes.index(g)].size != alpha.size:
                raise DimensionError(f"axis {g!r} has size {alphabets[axes.index(g)].size}, factor expects {alpha.size}")
        for t in f.target:
            if t in axes or f.target.count(t) > 1:
                raise BindingError(f"axis {t!r} is produced twice (cyclic or duplicate binding)")
        cur_idx = list(range(len(axes)))
        new_idx = list(range(len(axes), len(axes) + len(f.target)))
        fac_idx = [axes.index(g) for g in f.given] + new_idx
        cur = np.einsum(cur, cur_idx, arr, fac_idx, cur_idx + new_idx)
        axes.extend(f.target)
        alphabets.extend(outs)
    if not axes:
        raise ValueError("chain_join needs at least one factor")
    return Joint(tuple(axes), tuple(alphabets), cur)


def conditional(joint: Joint, target, given) -> np.ndarray:
    """Table of P(target | given) shaped ``(*given, *target)``.

    Rows for zero-probability conditioning events are left uniform; they
    carry no mass and are unconstrained.
    """
    target, given = _names(target), _names(given)
    _disjoint(target, given)
    arr = _marginal_array(joint, given + target)
    g_shape = arr.shape[: len(given)]
    flat = arr.reshape(int(np.prod(g_shape, dtype=int)), -1)
    z = flat.sum(axis=1, keepdims=True)
    out = np.where(z > 0, flat / np.where(z > 0, z, 1.0), 1.0 / flat.shape[1])
    return out.reshape(arr.shape)


@dataclass(frozen=True)
class DistortionFn:
    """Distortion matrix over source x reconstruction alphabets."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2:
            raise DimensionError("distortion matrix must be 2-D")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ValueError("distortion entries must be finite and nonnegative")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def hamming(cls, size):
        return cls(1.0 - np.eye(size))

    @property
    def d_max(self) -> float:
        return float(self.matrix.max())

    @property
    def shape(self):
        return self.matrix.shape


def expected_distortion(joint: Joint, d: DistortionFn, source="S", reconstruction="Shat") -> float:
    """E[d(source, reconstruction)] under ``joint``."""
    p = _marginal_array(joint, (source, reconstruction))
    if p.shape != d.shape:
        raise DimensionError(f"distortion over {d.shape} but axes have sizes {p.shape}")
    return float(np.sum(p * d.matrix))

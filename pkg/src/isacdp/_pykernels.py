"""Pure numpy implementations of the hot kernels.

These define the reference semantics; ``_ckernels.pyx`` must agree with them
to floating-point rounding.
"""
import numpy as np


def sequence_likelihoods(symbols, seqs, table):
    """Return ``L[c, s] = prod_t table[symbols[c, t], seqs[s, t]]``."""
    symbols = np.asarray(symbols, dtype=np.int64)
    seqs = np.asarray(seqs, dtype=np.int64)
    table = np.asarray(table, dtype=np.float64)
    out = np.ones((symbols.shape[0], seqs.shape[0]))
    for t in range(symbols.shape[1]):
        out *= table[symbols[:, t][:, None], seqs[:, t][None, :]]
    return out


def mixture_output(weights, symbols, seqs, table, block=256):
    """Return ``sum_c weights[c] * L[c, s]`` without holding all of ``L``."""
    weights = np.asarray(weights, dtype=np.float64)
    symbols = np.asarray(symbols, dtype=np.int64)
    out = np.zeros(np.asarray(seqs).shape[0])
    for start in range(0, symbols.shape[0], block):
        stop = start + block
        out += weights[start:stop] @ sequence_likelihoods(symbols[start:stop], seqs, table)
    return out


def joint_type_deviations(words, seqs, p_joint):
    """Max-entry deviation between the joint type of ``(words[c], seqs[s])``
    and ``p_joint``, for every pair ``(c, s)``."""
    words = np.asarray(words, dtype=np.int64)
    seqs = np.asarray(seqs, dtype=np.int64)
    p_joint = np.asarray(p_joint, dtype=np.float64)
    n_a, n_b = p_joint.shape
    n = words.shape[1]
    out = np.zeros((words.shape[0], seqs.shape[0]))
    for a in range(n_a):
        wa = words == a
        for b in range(n_b):
            count = wa.astype(np.float64) @ (seqs == b).T.astype(np.float64)
            np.maximum(out, np.abs(count / n - p_joint[a, b]), out=out)
    return out


def blahut_arimoto(p, dist, beta, tol=1e-12, max_iter=20000):
    """Blahut-Arimoto for one source at slope ``beta`` (nats per distortion unit).

    Returns ``(rate_bits, distortion, q, iterations)``.
    """
    p = np.asarray(p, dtype=np.float64)
    dist = np.asarray(dist, dtype=np.float64)
    m = dist.shape[1]
    q = np.full(m, 1.0 / m)
    # shift each row by its minimum so exp() never underflows to an all-zero row
    expd = np.exp(-beta * (dist - dist.min(axis=1, keepdims=True)))
    it = 0
    for it in range(1, max_iter + 1):
        a = expd * q
        cond = a / a.sum(axis=1, keepdims=True)
        q_new = p @ cond
        delta = np.abs(q_new - q).max()
        q = q_new
        if delta < tol:
            break
    a = expd * q
    cond = a / a.sum(axis=1, keepdims=True)
    joint = p[:, None] * cond
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(joint > 0, cond / q[None, :], 1.0)
        rate = float(np.sum(np.where(joint > 0, joint * np.log2(ratio), 0.0)))
    distortion = float(np.sum(joint * dist))
    return max(rate, 0.0), distortion, q, it

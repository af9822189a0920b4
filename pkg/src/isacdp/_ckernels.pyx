# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_pykernels``.

Loops release the GIL so callers may fan out over threads.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, log2

cnp.import_array()


def sequence_likelihoods(symbols, seqs, table):
    cdef const cnp.int64_t[:, ::1] sym = np.ascontiguousarray(symbols, dtype=np.int64)
    cdef const cnp.int64_t[:, ::1] sq = np.ascontiguousarray(seqs, dtype=np.int64)
    cdef const double[:, ::1] tab = np.ascontiguousarray(table, dtype=np.float64)
    cdef Py_ssize_t n_c = sym.shape[0], n_s = sq.shape[0], n = sym.shape[1]
    out_arr = np.empty((n_c, n_s), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t c, s, t
    cdef double acc
    with nogil:
        for c in range(n_c):
            for s in range(n_s):
                acc = 1.0
                for t in range(n):
                    acc = acc * tab[sym[c, t], sq[s, t]]
                    if acc == 0.0:
                        break
                out[c, s] = acc
    return out_arr


def mixture_output(weights, symbols, seqs, table):
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const cnp.int64_t[:, ::1] sym = np.ascontiguousarray(symbols, dtype=np.int64)
    cdef const cnp.int64_t[:, ::1] sq = np.ascontiguousarray(seqs, dtype=np.int64)
    cdef const double[:, ::1] tab = np.ascontiguousarray(table, dtype=np.float64)
    cdef Py_ssize_t n_c = sym.shape[0], n_s = sq.shape[0], n = sym.shape[1]
    out_arr = np.zeros(n_s, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t c, s, t
    cdef double acc
    with nogil:
        for c in range(n_c):
            if w[c] == 0.0:
                continue
            for s in range(n_s):
                acc = w[c]
                for t in range(n):
                    acc = acc * tab[sym[c, t], sq[s, t]]
                    if acc == 0.0:
                        break
                out[s] += acc
    return out_arr


def joint_type_deviations(words, seqs, p_joint):
    cdef const cnp.int64_t[:, ::1] sq = np.ascontiguousarray(seqs, dtype=np.int64)
    cdef const double[::1] pj = np.ascontiguousarray(p_joint, dtype=np.float64).ravel()
    cdef Py_ssize_t n_b = np.shape(p_joint)[1]
    # word symbols pre-scaled to row offsets of the flattened joint
    cdef const cnp.int64_t[:, ::1] wd = np.ascontiguousarray(words, dtype=np.int64) * n_b
    cdef Py_ssize_t n_c = wd.shape[0], n_s = sq.shape[0], n = wd.shape[1], n_k = pj.shape[0]
    out_arr = np.empty((n_c, n_s), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    counts_arr = np.zeros(n_k, dtype=np.int64)
    cdef cnp.int64_t[::1] counts = counts_arr
    cdef Py_ssize_t c, s, t, k
    cdef double dev, worst, inv_n = 1.0 / n
    with nogil:
        for c in range(n_c):
            for s in range(n_s):
                for k in range(n_k):
                    counts[k] = 0
                for t in range(n):
                    counts[wd[c, t] + sq[s, t]] += 1
                worst = 0.0
                for k in range(n_k):
                    dev = fabs(counts[k] * inv_n - pj[k])
                    if dev > worst:
                        worst = dev
                out[c, s] = worst
    return out_arr


def blahut_arimoto(p, dist, double beta, double tol=1e-12, Py_ssize_t max_iter=20000):
    cdef const double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef const double[:, ::1] d = np.ascontiguousarray(dist, dtype=np.float64)
    cdef Py_ssize_t k = d.shape[0], m = d.shape[1]
    expd_arr = np.empty((k, m), dtype=np.float64)
    cdef double[:, ::1] expd = expd_arr
    q_arr = np.full(m, 1.0 / m)
    cdef double[::1] q = q_arr
    qn_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] qn = qn_arr
    cdef Py_ssize_t i, j, it = 0
    cdef double rowmin, z, delta, rate = 0.0, distortion = 0.0, cond, x
    with nogil:
        for i in range(k):
            rowmin = d[i, 0]
            for j in range(1, m):
                if d[i, j] < rowmin:
                    rowmin = d[i, j]
            for j in range(m):
                expd[i, j] = exp(-beta * (d[i, j] - rowmin))
        while it < max_iter:
            it += 1
            for j in range(m):
                qn[j] = 0.0
            for i in range(k):
                if pv[i] == 0.0:
                    continue
                z = 0.0
                for j in range(m):
                    z += expd[i, j] * q[j]
                for j in range(m):
                    qn[j] += pv[i] * expd[i, j] * q[j] / z
            delta = 0.0
            for j in range(m):
                x = fabs(qn[j] - q[j])
                if x > delta:
                    delta = x
                q[j] = qn[j]
            if delta < tol:
                break
        for i in range(k):
            if pv[i] == 0.0:
                continue
            z = 0.0
            for j in range(m):
                z += expd[i, j] * q[j]
            for j in range(m):
                cond = expd[i, j] * q[j] / z
                if cond > 0.0:
                    rate += pv[i] * cond * log2(cond / q[j])
                    distortion += pv[i] * cond * d[i, j]
    if rate < 0.0:
        rate = 0.0
    return rate, distortion, q_arr, it

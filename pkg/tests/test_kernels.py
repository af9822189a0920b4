import math
import os
import subprocess
import sys

import numpy as np
import pytest

from isacdp import kernels as kn
from isacdp import probkit as pk

BACKENDS = kn.backends()


@pytest.fixture(params=sorted(BACKENDS))
def impl(request):
    return BACKENDS[request.param]


def _data(rng, k_in=4, k_out=3, rows=5, n=4):
    table = rng.dirichlet(np.ones(k_out), size=k_in)
    symbols = rng.integers(0, k_in, size=(rows, n))
    seqs = rng.integers(0, k_out, size=(7, n))
    return symbols, seqs, table


def test_sequence_likelihoods_against_loops(impl, rng):
    symbols, seqs, table = _data(rng)
    out = impl.sequence_likelihoods(symbols, seqs, table)
    for a in range(symbols.shape[0]):
        for b in range(seqs.shape[0]):
            ref = math.prod(table[symbols[a, t], seqs[b, t]] for t in range(symbols.shape[1]))
            assert out[a, b] == pytest.approx(ref, rel=1e-13)


def test_mixture_output_against_loops(impl, rng):
    symbols, seqs, table = _data(rng)
    w = rng.dirichlet(np.ones(symbols.shape[0]))
    out = impl.mixture_output(w, symbols, seqs, table)
    ref = [sum(w[a] * math.prod(table[symbols[a, t], s[t]] for t in range(s.size)) for a in range(w.size))
           for s in seqs]
    assert np.allclose(out, ref, rtol=1e-13, atol=0)


def test_joint_type_deviations_against_loops(impl, rng):
    words = rng.integers(0, 2, size=(6, 8))
    seqs = rng.integers(0, 3, size=(5, 8))
    p = rng.dirichlet(np.ones(6)).reshape(2, 3)
    out = impl.joint_type_deviations(words, seqs, p)
    for a in range(words.shape[0]):
        for b in range(seqs.shape[0]):
            t = np.zeros((2, 3))
            for u, y in zip(words[a], seqs[b]):
                t[u, y] += 1 / 8
            assert out[a, b] == pytest.approx(np.abs(t - p).max(), abs=1e-15)


def test_blahut_arimoto_binary_slope(impl):
    # on the binary Hamming curve the slope parameter fixes D = 1 / (1 + e^beta)
    beta = 2.0
    rate, dist, q, _ = impl.blahut_arimoto(np.array([0.5, 0.5]), 1 - np.eye(2), beta)
    d_ref = 1 / (1 + math.exp(beta))
    assert dist == pytest.approx(d_ref, abs=1e-9)
    assert rate == pytest.approx(1 - pk.binary_entropy(d_ref), abs=1e-9)
    assert np.allclose(q, [0.5, 0.5])


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled extension not built")
def test_backends_agree(rng):
    py, cy = BACKENDS["numpy"], BACKENDS["cython"]
    symbols, seqs, table = _data(rng, rows=30, n=6)
    w = rng.dirichlet(np.ones(30))
    assert np.allclose(py.sequence_likelihoods(symbols, seqs, table), cy.sequence_likelihoods(symbols, seqs, table), rtol=1e-12)
    assert np.allclose(py.mixture_output(w, symbols, seqs, table), cy.mixture_output(w, symbols, seqs, table), rtol=1e-12)
    p = rng.dirichlet(np.ones(12)).reshape(4, 3)
    assert np.allclose(py.joint_type_deviations(symbols, seqs, p), cy.joint_type_deviations(symbols, seqs, p), atol=1e-15)
    src = rng.dirichlet(np.ones(3))
    a, b = py.blahut_arimoto(src, 1 - np.eye(3), 1.5), cy.blahut_arimoto(src, 1 - np.eye(3), 1.5)
    assert a[0] == pytest.approx(b[0], abs=1e-10) and a[1] == pytest.approx(b[1], abs=1e-10)


def test_pure_python_switch():
    code = "import isacdp.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, ISACDP_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"

import itertools
import math
from dataclasses import replace

import numpy as np
import pytest

from isacdp import codesim as cs
from isacdp import probkit as pk
from isacdp import regions as rg
from isacdp.errors import CapExceededError, CodingError

from conftest import bsc_system, near_noiseless_system, perfect_sensing_system


def _p_u(sys):
    return pk.marginalize(sys.joint, "U").probs


def test_all_sequences_and_product_dist():
    seqs = cs.all_sequences(2, 3)
    assert seqs.tolist() == [list(t) for t in itertools.product(range(2), repeat=3)]
    p = cs.product_dist([0.25, 0.75], 2)
    assert np.allclose(p, [1 / 16, 3 / 16, 3 / 16, 9 / 16])


def test_config_from_rates():
    cfg = cs.SimConfig.from_rates(4, 0.5, 0.25, 0.0)
    assert (cfg.km, cfg.ki, cfg.kg) == (2, 1, 0)
    assert cfg.rates == (0.5, 0.25, 0.0)
    with pytest.raises(ValueError, match="not a nonnegative integer"):
        cs.SimConfig.from_rates(3, 0.5)
    with pytest.raises(ValueError):
        cs.SimConfig(n=0)
    with pytest.raises(ValueError):
        cs.SimConfig(n=2, delta=0.0)


def test_codebook_generation():
    single = cs.generate_codebook([0.5, 0.5], cs.SimConfig(5))
    assert single.words.shape == (1, 1, 1, 5)
    a = cs.generate_codebook([0.3, 0.7], cs.SimConfig(4, 1, 1, 1, seed=9))
    b = cs.generate_codebook([0.3, 0.7], cs.SimConfig(4, 1, 1, 1, seed=9))
    assert np.array_equal(a.words, b.words)


def test_codebook_symbol_frequency_within_three_sigma():
    cb = cs.generate_codebook([0.3, 0.7], cs.SimConfig(1, 12, 0, 0, seed=2))
    n = cb.words.size
    freq = cb.words.mean()
    assert abs(freq - 0.7) <= 3 * math.sqrt(0.7 * 0.3 / n)


def test_codebook_from_words_requires_powers_of_two():
    with pytest.raises(ValueError):
        cs.codebook_from_words(np.zeros((3, 1, 1, 2)))
    cb = cs.codebook_from_words(np.zeros((2, 4, 1, 3)))
    assert (cb.km, cb.ki, cb.kg, cb.n) == (1, 2, 0, 3)


def test_likelihood_weights_by_hand():
    sys = bsc_system()
    se_u = cs.letter_model(sys).se_given_u
    words = np.array([[0, 0], [0, 1], [1, 1], [1, 0]]).reshape(1, 4, 1, 2)
    cb = cs.codebook_from_words(words)
    se = [0, 1]
    w = cs.likelihood_weights(cb, se_u, 0, 0, se)
    # P(se|u) is a BSC(0.3): products of 0.7 (agree) and 0.3 (disagree)
    lik = np.array([0.7 * 0.3, 0.7 * 0.7, 0.3 * 0.7, 0.3 * 0.3])
    assert np.allclose(w, lik / lik.sum(), atol=1e-15)


def test_likelihood_encoder_edge_cases():
    se_u = np.array([[0.7, 0.3], [0.3, 0.7]])
    rng = np.random.default_rng(0)
    only = cs.codebook_from_words(np.zeros((2, 1, 1, 3), dtype=int))
    assert all(cs.likelihood_encoder(only, se_u, 1, 0, [1, 0, 1], rng) == 0 for _ in range(10))
    same = cs.codebook_from_words(np.ones((1, 4, 1, 3), dtype=int))
    assert np.allclose(cs.likelihood_weights(same, se_u, 0, 0, [0, 1, 1]), 0.25)
    hard = np.array([[1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(CodingError):
        cs.likelihood_weights(same, hard, 0, 0, [1, 1, 1])


def test_typicality_decoder():
    p_uy = np.array([[0.5, 0.0], [0.0, 0.5]])
    words = np.array([[0, 0, 1, 1], [1, 1, 0, 0]]).reshape(2, 1, 1, 4)
    cb = cs.codebook_from_words(words)
    assert cs.typicality_decode(cb, p_uy, 0, [1, 1, 0, 0], 0.1) == (1, 0)
    twins = cs.codebook_from_words(np.array([[0, 0, 1, 1], [0, 0, 1, 1]]).reshape(2, 1, 1, 4))
    assert cs.typicality_decode(twins, p_uy, 0, [0, 0, 1, 1], 0.1) is None
    assert cs.typicality_decode(cb, p_uy, 0, [0, 1, 0, 1], 0.1) is None
    with pytest.raises(ValueError):
        cs.typicality_decode(cb, p_uy, 0, [0, 0, 1, 1], 0.0)


def test_near_noiseless_decoding_exact_matches_monte_carlo_and_improves():
    sys = near_noiseless_system()
    short = []
    for seed in range(10):
        base = cs.SimConfig(8, 2, 0, 0, delta=0.2, trials=1000, seed=seed)
        ex = cs.run(sys, base)
        mc = cs.run(sys, replace(base, mode="monte_carlo"))
        assert abs(ex.p_err - mc.p_err) <= max(mc.p_err_ci, 1e-3) + 0.01
        short.append(1 - ex.p_err)
    long = [1 - cs.run(sys, cs.SimConfig(32, 2, 0, 0, delta=0.2, trials=1000, seed=s, mode="monte_carlo")).p_err
            for s in range(10)]
    assert np.mean(long) >= 0.9
    assert np.mean(long) > np.mean(short)


def test_single_codeword_idealized_is_the_system_law():
    sys = rg.random_system(11, sizes={"U": 1})
    cb = cs.generate_codebook(_p_u(sys), cs.SimConfig(1))
    q = cs.idealized_distribution(sys, cb)
    full = q.full_joint()  # (se, rest) with rest = (S, X, Y, Z, Shat)
    ref = np.transpose(sys.joint.probs, (0, 2, 1, 3, 4, 5, 6))[:, 0]  # Se, S, X, Y, Z, Shat
    assert np.allclose(full.reshape(ref.shape), ref, atol=1e-15)
    assert full.sum() == pytest.approx(1.0, abs=1e-12)


def test_zero_bin_rate_with_independent_side_information_is_exact():
    sys = rg.random_system(2, deterministic_encoder=True)
    cb = cs.generate_codebook(_p_u(sys), cs.SimConfig(3, 1, 0, 1, seed=4))
    q, qb = cs.idealized_distribution(sys, cb), cs.induced_distribution(sys, cb)
    assert np.allclose(q.head, qb.head, atol=1e-15)


def test_structural_identity_of_bin_weights():
    sys = bsc_system()
    cb = cs.generate_codebook(_p_u(sys), cs.SimConfig(3, 1, 2, 0, seed=1))
    q, qb = cs.idealized_distribution(sys, cb), cs.induced_distribution(sys, cb)
    cond = cs.bin_weights_from_idealized(q)
    m, i, g, _ = q.head.shape
    se = cs.all_sequences(2, 3)
    lm = cs.letter_model(sys)
    for mm in range(m):
        for s_idx, seq in enumerate(se):
            w = cs.likelihood_weights(cb, lm.se_given_u, mm, 0, seq)
            assert np.allclose(cond[mm, :, 0, s_idx], w, atol=1e-15)


def test_tv_full_joint_equals_head_and_marginal():
    sys = bsc_system()
    cb = cs.generate_codebook(_p_u(sys), cs.SimConfig(2, 1, 1, 1, seed=3))
    q, qb = cs.idealized_distribution(sys, cb), cs.induced_distribution(sys, cb)
    full = 0.5 * np.abs(q.full_joint() - qb.full_joint()).sum()
    assert abs(full - cs.tv_mgs(q, qb)) <= 1e-12
    assert abs(full - cs.tv_head(q, qb)) <= 1e-12


def test_perfect_sensing_output_is_iid_at_every_block_length():
    sys = perfect_sensing_system()
    for n in (1, 2, 4):
        rep = cs.run(sys, cs.SimConfig(n, 1, 0, 0, seed=n))
        assert rep.tv_output_vs_iid <= 1e-12
        assert rep.mean_distortion <= 1e-12


def test_trivial_codebook_distortion_is_single_letter():
    sys = rg.random_system(6, sizes={"U": 1})
    rep = cs.run(sys, cs.SimConfig(3))
    assert rep.mean_distortion == pytest.approx(rg.distortion_of(sys), abs=1e-12)


def test_exact_and_monte_carlo_agree():
    sys = bsc_system()
    cfg = cs.SimConfig(4, 1, 1, 1, seed=0, trials=20000)
    ex = cs.run(sys, cfg)
    mc = cs.run(sys, replace(cfg, mode="monte_carlo"))
    assert abs(ex.p_err - mc.p_err) <= 2 * mc.p_err_ci + 1e-3
    assert abs(ex.mean_distortion - mc.mean_distortion) <= 2 * mc.distortion_ci + 1e-3
    again = cs.run(sys, replace(cfg, mode="monte_carlo"))
    assert again == mc


def test_reported_probabilities_are_in_range():
    sys = bsc_system()
    rep = cs.run(sys, cs.SimConfig(3, 1, 1, 0, seed=2))
    for v in (rep.p_err, rep.tv_Q_vs_Qbar, rep.tv_output_vs_iid):
        assert 0.0 <= v <= 1.0
    pair = cs.induced_distribution(sys, cs.generate_codebook(_p_u(sys), cs.SimConfig(3, 1, 1, 0, seed=2))).message_pair(0.1)
    assert pair.sum() == pytest.approx(1.0, abs=1e-12)


def test_cap_is_enforced():
    sys = bsc_system()
    cfg = cs.SimConfig(4, 1, 1, 0, cap=100)
    with pytest.raises(CapExceededError):
        cs.run(sys, cfg)
    with pytest.raises(CapExceededError):
        cs.soft_covering_tv([0.5, 0.5], np.eye(2), 0.5, 12, 1, cap=1000)


def test_soft_covering_independent_output_is_exact():
    v = pk.Kernel.from_array([[0.3, 0.7], [0.3, 0.7]], 1)
    tvs = cs.soft_covering_tv(pk.Dist.uniform(2), v, 0.5, 6, 5, seed=0)
    assert max(tvs) <= 1e-12


def test_run_curve_shapes():
    sys = bsc_system()
    rows = cs.run_curve(sys, [cs.SimConfig(2, 0, 1, 0), cs.SimConfig(4, 0, 2, 0)], n_codebooks=2)
    assert rows["n"] == [2, 4] and len(rows["p_err"]) == 2

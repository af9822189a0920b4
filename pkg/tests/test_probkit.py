import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isacdp import probkit as pk
from isacdp.errors import AxisError, BindingError, DimensionError, NormalizationError
from isacdp.regions import binary_example

from conftest import ax, dict_entropy, dict_mi, loop_joint, project


def simplex(draw_seed, k):
    return np.random.default_rng(draw_seed).dirichlet(np.ones(k))


seeds = st.integers(0, 2**32 - 1)


def test_alphabet_validation():
    assert pk.Alphabet(3).size == 3
    with pytest.raises(ValueError):
        pk.Alphabet(0)
    with pytest.raises(ValueError):
        pk.Alphabet(2, ("a", "a"))
    with pytest.raises(ValueError):
        pk.Alphabet(2, ("a",))


def test_dist_rejects_unnormalized():
    with pytest.raises(NormalizationError):
        pk.Dist.of([0.5, 0.499999])
    with pytest.raises(NormalizationError):
        pk.Dist.of([1.5, -0.5])
    # within tolerance is accepted as given, not renormalized
    d = pk.Dist.of([0.5, 0.5 + 1e-13])
    assert d.probs[1] == 0.5 + 1e-13


def test_kernel_rows_and_determinism():
    k = pk.Kernel.from_array([[1.0, 0.0], [0.0, 1.0]], 1)
    assert k.is_deterministic()
    with pytest.raises(NormalizationError):
        pk.Kernel.from_array([[0.6, 0.3], [0.5, 0.5]], 1)
    with pytest.raises(DimensionError):
        pk.Kernel.from_array([0.5, 0.5], 1)


def test_joint_axes():
    j = pk.Joint.from_array(("A", "B"), np.full((2, 3), 1 / 6))
    assert j.size("B") == 3
    with pytest.raises(AxisError):
        j.index("C")
    with pytest.raises(AxisError):
        pk.Joint.from_array(("A", "A"), np.full((2, 2), 0.25))


def test_total_variation_examples():
    assert pk.total_variation(pk.Dist.bernoulli(0.3), pk.Dist.bernoulli(0.5)) == pytest.approx(0.2, abs=1e-15)
    assert pk.total_variation([1, 0], [0, 1]) == 1.0
    assert pk.expectation_gap_bound(2.0, [1, 0], [0.5, 0.5]) == pytest.approx(2.0)


def test_entropy_examples():
    assert pk.entropy(pk.Dist.uniform(4)) == pytest.approx(2.0)
    assert pk.entropy([1.0, 0.0]) == 0.0
    assert pk.binary_entropy(0.5) == pytest.approx(1.0)
    assert pk.binary_entropy(0.0) == 0.0


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(2, 4), st.integers(2, 4))
def test_tv_data_processing(seed, a, b):
    rng = np.random.default_rng(seed)
    p, q = rng.dirichlet(np.ones(a)), rng.dirichlet(np.ones(a))
    k = pk.Kernel.from_array(rng.dirichlet(np.ones(b), size=a), 1)
    jp = pk.chain_join([pk.factor(pk.Dist.of(p), "A"), pk.factor(k, "B", "A")])
    jq = pk.chain_join([pk.factor(pk.Dist.of(q), "A"), pk.factor(k, "B", "A")])
    assert abs(pk.total_variation(jp.probs, jq.probs) - pk.total_variation(p, q)) <= 1e-12


def test_tv_bounds_expectation_gaps(rng):
    for _ in range(1000):
        k = int(rng.integers(2, 6))
        p, q = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
        lo, width = rng.normal(), rng.exponential()
        f = lo + width * rng.random(k)
        gap = abs(p @ f - q @ f)
        b = f.max() - f.min()
        assert gap <= b * pk.total_variation(p, q) + 1e-12
        assert gap <= pk.expectation_gap_bound(b, p, q) + 1e-12


def _random_joint(seed, shape=(2, 3, 2)):
    rng = np.random.default_rng(seed)
    return pk.Joint.from_array(("A", "B", "C"), rng.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape))


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_mutual_information_properties(seed):
    j = _random_joint(seed)
    iab = pk.mutual_information(j, "A", "B")
    assert iab >= -1e-9
    assert abs(iab - pk.mutual_information(j, "B", "A")) <= 1e-9
    # chain rule I(A;B,C) = I(A;B) + I(A;C|B)
    lhs = pk.mutual_information(j, "A", ("B", "C"))
    rhs = iab + pk.conditional_mutual_information(j, "A", "C", "B")
    assert abs(lhs - rhs) <= 1e-9
    # H(A|B) = H(A,B) - H(B)
    hab = pk.entropy(pk.marginalize(j, ("A", "B")).probs.ravel())
    assert abs(pk.conditional_entropy(j, "A", "B") - (hab - pk.entropy(pk.marginalize(j, "B")))) <= 1e-9


def test_mutual_information_against_loop_oracle(rng):
    arr = rng.dirichlet(np.ones(12)).reshape(3, 4)
    table = {(a, b): arr[a, b] for a in range(3) for b in range(4)}
    j = pk.Joint.from_array(("A", "B"), arr)
    assert pk.mutual_information(j, "A", "B") == pytest.approx(dict_mi(table, [0], [1]), abs=1e-12)


def test_independent_axes_have_zero_information():
    j = pk.Joint.from_array(("A", "B"), np.outer([0.2, 0.8], [0.5, 0.3, 0.2]))
    assert pk.mutual_information(j, "A", "B") == pytest.approx(0.0, abs=1e-12)


def test_overlapping_groups_rejected():
    j = _random_joint(0)
    with pytest.raises(AxisError):
        pk.mutual_information(j, "A", ("A", "B"))


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_chain_join_reproduces_factors(seed):
    rng = np.random.default_rng(seed)
    p_a = rng.dirichlet(np.ones(3))
    k_b = rng.dirichlet(np.ones(2), size=3)
    k_c = rng.dirichlet(np.ones(2), size=(3, 2))
    j = pk.chain_join([
        pk.factor(pk.Dist.of(p_a), "A"),
        pk.factor(pk.Kernel.from_array(k_b, 1), "B", "A"),
        pk.factor(pk.Kernel.from_array(k_c, 2), "C", ("A", "B")),
    ])
    assert np.allclose(pk.marginalize(j, "A").probs, p_a, atol=1e-15)
    assert np.allclose(pk.conditional(j, "B", "A"), k_b, atol=1e-12)
    assert np.allclose(pk.conditional(j, "C", ("A", "B")), k_c, atol=1e-12)


def test_chain_join_binding_errors():
    d = pk.Dist.uniform(2)
    k = pk.Kernel.from_array(np.eye(2), 1)
    with pytest.raises(BindingError):
        pk.chain_join([pk.factor(k, "B", "A")])
    with pytest.raises(BindingError):
        pk.chain_join([pk.factor(d, "A"), pk.factor(k, "A", "A")])
    k3 = pk.Kernel.from_array(np.eye(3), 1)
    with pytest.raises(DimensionError):
        pk.chain_join([pk.factor(d, "A"), pk.factor(k3, "B", "A")])


def test_conditional_on_zero_rows_is_uniform():
    j = pk.Joint.from_array(("A", "B"), np.array([[0.5, 0.5], [0.0, 0.0]]))
    assert np.allclose(pk.conditional(j, "B", "A")[1], [0.5, 0.5])


def test_expected_distortion_trivial():
    j = pk.Joint.from_array(("S", "Shat"), np.full((2, 2), 0.25))
    assert pk.expected_distortion(j, pk.DistortionFn.hamming(2)) == pytest.approx(0.5)


def test_expected_distortion_binary_example_matches_enumeration():
    sys = binary_example()
    table = loop_joint(sys)
    oracle = sum(p for k, p in table.items() if k[1] != k[6])
    assert pk.expected_distortion(sys.joint, sys.distortion) == pytest.approx(oracle, abs=1e-15)
    # the same value from the (S, Shat) marginal alone
    pair = project(table, ax("S", "Shat"))
    assert oracle == pytest.approx(pair[(0, 1)] + pair[(1, 0)], abs=1e-15)


def test_distortion_fn():
    d = pk.DistortionFn(np.array([[0.0, 2.0], [1.0, 0.0]]))
    assert d.d_max == 2.0
    with pytest.raises(ValueError):
        pk.DistortionFn(np.array([[0.0, -1.0], [1.0, 0.0]]))


def test_dict_entropy_oracle_sanity():
    assert dict_entropy({0: 0.5, 1: 0.5}) == pytest.approx(1.0)
    assert math.isclose(dict_mi({(0, 0): 0.5, (1, 1): 0.5}, [0], [1]), 1.0)

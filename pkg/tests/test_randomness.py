import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from iuq.errors import InvalidParameterError
from iuq.randomness import (RngStream, derive_keys, derive_stream, next_exponential, next_uniform,
                            uniform_block)

labels = st.lists(st.one_of(st.text(max_size=5), st.integers(0, 2**63)), max_size=6)


def test_same_lineage_same_stream():
    a = derive_stream(42, ["b", 0]).uniforms(100)
    b = derive_stream(42, ["b", 0]).uniforms(100)
    assert a.tolist() == b.tolist()


def test_sibling_streams_uncorrelated():
    a = derive_stream(42, ["b", 0]).uniforms(100_000)
    b = derive_stream(42, ["b", 1]).uniforms(100_000)
    assert a[0] != b[0]
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01


def test_associativity_example():
    s = derive_stream(42, ["b", 0, "r", 3])
    t = derive_stream(42, ["b", 0]).derive(["r", 3])
    assert s.key == t.key
    assert s.uniforms(10).tolist() == t.uniforms(10).tolist()


@given(st.integers(0, 2**64 - 1), labels, labels)
def test_associativity_property(seed, first, second):
    assert derive_stream(seed, first + second).key == derive_stream(seed, first).derive(second).key


def test_seed_and_label_both_matter():
    assert derive_stream(1, ["b", 0]).key != derive_stream(2, ["b", 0]).key
    assert derive_stream(1, ["b", 0]).key != derive_stream(1, ["r", 0]).key
    assert derive_stream(1, ["0"]).key != derive_stream(1, [0]).key


def test_vectorized_keys_match_scalar_derivation():
    root = derive_stream(9, ["trial", 3])
    keys = root.child_keys(["b", np.arange(4)[:, None], "r", np.arange(5)[None, :]])
    assert keys.shape == (4, 5)
    for b in range(4):
        for r in range(5):
            assert int(keys[b, r]) == root.derive(["b", b, "r", r]).key


def test_block_matches_sequential_draws():
    s = derive_stream(3, ["x", 1])
    block = uniform_block(np.uint64(s.key), 7)
    seq = [next_uniform(s) for _ in range(7)]
    assert block.tolist() == seq
    assert s.position == 7
    # continuing a stream picks up at the counter
    assert s.uniforms(3).tolist() == uniform_block(np.uint64(s.key), 3, start=7).tolist()


def test_uniform_range_and_moments():
    u = derive_stream(7, ["moments"]).uniforms(1_000_000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.002
    assert abs(u.var() - 1 / 12) < 0.002


def test_uniform_ks():
    u = derive_stream(11, ["ks"]).uniforms(1_000_000)
    d = stats.kstest(u, "uniform").statistic
    # asymptotic 1% critical value of the KS statistic
    assert d < 1.628 / np.sqrt(u.size)


def test_exponential_at_zero_uniform():
    from iuq.randomness import exponential_from_uniform
    assert exponential_from_uniform(0.0, 1.0) == 0.0


@pytest.mark.parametrize("rate, mean, var", [(0.5, 2.0, 4.0), (1.0, 1.0, 1.0)])
def test_exponential_moments(rate, mean, var):
    s = derive_stream(5, ["exp", int(rate * 10)])
    x = -np.log1p(-s.uniforms(1_000_000)) / rate
    assert abs(x.mean() - mean) < 3 * np.sqrt(var / x.size)
    if rate == 1.0:
        assert abs(x.var() - 1.0) < 0.01
    if rate == 0.5:
        assert abs(x.mean() - 2.0) < 0.006


def test_next_exponential_scalar_matches_inverse_cdf():
    s1 = derive_stream(5, ["e"])
    s2 = derive_stream(5, ["e"])
    u = next_uniform(s1)
    assert next_exponential(s2, 2.0) == pytest.approx(-np.log1p(-u) / 2.0, rel=1e-15)


@pytest.mark.parametrize("rate", [0.0, -1.0, float("nan")])
def test_exponential_rejects_bad_rate(rate):
    with pytest.raises(InvalidParameterError):
        next_exponential(derive_stream(1, []), rate)


@pytest.mark.parametrize("seed", [-1, 2**64, 1.5, "7"])
def test_bad_seed(seed):
    with pytest.raises(InvalidParameterError):
        derive_stream(seed, [])


def test_bad_labels():
    with pytest.raises(InvalidParameterError):
        derive_stream(1, [-3])
    with pytest.raises(InvalidParameterError):
        derive_stream(1, [1.5])
    with pytest.raises(InvalidParameterError):
        derive_keys(np.uint64(1), [np.array([-1, 2])])


def test_streams_are_values():
    s = derive_stream(1, ["a"])
    child = s.derive(["b"])
    s.uniforms(5)
    assert s.derive(["b"]).key == child.key
    assert isinstance(child, RngStream) and child.lineage == ("a", "b")

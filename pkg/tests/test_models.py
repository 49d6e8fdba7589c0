import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from realism.models import (
    AlphabetError,
    ConstantSymbol,
    IIDCategorical,
    MarkovChain,
    MemorizedDataset,
    PeriodicPattern,
    Sequence,
    Uniform,
    UnsupportedModelError,
    all_sequences,
    bernoulli,
    conditional_log_prob,
    entropy_rate,
    log_prob,
    sample,
)


def brute_log_prob(model, x):
    """Chain rule in plain Python floats, one symbol at a time."""
    total = 0.0
    for i, s in enumerate(x.symbols):
        total += conditional_log_prob(model, Sequence(x.symbols[:i], x.alphabet), s)
    return total


def random_markov(rng, a):
    t = rng.dirichlet(np.ones(a), size=a)
    return MarkovChain(tuple(map(tuple, t.tolist())))


class TestSequence:
    def test_string_round_trip(self):
        x = Sequence.from_string("0110", 2)
        assert x.symbols == (0, 1, 1, 0)
        assert x.to_string() == "0110"
        assert len(x) == 4

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            Sequence.from_string("012", 2)

    def test_bytes(self):
        x = Sequence.from_bytes(b"\x00\xff")
        assert x.alphabet == 256 and x.symbols == (0, 255)
        assert x.to_bytes() == b"\x00\xff"

    def test_alphabet_must_be_two_or_more(self):
        with pytest.raises(ValueError):
            Sequence((0,), 1)


def test_fair_coin_every_length_ten_sequence():
    P = bernoulli(0.5)
    lp = P.log_prob_many(all_sequences(2, 10))
    np.testing.assert_allclose(lp, -10 * math.log(2), rtol=0, atol=1e-12)


def test_constant_symbol_point_mass():
    M = ConstantSymbol(2, 0)
    assert log_prob(M, Sequence((0,) * 50)) == 0.0
    assert log_prob(M, Sequence((0, 1, 0))) == -math.inf


def test_most_probable_sequence_is_all_ones():
    P = bernoulli(0.51)
    arr = all_sequences(2, 10)
    lp = P.log_prob_many(arr)
    best = np.flatnonzero(lp == lp.max())
    assert len(best) == 1
    assert arr[best[0]].tolist() == [1] * 10


def test_empty_sequence_rejected():
    with pytest.raises(ValueError):
        log_prob(bernoulli(0.5), Sequence((), 2))


def test_alphabet_mismatch():
    with pytest.raises(AlphabetError):
        log_prob(bernoulli(0.5), Sequence((0, 1, 2), 3))


def test_conditional_iid_ignores_prefix():
    P = bernoulli(0.8)
    for prefix in ["", "0", "1101"]:
        assert conditional_log_prob(P, Sequence.from_string(prefix), 1) == pytest.approx(math.log(0.8), abs=1e-15)


def test_conditional_markov():
    M = MarkovChain(((0.7, 0.3), (0.4, 0.6)))
    assert conditional_log_prob(M, Sequence.from_string("110"), 1) == pytest.approx(math.log(0.3), abs=1e-15)


def test_chain_rule_random_models():
    rng = np.random.default_rng(11)
    for i in range(100):
        a = int(rng.integers(2, 5))
        n = int(rng.integers(1, 20))
        kind = i % 4
        if kind == 0:
            model = IIDCategorical(tuple(rng.dirichlet(np.ones(a)).tolist()))
        elif kind == 1:
            model = random_markov(rng, a)
        elif kind == 2:
            model = PeriodicPattern(a, tuple(rng.integers(0, a, size=3).tolist()))
        else:
            data = rng.integers(0, a, size=(3, n))
            model = MemorizedDataset(a, tuple(map(tuple, data.tolist())))
        x = model.sample(n, int(rng.integers(1 << 30)))
        assert brute_log_prob(model, x) == pytest.approx(model.log_prob(x), abs=1e-12)


@pytest.mark.parametrize(
    "model, expected",
    [
        (bernoulli(0.5), math.log(2)),
        (Uniform(256), math.log(256)),
        (bernoulli(0.8), -0.8 * math.log(0.8) - 0.2 * math.log(0.2)),
    ],
)
def test_entropy_rate_closed_forms(model, expected):
    assert entropy_rate(model) == pytest.approx(expected, abs=1e-14)


def test_binary_entropy_value():
    assert entropy_rate(bernoulli(0.8)) == pytest.approx(0.5004, abs=1e-4)


def test_markov_entropy_rate_matches_stationary_formula():
    t = np.array([[0.9, 0.1], [0.3, 0.7]])
    # Stationary law of a two-state chain: (b, a) / (a + b) with a = P(1|0), b = P(0|1).
    pi = np.array([0.3, 0.1]) / 0.4
    h = -sum(pi[i] * t[i, j] * math.log(t[i, j]) for i in range(2) for j in range(2))
    assert entropy_rate(MarkovChain(tuple(map(tuple, t)))) == pytest.approx(h, abs=1e-12)


def test_entropy_rate_unsupported():
    with pytest.raises(UnsupportedModelError):
        entropy_rate(PeriodicPattern(2, (0, 1)))


def test_non_ergodic_markov_rejected():
    M = MarkovChain(((1.0, 0.0), (0.0, 1.0)))
    with pytest.raises(ValueError):
        M.entropy_rate()


def test_rows_must_normalize():
    with pytest.raises(ValueError):
        MarkovChain(((0.5, 0.6), (0.5, 0.5)))
    with pytest.raises(ValueError):
        IIDCategorical((0.5, 0.4))


def test_sampling_examples():
    assert sample(ConstantSymbol(2, 0), 5, seed=123).to_string() == "00000"
    x = sample(bernoulli(0.5), 10**6, seed=1)
    frac = float(np.mean(x.array))
    assert 0.4985 <= frac <= 0.5015
    assert sample(bernoulli(0.5), 200, 9) == sample(bernoulli(0.5), 200, 9)


def test_sample_frequencies_within_three_se():
    probs = (0.1, 0.2, 0.3, 0.4)
    x = sample(IIDCategorical(probs), 10**6, seed=4)
    freq = np.bincount(x.array, minlength=4) / 10**6
    se = np.sqrt(np.array(probs) * (1 - np.array(probs)) / 10**6)
    assert np.all(np.abs(freq - probs) < 3 * se)


def test_memorized_dataset_structure():
    D = ((0, 1, 1), (1, 1, 0), (0, 1, 1))
    M = MemorizedDataset(2, D)
    arr = all_sequences(2, 3)
    lp = M.log_prob_many(arr)
    counts = {s: D.count(s) for s in set(D)}
    for row, v in zip(arr.tolist(), lp):
        c = counts.get(tuple(row), 0)
        if c:
            assert v == pytest.approx(math.log(c / len(D)), abs=1e-15)
        else:
            assert v == -math.inf


def test_log_prob_value_semantics():
    P = random_markov(np.random.default_rng(0), 3)
    a = Sequence((0, 2, 1, 1), 3)
    b = Sequence.from_string("0211", 3)
    c = Sequence.from_array(np.array([0, 2, 1, 1]), 3)
    assert log_prob(P, a) == log_prob(P, b) == log_prob(P, c)


def _normalized_models():
    rng = np.random.default_rng(5)
    return [
        bernoulli(0.3),
        Uniform(2),
        ConstantSymbol(2, 1),
        random_markov(rng, 2),
        MarkovChain(((0.2, 0.8), (0.6, 0.4)), initial=(0.9, 0.1)),
        PeriodicPattern(2, (0, 0, 1)),
    ]


@pytest.mark.parametrize("model", _normalized_models(), ids=lambda m: m.kind)
def test_total_mass_is_one(model):
    for n in range(1, 13):
        total = math.fsum(np.exp(model.log_prob_many(all_sequences(2, n))))
        assert total == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(
    probs=st.lists(st.floats(0.01, 1.0), min_size=2, max_size=5),
    symbols=st.lists(st.integers(0, 4), min_size=1, max_size=40),
)
def test_iid_log_prob_is_sum_of_symbol_terms(probs, symbols):
    p = np.array(probs) / sum(probs)
    p[-1] = 1.0 - p[:-1].sum()
    a = len(p)
    x = Sequence(tuple(s % a for s in symbols), a)
    expected = math.fsum(math.log(p[s]) for s in x.symbols)
    assert IIDCategorical(tuple(p.tolist())).log_prob(x) == pytest.approx(expected, abs=1e-10)


def test_itertools_enumeration_order_matches():
    arr = all_sequences(3, 3)
    assert arr.tolist() == [list(t) for t in itertools.product(range(3), repeat=3)]

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rank1.errors import ConfigInvalid, Degenerate
from rank1.sequences import (CustomSequence, MildSequence, Polynomial, SequencePair,
                             parse_sequence)


@pytest.mark.parametrize("text, coeffs", [
    ("n^2", (0, 0, 1)),
    ("n**3", (0, 0, 0, 1)),
    ("2*n^2 + 3*n - 1", (-1, 3, 2)),
    ("poly:0,1,1", (0, 1, 1)),
])
def test_parse_polynomials(text, coeffs):
    seq = parse_sequence(text)
    assert isinstance(seq, Polynomial)
    assert seq.coeffs == coeffs


def test_parse_mild_and_errors():
    assert isinstance(parse_sequence("mild"), MildSequence)
    for bad in ("n^2/3", "sin(n)", "poly:1,x", "n^"):
        with pytest.raises(ConfigInvalid):
            parse_sequence(bad)


def test_polynomial_names_round_trip():
    for text in ("n^2", "n^3", "2*n^2 + 3*n - 1", "n"):
        seq = parse_sequence(text)
        assert parse_sequence(seq.name).coeffs == seq.coeffs


def test_mild_values():
    m = MildSequence()
    assert [m(n) for n in range(1, 6)] == [2, 6, 12, 24, 35]


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(1, 2**30), min_size=1, max_size=50))
def test_vectorized_paths_match_exact(ns):
    arr = np.array(sorted(set(ns)), dtype=np.int64)
    for seq in (MildSequence(), Polynomial([0, 0, 1]), Polynomial([5, -3, 2])):
        got = seq.values(arr)
        assert [int(x) for x in got] == [seq(int(n)) for n in arr]


def test_vectorized_path_refuses_overflow():
    with pytest.raises(OverflowError):
        Polynomial([0, 0, 0, 1]).values(np.array([2**21 + 1], dtype=np.int64))
    seq = CustomSequence(lambda n: n * n, "square")
    assert list(seq.values(np.array([3, 4]))) == [9, 16]


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_window_searches_agree_with_scan(bound):
    pair = SequencePair.mild()
    above = pair.first_above(bound)
    assert pair.p(above) > bound and pair.q(above) > bound
    assert above == 1 or not (pair.p(above - 1) > bound and pair.q(above - 1) > bound)
    below = pair.last_below(bound)
    if below:
        assert pair.max_at(below) < bound
    assert pair.max_at(below + 1) >= bound


def test_checkpoint_example_value():
    # n^3 < 505 < 8^3
    assert SequencePair.squares_cubes().last_below(521 - 16) == 7


def test_gap_threshold():
    pair = SequencePair.squares_cubes()
    n = pair.gap_threshold(16)
    assert 2 * n + 1 >= 16 and 2 * (n - 1) + 1 < 16


def test_gap_threshold_degenerate():
    pair = SequencePair(Polynomial([0, 2]), Polynomial([0, 2]))
    with pytest.raises(Degenerate):
        pair.gap_threshold(16)


def test_digest_and_sequence_labels():
    a, b = SequencePair.squares_cubes(), SequencePair.parse("n^2", "n^3")
    assert a.spec == b.spec and a.digest() == b.digest()
    assert SequencePair.mild().spec == {"p": "poly:0,0,1", "q": "mild"}

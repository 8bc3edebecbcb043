import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from bruteforce import greedy_oracle
from rank1._greedy import greedy_monotone, greedy_reference, place_blocks


def increasing(draw, size):
    steps = draw(st.lists(st.integers(1, 40), min_size=size, max_size=size))
    start = draw(st.integers(0, 100))
    return list(np.cumsum([start] + steps[:-1]))


@st.composite
def candidates(draw):
    size = draw(st.integers(2, 60))
    return increasing(draw, size), increasing(draw, size), draw(st.integers(1, 30))


@settings(max_examples=1000, deadline=None)
@given(candidates())
def test_compiled_greedy_matches_reference(case):
    src, dst, length = case
    ref = greedy_reference(src, dst, length)
    fast = greedy_monotone(np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64),
                           np.int64(length))
    assert list(fast) == ref
    kept = greedy_oracle([(i, s, d) for i, (s, d) in enumerate(zip(src, dst))], length)
    assert [i for i, k in enumerate(ref) if k] == kept


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 500), st.integers(0, 500)), min_size=1, max_size=40),
       st.integers(1, 20))
def test_reference_on_unordered_input(pairs, length):
    src = [s for s, _ in pairs]
    dst = [d for _, d in pairs]
    got = list(place_blocks(src, dst, length))
    kept = greedy_oracle([(i, s, d) for i, (s, d) in enumerate(pairs)], length)
    assert [i for i, k in enumerate(got) if k] == kept


def test_big_integers_use_reference_path():
    big = 10**30
    keep = place_blocks([big, big + 5], [big + 100, big + 200], 10)
    assert list(keep) == [True, False]

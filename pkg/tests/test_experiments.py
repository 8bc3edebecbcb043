import csv
import io
import json
from fractions import Fraction

import pytest

from rank1.conjugator import InvolutionR, stage_window, t_power
from rank1.errors import CapConflict, Degenerate, EmptyCheckpoint
from rank1.experiments import (CSV_COLUMNS, checkpoint, checkpoints, exceeds,
                               gap_condition_check, nonrecurrence_run, oracle_run, theorem1_run)
from rank1.poisson import ExactProb, suspension_correlation
from rank1.sequences import CustomSequence, Polynomial, SequencePair
from rank1.tower import ConstructionParams, build_schedule, shift

C = ExactProb.exp_neg(1)
C2 = ExactProb.exp_neg(2)


# ---------------------------------------------------------------------------
# gap condition


def test_gap_check_examples(cubic):
    rep = gap_condition_check(cubic)
    assert rep.passed and rep.method == "symbolic" and not rep.advisory
    linear = gap_condition_check(SequencePair(Polynomial([0, 2]), Polynomial([0, 0, 1])))
    assert not linear.passed and linear.p["reason"].startswith("degree 1")
    tri = CustomSequence(lambda n: n * (n - 1) // 2, "triangular")  # differences n
    rep = gap_condition_check(SequencePair(tri, tri))
    assert rep.passed and rep.advisory and "warning" in rep.p


def test_gap_check_errors():
    flat = SequencePair(Polynomial([5]), Polynomial([0, 0, 1]))
    with pytest.raises(Degenerate):
        gap_condition_check(flat)
    falling = SequencePair(Polynomial([0, -1]), Polynomial([0, 0, 1]))
    with pytest.raises(Degenerate):
        gap_condition_check(falling)
    with pytest.raises(ValueError):
        gap_condition_check(SequencePair.mild(), probe_max=5)


# ---------------------------------------------------------------------------
# checkpoints


def test_checkpoint_example(cubic_minimal3, cubic):
    assert checkpoint(cubic_minimal3, cubic, 2) == 7
    with pytest.raises(EmptyCheckpoint):
        checkpoints(cubic_minimal3, cubic)


def test_checkpoint_growth(cubic4, cubic, mild):
    sched5 = build_schedule(ConstructionParams(), mild, 5)
    for sched, seq in ((cubic4, cubic), (sched5, mild)):
        cps = checkpoints(sched, seq)
        assert [c.j for c in cps] == list(range(1, sched.J_max))
        for prev, cur in zip(cps, cps[1:]):
            assert prev.N < cur.N
            assert cur.prev_below_h
        for c in cps:
            assert c.exceeds_jh and c.N > c.j * sched.height(c.j)
            lo, hi = stage_window(sched, c.j, seq)
            assert c.N == hi and (lo <= c.N or c.j == 1)
        ratios = [Fraction(a.N, b.N) for a, b in zip(cps, cps[1:])]
        assert all(x > y for x, y in zip(ratios, ratios[1:]))


def test_checkpoints_skip_katok(cubic):
    sched = build_schedule(ConstructionParams(modification_stages={2}), cubic, 4)
    assert [c.j for c in checkpoints(sched, cubic)] == [1, 3]


# ---------------------------------------------------------------------------
# divergent averages


@pytest.fixture(scope="module")
def trace(cubic4, cubic4_plan, cubic):
    return theorem1_run(cubic4, cubic4_plan, cubic, per_term_cap=2000, secondary_cap=100_000)


def test_trace_shape(trace, cubic4_plan):
    assert [r.stage for r in trace.rows] == [1, 2, 3]
    assert [r.parity for r in trace.rows] == ["odd", "even", "odd"]
    assert all(a.N < b.N for a, b in zip(trace.rows, trace.rows[1:]))
    for r in trace.rows:
        assert r.exact and r.lower == r.upper
        assert 0 <= r.realized_fraction <= 1
        assert r.realized_fraction == cubic4_plan.perm(r.stage).coverage
    assert trace.rows[-1].n_dichotomy == cubic4_plan.perm(3).count_realized(2001, 59209)


def test_dichotomy_and_lift_consistency(trace, cubic4, cubic4_plan, cubic):
    A = cubic4.tower(1)
    mu = Fraction(1)
    for rec in trace.terms:
        perm = cubic4_plan.perm(rec.stage)
        assert rec.exponent == 2 * mu - rec.base
        if perm.is_realized(rec.n):
            assert rec.base == (mu if perm.mode == "even" else 0)
    for rec in trace.terms[::7]:
        want = suspension_correlation(A, cubic.p(rec.n), cubic.q(rec.n), cubic4_plan)
        assert ExactProb.exp_neg(2 * mu - rec.base) == want == rec.prob


def test_single_term_values(cubic4, cubic4_plan, cubic):
    A = cubic4.tower(1)
    for j, want in ((2, C), (3, C2)):
        n = int(cubic4_plan.perm(j).realized[-1])
        SA, TA = shift(A, cubic.p(n)), t_power(A, cubic.q(n), cubic4_plan)
        assert suspension_correlation(A, cubic.p(n), cubic.q(n), cubic4_plan) == want
        assert (SA == TA) == (j == 2)


def test_enclosures_contain_exact_values(trace, cubic4, cubic4_plan, cubic):
    loose = theorem1_run(cubic4, cubic4_plan, cubic, per_term_cap=27, secondary_cap=0)
    for tight, rough in zip(trace.rows, loose.rows):
        value = tight.lower.decimal(50)
        assert rough.lower.decimal(50) <= value <= rough.upper.decimal(50)
        assert rough.base_lower <= tight.base_lower <= rough.base_upper
    assert loose.rows[-1].n_unknown > 0
    partial = theorem1_run(cubic4, cubic4_plan, cubic, per_term_cap=27, secondary_cap=500)
    assert partial.rows[-1].n_unknown == loose.rows[-1].n_unknown - 500


def test_checkpoint_bound_examples(trace, cubic4_plan):
    rows = trace.rows
    for prev, cur in zip(rows, rows[1:]):
        # every unrealized n of the segment may sit anywhere in [c^2, c]
        unrealized = cur.N - prev.N - cubic4_plan.perm(cur.stage).count_realized(prev.N + 1, cur.N)
        width = (C - C2) * Fraction(unrealized, cur.N)
        ratio = Fraction(prev.N, cur.N)
        if cur.parity == "even":
            assert exceeds(cur.lower, C * (1 - ratio) - width)
        else:
            assert exceeds(C2 + C * ratio + width, cur.upper)


def test_cap_conflict(cubic4, cubic4_plan, cubic):
    with pytest.raises(CapConflict):
        theorem1_run(cubic4, cubic4_plan, cubic, per_term_cap=1)


def test_trace_csv(trace):
    text = trace.to_csv(12)
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 1 + len(trace.rows)
    last = dict(zip(CSV_COLUMNS, rows[-1]))
    assert last["n_or_N"] == "59209" and last["parity"] == "odd"
    prob = ExactProb.from_dict(json.loads(last["prob_exact_json"]))
    assert prob == trace.rows[-1].lower
    assert last["lower_bound"] == last["upper_bound"] == last["prob_float"]
    assert text == trace.to_csv(12)


def test_summary_fields(trace):
    s = trace.summary(8)
    assert s["c"] == "0.36787944" and s["c2"] == "0.13533528"
    assert s["oscillation"] == []  # stage 3 has no later neighbour here
    assert s["meta"]["per_term_cap"] == 2000


# ---------------------------------------------------------------------------
# non-recurrence


def test_nonrecurrence_trace(cubic):
    sched = build_schedule(ConstructionParams(), cubic, 3)
    R = InvolutionR(sched, 2, 1, 3)
    tr = nonrecurrence_run(sched, R, 250)
    assert [r.n for r in tr.rows] == list(range(251))
    assert tr.rows[0].prob.is_zero()
    for r in tr.rows[1:]:
        if r.overlap == 0:
            assert r.prob.is_zero()
        assert tr.bound_holds(r)
    assert tr.C_row is not None
    ratio = tr.rows[tr.C_row].prob / tr.rows[tr.C_row].overlap
    assert ratio == tr.C
    assert tr.summary()["all_bounds_hold"]


def test_nonrecurrence_csv(cubic):
    sched = build_schedule(ConstructionParams(), cubic, 3)
    tr = nonrecurrence_run(sched, InvolutionR(sched, 2, 1, 3), 20)
    rows = list(csv.reader(io.StringIO(tr.to_csv(6))))
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 22
    assert rows[1][:5] == ["0", "2", "", "1", "1"]


def test_oracle_run_small(mild3):
    rep = oracle_run(mild3, 3, 20_000, seed=5)
    assert len(rep["events"]) == 3 and rep["all_agree"]
    assert rep == oracle_run(mild3, 3, 20_000, seed=5)

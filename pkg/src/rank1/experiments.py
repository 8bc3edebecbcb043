"""Checkpoints, the divergent-average runner and the non-recurrence runner.

``theorem1_run`` returns partial averages of
    mu_o(S^{p(n)} C ∩ T^{q(n)} C),  C = C(A, 0),
at every checkpoint N_j, as exact enclosures [lower, upper]. Terms up to
``per_term_cap`` are computed one by one. Past the cap, an index n realized at
stage j contributes exactly exp(-mu(A)) (even stage, T^{q(n)} A = S^{p(n)} A)
or exp(-2 mu(A)) (odd stage, the images are disjoint). Other indices are
computed individually while the ``secondary_cap`` budget lasts. Anything left
is only known to lie in [exp(-2 mu(A)), exp(-mu(A))].
"""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction

import numpy as np

from .conjugator import (ConjugationPlan, InvolutionR, apply_perm, homoclinic_quantities,
                         t_power)
from .errors import CapConflict, Degenerate, EmptyCheckpoint
from .poisson import CylinderEvent, ExactProb, cylinder_prob, mc_oracle, nonrecurrence_event
from .sequences import IntSequence, Polynomial, SequencePair
from .tower import FloorSet, TowerSchedule, lift, measure, shift

log = logging.getLogger(__name__)

CSV_COLUMNS = ("n_or_N", "stage", "parity", "base_overlap_num", "base_overlap_den",
               "prob_exact_json", "prob_float", "lower_bound", "upper_bound",
               "realized_fraction")


# ---------------------------------------------------------------------------
# gap condition

@dataclass(frozen=True)
class GapReport:
    passed: bool
    method: str  # "symbolic" or "empirical"
    p: dict
    q: dict

    @property
    def advisory(self) -> bool:
        return self.method == "empirical"

    def to_dict(self) -> dict:
        return {"passed": self.passed, "method": self.method, "p": self.p, "q": self.q,
                "advisory_only": self.advisory}


def _check_one(seq: IntSequence, probe_max: int) -> dict:
    diffs = [seq(n + 1) - seq(n) for n in range(1, probe_max)]
    if max(diffs) <= 0:
        raise Degenerate(f"{seq.name} is non-increasing on 1..{probe_max}")
    if isinstance(seq, Polynomial):
        ok = seq.degree >= 2 and seq.leading > 0
        reason = (f"degree {seq.degree}, leading coefficient {seq.leading}")
        return {"name": seq.name, "passed": ok, "method": "symbolic", "reason": reason}
    half = len(diffs) // 2
    head, tail = min(diffs[:half]), min(diffs[half:])
    ok = tail > head and tail > 0
    return {"name": seq.name, "passed": ok, "method": "empirical",
            "reason": f"min difference {head} on the first half of the probe, {tail} on the second",
            "warning": "empirical check over a finite window, not a proof"}


def gap_condition_check(seq: SequencePair, probe_max: int = 1000) -> GapReport:
    """Do p(n+1) - p(n) and q(n+1) - q(n) tend to +infinity?"""
    if probe_max < 10:
        raise ValueError("probe_max must be >= 10")
    p, q = _check_one(seq.p, probe_max), _check_one(seq.q, probe_max)
    method = "symbolic" if p["method"] == q["method"] == "symbolic" else "empirical"
    return GapReport(p["passed"] and q["passed"], method, p, q)


# ---------------------------------------------------------------------------
# checkpoints

@dataclass(frozen=True)
class Checkpoint:
    j: int
    N: int
    parity: str
    exceeds_jh: bool       # N_j > j h_j
    prev_below_h: bool | None  # N_{j-1} < h_j


def checkpoint(schedule: TowerSchedule, seq: SequencePair, j: int) -> int:
    """N_j = max{n : p(n), q(n) < h_{j+1} - 4 h_j}."""
    h, H = schedule.height(j), schedule.height(j + 1)
    N = seq.last_below(H - 4 * h)
    if N < 1:
        raise EmptyCheckpoint(f"stage {j}: h_(j+1) - 4 h_j = {H - 4 * h} admits no n")
    return N


def checkpoints(schedule: TowerSchedule, seq: SequencePair, modes: dict | None = None
                ) -> list[Checkpoint]:
    """Checkpoints of every non-Katok stage with a successor."""
    out: list[Checkpoint] = []
    prev = None
    for j in range(1, schedule.J_max):
        st = schedule.stage(j)
        if st.kind == "katok":
            continue
        h = st.height
        N = checkpoint(schedule, seq, j)
        parity = (modes or {}).get(j) or ("odd" if j % 2 else "even")
        out.append(Checkpoint(j, N, parity, N > j * h, None if prev is None else prev < h))
        prev = N
    return out


# ---------------------------------------------------------------------------
# divergent averages

@dataclass
class TermRecord:
    n: int
    stage: int
    base: Fraction      # mu(S^p A ∩ T^q A)
    exponent: Fraction  # mu(S^p A ∪ T^q A); the term is exp(-exponent)

    @property
    def prob(self) -> ExactProb:
        return ExactProb.exp_neg(self.exponent)


@dataclass
class TraceRow:
    N: int
    stage: int
    parity: str
    realized_fraction: Fraction
    lower: ExactProb
    upper: ExactProb
    base_lower: Fraction
    base_upper: Fraction
    n_exact: int
    n_dichotomy: int
    n_unknown: int

    @property
    def exact(self) -> bool:
        return self.n_unknown == 0


@dataclass
class AverageTrace:
    rows: list[TraceRow]
    terms: list[TermRecord] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    mu_A: Fraction = Fraction(1)

    @property
    def c(self) -> ExactProb:
        return ExactProb.exp_neg(self.mu_A)

    @property
    def c2(self) -> ExactProb:
        return ExactProb.exp_neg(2 * self.mu_A)

    def row(self, j: int) -> TraceRow:
        return next(r for r in self.rows if r.stage == j)

    def oscillation_gaps(self, min_stage: int = 3) -> list[tuple[int, int, ExactProb]]:
        """lower(even row) - upper(odd row) for adjacent rows of opposite parity."""
        out = []
        rows = [r for r in self.rows if r.stage >= min_stage and r.parity in ("odd", "even")]
        for a, b in zip(rows, rows[1:]):
            if a.parity == b.parity:
                continue
            even, odd = (a, b) if a.parity == "even" else (b, a)
            out.append((even.stage, odd.stage, even.lower - odd.upper))
        return out

    def to_csv(self, precision: int = 20) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            if r.exact:
                avg_base = r.base_lower
                exact = (json.dumps(r.lower.to_dict(precision), separators=(",", ":")),
                         r.lower.to_float(precision))
                base = (str(avg_base.numerator), str(avg_base.denominator))
            else:
                exact, base = ("", ""), ("", "")
            frac = r.realized_fraction
            writer.writerow([r.N, r.stage, r.parity, *base, *exact,
                             r.lower.to_float(precision), r.upper.to_float(precision),
                             f"{frac.numerator}/{frac.denominator}"])
        return buf.getvalue()

    def summary(self, precision: int = 20) -> dict:
        gaps = self.oscillation_gaps()
        target = (self.c - self.c2) / 2
        return {
            "c": self.c.to_float(precision),
            "c2": self.c2.to_float(precision),
            "half_gap_target": target.to_float(precision),
            "oscillation": [
                {"even_stage": e, "odd_stage": o, "lower_even_minus_upper_odd": g.to_float(precision),
                 "meets_target": exceeds(g, target)}
                for e, o, g in gaps
            ],
            "meta": self.meta,
        }


def exceeds(a: ExactProb, b: ExactProb, digits: int = 60) -> bool:
    """a >= b, decided numerically (a - b is not zero-tested symbolically here)."""
    diff = a - b
    return diff.is_zero() or diff.decimal(digits) > 0


def _term(A: FloorSet, n: int, stage: int, seq: SequencePair, plan: ConjugationPlan) -> TermRecord:
    SA = shift(A, seq.p(n))
    TA = t_power(A, seq.q(n), plan)
    return TermRecord(n, stage, measure(SA & TA), measure(SA | TA))


def _dichotomy_valid(A: FloorSet, plan: ConjugationPlan, j: int) -> bool:
    """Realized indices at stage j give the constant term only if P fixes A and A ⊆ X_j."""
    sched = plan.schedule
    if A.stage > j or not sched.is_halving(j):
        return False
    return apply_perm(A, plan, "inverse") == A


def theorem1_run(schedule: TowerSchedule, plan: ConjugationPlan, seq: SequencePair,
                 A: FloorSet | None = None, per_term_cap: int = 2000,
                 secondary_cap: int = 100_000, keep_terms: bool = True) -> AverageTrace:
    if per_term_cap < 1 or secondary_cap < 0:
        raise CapConflict("caps must be positive")
    A = schedule.tower(1) if A is None else A
    mu_A = measure(A)
    c_exp, c2_exp = mu_A, 2 * mu_A
    modes = {j: p.mode for j, p in plan.perms.items()}
    cps = checkpoints(schedule, seq, modes)
    if not cps:
        raise EmptyCheckpoint("schedule has no checkpoints")
    if per_term_cap < cps[0].N:
        raise CapConflict(f"per_term_cap {per_term_cap} < N_1 = {cps[0].N}")

    counts: Counter = Counter()  # exponent -> number of terms
    base_sum = Fraction(0)
    n_exact = n_dich = unknown = 0
    budget = secondary_cap
    terms: list[TermRecord] = []
    rows: list[TraceRow] = []
    prev_N = 0

    def add(rec: TermRecord):
        nonlocal base_sum, n_exact
        counts[rec.exponent] += 1
        base_sum += rec.base
        n_exact += 1
        if keep_terms:
            terms.append(rec)

    for cp in cps:
        perm = plan.perm(cp.j)
        lo, hi = prev_N + 1, cp.N
        for n in range(lo, min(hi, per_term_cap) + 1):
            add(_term(A, n, cp.j, seq, plan))
        start = max(lo, per_term_cap + 1)
        if start <= hi:
            realized = _realized_between(perm, start, hi) if perm is not None else np.empty(0, np.int64)
            if perm is not None and perm.mode != "identity" and _dichotomy_valid(A, plan, cp.j):
                k = len(realized)
                counts[c_exp if perm.mode == "even" else c2_exp] += k
                base_sum += (mu_A if perm.mode == "even" else 0) * k
                n_dich += k
                others = _complement(start, hi, realized)
            else:
                others = np.arange(start, hi + 1, dtype=np.int64)
            take = min(budget, len(others))
            for n in others[:take]:
                rec = _term(A, int(n), cp.j, seq, plan)
                counts[rec.exponent] += 1
                base_sum += rec.base
                n_exact += 1
            budget -= take
            unknown += len(others) - take
        known = ExactProb((k, e) for e, k in counts.items())
        N = cp.N
        rows.append(TraceRow(
            N=N, stage=cp.j, parity=cp.parity,
            realized_fraction=perm.coverage if perm is not None else Fraction(0),
            lower=(known + ExactProb.exp_neg(c2_exp, unknown)) / N,
            upper=(known + ExactProb.exp_neg(c_exp, unknown)) / N,
            base_lower=base_sum / N, base_upper=(base_sum + unknown * mu_A) / N,
            n_exact=n_exact, n_dichotomy=n_dich, n_unknown=unknown))
        log.info("checkpoint j=%d N=%d: exact=%d dichotomy=%d unknown=%d",
                 cp.j, N, n_exact, n_dich, unknown)
        prev_N = N
    meta = {
        "schedule_digest": schedule.digest(),
        "sequence_digest": seq.digest(),
        "sequences": seq.spec,
        "per_term_cap": per_term_cap,
        "secondary_cap": secondary_cap,
        "A": A.to_dict(),
    }
    return AverageTrace(rows, terms, meta, mu_A)


def _realized_between(perm, lo: int, hi: int) -> np.ndarray:
    r = perm.realized
    if not isinstance(r, np.ndarray):
        r = np.asarray([int(x) for x in r], dtype=object)
        return np.asarray([x for x in r if lo <= x <= hi], dtype=object)
    return r[np.searchsorted(r, lo, "left"):np.searchsorted(r, hi, "right")]


def _complement(lo: int, hi: int, taken: np.ndarray) -> np.ndarray:
    mask = np.ones(hi - lo + 1, dtype=bool)
    if len(taken):
        mask[np.asarray(taken, dtype=np.int64) - lo] = False
    return np.nonzero(mask)[0].astype(np.int64) + lo


# ---------------------------------------------------------------------------
# non-recurrence

@dataclass
class NonrecurrenceRow:
    n: int
    stage: int
    overlap: Fraction     # mu(T^n F ∩ F); for n = 0 the row holds mu(F)
    prob: ExactProb       # mu_o(RD ∩ T^-n R T^n D); for n = 0, mu_o(RD ∩ D)


@dataclass
class NonrecurrenceTrace:
    rows: list[NonrecurrenceRow]
    C: ExactProb
    C_row: int | None
    meta: dict = field(default_factory=dict)

    def bound_holds(self, row: NonrecurrenceRow, digits: int = 60) -> bool:
        if row.n == 0:
            return row.prob.is_zero()
        if row.overlap == 0:
            return row.prob.is_zero()
        return exceeds(self.C * row.overlap, row.prob, digits)

    def to_csv(self, precision: int = 20) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            text = r.prob.to_float(precision)
            writer.writerow([r.n, r.stage, "", r.overlap.numerator, r.overlap.denominator,
                             json.dumps(r.prob.to_dict(precision), separators=(",", ":")),
                             text, text, text, ""])
        return buf.getvalue()

    def summary(self, precision: int = 20) -> dict:
        nonzero = [r for r in self.rows if r.n > 0 and r.overlap > 0]
        return {
            "C": self.C.to_float(precision),
            "C_attained_at_n": self.C_row,
            "rows": len(self.rows),
            "rows_with_overlap": len(nonzero),
            "all_bounds_hold": all(self.bound_holds(r) for r in self.rows),
            "meta": self.meta,
        }


def rd_cap_d(R: InvolutionR) -> ExactProb:
    """mu_o(RD ∩ D) with D = C(E,0) ∩ C(RE,1)."""
    return cylinder_prob(nonrecurrence_event(R.floor_E, R.floor_RE, R.floor_E, R.floor_RE))


def nonrecurrence_run(schedule: TowerSchedule, R: InvolutionR, n_max: int) -> NonrecurrenceTrace:
    """Rows n = 0..n_max, with T = S (the schedule's own rank-one map)."""
    rows = [NonrecurrenceRow(0, R.stage, measure(R.support), rd_cap_d(R))]
    best, best_val, best_n = ExactProb.zero(), Decimal(-1), None
    for n in range(1, n_max + 1):
        hq = homoclinic_quantities(schedule, R, n)
        prob = cylinder_prob(nonrecurrence_event(*hq.base_sets))
        rows.append(NonrecurrenceRow(n, hq.e_image.stage, hq.overlap_measure, prob))
        if hq.overlap_measure > 0:
            ratio = prob / hq.overlap_measure
            val = ratio.decimal(60)
            if val > best_val:
                best, best_val, best_n = ratio, val, n
    meta = {"schedule_digest": schedule.digest(), "E": R.floor_E.to_dict(),
            "RE": R.floor_RE.to_dict(), "n_max": n_max}
    return NonrecurrenceTrace(rows, best, best_n, meta)


# ---------------------------------------------------------------------------
# exact calculus against sampling

def random_event(schedule: TowerSchedule, rng: np.random.Generator, stages=(1, 2, 3),
                 max_constraints: int = 3, max_count: int = 2, max_floors: int = 4) -> CylinderEvent:
    """A conjunction of 1..max_constraints constraints on small unions of low-stage floors."""
    stages = [j for j in stages if j <= schedule.J_max]
    cons = []
    for _ in range(int(rng.integers(1, max_constraints + 1))):
        j = int(rng.choice(stages))
        h = schedule.height(j)
        k = int(rng.integers(1, min(max_floors, h) + 1))
        idx = sorted(int(x) for x in rng.choice(h, size=k, replace=False))
        cons.append((schedule.floors(j, idx), int(rng.integers(0, max_count + 1))))
    return CylinderEvent(cons)


def oracle_run(schedule: TowerSchedule, n_events: int, samples: int, seed: int,
               workers: int = 1, sigmas: float = 4.0, precision: int = 20) -> dict:
    rng = np.random.default_rng(seed)
    seeds = np.random.SeedSequence(seed).spawn(n_events)
    rows = []
    for i in range(n_events):
        event = random_event(schedule, rng)
        exact = cylinder_prob(event)
        est, se = mc_oracle(event, samples, int(seeds[i].generate_state(1)[0]), workers)
        value = float(exact)
        # an estimate of 0 or 1 has zero sample stderr; fall back to the exact binomial one
        scale = max(se, (value * (1 - value) / samples) ** 0.5)
        rows.append({
            "event": [{"set": s.to_dict(), "count": k} for s, k in event.constraints],
            "exact": exact.to_dict(precision),
            "estimate": est,
            "stderr": se,
            "agree": abs(value - est) <= sigmas * scale,
        })
    return {"seed": seed, "samples": samples, "sigmas": sigmas, "events": rows,
            "all_agree": all(r["agree"] for r in rows)}

"""Exact cylinder probabilities for the Poisson suspension, plus a sampling oracle.

For a finite-measure set B, C(B, k) is the set of configurations with exactly
k points in B. A conjunction of such constraints only depends on the point
counts of the atoms generated by the constraint sets; those counts are
independent Poisson variables with means equal to the atom measures. The
probability is therefore a finite sum of terms coeff * exp(-mu(U)) with
rational coeff, U the union of the constraint sets, and ``ExactProb`` keeps
such sums symbolic until they are printed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal, localcontext
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import CountTooLarge
from .tower import FloorSet, lift, shift, union

K_MAX = 4


class ExactProb:
    """A finite sum  sum_i coeff_i * exp(-exponent_i)  with rational coeff and exponent.

    Terms with equal exponents are merged and zero coefficients dropped, so the
    value is zero exactly when no terms remain (exponentials of distinct
    rationals are linearly independent over the rationals).
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Iterable[tuple] = ()):
        merged: dict[Fraction, Fraction] = {}
        for coeff, exponent in terms:
            e = Fraction(exponent)
            merged[e] = merged.get(e, Fraction(0)) + Fraction(coeff)
        self.terms = tuple((c, e) for e, c in sorted(merged.items()) if c != 0)

    @classmethod
    def exp_neg(cls, exponent, coeff=1) -> "ExactProb":
        return cls([(coeff, exponent)])

    @classmethod
    def zero(cls) -> "ExactProb":
        return cls()

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = ExactProb([(other, 0)])
        if not isinstance(other, ExactProb):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(self.terms)

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = ExactProb([(other, 0)])
        return ExactProb(self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self):
        return ExactProb((-c, e) for c, e in self.terms)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return ExactProb((c * other, e) for c, e in self.terms)
        return ExactProb((c1 * c2, e1 + e2) for c1, e1 in self.terms for c2, e2 in other.terms)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1 / Fraction(other))

    def __repr__(self):
        return f"ExactProb({[(str(c), str(e)) for c, e in self.terms]})"

    def decimal(self, digits: int) -> Decimal:
        """Value with ``digits`` significant digits of working precision."""
        with localcontext() as ctx:
            ctx.prec = digits
            total = Decimal(0)
            for c, e in self.terms:
                coeff = Decimal(c.numerator) / Decimal(c.denominator)
                total += coeff * (-(Decimal(e.numerator) / Decimal(e.denominator))).exp()
            return +total

    def _magnitude(self) -> int:
        """Rough decimal exponent of the largest term."""
        best = 0
        for c, e in self.terms:
            mag = (abs(c.numerator).bit_length() - c.denominator.bit_length()) * 0.30103
            best = max(best, int(mag - float(e) * 0.4343) + 2)
        return best

    def to_float(self, precision: int = 20) -> str:
        """Decimal string rounded to ``precision`` digits after the point.

        Working precision is doubled until two successive evaluations round to
        the same string.
        """
        if precision < 1:
            raise ValueError("precision must be >= 1")
        quantum = Decimal(1).scaleb(-precision)
        if not self.terms:
            return format(Decimal(0).quantize(quantum), "f")
        guard, prev = 12, None
        while True:
            digits = max(precision + self._magnitude() + guard, guard)
            val = self.decimal(digits)
            with localcontext() as ctx:
                ctx.prec = digits + 10
                text = format(val.quantize(quantum, rounding=ROUND_HALF_EVEN), "f")
            if text.startswith("-") and Decimal(text) == 0:
                text = text[1:]
            if text == prev or guard > 4096:
                return text
            prev, guard = text, guard * 2

    def __float__(self):
        return float(self.decimal(40))

    def to_dict(self, precision: int = 20) -> dict:
        return {
            "terms": [[str(c.numerator), str(c.denominator), str(e.numerator), str(e.denominator)]
                      for c, e in self.terms],
            "float": self.to_float(precision),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExactProb":
        return cls((Fraction(int(a), int(b)), Fraction(int(c), int(d)))
                   for a, b, c, d in data["terms"])


def to_float(p: ExactProb, precision: int = 20) -> str:
    return p.to_float(precision)


@dataclass(frozen=True)
class CylinderEvent:
    """Conjunction of constraints "exactly ``count`` points in ``set``"."""

    constraints: tuple

    def __init__(self, constraints: Sequence[tuple[FloorSet, int]]):
        object.__setattr__(self, "constraints", tuple((s, int(k)) for s, k in constraints))

    @classmethod
    def empty_in(cls, s: FloorSet) -> "CylinderEvent":
        return cls([(s, 0)])

    def __and__(self, other: "CylinderEvent") -> "CylinderEvent":
        return CylinderEvent(self.constraints + other.constraints)


def atoms(sets: Sequence[FloorSet]) -> dict[int, Fraction]:
    """Measure of each nonempty region of the Venn diagram, keyed by membership bitmask."""
    J = max(s.stage for s in sets)
    width = sets[0].schedule.width(J)
    events = []
    for i, s in enumerate(sets):
        for a, b in lift(s, J).runs:
            events.append((a, 1 << i))
            events.append((b, 1 << i))
    events.sort()
    out: dict[int, int] = {}
    mask, pos = 0, None
    for x, bit in events:
        if mask and pos is not None and x > pos:
            out[mask] = out.get(mask, 0) + (x - pos)
        mask ^= bit
        pos = x
    return {m: width * length for m, length in out.items()}


def cylinder_prob(event: CylinderEvent, k_max: int = K_MAX) -> ExactProb:
    cons = event.constraints
    if not cons:
        raise ValueError("event has no constraints")
    for _, k in cons:
        if k < 0 or k > k_max:
            raise CountTooLarge(f"count {k} outside 0..{k_max}")
    counts = [k for _, k in cons]
    regions = sorted(atoms([s for s, _ in cons]).items())
    total = sum((mu for _, mu in regions), Fraction(0))
    # for pruning: which constraints still have atoms left after position i
    reach_after = [0] * (len(regions) + 1)
    for i in range(len(regions) - 1, -1, -1):
        reach_after[i] = reach_after[i + 1] | regions[i][0]

    coeff = Fraction(0)
    remaining = list(counts)

    def walk(i, weight):
        nonlocal coeff
        if i == len(regions):
            if not any(remaining):
                coeff += weight
            return
        for c, r in enumerate(remaining):
            if r and not (reach_after[i] >> c) & 1:
                return
        mask, mu = regions[i]
        members = [c for c in range(len(cons)) if (mask >> c) & 1]
        top = min(remaining[c] for c in members)
        term = Fraction(1)
        for k in range(top + 1):
            if k:
                term = term * mu / k
                for c in members:
                    remaining[c] -= 1
            walk(i + 1, weight * term)
        for c in members:
            remaining[c] += top

    walk(0, Fraction(1))
    return ExactProb([(coeff, total)])


def suspension_correlation(A: FloorSet, p_shift: int, q_shift: int, plan) -> ExactProb:
    """mu_o(S^p C(A,0) ∩ T^q C(A,0)) = exp(-mu(S^p A ∪ T^q A))."""
    from .conjugator import t_power

    images = union(shift(A, p_shift), t_power(A, q_shift, plan))
    return cylinder_prob(CylinderEvent([(images, 0)]))


def nonrecurrence_event(e0: FloorSet, re0: FloorSet, e1: FloorSet, re1: FloorSet) -> CylinderEvent:
    """RD ∩ Phi D, with D = C(E,0) ∩ C(RE,1), given (E, RE) and their images under Phi."""
    return CylinderEvent([(re0, 0), (e0, 1), (e1, 0), (re1, 1)])


def nonrecurrence_prob(base_sets: Sequence[FloorSet]) -> ExactProb:
    """Probability of RD ∩ T^-n R T^n D from the four sets of ``homoclinic_quantities``."""
    return cylinder_prob(nonrecurrence_event(*base_sets))


_SHARD = 10_000


def mc_oracle(event: CylinderEvent, samples: int, seed: int, workers: int = 1) -> tuple[float, float]:
    """Monte-Carlo estimate of an event's probability and its binomial standard error.

    Samples a Poisson process on the union U of the constraint sets (points
    outside U cannot change any count): N ~ Poisson(mu(U)) points, each on a
    uniformly chosen floor of U. Work is split into fixed-size shards with
    spawned seeds, so the result depends on ``seed`` only, never on ``workers``.
    """
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    sets = [s for s, _ in event.constraints]
    J = max(s.stage for s in sets)
    lifted = [np.array(lift(s, J).runs, dtype=np.int64).reshape(-1, 2) for s in sets]
    runs = np.array(_union_runs(lifted), dtype=np.int64).reshape(-1, 2)
    lengths = runs[:, 1] - runs[:, 0]
    mean = float(sets[0].schedule.width(J) * int(lengths.sum()))

    sizes = [_SHARD] * (samples // _SHARD) + ([samples % _SHARD] if samples % _SHARD else [])
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    counts_wanted = [k for _, k in event.constraints]

    def run(args):
        size, ss = args
        return _mc_shard(size, np.random.default_rng(ss), runs, lengths, mean, lifted, counts_wanted)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            hits = list(pool.map(run, zip(sizes, seeds)))
    else:
        hits = [run(a) for a in zip(sizes, seeds)]
    est = sum(hits) / samples
    return est, math.sqrt(est * (1 - est) / samples)


def _union_runs(lifted):
    allruns = sorted((int(a), int(b)) for arr in lifted for a, b in arr)
    out = []
    for a, b in allruns:
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return out


def _mc_shard(size, rng, runs, lengths, mean, lifted, counts_wanted) -> int:
    n_points = rng.poisson(mean, size=size)
    total_pts = int(n_points.sum())
    owner = np.repeat(np.arange(size), n_points)
    if total_pts:
        cum = np.cumsum(lengths)
        u = rng.integers(0, int(cum[-1]), size=total_pts)
        r = np.searchsorted(cum, u, side="right")
        idx = runs[r, 0] + (u - (cum[r] - lengths[r]))
    else:
        idx = np.empty(0, dtype=np.int64)
    ok = np.ones(size, dtype=bool)
    for arr, k in zip(lifted, counts_wanted):
        if len(arr):
            pos = np.searchsorted(arr[:, 0], idx, side="right") - 1
            inside = (pos >= 0) & (idx < arr[np.maximum(pos, 0), 1])
            got = np.bincount(owner[inside], minlength=size)
        else:
            got = np.zeros(size, dtype=np.int64)
        ok &= got == k
    return int(ok.sum())

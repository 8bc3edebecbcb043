"""Floor permutations P_j, the conjugate map T = P S P^-1 and the floor involution R.

Each P_j exchanges pairs of equal blocks of stage-(j+1) floors lying above
X_j, i.e. inside [2 h_j, h_{j+1}). Blocks are placed greedily over the
stage-j window of indices n, so a pair (n, source, destination) is recorded
only when it is disjoint from everything placed before it; the indices n that
survive are the *realized* ones.

Odd mode sends the block at q(n) onto the block at p(n) + 2 h_j, even mode
onto the block at p(n). For A = X_1 this gives T^{q(n)} A = S^{p(n) + 2 h_j} A
(disjoint from S^{p(n)} A) at odd stages and T^{q(n)} A = S^{p(n)} A at even
stages.
"""

from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from ._greedy import place_blocks
from .errors import Degenerate, EmptyWindow, ScheduleError, WindowTooLarge
from .sequences import SequencePair
from .tower import FloorSet, TowerSchedule, lift, measure, normalize, shift

log = logging.getLogger(__name__)

MODES = ("odd", "even", "identity")
DEFAULT_MAX_WINDOW = 50_000_000


@dataclass(frozen=True, eq=False)
class BlockPermutation:
    """pi_j as disjoint block swaps on the floors of stage j+1.

    ``src``/``dst`` hold the block starts of the realized pairs in increasing
    order of n (int64 arrays when the values fit, otherwise lists of ints).
    """

    stage: int
    mode: str
    length: int
    src: object = ()
    dst: object = ()
    realized: object = ()
    window: tuple[int, int] | None = None
    gap_threshold: int | None = None
    _moves: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        moves = []
        for a, b in ((self.src, self.dst), (self.dst, self.src)):
            if len(a) == 0:
                continue
            if isinstance(a, np.ndarray):
                order = np.argsort(a, kind="stable")
                starts, delta = a[order], (b - a)[order]
            else:
                pairs = sorted(zip(a, b))
                starts = [s for s, _ in pairs]
                delta = [d - s for s, d in pairs]
            moves.append((starts, delta))
        self._moves.extend(moves)

    @property
    def n_swaps(self) -> int:
        return len(self.src)

    @property
    def window_size(self) -> int:
        if self.window is None:
            return 0
        return max(0, self.window[1] - self.window[0] + 1)

    @property
    def coverage(self) -> Fraction:
        size = self.window_size
        return Fraction(len(self.realized), size) if size else Fraction(0)

    def is_realized(self, n: int) -> bool:
        r = self.realized
        i = int(np.searchsorted(r, n)) if isinstance(r, np.ndarray) else bisect.bisect_left(r, n)
        return i < len(r) and int(r[i]) == n

    def count_realized(self, lo: int, hi: int) -> int:
        """Number of realized n with lo <= n <= hi."""
        r = self.realized
        if isinstance(r, np.ndarray):
            return int(np.searchsorted(r, hi, "right") - np.searchsorted(r, lo, "left"))
        return bisect.bisect_right(r, hi) - bisect.bisect_left(r, lo)

    def blocks_overlapping(self, a: int, b: int):
        """(start, delta) of every moving block meeting the local interval [a, b)."""
        found = []
        for starts, delta in self._moves:
            lo = _search(starts, a - self.length + 1)
            hi = _search(starts, b)
            for i in range(lo, hi):
                found.append((int(starts[i]), int(delta[i])))
        found.sort()
        return found

    def swap_list(self):
        return [(int(s), int(d), self.length) for s, d in zip(self.src, self.dst)]

    def to_dict(self, include_swaps: bool = True) -> dict:
        out = {
            "stage": self.stage,
            "mode": self.mode,
            "block_length": str(self.length),
            "window": None if self.window is None else [str(x) for x in self.window],
            "gap_threshold": None if self.gap_threshold is None else str(self.gap_threshold),
            "n_realized": len(self.realized),
            "coverage": [str(self.coverage.numerator), str(self.coverage.denominator)],
        }
        if include_swaps:
            out["swaps"] = [[str(s), str(d), str(n)] for s, d, n in self.swap_list()]
            out["realized"] = [str(int(n)) for n in self.realized]
        return out


def _search(starts, x: int) -> int:
    if isinstance(starts, np.ndarray):
        if x <= -(2**63):
            return 0
        if x >= 2**63:
            return len(starts)
        return int(np.searchsorted(starts, x, "left"))
    return bisect.bisect_left(starts, x)


def default_mode(schedule: TowerSchedule, j: int) -> str:
    if schedule.stage(j).kind == "katok":
        return "identity"
    return "odd" if j % 2 else "even"


def stage_window(schedule: TowerSchedule, j: int, sequences: SequencePair) -> tuple[int, int]:
    """Indices n with 2 h_j < p(n), q(n) < h_{j+1} - 4 h_j, as an inclusive range."""
    h, H = schedule.height(j), schedule.height(j + 1)
    return sequences.first_above(2 * h), sequences.last_below(H - 4 * h)


def build_block_perm(schedule: TowerSchedule, j: int, mode: str, sequences: SequencePair,
                     max_window: int = DEFAULT_MAX_WINDOW) -> BlockPermutation:
    if not 1 <= j < schedule.J_max:
        raise ScheduleError(f"stage {j} has no successor in a {schedule.J_max}-stage schedule")
    h = schedule.height(j)
    length = 2 * h
    if mode == "identity":
        return BlockPermutation(j, mode, length)
    if not schedule.is_halving(j):
        raise ScheduleError(f"stage {j} is not a halving stage; only identity mode applies")
    lo, hi = stage_window(schedule, j, sequences)
    if lo > hi:
        raise EmptyWindow(f"stage {j}: no n with 2h_j < p(n), q(n) < h_(j+1) - 4h_j")
    size = hi - lo + 1
    if size > max_window:
        raise WindowTooLarge(f"stage {j}: window has {size} indices (cap {max_window})")
    offset = 2 * h if mode == "odd" else 0
    try:
        ns = np.arange(lo, hi + 1, dtype=np.int64)
        src = sequences.q.values(ns)
        dst = sequences.p.values(ns) + offset
        if int(dst.max()) >= 2**62:
            raise OverflowError
    except OverflowError:
        ns = list(range(lo, hi + 1))
        src = [sequences.q(n) for n in ns]
        dst = [sequences.p(n) + offset for n in ns]
    keep = place_blocks(src, dst, length)
    if isinstance(src, np.ndarray):
        src, dst, realized = src[keep], dst[keep], ns[keep]
    else:
        src = [x for x, k in zip(src, keep) if k]
        dst = [x for x, k in zip(dst, keep) if k]
        realized = [n for n, k in zip(ns, keep) if k]
    try:
        gap = sequences.gap_threshold(4 * h)
    except Degenerate:
        gap = None
    perm = BlockPermutation(j, mode, length, src, dst, realized, (lo, hi), gap)
    log.info("stage %d (%s): realized %d of %d window indices", j, mode, len(realized), size)
    return perm


@dataclass(frozen=True, eq=False)
class ConjugationPlan:
    schedule: TowerSchedule
    sequences: SequencePair
    perms: dict

    def perm(self, j: int) -> BlockPermutation | None:
        return self.perms.get(j)

    def to_dict(self, include_swaps: bool = True) -> dict:
        return {"perms": [self.perms[j].to_dict(include_swaps) for j in sorted(self.perms)]}


def build_plan(schedule: TowerSchedule, sequences: SequencePair,
               mode_rule: Callable[[int], str] | None = None, strict: bool = False,
               max_window: int = DEFAULT_MAX_WINDOW) -> ConjugationPlan:
    """Build P_j for every stage with a successor.

    A stage whose window is empty gets an empty permutation (P_j = Id) unless
    ``strict`` is set, in which case ``EmptyWindow`` propagates.
    """
    perms = {}
    for j in range(1, schedule.J_max):
        mode = mode_rule(j) if mode_rule else default_mode(schedule, j)
        try:
            perms[j] = build_block_perm(schedule, j, mode, sequences, max_window)
        except EmptyWindow:
            if strict:
                raise
            log.warning("stage %d: empty window, using the identity", j)
            perms[j] = BlockPermutation(j, mode, 2 * schedule.height(j), window=None)
    return ConjugationPlan(schedule, sequences, perms)


def _exchange(s: FloorSet, block_stage: int, moves_for, length: int) -> FloorSet:
    """Apply a block exchange given in stage-``block_stage`` coordinates.

    The exchange is repeated inside every copy of X_block_stage that stage
    s.stage contains. ``moves_for(a, b)`` returns (start, delta) for blocks
    meeting the local interval [a, b).
    """
    sched = s.schedule
    offsets = sched.embedding_offsets(block_stage, s.stage)
    H = sched.height(block_stage)
    out = []
    for a, b in s.runs:
        c = max(bisect.bisect_right(offsets, a) - 1, 0)
        cur = a
        while cur < b:
            if c >= len(offsets) or offsets[c] >= b:
                out.append((cur, b))
                break
            o = offsets[c]
            if cur < o:
                out.append((cur, o))
                cur = o
            end = min(b, o + H)
            if cur < end:
                la, lb = cur - o, end - o
                pos = la
                for start, delta in moves_for(la, lb):
                    lo, hi = max(start, pos), min(start + length, lb)
                    if lo > pos:
                        out.append((o + pos, o + lo))
                    if hi > lo:
                        out.append((o + lo + delta, o + hi + delta))
                        pos = hi
                if pos < lb:
                    out.append((o + pos, o + lb))
                cur = end
            c += 1
    return FloorSet._trusted(sched, s.stage, normalize(out))


def apply_perm(s: FloorSet, plan: ConjugationPlan, direction: str = "forward") -> FloorSet:
    """Image of ``s`` under P (``forward``) or P^-1 (``inverse``).

    Every P_j is a product of disjoint block swaps, hence an involution, so
    both directions give the same map; ``direction`` is validated and kept
    for readability at call sites.
    """
    if direction not in ("forward", "inverse"):
        raise ValueError(f"direction must be forward or inverse, not {direction!r}")
    for j in sorted(plan.perms):
        perm = plan.perms[j]
        # P_j fixes X_j, which contains every set given at a stage <= j
        if perm.n_swaps == 0 or s.stage <= j or not s.runs:
            continue
        s = _exchange(s, j + 1, perm.blocks_overlapping, perm.length)
    return s


def t_power(s: FloorSet, m: int, plan: ConjugationPlan) -> FloorSet:
    """T^m s = P S^m P^-1 s."""
    return apply_perm(shift(apply_perm(s, plan, "inverse"), m), plan, "forward")


class InvolutionR:
    """Exchange of two floors E and RE of one stage; identity elsewhere."""

    def __init__(self, schedule: TowerSchedule, stage: int, e_index: int, re_index: int):
        h = schedule.height(stage)
        if e_index == re_index or not (0 <= e_index < h and 0 <= re_index < h):
            raise ValueError("E and RE must be distinct floors of the stage")
        self.schedule = schedule
        self.stage = stage
        self.e_index = e_index
        self.re_index = re_index
        self.floor_E = schedule.floor(stage, e_index)
        self.floor_RE = schedule.floor(stage, re_index)
        self.support = self.floor_E | self.floor_RE

    def _moves(self, a, b):
        found = []
        for start, delta in ((self.e_index, self.re_index - self.e_index),
                             (self.re_index, self.e_index - self.re_index)):
            if a < start + 1 and start < b:
                found.append((start, delta))
        found.sort()
        return found

    def apply(self, s: FloorSet) -> FloorSet:
        if s.stage < self.stage:
            s = lift(s, self.stage)
        return _exchange(s, self.stage, self._moves, 1)


@dataclass(frozen=True)
class HomoclinicData:
    """T^n F ∩ F and the sets describing T^n(RD ∩ T^-n R T^n D).

    The event RD ∩ T^-n R T^n D is carried forward by T^n, which preserves
    the Poisson measure, so only forward shifts are needed:
    T^n RD = C(T^n RE, 0) ∩ C(T^n E, 1) and
    R T^n D = C(R T^n E, 0) ∩ C(R T^n RE, 1).
    """

    n: int
    overlap: FloorSet
    overlap_measure: Fraction
    e_image: FloorSet
    re_image: FloorSet
    conj_e: FloorSet
    conj_re: FloorSet

    @property
    def base_sets(self):
        return self.e_image, self.re_image, self.conj_e, self.conj_re


def homoclinic_quantities(schedule: TowerSchedule, R: InvolutionR, n: int) -> HomoclinicData:
    if n < 0:
        raise ValueError("n must be nonnegative")
    if R.schedule is not schedule:
        raise ValueError("R belongs to another schedule")
    F = R.support
    overlap = shift(F, n) & F
    e_img, re_img = shift(R.floor_E, n), shift(R.floor_RE, n)
    return HomoclinicData(n, overlap, measure(overlap), e_img, re_img,
                          R.apply(e_img), R.apply(re_img))

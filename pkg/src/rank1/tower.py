"""Rank-one cutting-and-stacking towers with exact floor-set algebra.

A schedule records, per stage j, the tower height h_j, the floor width w_j and
where each of the r_j columns of tower j starts inside tower j+1. Sets are
unions of floors of one stage, stored as sorted disjoint half-open index runs
with big-integer endpoints, so heights of 10^30 and beyond cost nothing.

The map S moves every floor one step up. At a finite stage it is undefined on
the top floor, so ``shift`` re-expresses a set at the first stage tall enough
to hold the translated runs instead of wrapping around.
"""

from __future__ import annotations

import bisect
import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .errors import ScheduleError, StageExhausted
from .sequences import SequencePair

PRESETS = ("halving", "katok", "custom")
MARGINS = ("minimal", "checkpoint")


@dataclass(frozen=True)
class ConstructionParams:
    """How to pick the cut count r_j and spacers s_j(1..r_j) at each stage.

    ``halving`` uses r_j = 2, s_j(1) = 0 and a large top spacer tied to the
    sequences. With ``spacer_margin="minimal"`` the top spacer is
    max{p(j h_j), q(j h_j)} + 1. The default ``"checkpoint"`` margin uses
    max{p(j h_j + 1), q(j h_j + 1)} + 2 h_j + 1, the least value for which the
    checkpoint N_j exceeds j h_j.

    ``stretch`` maps a stage j to an integer factor K >= 1 that replaces j h_j
    by K j h_j in the top-spacer rule, so N_j exceeds K j h_j. Larger spacers
    are always admissible; they trade a taller next stage for a wider window.

    Stages listed in ``modification_stages`` use Katok spacers: r_j = 2j with
    j zero spacers followed by j unit spacers.
    """

    preset: str = "halving"
    cut_rule: Callable[[int], int] | None = None
    spacer_rule: Callable[[int, int, SequencePair | None], Sequence[int]] | None = None
    base_width: Fraction = Fraction(1)
    modification_stages: frozenset = frozenset()
    spacer_margin: str = "checkpoint"
    stretch: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ScheduleError(f"unknown preset {self.preset!r}")
        if self.spacer_margin not in MARGINS:
            raise ScheduleError(f"unknown spacer margin {self.spacer_margin!r}")
        if Fraction(self.base_width) <= 0:
            raise ScheduleError("base_width must be positive")
        if self.preset == "custom" and (self.cut_rule is None or self.spacer_rule is None):
            raise ScheduleError("custom preset needs cut_rule and spacer_rule")
        object.__setattr__(self, "base_width", Fraction(self.base_width))
        object.__setattr__(self, "modification_stages", frozenset(self.modification_stages))
        stretch = {int(j): int(k) for j, k in dict(self.stretch).items()}
        if any(k < 1 for k in stretch.values()):
            raise ScheduleError("stretch factors must be >= 1")
        object.__setattr__(self, "stretch", stretch)


@dataclass(frozen=True)
class TowerStage:
    j: int
    height: int
    width: Fraction
    kind: str | None = None
    spacers: tuple[int, ...] | None = None  # None at the top stage
    column_offsets: tuple[int, ...] | None = None

    @property
    def cuts(self) -> int | None:
        return None if self.spacers is None else len(self.spacers)


@dataclass(frozen=True, eq=False)
class TowerSchedule:
    stages: tuple[TowerStage, ...]
    meta: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def J_max(self) -> int:
        return len(self.stages)

    def stage(self, j: int) -> TowerStage:
        if not 1 <= j <= self.J_max:
            raise StageExhausted(f"stage {j} outside 1..{self.J_max}")
        return self.stages[j - 1]

    def height(self, j: int) -> int:
        return self.stage(j).height

    def width(self, j: int) -> Fraction:
        return self.stage(j).width

    @property
    def heights(self) -> list[int]:
        return [s.height for s in self.stages]

    def is_halving(self, j: int) -> bool:
        st = self.stage(j)
        return st.spacers is not None and len(st.spacers) == 2 and st.spacers[0] == 0

    def embedding_offsets(self, j: int, J: int) -> tuple[int, ...]:
        """Sorted positions in stage J of the copies of floor 0 of stage j."""
        if J < j:
            raise ValueError("cannot embed a higher stage into a lower one")
        key = (j, J)
        if key not in self._cache:
            if J == j:
                offs = (0,)
            else:
                inner = self.embedding_offsets(j + 1, J)
                cols = self.stage(j).column_offsets
                offs = tuple(t + o for t in inner for o in cols)
            self._cache[key] = offs
        return self._cache[key]

    # constructors for common sets

    def floors(self, j: int, indices: Iterable[int]) -> "FloorSet":
        return FloorSet(self, j, [(k, k + 1) for k in indices])

    def floor(self, j: int, k: int) -> "FloorSet":
        return FloorSet(self, j, [(k, k + 1)])

    def tower(self, j: int) -> "FloorSet":
        """X_j as a set at stage j."""
        return FloorSet(self, j, [(0, self.height(j))])

    def empty(self, j: int = 1) -> "FloorSet":
        return FloorSet(self, j, [])

    # serialization

    def to_dict(self) -> dict:
        return {
            "meta": self.meta,
            "stages": [
                {
                    "j": s.j,
                    "h": str(s.height),
                    "w": [str(s.width.numerator), str(s.width.denominator)],
                    "kind": s.kind,
                    "spacers": None if s.spacers is None else [str(x) for x in s.spacers],
                }
                for s in self.stages
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "TowerSchedule":
        raw = data["stages"]
        if not raw:
            raise ScheduleError("schedule has no stages")
        base = Fraction(int(raw[0]["w"][0]), int(raw[0]["w"][1]))
        spacer_list = []
        for s in raw[:-1]:
            if s["spacers"] is None:
                raise ScheduleError(f"stage {s['j']} is missing its spacers")
            spacer_list.append(tuple(int(x) for x in s["spacers"]))
        sched = _assemble(base, spacer_list, [s["kind"] for s in raw], dict(data.get("meta", {})))
        for s, st in zip(raw, sched.stages):
            w = Fraction(int(s["w"][0]), int(s["w"][1]))
            if int(s["h"]) != st.height or w != st.width:
                raise ScheduleError(f"stage {s['j']} disagrees with the height recursion")
        return sched

    @classmethod
    def from_json(cls, text: str) -> "TowerSchedule":
        return cls.from_dict(json.loads(text))

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict()["stages"]).encode()).hexdigest()[:16]


def _assemble(base_width, spacer_list, kinds, meta) -> TowerSchedule:
    stages = []
    h, w = 1, base_width
    for j, spacers in enumerate(spacer_list, start=1):
        if len(spacers) < 2:
            raise ScheduleError(f"stage {j}: need r_j >= 2, got {len(spacers)}")
        if any(s < 0 for s in spacers):
            raise ScheduleError(f"stage {j}: spacers must be nonnegative")
        offsets, pos = [], 0
        for s in spacers:
            offsets.append(pos)
            pos += h + s
        stages.append(TowerStage(j, h, w, kinds[j - 1], tuple(spacers), tuple(offsets)))
        h, w = pos, w / len(spacers)
    top = len(spacer_list) + 1
    stages.append(TowerStage(top, h, w, kinds[top - 1] if len(kinds) >= top else None))
    return TowerSchedule(tuple(stages), meta)


def katok_spacers(j: int) -> tuple[int, ...]:
    return (0,) * j + (1,) * j


def build_schedule(params: ConstructionParams, sequences: SequencePair | None,
                   J_max: int) -> TowerSchedule:
    """Build stages 1..J_max; stage J_max is the top and carries no cut data."""
    if J_max < 1:
        raise ScheduleError("J_max must be >= 1")
    if params.preset == "halving" and sequences is None:
        raise ScheduleError("halving preset needs a sequence pair")
    spacer_list, kinds = [], []
    h = 1
    for j in range(1, J_max):
        if j in params.modification_stages or params.preset == "katok":
            kind, spacers = "katok", katok_spacers(j)
        elif params.preset == "halving":
            kind = "halving"
            reach = params.stretch.get(j, 1) * j * h
            if params.spacer_margin == "minimal":
                top = sequences.max_at(reach) + 1
            else:
                top = sequences.max_at(reach + 1) + 2 * h + 1
            spacers = (0, top)
        else:
            kind = "custom"
            r = int(params.cut_rule(j))
            spacers = tuple(int(s) for s in params.spacer_rule(j, h, sequences))
            if len(spacers) != r:
                raise ScheduleError(f"stage {j}: spacer rule gave {len(spacers)} values, r_j = {r}")
        spacer_list.append(spacers)
        kinds.append(kind)
        h = len(spacers) * h + sum(spacers)
    kinds.append(None)
    meta = {
        "preset": params.preset,
        "spacer_margin": params.spacer_margin,
        "modification_stages": sorted(params.modification_stages),
    }
    if params.stretch:
        meta["stretch"] = {str(j): k for j, k in sorted(params.stretch.items())}
    if sequences is not None:
        meta["sequences"] = sequences.spec
    return _assemble(params.base_width, spacer_list, kinds, meta)


# ---------------------------------------------------------------------------
# run-list helpers

def normalize(runs) -> tuple[tuple[int, int], ...]:
    """Sort runs and merge overlapping or adjacent ones; drop empty runs."""
    out: list[list[int]] = []
    for a, b in sorted((int(a), int(b)) for a, b in runs if b > a):
        if out and a <= out[-1][1]:
            if b > out[-1][1]:
                out[-1][1] = b
        else:
            out.append([a, b])
    return tuple((a, b) for a, b in out)


def _intersect_runs(x, y):
    out, i, k = [], 0, 0
    while i < len(x) and k < len(y):
        a = max(x[i][0], y[k][0])
        b = min(x[i][1], y[k][1])
        if a < b:
            out.append((a, b))
        if x[i][1] < y[k][1]:
            i += 1
        else:
            k += 1
    return tuple(out)


def _difference_runs(x, y):
    out = []
    k = 0
    for a, b in x:
        while k < len(y) and y[k][1] <= a:
            k += 1
        cur = a
        m = k
        while m < len(y) and y[m][0] < b:
            if y[m][0] > cur:
                out.append((cur, y[m][0]))
            cur = max(cur, y[m][1])
            m += 1
        if cur < b:
            out.append((cur, b))
    return tuple(out)


def _length(runs) -> int:
    return sum(b - a for a, b in runs)


class FloorSet:
    """A finite union of floors of one stage of a schedule.

    Equality is point-set equality: sets given at different stages compare
    equal when they describe the same subset of the phase space.
    """

    __slots__ = ("schedule", "stage", "runs")

    def __init__(self, schedule: TowerSchedule, stage: int, runs=()):
        h = schedule.height(stage)
        runs = normalize(runs)
        if runs and (runs[0][0] < 0 or runs[-1][1] > h):
            raise ValueError(f"runs must lie in [0, {h}) at stage {stage}")
        self._init(schedule, stage, runs)

    def _init(self, schedule, stage, runs):
        object.__setattr__(self, "schedule", schedule)
        object.__setattr__(self, "stage", stage)
        object.__setattr__(self, "runs", runs)

    @classmethod
    def _trusted(cls, schedule, stage, runs) -> "FloorSet":
        obj = cls.__new__(cls)
        obj._init(schedule, stage, tuple(runs))
        return obj

    def __setattr__(self, name, value):
        raise AttributeError("FloorSet is immutable")

    def __repr__(self):
        shown = list(self.runs[:4])
        more = f", ...+{len(self.runs) - 4}" if len(self.runs) > 4 else ""
        return f"FloorSet(stage={self.stage}, runs={shown}{more})"

    def __bool__(self):
        return bool(self.runs)

    __hash__ = None

    def __eq__(self, other):
        if not isinstance(other, FloorSet):
            return NotImplemented
        return equals(self, other)

    def __and__(self, other):
        return intersect(self, other)

    def __or__(self, other):
        return union(self, other)

    def __sub__(self, other):
        return difference(self, other)

    @property
    def size(self) -> int:
        """Number of floors."""
        return _length(self.runs)

    def measure(self) -> Fraction:
        return measure(self)

    def lift(self, J: int) -> "FloorSet":
        return lift(self, J)

    def shift(self, k: int) -> "FloorSet":
        return shift(self, k)

    def indices(self):
        for a, b in self.runs:
            yield from range(a, b)

    def to_dict(self) -> dict:
        return {"stage": self.stage, "runs": [[str(a), str(b)] for a, b in self.runs]}

    @classmethod
    def from_dict(cls, schedule: TowerSchedule, data: dict) -> "FloorSet":
        return cls(schedule, int(data["stage"]), [(int(a), int(b)) for a, b in data["runs"]])


def lift(s: FloorSet, J: int) -> FloorSet:
    """Re-express ``s`` at stage J >= s.stage; the point set is unchanged."""
    if J < s.stage:
        raise ValueError(f"cannot lift from stage {s.stage} down to {J}")
    if J == s.stage:
        return s
    sched = s.schedule
    sched.stage(J)
    offsets = sched.embedding_offsets(s.stage, J)
    out: list[tuple[int, int]] = []
    for t in offsets:
        for a, b in s.runs:
            a, b = a + t, b + t
            if out and out[-1][1] == a:
                out[-1] = (out[-1][0], b)
            else:
                out.append((a, b))
    return FloorSet._trusted(sched, J, out)


def measure(s: FloorSet) -> Fraction:
    return s.schedule.width(s.stage) * _length(s.runs)


def _fit_stage(s: FloorSet, k: int) -> int:
    if not s.runs:
        return s.stage
    sched = s.schedule
    if s.runs[0][0] + k < 0:
        # the bottom copy never moves under lifting, so no stage can hold it
        raise StageExhausted(f"S^{k} of this set falls below the base of every tower")
    top = s.runs[-1][1]
    for J in range(s.stage, sched.J_max + 1):
        if sched.embedding_offsets(s.stage, J)[-1] + top + k <= sched.height(J):
            return J
    raise StageExhausted(f"S^{k} of this set needs more than {sched.J_max} stages")


def shift(s: FloorSet, k: int) -> FloorSet:
    """The image S^k(s); negative k applies the inverse map."""
    k = int(k)
    if k == 0 or not s.runs:
        return s
    J = _fit_stage(s, k)
    lifted = lift(s, J)
    return FloorSet._trusted(s.schedule, J, [(a + k, b + k) for a, b in lifted.runs])


def _common(a: FloorSet, b: FloorSet):
    if a.schedule is not b.schedule:
        raise ValueError("floor sets belong to different schedules")
    J = max(a.stage, b.stage)
    return J, lift(a, J).runs, lift(b, J).runs


def intersect(a: FloorSet, b: FloorSet) -> FloorSet:
    J, x, y = _common(a, b)
    return FloorSet._trusted(a.schedule, J, _intersect_runs(x, y))


def union(a: FloorSet, b: FloorSet) -> FloorSet:
    J, x, y = _common(a, b)
    return FloorSet._trusted(a.schedule, J, normalize(x + y))


def difference(a: FloorSet, b: FloorSet) -> FloorSet:
    J, x, y = _common(a, b)
    return FloorSet._trusted(a.schedule, J, _difference_runs(x, y))


def is_disjoint(a: FloorSet, b: FloorSet) -> bool:
    return not intersect(a, b).runs


def equals(a: FloorSet, b: FloorSet) -> bool:
    _, x, y = _common(a, b)
    return x == y


def set_algebra(a: FloorSet, b: FloorSet) -> dict:
    return {
        "intersect": intersect(a, b),
        "union": union(a, b),
        "difference": difference(a, b),
        "is_disjoint": is_disjoint(a, b),
        "equals": equals(a, b),
    }


def union_all(sets: Sequence[FloorSet]) -> FloorSet:
    if not sets:
        raise ValueError("need at least one set")
    J = max(s.stage for s in sets)
    runs = []
    for s in sets:
        runs.extend(lift(s, J).runs)
    return FloorSet._trusted(sets[0].schedule, J, normalize(runs))


def correlation(a: FloorSet, b: FloorSet, k: int) -> Fraction:
    """mu(S^k a ∩ b)."""
    return measure(intersect(shift(a, k), b))


def contains_index(runs, i: int) -> bool:
    starts = [r[0] for r in runs]
    pos = bisect.bisect_right(starts, i) - 1
    return pos >= 0 and i < runs[pos][1]

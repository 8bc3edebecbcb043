"""Integer sequences p(n), q(n) and the pair abstraction used to drive the construction.

Every sequence evaluates exactly on Python ints. ``values`` is a vectorized
int64 path for window enumeration; it raises ``OverflowError`` rather than
wrapping, so callers can fall back to the exact path.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from math import isqrt
from typing import Callable

import numpy as np

from .errors import ConfigInvalid, Degenerate

_INT64_SAFE = 2**62
_SEARCH_LIMIT = 2**256


class IntSequence:
    name: str = "sequence"
    is_polynomial = False

    def __call__(self, n: int) -> int:
        raise NotImplementedError

    def bound(self, n_max: int) -> int:
        """Upper bound on |value| over 1..n_max."""
        return max(abs(self(n_max)), abs(self(1)))

    def values(self, ns: np.ndarray) -> np.ndarray:
        if len(ns) and self.bound(int(ns.max())) >= _INT64_SAFE:
            raise OverflowError(f"{self.name} exceeds int64 on this range")
        return np.fromiter((self(int(n)) for n in ns), dtype=np.int64, count=len(ns))


class Polynomial(IntSequence):
    """Integer polynomial with coefficients listed from the constant term up."""

    is_polynomial = True

    def __init__(self, coeffs):
        coeffs = [int(c) for c in coeffs]
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs.pop()
        if not coeffs:
            coeffs = [0]
        self.coeffs = tuple(coeffs)
        self.name = _poly_name(self.coeffs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> int:
        return self.coeffs[-1]

    def __call__(self, n: int) -> int:
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * n + c
        return acc

    def bound(self, n_max: int) -> int:
        return sum(abs(c) * n_max**i for i, c in enumerate(self.coeffs))

    def values(self, ns):
        if len(ns) and self.bound(int(ns.max())) >= _INT64_SAFE:
            raise OverflowError(f"{self.name} exceeds int64 on this range")
        ns = ns.astype(np.int64)
        acc = np.zeros_like(ns)
        for c in reversed(self.coeffs):
            acc = acc * ns + c
        return acc

    def __repr__(self):
        return f"Polynomial({list(self.coeffs)})"


class MildSequence(IntSequence):
    """n^2 + n*floor(sqrt(n)): quadratic growth, used to reach more stages cheaply."""

    name = "mild"

    def __call__(self, n: int) -> int:
        return n * n + n * isqrt(n)

    def bound(self, n_max):
        return self(n_max)

    def values(self, ns):
        if len(ns) and self.bound(int(ns.max())) >= _INT64_SAFE:
            raise OverflowError("mild sequence exceeds int64 on this range")
        ns = ns.astype(np.int64)
        r = np.floor(np.sqrt(ns.astype(np.float64))).astype(np.int64)
        r -= r * r > ns
        r += (r + 1) * (r + 1) <= ns
        return ns * ns + ns * r

    def __repr__(self):
        return "MildSequence()"


class CustomSequence(IntSequence):
    def __init__(self, func: Callable[[int], int], name: str = "custom"):
        self.func = func
        self.name = name

    def __call__(self, n):
        return int(self.func(n))

    def __repr__(self):
        return f"CustomSequence({self.name!r})"


def _poly_name(coeffs) -> str:
    parts = []
    for i in range(len(coeffs) - 1, -1, -1):
        c = coeffs[i]
        if c == 0:
            continue
        mono = "" if i == 0 else ("n" if i == 1 else f"n^{i}")
        if mono and abs(c) == 1:
            term = mono
        elif mono:
            term = f"{abs(c)}*{mono}"
        else:
            term = str(abs(c))
        sign = "-" if c < 0 else "+"
        parts.append((sign, term))
    if not parts:
        return "0"
    head_sign, head = parts[0]
    text = ("-" if head_sign == "-" else "") + head
    for sign, term in parts[1:]:
        text += f" {sign} {term}"
    return text


def parse_sequence(text: str) -> IntSequence:
    """Parse ``n^2``, ``2*n**3 + n``, ``mild`` or ``poly:c0,c1,...``."""
    text = text.strip()
    if text == "mild":
        return MildSequence()
    if text.startswith("poly:"):
        try:
            return Polynomial(int(c) for c in text[5:].split(","))
        except ValueError as exc:
            raise ConfigInvalid(f"bad coefficient list {text!r}") from exc
    import sympy

    n = sympy.Symbol("n")
    try:
        expr = sympy.sympify(text.replace("^", "**"), locals={"n": n})
        poly = sympy.Poly(expr, n)
    except (sympy.SympifyError, sympy.PolynomialError, TypeError) as exc:
        raise ConfigInvalid(f"cannot parse sequence {text!r}") from exc
    coeffs = poly.all_coeffs()[::-1]
    if not all(c.is_integer for c in coeffs):
        raise ConfigInvalid(f"sequence {text!r} must have integer coefficients")
    return Polynomial(int(c) for c in coeffs)


@dataclass(frozen=True)
class SequencePair:
    p: IntSequence
    q: IntSequence

    @classmethod
    def parse(cls, p: str, q: str) -> "SequencePair":
        return cls(parse_sequence(p), parse_sequence(q))

    @classmethod
    def squares_cubes(cls) -> "SequencePair":
        return cls(Polynomial([0, 0, 1]), Polynomial([0, 0, 0, 1]))

    @classmethod
    def mild(cls) -> "SequencePair":
        return cls(Polynomial([0, 0, 1]), MildSequence())

    def max_at(self, n: int) -> int:
        return max(self.p(n), self.q(n))

    def first_above(self, bound: int) -> int:
        """Least n >= 1 with p(n) > bound and q(n) > bound (sequences assumed nondecreasing)."""
        ok = lambda n: self.p(n) > bound and self.q(n) > bound
        return _least_true(ok)

    def last_below(self, bound: int) -> int:
        """Largest n >= 1 with p(n), q(n) < bound, or 0 if none."""
        if self.max_at(1) >= bound:
            return 0
        return _least_true(lambda n: self.max_at(n) >= bound) - 1

    def gap_threshold(self, width: int) -> int:
        """Least n from which both differences are >= width (differences assumed nondecreasing)."""
        ok = lambda n: (self.p(n + 1) - self.p(n) >= width
                        and self.q(n + 1) - self.q(n) >= width)
        return _least_true(ok)

    @property
    def spec(self) -> dict:
        return {"p": _sequence_spec(self.p), "q": _sequence_spec(self.q)}

    def digest(self) -> str:
        text = f"{self.spec['p']}|{self.spec['q']}"
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _sequence_spec(seq: IntSequence) -> str:
    if isinstance(seq, Polynomial):
        return "poly:" + ",".join(str(c) for c in seq.coeffs)
    return seq.name


def _least_true(pred, start: int = 1) -> int:
    """Least n >= start with pred(n), for a predicate that stays true once true."""
    if pred(start):
        return start
    lo, hi = start, start + 1
    while not pred(hi):
        if hi > _SEARCH_LIMIT:
            raise Degenerate("sequence never reaches the requested bound")
        lo, hi = hi, 2 * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi

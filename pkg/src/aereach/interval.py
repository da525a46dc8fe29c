"""Outward-rounded interval arithmetic and boxes of intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Union

from . import _rounding as rnd

INF = math.inf

# floats bracketing pi
PI_LO = 3.141592653589793
PI_HI = math.nextafter(PI_LO, INF)


class DomainError(ArithmeticError):
    """An operation was applied outside the domain of its function."""


Number = Union[int, float]


class Interval:
    """Closed interval ``[lo, hi]`` of reals with float endpoints.

    Empty intervals are normalized to the single pair ``(inf, -inf)``.
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo: Number, hi: Number | None = None):
        lo = float(lo)
        hi = lo if hi is None else float(hi)
        if not lo <= hi:  # also catches NaN endpoints
            lo, hi = INF, -INF
        self.lo = lo
        self.hi = hi

    # construction helpers -------------------------------------------------
    @classmethod
    def empty(cls) -> Interval:
        return cls(INF, -INF)

    @classmethod
    def entire(cls) -> Interval:
        return cls(-INF, INF)

    @classmethod
    def hull_of(cls, values: Iterable[Number]) -> Interval:
        vals = [float(v) for v in values]
        if not vals:
            return cls.empty()
        return cls(min(vals), max(vals))

    # predicates ------------------------------------------------------------
    def is_empty(self) -> bool:
        return self.lo > self.hi

    def is_point(self) -> bool:
        return self.lo == self.hi

    def contains(self, other: Interval | Number) -> bool:
        if isinstance(other, Interval):
            if other.is_empty():
                return True
            return self.lo <= other.lo and other.hi <= self.hi
        return self.lo <= other <= self.hi

    __contains__ = contains

    def is_finite(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    # geometry ----------------------------------------------------------------
    def mid(self) -> float:
        """Float midpoint; not rigorous, used as an expansion point."""
        if self.is_empty():
            raise DomainError("midpoint of an empty interval")
        if self.lo == -INF:
            return -INF if self.hi == -INF else (0.0 if self.hi == INF else -rnd.MAX_FLOAT)
        if self.hi == INF:
            return rnd.MAX_FLOAT
        m = 0.5 * self.lo + 0.5 * self.hi
        return min(max(m, self.lo), self.hi)

    def rad(self) -> float:
        """Float half-width; not rigorous."""
        return 0.5 * (self.hi - self.lo)

    def outer_rad(self, c: float) -> float:
        """Smallest float r with [c - r, c + r] covering the interval."""
        return max(rnd.sub_up(c, self.lo), rnd.sub_up(self.hi, c), 0.0)

    def inner_rad(self, c: float) -> float:
        """Largest float r with [c - r, c + r] inside the interval."""
        return max(min(rnd.sub_down(c, self.lo), rnd.sub_down(self.hi, c)), 0.0)

    def mag(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    def mig(self) -> float:
        if self.lo <= 0.0 <= self.hi:
            return 0.0
        return min(abs(self.lo), abs(self.hi))

    def width_up(self) -> float:
        return rnd.sub_up(self.hi, self.lo)

    def hull(self, other: Interval | Number) -> Interval:
        o = _as_interval(other)
        if self.is_empty():
            return o
        if o.is_empty():
            return self
        return Interval(min(self.lo, o.lo), max(self.hi, o.hi))

    def intersect(self, other: Interval | Number) -> Interval:
        o = _as_interval(other)
        return Interval(max(self.lo, o.lo), min(self.hi, o.hi))

    # arithmetic --------------------------------------------------------------
    def __neg__(self) -> Interval:
        if self.is_empty():
            return self
        return Interval(-self.hi, -self.lo)

    def __pos__(self) -> Interval:
        return self

    def __add__(self, other):
        o = _coerce(other)
        if o is None:
            return NotImplemented
        if self.is_empty() or o.is_empty():
            return Interval.empty()
        return Interval(rnd.add_down(self.lo, o.lo), rnd.add_up(self.hi, o.hi))

    __radd__ = __add__

    def __sub__(self, other):
        o = _coerce(other)
        if o is None:
            return NotImplemented
        if self.is_empty() or o.is_empty():
            return Interval.empty()
        return Interval(rnd.sub_down(self.lo, o.hi), rnd.sub_up(self.hi, o.lo))

    def __rsub__(self, other):
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return o.__sub__(self)

    def __mul__(self, other):
        o = _coerce(other)
        if o is None:
            return NotImplemented
        if self.is_empty() or o.is_empty():
            return Interval.empty()
        a, b, c, d = self.lo, self.hi, o.lo, o.hi
        pairs = ((a, c), (a, d), (b, c), (b, d))
        prods = [x * y for x, y in pairs]
        prods = [0.0 if p != p else p for p in prods]
        lo_pair = pairs[min(range(4), key=prods.__getitem__)]
        hi_pair = pairs[max(range(4), key=prods.__getitem__)]
        return Interval(rnd.mul_down(*lo_pair), rnd.mul_up(*hi_pair))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _coerce(other)
        if o is None:
            return NotImplemented
        if self.is_empty() or o.is_empty():
            return Interval.empty()
        if o.lo <= 0.0 <= o.hi:
            raise DomainError(f"division by {o}, which contains 0")
        return self * o.reciprocal()

    def __rtruediv__(self, other):
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return o.__truediv__(self)

    def reciprocal(self) -> Interval:
        if self.is_empty():
            return self
        if self.lo <= 0.0 <= self.hi:
            raise DomainError(f"reciprocal of {self}, which contains 0")
        return Interval(rnd.div_down(1.0, self.hi), rnd.div_up(1.0, self.lo))

    def __pow__(self, n):
        if isinstance(n, int):
            return self.pow_int(n)
        return NotImplemented

    def __abs__(self) -> Interval:
        if self.is_empty():
            return self
        return Interval(self.mig(), self.mag())

    def sqr(self) -> Interval:
        return self.pow_int(2)

    def pow_int(self, n: int) -> Interval:
        if self.is_empty():
            return self
        if n == 0:
            return Interval(1.0)
        if n == 1:
            return self
        if n < 0:
            return self.reciprocal().pow_int(-n)
        if n % 2 == 0:
            return Interval(_pow_down(self.mig(), n), _pow_up(self.mag(), n))
        lo = _pow_down(self.lo, n) if self.lo >= 0.0 else -_pow_up(-self.lo, n)
        hi = _pow_up(self.hi, n) if self.hi >= 0.0 else -_pow_down(-self.hi, n)
        return Interval(lo, hi)

    def sqrt(self) -> Interval:
        if self.is_empty():
            return self
        if self.lo < 0.0:
            raise DomainError(f"sqrt of {self}, which has negative elements")
        return Interval(rnd.sqrt_down(self.lo), rnd.sqrt_up(self.hi))

    def exp(self) -> Interval:
        if self.is_empty():
            return self
        lo = 0.0 if self.lo == -INF else rnd.elem_down("exp", self.lo)
        hi = 0.0 if self.hi == -INF else rnd.elem_up("exp", self.hi)
        return Interval(max(lo, 0.0), hi)

    def log(self) -> Interval:
        if self.is_empty():
            return self
        if self.lo <= 0.0:
            raise DomainError(f"log of {self}, which has nonpositive elements")
        return Interval(rnd.elem_down("log", self.lo), rnd.elem_up("log", self.hi))

    def sin(self) -> Interval:
        return _trig(self, "sin", max_offset=0.5, min_offset=1.5)

    def cos(self) -> Interval:
        return _trig(self, "cos", max_offset=0.0, min_offset=1.0)

    # comparison and rendering --------------------------------------------------
    def __eq__(self, other) -> bool:
        if isinstance(other, Interval):
            return self.lo == other.lo and self.hi == other.hi
        if isinstance(other, (int, float)):
            return self.lo == self.hi == other
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.lo, self.hi))

    def __iter__(self) -> Iterator[float]:
        yield self.lo
        yield self.hi

    def __repr__(self) -> str:
        return f"Interval({self.lo!r}, {self.hi!r})"

    def __str__(self) -> str:
        if self.is_empty():
            return "[empty]"
        return f"[{self.lo!r},{self.hi!r}]"


EMPTY = Interval.empty()


def _as_interval(x) -> Interval:
    if isinstance(x, Interval):
        return x
    return Interval(x)


def _coerce(x) -> Interval | None:
    if isinstance(x, Interval):
        return x
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return Interval(x)
    return None


def _pow_down(x: float, n: int) -> float:
    """Lower bound of x**n for x >= 0."""
    acc = 1.0
    for _ in range(n):
        acc = rnd.mul_down(acc, x)
    return acc


def _pow_up(x: float, n: int) -> float:
    acc = 1.0
    for _ in range(n):
        acc = rnd.mul_up(acc, x)
    return acc


def _may_contain_extremum(lo: float, hi: float, offset: float) -> bool:
    """Whether some point (2k + offset)*pi might lie in [lo, hi].

    Uses the enclosure [PI_LO, PI_HI] of pi, so the answer errs towards True.
    """
    pi = Interval(PI_LO, PI_HI)
    k = math.floor((lo / PI_HI - offset) / 2.0) - 1
    while True:
        point = (Interval(2.0 * k) + offset) * pi
        if point.lo > hi:
            return False
        if point.hi >= lo:
            return True
        k += 1


def _trig(x: Interval, name: str, max_offset: float, min_offset: float) -> Interval:
    if x.is_empty():
        return x
    if not x.is_finite() or x.hi - x.lo >= 6.0 or x.mag() > 2.0**50:
        return Interval(-1.0, 1.0)
    lo = min(rnd.elem_down(name, x.lo), rnd.elem_down(name, x.hi))
    hi = max(rnd.elem_up(name, x.lo), rnd.elem_up(name, x.hi))
    if _may_contain_extremum(x.lo, x.hi, max_offset):
        hi = 1.0
    if _may_contain_extremum(x.lo, x.hi, min_offset):
        lo = -1.0
    return Interval(max(lo, -1.0), min(hi, 1.0))


@dataclass(frozen=True)
class Box:
    """Cartesian product of intervals, one per input dimension."""

    components: tuple[Interval, ...]

    def __init__(self, components: Iterable[Interval | Sequence[float] | float]):
        comps = []
        for c in components:
            if isinstance(c, Interval):
                comps.append(c)
            elif isinstance(c, (int, float)):
                comps.append(Interval(c))
            else:
                lo, hi = c
                comps.append(Interval(lo, hi))
        object.__setattr__(self, "components", tuple(comps))

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self) -> Iterator[Interval]:
        return iter(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def is_empty(self) -> bool:
        return any(c.is_empty() for c in self.components)

    def center(self) -> tuple[float, ...]:
        return tuple(c.mid() for c in self.components)

    def radius(self) -> tuple[float, ...]:
        return tuple(c.rad() for c in self.components)

    def hull(self, other: Box) -> Box:
        if self.is_empty():
            return other
        if other.is_empty():
            return self
        return Box(a.hull(b) for a, b in zip(self, other))

    def intersect(self, other: Box) -> Box:
        return Box(a.intersect(b) for a, b in zip(self, other))

    def contains(self, other: Box | Sequence[float]) -> bool:
        if isinstance(other, Box):
            if other.is_empty():
                return True
            return all(a.contains(b) for a, b in zip(self, other))
        return all(a.contains(float(v)) for a, v in zip(self, other))

    def __str__(self) -> str:
        return " x ".join(str(c) for c in self.components)


def center(x: Interval | Box):
    """Midpoint of an interval, or the vector of midpoints of a box."""
    return x.mid() if isinstance(x, Interval) else x.center()


def radius(x: Interval | Box):
    return x.rad() if isinstance(x, Interval) else x.radius()


def hull(a, b):
    return a.hull(b)


def intersect(a, b):
    return a.intersect(b)


def contains(outer, inner) -> bool:
    return outer.contains(inner)

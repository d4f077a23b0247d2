"""Closed rational intervals, possibly empty or unbounded on either side.

An endpoint of ``None`` means the interval is unbounded on that side.
The empty interval is a distinguished value and is never encoded as
``lo > hi``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

Rat = Fraction
RatLike = Union[Fraction, int, str]


def rat(x: RatLike) -> Fraction:
    """Coerce ints, 'p/q' strings and exact decimal strings to Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise TypeError("floats are not allowed in exact arithmetic; pass a string or Fraction")
    return Fraction(x)


def fmt_rat(q: Fraction) -> str:
    """Exact decimal string when the denominator is 2^a*5^b, else 'p/q'."""
    den = q.denominator
    if den == 1:
        return str(q.numerator)
    d = den
    k2 = 0
    while d % 2 == 0:
        d //= 2
        k2 += 1
    k5 = 0
    while d % 5 == 0:
        d //= 5
        k5 += 1
    if d != 1:
        return f"{q.numerator}/{q.denominator}"
    digits = max(k2, k5)
    scaled = q.numerator * 10**digits // den
    sign = "-" if scaled < 0 else ""
    scaled = abs(scaled)
    whole, frac = divmod(scaled, 10**digits)
    return f"{sign}{whole}.{str(frac).zfill(digits)}"


@dataclass(frozen=True)
class Interval:
    """A closed interval over the rationals. ``lo``/``hi`` of None mean -inf/+inf."""

    lo: Optional[Fraction] = None
    hi: Optional[Fraction] = None
    empty: bool = False

    def __post_init__(self):
        if not self.empty and self.lo is not None and self.hi is not None:
            if self.lo > self.hi:
                raise ValueError(f"invalid interval [{self.lo}; {self.hi}]; use Interval.empty_set()")

    @staticmethod
    def empty_set() -> "Interval":
        return Interval(None, None, empty=True)

    @staticmethod
    def closed(lo: RatLike, hi: RatLike) -> "Interval":
        lo_, hi_ = rat(lo), rat(hi)
        if lo_ > hi_:
            return Interval.empty_set()
        return Interval(lo_, hi_)

    @staticmethod
    def point(x: RatLike) -> "Interval":
        v = rat(x)
        return Interval(v, v)

    @staticmethod
    def everything() -> "Interval":
        return Interval(None, None)

    @staticmethod
    def at_least(lo: RatLike) -> "Interval":
        return Interval(rat(lo), None)

    @staticmethod
    def at_most(hi: RatLike) -> "Interval":
        return Interval(None, rat(hi))

    def is_empty(self) -> bool:
        return self.empty

    def is_bounded(self) -> bool:
        return self.empty or (self.lo is not None and self.hi is not None)

    def width(self) -> Optional[Fraction]:
        """Width of a bounded interval; None when unbounded; 0 for empty."""
        if self.empty:
            return Fraction(0)
        if self.lo is None or self.hi is None:
            return None
        return self.hi - self.lo

    def contains(self, x: RatLike) -> bool:
        if self.empty:
            return False
        v = rat(x)
        if self.lo is not None and v < self.lo:
            return False
        if self.hi is not None and v > self.hi:
            return False
        return True

    def contains_interval(self, other: "Interval") -> bool:
        if other.empty:
            return True
        if self.empty:
            return False
        if self.lo is not None and (other.lo is None or other.lo < self.lo):
            return False
        if self.hi is not None and (other.hi is None or other.hi > self.hi):
            return False
        return True

    def intersect(self, other: "Interval") -> "Interval":
        if self.empty or other.empty:
            return Interval.empty_set()
        lo = self.lo if other.lo is None else (other.lo if self.lo is None else max(self.lo, other.lo))
        hi = self.hi if other.hi is None else (other.hi if self.hi is None else min(self.hi, other.hi))
        if lo is not None and hi is not None and lo > hi:
            return Interval.empty_set()
        return Interval(lo, hi)

    def hull(self, other: "Interval") -> "Interval":
        if self.empty:
            return other
        if other.empty:
            return self
        lo = None if self.lo is None or other.lo is None else min(self.lo, other.lo)
        hi = None if self.hi is None or other.hi is None else max(self.hi, other.hi)
        return Interval(lo, hi)

    def __str__(self) -> str:
        if self.empty:
            return "empty"
        lo = "-inf" if self.lo is None else fmt_rat(self.lo)
        hi = "+inf" if self.hi is None else fmt_rat(self.hi)
        lb = "(" if self.lo is None else "["
        rb = ")" if self.hi is None else "]"
        return f"{lb}{lo}; {hi}{rb}"

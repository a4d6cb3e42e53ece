"""Outward-rounded scalar interval arithmetic.

Every operation returns an interval guaranteed to contain the exact real
result for all choices of points in the operands.  Directed rounding is
realized by nudging computed endpoints one float outward (`math.nextafter`);
since IEEE-754 double arithmetic is correctly rounded, one ulp of slack is
always enough for +, -, *, /, sqrt.

Transcendentals (sin/cos) use argument reduction against a three-double
expansion of pi followed by a Taylor polynomial with an explicit remainder
bound.  Width inflation is a few ulp for arguments of order one and degrades
proportionally to ``ulp(|x|)`` for large arguments, which is far below every
tolerance used by the certificates in this package.

All values are immutable; operations are pure and thread-safe.
"""

from __future__ import annotations

import math

__all__ = [
    "Interval",
    "PI",
    "TWO_PI",
    "HALF_PI",
    "hull",
    "isqrt",
    "icos",
    "isin",
]

_NEXT_UP = math.inf
_NEXT_DOWN = -math.inf

# pi = PI_HI + PI_MID + PI_LO + eta, |eta| < 1.2e-49
_PI_HI = 3.141592653589793
_PI_MID = 1.2246467991473532e-16
_PI_LO = -2.9947698097183397e-33
_PI_RESID = 2e-49


def _dn(x: float) -> float:
    return math.nextafter(x, _NEXT_DOWN)


def _up(x: float) -> float:
    return math.nextafter(x, _NEXT_UP)


class Interval:
    """Closed interval [lo, hi] with lo <= hi and non-NaN endpoints."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        lo = float(lo)
        hi = lo if hi is None else float(hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("NaN interval endpoint")
        if lo > hi:
            raise ValueError(f"inverted interval [{lo!r}, {hi!r}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, name, value):
        raise AttributeError("Interval is immutable")

    def __reduce__(self):
        return (Interval, (self.lo, self.hi))

    # -- constructors ------------------------------------------------------

    @staticmethod
    def point(x) -> "Interval":
        return Interval(float(x))

    @staticmethod
    def ball(mid: float, rad: float) -> "Interval":
        if rad < 0:
            raise ValueError("negative radius")
        return Interval(_dn(mid - rad), _up(mid + rad))

    @staticmethod
    def two_pi() -> "Interval":
        return TWO_PI

    # -- diagnostics -------------------------------------------------------

    @property
    def mid(self) -> float:
        m = 0.5 * (self.lo + self.hi)
        if not math.isfinite(m):
            m = 0.5 * self.lo + 0.5 * self.hi
        return m

    @property
    def rad(self) -> float:
        m = self.mid
        return _up(max(m - self.lo, self.hi - m))

    @property
    def width(self) -> float:
        return _up(self.hi - self.lo)

    @property
    def mag(self) -> float:
        """sup |x| over the interval."""
        return max(abs(self.lo), abs(self.hi))

    @property
    def mig(self) -> float:
        """inf |x| over the interval."""
        if self.lo > 0.0:
            return self.lo
        if self.hi < 0.0:
            return -self.hi
        return 0.0

    def __repr__(self):
        return f"[{self.lo!r}, {self.hi!r}]"

    # -- predicates --------------------------------------------------------

    def contains(self, x) -> bool:
        if isinstance(x, Interval):
            return self.lo <= x.lo and x.hi <= self.hi
        return self.lo <= x <= self.hi

    __contains__ = contains

    def strictly_contains(self, other: "Interval") -> bool:
        return self.lo < other.lo and other.hi < self.hi

    def intersects(self, other: "Interval") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def is_point(self) -> bool:
        return self.lo == self.hi

    def __eq__(self, other):
        if isinstance(other, Interval):
            return self.lo == other.lo and self.hi == other.hi
        return NotImplemented

    def __hash__(self):
        return hash((self.lo, self.hi))

    # -- lattice -----------------------------------------------------------

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def intersect(self, other: "Interval") -> "Interval":
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            raise ValueError(f"empty intersection of {self} and {other}")
        return Interval(lo, hi)

    def inflate(self, eps_abs: float, eps_rel: float = 0.0) -> "Interval":
        pad = eps_abs + eps_rel * self.mag
        return Interval(_dn(self.lo - pad), _up(self.hi + pad))

    # -- arithmetic --------------------------------------------------------

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __abs__(self):
        if self.lo >= 0.0:
            return self
        if self.hi <= 0.0:
            return Interval(-self.hi, -self.lo)
        return Interval(0.0, max(-self.lo, self.hi))

    def __add__(self, other):
        # x + 0 is exact in IEEE; skipping the outward nudge there keeps
        # exact zeros (section coordinates) exact
        if isinstance(other, Interval):
            lo = self.lo + other.lo
            hi = self.hi + other.hi
            return Interval(lo if (self.lo == 0.0 or other.lo == 0.0) else _dn(lo),
                            hi if (self.hi == 0.0 or other.hi == 0.0) else _up(hi))
        if isinstance(other, (int, float)):
            o = float(other)
            if o == 0.0:
                return self
            return Interval(_dn(self.lo + o) if self.lo != 0.0 else o,
                            _up(self.hi + o) if self.hi != 0.0 else o)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Interval):
            lo = self.lo - other.hi
            hi = self.hi - other.lo
            return Interval(lo if (self.lo == 0.0 or other.hi == 0.0) else _dn(lo),
                            hi if (self.hi == 0.0 or other.lo == 0.0) else _up(hi))
        if isinstance(other, (int, float)):
            o = float(other)
            if o == 0.0:
                return self
            return Interval(_dn(self.lo - o) if self.lo != 0.0 else -o,
                            _up(self.hi - o) if self.hi != 0.0 else -o)
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, (int, float)):
            o = float(other)
            return Interval(_dn(o - self.hi) if o != 0.0 and self.hi != 0.0 else o - self.hi,
                            _up(o - self.lo) if o != 0.0 and self.lo != 0.0 else o - self.lo)
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, Interval):
            a, b, c, d = self.lo, self.hi, other.lo, other.hi
            if (a == 0.0 and b == 0.0) or (c == 0.0 and d == 0.0):
                return _ZERO
            p1 = a * c
            p2 = a * d
            p3 = b * c
            p4 = b * d
            return Interval(_dn(min(p1, p2, p3, p4)), _up(max(p1, p2, p3, p4)))
        if isinstance(other, (int, float)):
            o = float(other)
            if o == 0.0 or (self.lo == 0.0 and self.hi == 0.0):
                return _ZERO
            p1 = self.lo * o
            p2 = self.hi * o
            if p1 > p2:
                p1, p2 = p2, p1
            return Interval(_dn(p1), _up(p2))
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Interval):
            if other.lo <= 0.0 <= other.hi:
                raise ZeroDivisionError(f"division by interval {other} containing zero")
            a, b, c, d = self.lo, self.hi, other.lo, other.hi
            q1 = a / c
            q2 = a / d
            q3 = b / c
            q4 = b / d
            return Interval(_dn(min(q1, q2, q3, q4)), _up(max(q1, q2, q3, q4)))
        if isinstance(other, (int, float)):
            o = float(other)
            if o == 0.0:
                raise ZeroDivisionError("division by zero scalar")
            q1 = self.lo / o
            q2 = self.hi / o
            if q1 > q2:
                q1, q2 = q2, q1
            return Interval(_dn(q1), _up(q2))
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, (int, float)):
            return Interval.point(other) / self
        return NotImplemented

    def __pow__(self, n):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return 1.0 / (self ** (-n))
        if n == 0:
            return Interval(1.0)
        if n == 1:
            return self
        if n % 2 == 0:
            m = self.mig
            lo = _dn(m ** n)
            hi = _up(self.mag ** n)
            return Interval(max(lo, 0.0), hi)
        return Interval(_dn(self.lo ** n), _up(self.hi ** n))

    def sqrt(self) -> "Interval":
        lo_in = self.lo
        if lo_in < 0.0:
            # tolerate directed-rounding noise on provably nonnegative
            # quantities (sums of squares): intersect with [0, inf)
            if self.hi < 0.0 or lo_in < -1e-13 * max(self.hi, 1.0):
                raise ValueError(f"sqrt of interval {self} with negative part")
            lo_in = 0.0
        lo = _dn(math.sqrt(lo_in))
        return Interval(max(lo, 0.0), _up(math.sqrt(self.hi)))

    def square(self) -> "Interval":
        return self ** 2


_ZERO = Interval(0.0, 0.0)

PI = Interval(_PI_HI, _up(_PI_HI))          # math.pi rounds pi down
TWO_PI = Interval(2.0 * _PI_HI, _up(2.0 * _PI_HI))
HALF_PI = Interval(0.5 * _PI_HI, _up(0.5 * _PI_HI))


def hull(items) -> Interval:
    """Interval hull of an iterable of Intervals / floats."""
    out = None
    for it in items:
        iv = it if isinstance(it, Interval) else Interval.point(it)
        out = iv if out is None else out.hull(iv)
    if out is None:
        raise ValueError("hull of empty iterable")
    return out


def isqrt(x) -> Interval:
    return (x if isinstance(x, Interval) else Interval.point(x)).sqrt()


# ---------------------------------------------------------------------------
# sin / cos
# ---------------------------------------------------------------------------

# cos Taylor on |r| <= 0.9, truncated after r^24: remainder <= 0.9^26/26! < 2.6e-28
_COS_ORDER = 12
_COS_REM = 2.6e-28
_SIN_REM = 2.4e-28

_FACT = [math.factorial(2 * k) for k in range(_COS_ORDER + 1)]
_FACT_ODD = [math.factorial(2 * k + 1) for k in range(_COS_ORDER + 1)]


def _cos_core(r: Interval) -> Interval:
    """cos on a reduced interval |r| <= ~0.9, via alternating Taylor series."""
    if r.lo == 0.0 == r.hi:
        return Interval(1.0)
    u = r * r
    acc = Interval(1.0 / _FACT[_COS_ORDER] if _COS_ORDER % 2 == 0 else -1.0 / _FACT[_COS_ORDER])
    for k in range(_COS_ORDER - 1, -1, -1):
        c = 1.0 / _FACT[k] if k % 2 == 0 else -1.0 / _FACT[k]
        acc = acc * u + c
    acc = acc + Interval(-_COS_REM, _COS_REM)
    return acc.intersect(Interval(-1.0, 1.0))


def _sin_core(r: Interval) -> Interval:
    if r.lo == 0.0 == r.hi:
        return Interval(0.0)
    u = r * r
    acc = Interval(1.0 / _FACT_ODD[_COS_ORDER] if _COS_ORDER % 2 == 0 else -1.0 / _FACT_ODD[_COS_ORDER])
    for k in range(_COS_ORDER - 1, -1, -1):
        c = 1.0 / _FACT_ODD[k] if k % 2 == 0 else -1.0 / _FACT_ODD[k]
        acc = acc * u + c
    acc = acc * r + Interval(-_SIN_REM, _SIN_REM)
    return acc.intersect(Interval(-1.0, 1.0))


def _reduce_point(x: float):
    """Return (k mod 4, interval enclosure of x - k*pi/2), |r| <~ 0.8."""
    k = round(x * (2.0 / _PI_HI))
    if k == 0:
        return 0, Interval(x)
    ki = float(k)
    r = Interval(x)
    r = r - Interval(ki) * Interval(0.5 * _PI_HI)
    r = r - Interval(ki) * Interval(0.5 * _PI_MID)
    r = r - Interval(ki) * Interval(0.5 * _PI_LO)
    resid = abs(ki) * _PI_RESID
    r = r + Interval(-resid, resid)
    return k % 4, r


def _cos_point(x: float) -> Interval:
    j, r = _reduce_point(x)
    if j == 0:
        return _cos_core(r)
    if j == 1:
        return -_sin_core(r)
    if j == 2:
        return -_cos_core(r)
    return _sin_core(r)


def _sin_point(x: float) -> Interval:
    j, r = _reduce_point(x)
    if j == 0:
        return _sin_core(r)
    if j == 1:
        return _cos_core(r)
    if j == 2:
        return -_sin_core(r)
    return -_cos_core(r)


def _pi_multiple(m: int) -> Interval:
    """Enclosure of m*pi."""
    mi = float(m)
    r = Interval(mi) * Interval(_PI_HI)
    r = r + Interval(mi) * Interval(_PI_MID)
    r = r + Interval(mi) * Interval(_PI_LO)
    return r + Interval(-abs(mi) * _PI_RESID, abs(mi) * _PI_RESID)


def icos(x) -> Interval:
    """Enclosure of {cos t : t in x}."""
    if not isinstance(x, Interval):
        return _cos_point(float(x))
    if x.width >= TWO_PI.hi:
        return Interval(-1.0, 1.0)
    lo_vals = [_cos_point(x.lo), _cos_point(x.hi)]
    lo = min(v.lo for v in lo_vals)
    hi = max(v.hi for v in lo_vals)
    # critical points of cos at integer multiples of pi
    m0 = math.floor(x.lo / _PI_HI) - 1
    m1 = math.ceil(x.hi / _PI_HI) + 1
    for m in range(m0, m1 + 1):
        if _pi_multiple(m).intersects(x):
            if m % 2 == 0:
                hi = 1.0
            else:
                lo = -1.0
    return Interval(max(lo, -1.0), min(hi, 1.0))


def isin(x) -> Interval:
    """Enclosure of {sin t : t in x}."""
    if not isinstance(x, Interval):
        return _sin_point(float(x))
    if x.width >= TWO_PI.hi:
        return Interval(-1.0, 1.0)
    vals = [_sin_point(x.lo), _sin_point(x.hi)]
    lo = min(v.lo for v in vals)
    hi = max(v.hi for v in vals)
    # critical points of sin at pi/2 + m*pi
    a = x.lo - 0.5 * _PI_HI
    b = x.hi - 0.5 * _PI_HI
    m0 = math.floor(a / _PI_HI) - 1
    m1 = math.ceil(b / _PI_HI) + 1
    for m in range(m0, m1 + 1):
        crit = _pi_multiple(m) + HALF_PI
        if crit.intersects(x):
            if m % 2 == 0:
                hi = 1.0
            else:
                lo = -1.0
    return Interval(max(lo, -1.0), min(hi, 1.0))


def reduce_mod_2pi(x: Interval) -> Interval:
    """Shift x by an integer multiple of 2*pi so its midpoint lies in [0, 2*pi).

    The returned interval is an enclosure of {t - 2*pi*k : t in x} for a single
    fixed integer k; its width only grows by the enclosure width of 2*pi*k.
    """
    k = math.floor(x.mid / (2.0 * _PI_HI))
    if k == 0:
        return x
    return x - _pi_multiple(2 * k)

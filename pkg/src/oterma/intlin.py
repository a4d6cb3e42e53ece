"""Interval vectors and matrices on numpy storage, with outward rounding.

`Box` and `IntervalMatrix` hold two float64 arrays (lo, hi).  Binary
operations are vectorized; directed rounding uses `np.nextafter` for single
operations and an a-priori accumulation bound for reductions (sums), so every
result encloses the exact real arithmetic of any selection of points from the
operands.

This module also provides the small amount of verified linear algebra the
certificates need: an enclosure of the inverse of a point matrix, Gershgorin
eigenvalue discs, and max-norm enclosures.
"""

from __future__ import annotations

import math

import numpy as np

from .interval import Interval

__all__ = [
    "Box",
    "IntervalMatrix",
    "mat_mul",
    "mat_inverse_enclosure",
    "gershgorin_enclosure",
    "max_norm",
    "fmt_outward",
]

_U = 2.0 ** -52  # one ulp of 1.0; >= 2*unit roundoff


def _sum_enclosure(lo: np.ndarray, hi: np.ndarray, axis: int):
    """Rigorous lower/upper bounds of sums of intervals along `axis`."""
    n = lo.shape[axis]
    slo = lo.sum(axis=axis)
    shi = hi.sum(axis=axis)
    mag = np.maximum(np.abs(lo), np.abs(hi)).sum(axis=axis)
    err = (n + 2) * _U * mag
    exact = mag == 0.0
    out_lo = np.where(exact, slo, np.nextafter(slo - err, -np.inf))
    out_hi = np.where(exact, shi, np.nextafter(shi + err, np.inf))
    return out_lo, out_hi


def _pair_table(alo, ahi, blo, bhi):
    """Elementwise interval product of broadcastable arrays, outward rounded.

    A factor that is exactly the zero interval yields an exact zero product
    (keeps section coordinates exact)."""
    p1 = alo * blo
    p2 = alo * bhi
    p3 = ahi * blo
    p4 = ahi * bhi
    lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    exact = ((alo == 0.0) & (ahi == 0.0)) | ((blo == 0.0) & (bhi == 0.0))
    out_lo = np.where(exact, 0.0, np.nextafter(lo, -np.inf))
    out_hi = np.where(exact, 0.0, np.nextafter(hi, np.inf))
    return out_lo, out_hi


def _coerce_arrays(data):
    """Build (lo, hi) arrays from nested Interval / float data."""
    def lo_of(x):
        return x.lo if isinstance(x, Interval) else float(x)

    def hi_of(x):
        return x.hi if isinstance(x, Interval) else float(x)

    arr = np.asarray(data, dtype=object)
    lo = np.vectorize(lo_of, otypes=[float])(arr)
    hi = np.vectorize(hi_of, otypes=[float])(arr)
    return lo, hi


class _IntervalArray:
    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None, _raw=False):
        if _raw:
            self.lo = lo
            self.hi = hi
            return
        if hi is None:
            self.lo, self.hi = _coerce_arrays(lo)
        else:
            self.lo = np.array(lo, dtype=float)
            self.hi = np.array(hi, dtype=float)
        if self.lo.shape != self.hi.shape:
            raise ValueError("lo/hi shape mismatch")
        if np.any(np.isnan(self.lo)) or np.any(np.isnan(self.hi)):
            raise ValueError("NaN endpoint")
        if np.any(self.lo > self.hi):
            raise ValueError("inverted interval entry")

    # -- diagnostics --

    @property
    def shape(self):
        return self.lo.shape

    @property
    def mid(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def rad(self) -> np.ndarray:
        m = self.mid
        return np.nextafter(np.maximum(m - self.lo, self.hi - m), np.inf)

    @property
    def width(self) -> np.ndarray:
        return np.nextafter(self.hi - self.lo, np.inf)

    @property
    def mag(self) -> np.ndarray:
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    @property
    def mig(self) -> np.ndarray:
        out = np.zeros_like(self.lo)
        pos = self.lo > 0
        neg = self.hi < 0
        out[pos] = self.lo[pos]
        out[neg] = -self.hi[neg]
        return out

    def max_rad(self) -> float:
        return float(self.rad.max()) if self.lo.size else 0.0

    def copy(self):
        return type(self)(self.lo.copy(), self.hi.copy(), _raw=True)

    def __repr__(self):
        return f"{type(self).__name__}(lo={self.lo!r}, hi={self.hi!r})"

    # -- predicates --

    def contains(self, other) -> bool:
        if isinstance(other, _IntervalArray):
            return bool(np.all(self.lo <= other.lo) and np.all(other.hi <= self.hi))
        arr = np.asarray(other, dtype=float)
        return bool(np.all(self.lo <= arr) and np.all(arr <= self.hi))

    def strictly_contains(self, other) -> bool:
        if isinstance(other, _IntervalArray):
            return bool(np.all(self.lo < other.lo) and np.all(other.hi < self.hi))
        arr = np.asarray(other, dtype=float)
        return bool(np.all(self.lo < arr) and np.all(arr < self.hi))

    def intersects(self, other) -> bool:
        return bool(np.all(self.lo <= other.hi) and np.all(other.lo <= self.hi))

    # -- lattice --

    def hull(self, other):
        return type(self)(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi), _raw=True)

    def intersect(self, other):
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(lo > hi):
            raise ValueError("empty intersection")
        return type(self)(lo, hi, _raw=True)

    def inflate(self, eps_abs: float, eps_rel: float = 0.0):
        pad = eps_abs + eps_rel * self.mag
        return type(self)(np.nextafter(self.lo - pad, -np.inf),
                          np.nextafter(self.hi + pad, np.inf), _raw=True)

    # -- arithmetic --

    def __neg__(self):
        return type(self)(-self.hi, -self.lo, _raw=True)

    def _binary(self, other, sub=False):
        if isinstance(other, _IntervalArray):
            olo, ohi = other.lo, other.hi
        elif isinstance(other, Interval):
            olo, ohi = other.lo, other.hi
        elif isinstance(other, (int, float, np.ndarray)):
            olo = ohi = np.asarray(other, dtype=float)
        else:
            return None
        if sub:
            lo_raw = self.lo - ohi
            hi_raw = self.hi - olo
            lo = np.where((self.lo == 0.0) | (ohi == 0.0), lo_raw,
                          np.nextafter(lo_raw, -np.inf))
            hi = np.where((self.hi == 0.0) | (olo == 0.0), hi_raw,
                          np.nextafter(hi_raw, np.inf))
        else:
            lo_raw = self.lo + olo
            hi_raw = self.hi + ohi
            lo = np.where((self.lo == 0.0) | (olo == 0.0), lo_raw,
                          np.nextafter(lo_raw, -np.inf))
            hi = np.where((self.hi == 0.0) | (ohi == 0.0), hi_raw,
                          np.nextafter(hi_raw, np.inf))
        return type(self)(lo, hi, _raw=True)

    def __add__(self, other):
        out = self._binary(other)
        return NotImplemented if out is None else out

    __radd__ = __add__

    def __sub__(self, other):
        out = self._binary(other, sub=True)
        return NotImplemented if out is None else out

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, _IntervalArray):
            olo, ohi = other.lo, other.hi
        elif isinstance(other, Interval):
            olo = np.full_like(self.lo, other.lo)
            ohi = np.full_like(self.hi, other.hi)
        elif isinstance(other, (int, float, np.ndarray)):
            olo = ohi = np.asarray(other, dtype=float)
        else:
            return NotImplemented
        lo, hi = _pair_table(self.lo, self.hi, olo, ohi)
        return type(self)(lo, hi, _raw=True)

    __rmul__ = __mul__


class Box(_IntervalArray):
    """Interval vector: a cartesian product of intervals (fixed dimension)."""

    def __init__(self, lo, hi=None, _raw=False):
        super().__init__(lo, hi, _raw=_raw)
        if self.lo.ndim != 1:
            raise ValueError("Box must be one-dimensional")

    @staticmethod
    def from_intervals(items) -> "Box":
        return Box([it if isinstance(it, Interval) else Interval.point(it) for it in items])

    @staticmethod
    def from_point(p) -> "Box":
        arr = np.asarray(p, dtype=float)
        return Box(arr.copy(), arr.copy(), _raw=True)

    @staticmethod
    def ball(mid, rad) -> "Box":
        mid = np.asarray(mid, dtype=float)
        rad = np.broadcast_to(np.asarray(rad, dtype=float), mid.shape)
        return Box(np.nextafter(mid - rad, -np.inf), np.nextafter(mid + rad, np.inf), _raw=True)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def __len__(self):
        return self.dim

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Box(self.lo[i].copy(), self.hi[i].copy(), _raw=True)
        return Interval(self.lo[i], self.hi[i])

    def replace(self, i: int, iv: Interval) -> "Box":
        lo = self.lo.copy()
        hi = self.hi.copy()
        lo[i] = iv.lo
        hi[i] = iv.hi
        return Box(lo, hi, _raw=True)

    def dot(self, other) -> Interval:
        """Interval scalar product."""
        if isinstance(other, Box):
            olo, ohi = other.lo, other.hi
        else:
            olo = ohi = np.asarray(other, dtype=float)
        plo, phi = _pair_table(self.lo, self.hi, olo, ohi)
        lo, hi = _sum_enclosure(plo, phi, 0)
        return Interval(float(lo), float(hi))

    def concat(self, other: "Box") -> "Box":
        return Box(np.concatenate([self.lo, other.lo]),
                   np.concatenate([self.hi, other.hi]), _raw=True)

    def intervals(self):
        return [Interval(self.lo[i], self.hi[i]) for i in range(self.dim)]


class IntervalMatrix(_IntervalArray):
    """rows x cols grid of intervals."""

    def __init__(self, lo, hi=None, _raw=False):
        super().__init__(lo, hi, _raw=_raw)
        if self.lo.ndim != 2:
            raise ValueError("IntervalMatrix must be two-dimensional")

    @staticmethod
    def from_point(m) -> "IntervalMatrix":
        arr = np.asarray(m, dtype=float)
        return IntervalMatrix(arr.copy(), arr.copy(), _raw=True)

    @staticmethod
    def identity(n: int) -> "IntervalMatrix":
        e = np.eye(n)
        return IntervalMatrix(e.copy(), e.copy(), _raw=True)

    @property
    def rows(self) -> int:
        return self.lo.shape[0]

    @property
    def cols(self) -> int:
        return self.lo.shape[1]

    def __getitem__(self, ij):
        i, j = ij
        return Interval(self.lo[i, j], self.hi[i, j])

    @property
    def T(self) -> "IntervalMatrix":
        return IntervalMatrix(self.lo.T.copy(), self.hi.T.copy(), _raw=True)

    def row(self, i: int) -> Box:
        return Box(self.lo[i].copy(), self.hi[i].copy(), _raw=True)

    def col(self, j: int) -> Box:
        return Box(self.lo[:, j].copy(), self.hi[:, j].copy(), _raw=True)

    def matvec(self, v) -> Box:
        if isinstance(v, Box):
            vlo, vhi = v.lo, v.hi
        else:
            vlo = vhi = np.asarray(v, dtype=float)
        plo, phi = _pair_table(self.lo, self.hi, vlo[None, :], vhi[None, :])
        lo, hi = _sum_enclosure(plo, phi, 1)
        return Box(lo, hi, _raw=True)

    def rmatvec(self, v) -> Box:
        """v^T . self for an interval (or point) row vector v."""
        if isinstance(v, Box):
            vlo, vhi = v.lo, v.hi
        else:
            vlo = vhi = np.asarray(v, dtype=float)
        plo, phi = _pair_table(self.lo.T, self.hi.T, vlo[None, :], vhi[None, :])
        lo, hi = _sum_enclosure(plo, phi, 1)
        return Box(lo, hi, _raw=True)

    def __matmul__(self, other):
        if isinstance(other, Box):
            return self.matvec(other)
        if isinstance(other, IntervalMatrix):
            olo, ohi = other.lo, other.hi
        elif isinstance(other, np.ndarray):
            olo = ohi = np.asarray(other, dtype=float)
        else:
            return NotImplemented
        return mat_mul(self, IntervalMatrix(olo, ohi, _raw=True))

    def __rmatmul__(self, other):
        if isinstance(other, np.ndarray):
            return mat_mul(IntervalMatrix.from_point(other), self)
        return NotImplemented

    def abs_row_sums(self) -> np.ndarray:
        """Upper bounds of row sums of entry magnitudes."""
        mag = self.mag
        n = mag.shape[1]
        s = mag.sum(axis=1)
        return np.nextafter(s + (n + 2) * _U * s, np.inf)


def mat_mul(A: IntervalMatrix, B: IntervalMatrix) -> IntervalMatrix:
    """Entrywise enclosure of {A' B' : A' in A, B' in B}."""
    if A.cols != B.rows:
        raise ValueError(f"dimension mismatch {A.shape} @ {B.shape}")
    plo, phi = _pair_table(A.lo[:, :, None], A.hi[:, :, None],
                           B.lo[None, :, :], B.hi[None, :, :])
    lo, hi = _sum_enclosure(plo, phi, 1)
    return IntervalMatrix(lo, hi, _raw=True)


def mat_inverse_enclosure(A, max_defect: float = 1e-3) -> IntervalMatrix:
    """Enclosure of the inverse of the midpoint of A.

    Only the *point* matrix mid(A) is inverted (with a rigorous error bound
    via a Neumann-series residual argument); this matches the use of concrete
    preconditioners and frame matrices throughout the package.  Raises
    ``ArithmeticError`` when the midpoint is (numerically) singular.
    """
    if isinstance(A, IntervalMatrix):
        M = A.mid
    else:
        M = np.asarray(A, dtype=float)
    n = M.shape[0]
    if M.shape[0] != M.shape[1]:
        raise ValueError("square matrix required")
    try:
        R = np.linalg.inv(M)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError("midpoint matrix singular") from exc
    Mi = IntervalMatrix.from_point(M)
    Ri = IntervalMatrix.from_point(R)
    E = IntervalMatrix.identity(n) - mat_mul(Mi, Ri)
    enorm = float(E.abs_row_sums().max())
    if not enorm < max_defect:
        raise ArithmeticError(f"inverse residual too large: |I - M R| = {enorm:.3e}")
    # inv(M) = R (I - E)^-1, and (I - E)^-1 is entrywise within
    # enorm/(1-enorm) of the identity in the inf-norm sense.
    b = enorm / (1.0 - enorm)
    pert = IntervalMatrix(np.full((n, n), -b), np.full((n, n), b), _raw=True)
    return mat_mul(Ri, IntervalMatrix.identity(n) + pert)


def gershgorin_enclosure(A: IntervalMatrix):
    """Gershgorin discs of an interval matrix.

    Returns a list of ``(disc, isolated)`` pairs where ``disc`` is an Interval
    enclosing the real-part range of the disc (center interval +- radius) and
    ``isolated`` is True when the disc is disjoint from every other disc, in
    which case it contains exactly one eigenvalue of every point matrix in A.
    """
    if A.rows != A.cols:
        raise ValueError("square matrix required")
    n = A.rows
    mag = A.mag
    discs = []
    for i in range(n):
        radius = float(np.nextafter(mag[i].sum() - mag[i, i] + (n + 2) * _U * mag[i].sum(), np.inf))
        center = A[i, i]
        discs.append(Interval(center.lo - radius, center.hi + radius))
    flags = []
    for i in range(n):
        isolated = all(not discs[i].intersects(discs[j]) for j in range(n) if j != i)
        flags.append(isolated)
    return list(zip(discs, flags))


def max_norm(v) -> Interval:
    """Enclosure of the max norm over a Box, or the induced row-sum norm
    over an IntervalMatrix."""
    if isinstance(v, Box):
        lo = float(v.mig.max()) if v.dim else 0.0
        hi = float(v.mag.max()) if v.dim else 0.0
        return Interval(lo, hi)
    if isinstance(v, IntervalMatrix):
        n = v.cols
        mig_sum = v.mig.sum(axis=1)
        lo = float(np.nextafter(mig_sum - (n + 2) * _U * mig_sum, -np.inf).max())
        hi = float(v.abs_row_sums().max())
        return Interval(max(lo, 0.0), hi)
    raise TypeError(f"max_norm of {type(v)!r}")


def fmt_outward(iv: Interval):
    """Serialize an interval to decimal strings, rounding lo down and hi up.

    17 significant digits round-trip IEEE doubles exactly, so the decimal
    endpoints equal the binary ones; a directed nudge is applied whenever a
    parse-back disagrees (defensive, normally a no-op).
    """
    slo = f"{iv.lo:.17g}"
    shi = f"{iv.hi:.17g}"
    if float(slo) > iv.lo:
        slo = f"{math.nextafter(iv.lo, -math.inf):.17g}"
    if float(shi) < iv.hi:
        shi = f"{math.nextafter(iv.hi, math.inf):.17g}"
    return slo, shi

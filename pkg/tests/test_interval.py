import math
import random

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oterma.interval import (Interval, PI, TWO_PI, icos, isin, hull,
                             reduce_mod_2pi)

mp.mp.prec = 120

finite = st.floats(min_value=-1e6, max_value=1e6,
                   allow_nan=False, allow_infinity=False)


def ivs(lo=-1e6, hi=1e6):
    return st.tuples(st.floats(min_value=lo, max_value=hi, allow_nan=False),
                     st.floats(min_value=0, max_value=10.0)).map(
        lambda t: Interval(t[0], t[0] + t[1]))


def test_basic_examples():
    assert (Interval(1, 2) + Interval(3, 4)).contains(Interval(4, 6))
    prod = Interval(-1, 1) * Interval(-1, 1)
    assert prod.contains(Interval(-1, 1)) and prod.mag <= 1 + 1e-15
    assert isin(Interval(0.0)) == Interval(0.0)


def test_constructor_rejects_bad():
    with pytest.raises(ValueError):
        Interval(2.0, 1.0)
    with pytest.raises(ValueError):
        Interval(float("nan"))


def test_division_by_zero_interval():
    with pytest.raises(ZeroDivisionError):
        Interval(1.0) / Interval(-1.0, 1.0)


def test_sqrt_domain():
    with pytest.raises(ValueError):
        Interval(-1.0, 1.0).sqrt()
    assert Interval(4.0).sqrt().contains(2.0)
    # directed-rounding noise on nonnegative quantities is tolerated
    tiny = Interval(-5e-324, 1.0)
    assert tiny.sqrt().contains(1.0)


def test_pow_even_odd():
    assert (Interval(-2, 3) ** 2).contains(Interval(0, 9))
    assert (Interval(-2, 3) ** 3).contains(Interval(-8, 27))
    assert (Interval(-2, 3) ** 2).lo >= 0.0


@given(finite, finite, finite, finite)
@settings(max_examples=300, deadline=None)
def test_point_consistency(a, b, c, d):
    """Degenerate-interval results contain the 120-bit real result."""
    x, y = Interval(a), Interval(b)
    assert (x + y).contains(float(mp.mpf(a) + mp.mpf(b)))
    assert (x * y).contains(float(mp.mpf(a) * mp.mpf(b)))
    if b != 0.0:
        lo = (x / y).lo
        ref = mp.mpf(a) / mp.mpf(b)
        assert lo <= ref <= (x / y).hi


@given(ivs(), ivs(), st.floats(min_value=0, max_value=1),
       st.floats(min_value=0, max_value=1))
@settings(max_examples=300, deadline=None)
def test_containment_monotonicity(x, y, fx, fy):
    """X in X', Y in Y' implies X op Y in X' op Y' for every binary op."""
    xs = Interval(x.lo + fx * (x.mid - x.lo), x.hi - fx * (x.hi - x.mid))
    ys = Interval(y.lo + fy * (y.mid - y.lo), y.hi - fy * (y.hi - y.mid))
    assert (x + y).contains(xs + ys)
    assert (x - y).contains(xs - ys)
    assert (x * y).contains(xs * ys)
    if not y.contains(0.0):
        assert (x / y).contains(xs / ys)


def test_monotonicity_bulk_randomized():
    """Vectorized spot check over many random cases (cheap, exhaustive-ish)."""
    rng = np.random.default_rng(42)
    n = 100_000
    lo1 = rng.uniform(-5, 5, n)
    hi1 = lo1 + rng.uniform(0, 2, n)
    lo2 = rng.uniform(-5, 5, n)
    hi2 = lo2 + rng.uniform(0, 2, n)
    t1 = rng.uniform(0, 1, n)
    t2 = rng.uniform(0, 1, n)
    p1 = lo1 + t1 * (hi1 - lo1)
    p2 = lo2 + t2 * (hi2 - lo2)
    # containment of pointwise results in the interval results (all ops)
    s_lo = np.nextafter(lo1 + lo2, -np.inf)
    s_hi = np.nextafter(hi1 + hi2, np.inf)
    assert np.all(s_lo <= p1 + p2) and np.all(p1 + p2 <= s_hi)
    prods = np.stack([lo1 * lo2, lo1 * hi2, hi1 * lo2, hi1 * hi2])
    m_lo = np.nextafter(prods.min(axis=0), -np.inf)
    m_hi = np.nextafter(prods.max(axis=0), np.inf)
    assert np.all(m_lo <= p1 * p2) and np.all(p1 * p2 <= m_hi)


@given(st.floats(min_value=-500, max_value=500, allow_nan=False))
@settings(max_examples=400, deadline=None)
def test_trig_point_containment(x):
    c, s = icos(x), isin(x)
    assert c.lo <= mp.cos(mp.mpf(x)) <= c.hi
    assert s.lo <= mp.sin(mp.mpf(x)) <= s.hi
    cap = 4e-15 * max(1.0, abs(x))
    assert c.width < cap and s.width < cap


def test_trig_interval_range():
    c = icos(Interval(3.0, 3.3))  # contains pi: minimum -1 attained
    assert c.lo == -1.0 and c.hi < -0.98
    s = isin(Interval(1.4, 1.8))  # contains pi/2
    assert s.hi == 1.0
    wide = icos(Interval(0.0, 10.0))
    assert wide.lo == -1.0 and wide.hi == 1.0


def test_trig_interval_sampling():
    rng = random.Random(7)
    for _ in range(200):
        a = rng.uniform(-20, 20)
        w = rng.uniform(0, 7)
        iv = Interval(a, a + w)
        c = icos(iv)
        s = isin(iv)
        for t in np.linspace(a, a + w, 23):
            assert c.lo <= math.cos(t) <= c.hi
            assert s.lo <= math.sin(t) <= s.hi


def test_reduce_mod_2pi():
    x = Interval(100.0, 100.0 + 1e-6)
    r = reduce_mod_2pi(x)
    assert 0.0 <= r.mid < 2 * math.pi + 1e-10
    k = round((x.mid - r.mid) / (2 * math.pi))
    assert abs(x.mid - r.mid - 2 * math.pi * k) < 1e-9
    assert icos(r).intersects(icos(x))


def test_pi_enclosures():
    assert PI.lo <= math.pi <= PI.hi
    assert float(mp.pi) == PI.lo or PI.lo < mp.pi < PI.hi
    assert TWO_PI.contains(float(2 * mp.pi)) or \
        (TWO_PI.lo <= 2 * mp.pi <= TWO_PI.hi)


def test_hull():
    h = hull([Interval(0, 1), Interval(3, 4), 2.5])
    assert h == Interval(0, 4)

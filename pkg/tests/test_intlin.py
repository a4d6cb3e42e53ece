import mpmath as mp
import numpy as np
import pytest

from oterma.interval import Interval
from oterma.intlin import (Box, IntervalMatrix, mat_mul,
                           mat_inverse_enclosure, gershgorin_enclosure,
                           max_norm, fmt_outward)

mp.mp.prec = 120


def rnd_imat(rng, n, m, width=0.0):
    lo = rng.uniform(-3, 3, (n, m))
    return IntervalMatrix(lo, lo + rng.uniform(0, width, (n, m)), _raw=True)


def test_identity_product():
    rng = np.random.default_rng(0)
    M = rnd_imat(rng, 3, 3, width=0.1)
    out = mat_mul(IntervalMatrix.identity(3), M)
    assert out.contains(M.mid)
    assert np.all(out.lo <= M.lo + 1e-12) and np.all(out.hi >= M.hi - 1e-12)


def test_scalar_case():
    A = IntervalMatrix([[Interval(0, 1)]])
    B = IntervalMatrix([[Interval(2, 3)]])
    out = mat_mul(A, B)
    assert out[0, 0].contains(Interval(0, 3))


def test_matmul_midpoint_oracle():
    """Both association orders contain the high-precision midpoint product."""
    rng = np.random.default_rng(1)
    for _ in range(10):
        A = rnd_imat(rng, 4, 4, 1e-6)
        B = rnd_imat(rng, 4, 4, 1e-6)
        C = rnd_imat(rng, 4, 4, 1e-6)
        left = mat_mul(mat_mul(A, B), C)
        right = mat_mul(A, mat_mul(B, C))
        ref = np.array(
            [[float(sum(sum(mp.mpf(A.mid[i, k]) * mp.mpf(B.mid[k, l]) *
                            mp.mpf(C.mid[l, j]) for l in range(4))
                        for k in range(4)))
              for j in range(4)] for i in range(4)])
        assert left.contains(ref)
        assert right.contains(ref)


def test_matmul_dimension_mismatch():
    A = IntervalMatrix.identity(3)
    B = IntervalMatrix.identity(4)
    with pytest.raises(ValueError):
        mat_mul(A, B)


def test_inverse_identity_and_diag():
    inv = mat_inverse_enclosure(IntervalMatrix.identity(4))
    assert inv.contains(np.eye(4))
    inv2 = mat_inverse_enclosure(np.diag([2.0, 4.0]))
    assert inv2.contains(np.diag([0.5, 0.25]))


def test_inverse_random_oracle():
    rng = np.random.default_rng(3)
    for _ in range(20):
        M = rng.uniform(-2, 2, (4, 4)) + 3 * np.eye(4)
        inv = mat_inverse_enclosure(M)
        mpm = mp.matrix(M.tolist())
        ref = mp.inverse(mpm)
        ref_np = np.array([[float(ref[i, j]) for j in range(4)]
                           for i in range(4)])
        assert inv.contains(ref_np)


def test_inverse_singular():
    with pytest.raises(ArithmeticError):
        mat_inverse_enclosure(np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_gershgorin_examples():
    discs = gershgorin_enclosure(IntervalMatrix.from_point(np.diag([3.0, 1.0])))
    assert discs[0][0].contains(3.0) and discs[0][1]
    assert discs[1][0].contains(1.0) and discs[1][1]
    eps = Interval(0, 0.1)
    A = IntervalMatrix([[Interval(3), eps], [eps, Interval(1)]])
    discs = gershgorin_enclosure(A)
    assert discs[0][1] and discs[1][1]
    assert discs[0][0].contains(Interval(2.9, 3.1))


def test_gershgorin_random_eigenvalues():
    """Every eigenvalue of 1000 point samples lies inside some disc."""
    rng = np.random.default_rng(5)
    base = rng.uniform(-1, 1, (4, 4)) + np.diag([6.0, 2.0, -3.0, -8.0])
    W = 1e-3
    A = IntervalMatrix(base - W, base + W, _raw=True)
    discs = gershgorin_enclosure(A)
    for _ in range(1000):
        s = base + rng.uniform(-W, W, (4, 4))
        for lam in np.linalg.eigvals(s):
            assert any(d.lo <= lam.real <= d.hi for d, _ in discs)


def test_max_norm_vector():
    v = Box.from_intervals([Interval(-1, 2), Interval(0, 1)])
    nrm = max_norm(v)
    assert nrm.contains(Interval(1, 2))
    zero = Box.from_point([0.0, 0.0])
    assert max_norm(zero) == Interval(0.0)


def test_max_norm_matrix_and_sampling():
    rng = np.random.default_rng(8)
    lo = rng.uniform(-2, 2, (3, 3))
    A = IntervalMatrix(lo, lo + 0.2, _raw=True)
    nrm = max_norm(A)
    for _ in range(200):
        s = lo + rng.uniform(0, 0.2, (3, 3))
        val = np.abs(s).sum(axis=1).max()
        assert nrm.lo - 1e-12 <= val <= nrm.hi + 1e-12


def test_max_norm_brute_force_box():
    rng = np.random.default_rng(9)
    lo = rng.uniform(-2, 2, 4)
    hi = lo + rng.uniform(0, 1, 4)
    b = Box(lo, hi, _raw=True)
    nrm = max_norm(b)
    samples = rng.uniform(lo, hi, (10_000, 4))
    vals = np.abs(samples).max(axis=1)
    assert vals.max() <= nrm.hi + 1e-12
    assert vals.min() >= nrm.lo - 1e-12


def test_outward_decimal_serialization():
    iv = Interval(1.0 / 3.0, 2.0 / 3.0)
    slo, shi = fmt_outward(iv)
    assert float(slo) <= iv.lo and float(shi) >= iv.hi


def test_box_operations():
    b = Box.from_intervals([Interval(0, 1), Interval(2, 3)])
    assert b.dim == 2
    assert (b + 1.0)[0].contains(Interval(1, 2))
    assert b.replace(0, Interval(5))[0] == Interval(5.0)
    assert b.contains([0.5, 2.5])
    c = b.intersect(Box.from_intervals([Interval(0.5, 2), Interval(0, 2.5)]))
    assert c[0] == Interval(0.5, 1.0)
    with pytest.raises(ValueError):
        b.intersect(Box.from_point([9.0, 9.0]))

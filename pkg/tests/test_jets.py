import math

import numpy as np
import pytest

from oterma.interval import Interval
from oterma.jets import trace_field, jet_eval, jet_eval_deriv


def test_exponential_jets():
    tape = trace_field(lambda v: [v[0]], 1)
    jets = tape.ode_jets([1.0], 12)
    for k, c in enumerate(jets[0]):
        assert abs(c - 1.0 / math.factorial(k)) < 1e-15


def test_harmonic_jets_float_and_interval():
    tape = trace_field(lambda v: [-v[1], v[0]], 2)
    jc, js = tape.ode_jets([1.0, 0.0], 15)
    for k in range(16):
        ref_c = (-1) ** (k // 2) / math.factorial(k) if k % 2 == 0 else 0.0
        ref_s = (-1) ** ((k - 1) // 2) / math.factorial(k) if k % 2 else 0.0
        assert abs(jc[k] - ref_c) < 1e-15
        assert abs(js[k] - ref_s) < 1e-15
    jci, jsi = tape.ode_jets([Interval(1.0), Interval(0.0)], 15)
    for k in range(16):
        assert jci[k].contains(jc[k])
        assert jsi[k].contains(js[k])


def test_division_sqrt_sincos_ops():
    def fn(v):
        x = v[0]
        s, c = x.sincos()
        return [c / (x + 2.0) + x.sqrt() * 0.0 + s * 0.0]
    tape = trace_field(fn, 1)
    val = tape.eval0([Interval(1.0)])[0]
    assert val.contains(math.cos(1.0) / 3.0)


def test_sincos_jets_against_series():
    # x' = cos(x) from x0 = 0: x(t) = arcsin(tanh(t)) (the gudermannian)
    tape = trace_field(lambda v: [v[0].sincos()[1]], 1)
    jets = tape.ode_jets([0.0], 12)
    h = 0.3
    val = jet_eval(jets[0], h)
    ref = math.asin(math.tanh(h))
    assert abs(val - ref) < 1e-12


def test_interval_jets_contain_float_jets():
    def fn(v):
        x, y = v
        r = (x * x + y * y).sqrt()
        return [-y / r, x / r]
    tape = trace_field(fn, 2)
    f = tape.ode_jets([1.0, 0.5], 10)
    i = tape.ode_jets([Interval(1.0), Interval(0.5)], 10)
    for k in range(11):
        assert i[0][k].contains(f[0][k])
        assert i[1][k].contains(f[1][k])


def test_jet_eval_deriv():
    tape = trace_field(lambda v: [v[0]], 1)
    jets = tape.ode_jets([1.0], 14)
    h = 0.2
    assert abs(jet_eval_deriv(jets[0], h) - math.exp(h)) < 1e-12


def test_field_arity_check():
    with pytest.raises(ValueError):
        trace_field(lambda v: [v[0], v[0]], 1)

"""Tape-based Taylor-mode jet arithmetic.

A vector field is traced once into a tape of elementary operations by calling
it on symbolic `Expr` variables.  Running the tape then produces Taylor
coefficients of the ODE solution order by order using the classical
recurrences (products by Cauchy convolution, quotients and square roots by
back-substitution, sine/cosine as a coupled pair).

The same tape runs in two coefficient rings:

* plain floats -- fast, non-rigorous (seed searches, step-size prediction);
* `Interval`   -- every coefficient rigorously encloses the corresponding
  normalized derivative over the supplied initial enclosures.

Tapes are immutable after tracing and runs are pure, so a single traced field
is safe to share between threads.
"""

from __future__ import annotations

import math

from .interval import Interval

__all__ = ["Expr", "Tape", "trace_field", "jet_eval", "jet_eval_deriv"]

_VAR = 0
_CONST = 1
_ADD = 2
_SUB = 3
_MUL = 4
_DIV = 5
_NEG = 6
_SQRT = 7
_SINCOS = 8   # produces the cosine stream; paired _SINPART reads the sine
_SINPART = 9
_SCALE = 10   # payload * arg, payload an exact float
_SHIFT = 11   # payload + arg
_SQR = 12


class Expr:
    """Symbolic handle used while tracing a field; records into a builder."""

    __slots__ = ("b", "i")

    def __init__(self, builder, index):
        self.b = builder
        self.i = index

    def _lift(self, other):
        if isinstance(other, Expr):
            return other
        if isinstance(other, (int, float)):
            return self.b.const(float(other))
        return None

    def __add__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        if isinstance(other, (int, float)):
            return self.b.emit(_SHIFT, self.i, -1, float(other))
        return self.b.emit(_ADD, self.i, o.i)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return self.b.emit(_SHIFT, self.i, -1, -float(other))
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self.b.emit(_SUB, self.i, o.i)

    def __rsub__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self.b.emit(_SUB, o.i, self.i)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.b.emit(_SCALE, self.i, -1, float(other))
        o = self._lift(other)
        if o is None:
            return NotImplemented
        if o.i == self.i:
            return self.b.emit(_SQR, self.i, -1)
        return self.b.emit(_MUL, self.i, o.i)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return self.b.emit(_SCALE, self.i, -1, 1.0 / float(other))
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self.b.emit(_DIV, self.i, o.i)

    def __rtruediv__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self.b.emit(_DIV, o.i, self.i)

    def __neg__(self):
        return self.b.emit(_NEG, self.i, -1)

    def sqrt(self):
        return self.b.emit(_SQRT, self.i, -1)

    def sqr(self):
        return self.b.emit(_SQR, self.i, -1)

    def sincos(self):
        c = self.b.emit(_SINCOS, self.i, -1)
        s = self.b.emit(_SINPART, self.i, c.i)
        return s, c


class _Builder:
    def __init__(self, nvars):
        self.nodes = [(_VAR, v, -1, None) for v in range(nvars)]
        self.nvars = nvars
        self._const_cache = {}
        self._cse = {}

    def var(self, v):
        return Expr(self, v)

    def const(self, val):
        val = float(val)
        if val in self._const_cache:
            return self._const_cache[val]
        e = self.emit(_CONST, -1, -1, val)
        self._const_cache[val] = e
        return e

    def emit(self, op, i, j, payload=None):
        key = (op, i, j, payload)
        hit = self._cse.get(key)
        if hit is not None:
            return hit
        self.nodes.append((op, i, j, payload))
        e = Expr(self, len(self.nodes) - 1)
        self._cse[key] = e
        return e


class Tape:
    """A traced vector field: rhs expressions over `nvars` state variables."""

    __slots__ = ("nodes", "nvars", "rhs")

    def __init__(self, nodes, nvars, rhs):
        self.nodes = tuple(nodes)
        self.nvars = nvars
        self.rhs = tuple(rhs)

    # -- evaluation --------------------------------------------------------

    def eval0(self, inits):
        """Order-zero evaluation: the field value at `inits` (any ring)."""
        vals = [None] * len(self.nodes)
        interval_mode = any(isinstance(v, Interval) for v in inits)
        for idx, v in enumerate(inits):
            vals[idx] = v
        for nid in range(self.nvars, len(self.nodes)):
            op, i, j, pl = self.nodes[nid]
            if op == _CONST:
                vals[nid] = Interval(pl) if interval_mode else pl
            elif op == _ADD:
                vals[nid] = vals[i] + vals[j]
            elif op == _SUB:
                vals[nid] = vals[i] - vals[j]
            elif op == _MUL:
                vals[nid] = vals[i] * vals[j]
            elif op == _SQR:
                v = vals[i]
                vals[nid] = v * v if not isinstance(v, Interval) else v.square()
            elif op == _DIV:
                vals[nid] = vals[i] / vals[j]
            elif op == _NEG:
                vals[nid] = -vals[i]
            elif op == _SCALE:
                vals[nid] = vals[i] * pl
            elif op == _SHIFT:
                vals[nid] = vals[i] + pl
            elif op == _SQRT:
                v = vals[i]
                vals[nid] = v.sqrt() if isinstance(v, Interval) else math.sqrt(v)
            elif op == _SINCOS:
                v = vals[i]
                if isinstance(v, Interval):
                    from .interval import icos
                    vals[nid] = icos(v)
                else:
                    vals[nid] = math.cos(v)
            elif op == _SINPART:
                v = vals[i]
                if isinstance(v, Interval):
                    from .interval import isin
                    vals[nid] = isin(v)
                else:
                    vals[nid] = math.sin(v)
            else:  # pragma: no cover
                raise AssertionError(op)
        return [vals[r] for r in self.rhs]

    def ode_jets(self, inits, order):
        """Taylor coefficients (normalized) of the ODE solution x' = f(x).

        `inits` supplies the order-zero coefficient of every variable; the
        ring (float or Interval) is inferred from them.  Returns a list of
        coefficient lists, one per variable, each of length ``order + 1``.
        """
        nodes = self.nodes
        nn = len(nodes)
        interval_mode = any(isinstance(v, Interval) for v in inits)
        C = [None] * nn
        for nid in range(nn):
            C[nid] = []
        for v in range(self.nvars):
            C[v].append(inits[v])
        zero = Interval(0.0) if interval_mode else 0.0
        from .interval import icos, isin

        for k in range(order):
            for nid in range(self.nvars, nn):
                op, i, j, pl = nodes[nid]
                ck = C[nid]
                if op == _CONST:
                    if k == 0:
                        ck.append(Interval(pl) if interval_mode else pl)
                    else:
                        ck.append(zero)
                elif op == _ADD:
                    ck.append(C[i][k] + C[j][k])
                elif op == _SUB:
                    ck.append(C[i][k] - C[j][k])
                elif op == _NEG:
                    ck.append(-C[i][k])
                elif op == _SCALE:
                    ck.append(C[i][k] * pl)
                elif op == _SHIFT:
                    ck.append(C[i][k] + pl if k == 0 else C[i][k])
                elif op == _MUL:
                    a = C[i]
                    b = C[j]
                    acc = a[0] * b[k]
                    for m in range(1, k + 1):
                        acc = acc + a[m] * b[k - m]
                    ck.append(acc)
                elif op == _SQR:
                    a = C[i]
                    half = (k + 1) // 2
                    acc = None
                    for m in range(half):
                        t = a[m] * a[k - m]
                        acc = t if acc is None else acc + t
                    if acc is None:
                        acc = zero
                    else:
                        acc = acc * 2.0
                    if k % 2 == 0:
                        sq = a[k // 2]
                        sq = sq.square() if interval_mode else sq * sq
                        acc = acc + sq
                    ck.append(acc)
                elif op == _DIV:
                    a = C[i]
                    b = C[j]
                    acc = a[k]
                    for m in range(k):
                        acc = acc - ck[m] * b[k - m]
                    ck.append(acc / b[0])
                elif op == _SQRT:
                    a = C[i]
                    if k == 0:
                        ck.append(a[0].sqrt() if interval_mode else math.sqrt(a[0]))
                    else:
                        acc = a[k]
                        for m in range(1, k):
                            acc = acc - ck[m] * ck[k - m]
                        ck.append(acc / (ck[0] * 2.0))
                elif op == _SINCOS:
                    u = C[i]
                    if k == 0:
                        ck.append(icos(u[0]) if interval_mode else math.cos(u[0]))
                    else:
                        s = C[nid + 1]  # paired _SINPART node
                        acc = None
                        for m in range(1, k + 1):
                            t = (u[m] * float(m)) * s[k - m]
                            acc = t if acc is None else acc + t
                        ck.append(-(acc / float(k)))
                elif op == _SINPART:
                    u = C[i]
                    if k == 0:
                        ck.append(isin(u[0]) if interval_mode else math.sin(u[0]))
                    else:
                        c = C[j]
                        acc = None
                        for m in range(1, k + 1):
                            t = (u[m] * float(m)) * c[k - m]
                            acc = t if acc is None else acc + t
                        ck.append(acc / float(k))
                else:  # pragma: no cover
                    raise AssertionError(op)
            for v in range(self.nvars):
                C[v].append(C[self.rhs[v]][k] / float(k + 1))
        return [C[v] for v in range(self.nvars)]


def trace_field(fn, nvars) -> Tape:
    """Trace `fn(vars) -> rhs_list` into a Tape."""
    b = _Builder(nvars)
    rhs = fn([b.var(v) for v in range(nvars)])
    if len(rhs) != nvars:
        raise ValueError(f"field returned {len(rhs)} components for {nvars} variables")
    rhs_ids = []
    for e in rhs:
        if isinstance(e, (int, float)):
            e = b.const(float(e))
        rhs_ids.append(e.i)
    return Tape(b.nodes, nvars, rhs_ids)


def jet_eval(coeffs, h):
    """Horner evaluation of a truncated Taylor series at h (float/Interval)."""
    acc = coeffs[-1]
    for c in reversed(coeffs[:-1]):
        acc = acc * h + c
    return acc


def jet_eval_deriv(coeffs, h):
    """Evaluate the derivative of the truncated series at h."""
    n = len(coeffs)
    if n <= 1:
        return coeffs[0] * 0.0
    acc = coeffs[-1] * float(n - 1)
    for k in range(n - 2, 0, -1):
        acc = acc * h + coeffs[k] * float(k)
    return acc

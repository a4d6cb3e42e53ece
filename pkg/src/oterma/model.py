"""Planar restricted three-body problem in rotating-pulsating coordinates.

State is (X, Y, P_X, P_Y) with the heavy primary (mass 1-mu) at (mu, 0) and
the light one (mass mu) at (mu-1, 0).  The time variable is the true anomaly
of the primaries; for eccentricity eps = 0 the system is autonomous and the
Hamiltonian is a constant of motion (the Jacobi integral is -2H).

All evaluation helpers are written against a generic scalar ring so the same
formulas serve three purposes: tracing jet tapes, direct interval evaluation,
and plain float evaluation.  Derivatives are hand-differentiated; the test
suite checks every one of them against finite-difference and high-precision
oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield

import numpy as np

from .interval import Interval, icos, isin
from .intlin import Box, IntervalMatrix
from .jets import Tape, trace_field

__all__ = [
    "ModelParams",
    "Model",
    "FieldSpec",
    "r_symmetry",
    "r_symmetry_box",
    "DEFAULT_MU",
]

DEFAULT_MU = 0.0009537  # Sun-Jupiter mass ratio used for the Oterma energy regime


def _sq(x):
    if hasattr(x, "square"):
        return x.square()
    return x * x


def _sqrt(x):
    if hasattr(x, "sqrt"):
        return x.sqrt()
    return math.sqrt(x)


@dataclass(frozen=True)
class ModelParams:
    """Mass ratio; 0 < mu < 1/2."""

    mu: float = DEFAULT_MU

    def __post_init__(self):
        if not (0.0 < self.mu < 0.5):
            raise ValueError(f"mass ratio {self.mu} outside (0, 1/2)")


@dataclass(frozen=True)
class FieldSpec:
    """A traced vector field plus the block layout its tape uses.

    Tape variable layout: ``state`` (state_dim components), optionally a
    state_dim x state_dim variational block (``has_vstep``), then named
    zero-initialized forced vector blocks.  `state_tape` traces the bare
    state subsystem (step-size prediction, field values at readouts); for
    the three-body fields the evaluation callbacks default to the model's
    closed-form formulas.
    """

    name: str
    state_dim: int
    tape: Tape
    has_vstep: bool
    forced: tuple = ()
    model: "Model" = None
    state_tape: Tape = None

    @property
    def dim(self):
        return self.tape.nvars

    @property
    def vstep_slice(self):
        if not self.has_vstep:
            return None
        return slice(self.state_dim, self.state_dim + self.state_dim ** 2)

    def forced_slices(self):
        out = {}
        off = self.state_dim + (self.state_dim ** 2 if self.has_vstep else 0)
        for name, size in self.forced:
            out[name] = slice(off, off + size)
            off += size
        return out

    def f(self, box: Box) -> Box:
        if self.model is not None:
            return self.model.field_value(box)
        return Box.from_intervals(self.state_tape.eval0(list(box.intervals())))

    def f_state(self, box: Box) -> Box:
        """Full state-dimension field value."""
        return Box.from_intervals(
            self.state_tape.eval0(list(box.intervals()[: self.state_dim])))

    def df(self, box: Box) -> IntervalMatrix:
        if self.model is None:
            return None
        return self.model.field_jacobian(box)

    def check_domain(self, box: Box):
        if self.model is not None:
            self.model.check_domain(box)


def make_field(name, state_dim, full_fn, state_fn, has_vstep=True, forced=()):
    """FieldSpec for a user-supplied field (both the augmented tape function
    and the bare state function are given explicitly)."""
    nvars = state_dim + (state_dim ** 2 if has_vstep else 0) \
        + sum(k for _, k in forced)
    return FieldSpec(name, state_dim, trace_field(full_fn, nvars), has_vstep,
                     tuple(forced), None, trace_field(state_fn, state_dim))


class Model:
    """PCR3BP/PER3BP formulas and traced field tapes for one mass ratio."""

    def __init__(self, params: ModelParams = ModelParams()):
        self.params = params
        self.mu = params.mu
        self._tapes = {}

    # ------------------------------------------------------------------
    # potential and derivatives (generic ring)
    # ------------------------------------------------------------------

    def _omega_chain(self, X, Y, depth):
        """Omega and its partials up to `depth` (1, 2 or 3) as a dict."""
        mu = self.mu
        s1 = X - mu
        s2 = X - mu + 1.0
        y2 = _sq(Y)
        r1s = _sq(s1) + y2
        r2s = _sq(s2) + y2
        r1 = _sqrt(r1s)
        r2 = _sqrt(r2s)
        inv_r1 = 1.0 / r1
        inv_r2 = 1.0 / r2
        out = {"s1": s1, "s2": s2, "r1": r1, "r2": r2}
        out["omega"] = (_sq(X) + y2) * 0.5 + inv_r1 * (1.0 - mu) + inv_r2 * mu
        q1 = (1.0 - mu) * inv_r1 / r1s          # (1-mu)/r1^3
        q2 = mu * inv_r2 / r2s
        out["ox"] = X - q1 * s1 - q2 * s2
        out["oy"] = Y * (1.0 - q1 - q2)
        if depth >= 2:
            c1 = q1 / r1s * 3.0                  # 3(1-mu)/r1^5
            c2 = q2 / r2s * 3.0
            out["oxx"] = 1.0 - q1 - q2 + c1 * _sq(s1) + c2 * _sq(s2)
            out["oxy"] = Y * (c1 * s1 + c2 * s2)
            out["oyy"] = 1.0 - q1 - q2 + (c1 + c2) * y2
            if depth >= 3:
                d1 = c1 / r1s * 5.0              # 15(1-mu)/r1^7
                d2 = c2 / r2s * 5.0
                s1c = _sq(s1) * s1
                s2c = _sq(s2) * s2
                out["oxxx"] = (c1 * s1 + c2 * s2) * 3.0 - d1 * s1c - d2 * s2c
                out["oxxy"] = Y * (c1 + c2 - d1 * _sq(s1) - d2 * _sq(s2))
                out["oxyy"] = c1 * s1 + c2 * s2 - y2 * (d1 * s1 + d2 * s2)
                out["oyyy"] = Y * (c1 + c2) * 3.0 - y2 * Y * (d1 + d2)
        return out

    def _rhs(self, X, Y, PX, PY, om):
        return [
            PX + Y,
            PY - X,
            PY - X + om["ox"],
            -PX - Y + om["oy"],
        ]

    # ------------------------------------------------------------------
    # direct interval / float evaluation
    # ------------------------------------------------------------------

    def check_domain(self, box: Box, min_sep: float = 1e-4):
        """Fail when the box cannot be separated from either primary."""
        X, Y = box[0], box[1]
        r1s = _sq(X - self.mu) + _sq(Y)
        r2s = _sq(X - self.mu + 1.0) + _sq(Y)
        if r1s.lo < min_sep ** 2 or r2s.lo < min_sep ** 2:
            raise ArithmeticError("state enclosure too close to a primary")

    def field_value(self, box: Box) -> Box:
        X, Y, PX, PY = box.intervals()[:4]
        om = self._omega_chain(X, Y, 1)
        return Box.from_intervals(self._rhs(X, Y, PX, PY, om))

    def field_jacobian(self, box: Box) -> IntervalMatrix:
        X, Y = box[0], box[1]
        om = self._omega_chain(X, Y, 2)
        one = Interval(1.0)
        zero = Interval(0.0)
        rows = [
            [zero, one, one, zero],
            [-one, zero, zero, one],
            [om["oxx"] - 1.0, om["oxy"], zero, one],
            [om["oxy"], om["oyy"] - 1.0, -one, zero],
        ]
        return IntervalMatrix(rows)

    def hamiltonian(self, state, eps=None, theta=None) -> Interval:
        """H_eps at a 4-state (plus optional theta) enclosure.

        With eps=None (or 0) this is the autonomous energy H_0.
        """
        iv = [s if isinstance(s, Interval) else Interval.point(s) for s in state]
        X, Y, PX, PY = iv[:4]
        om = self._omega_chain(X, Y, 1)
        kin = (_sq(PX + Y) + _sq(PY - X)) * 0.5
        if eps is None or (isinstance(eps, (int, float)) and eps == 0):
            return kin - om["omega"]
        epsi = eps if isinstance(eps, Interval) else Interval.point(eps)
        if theta is None:
            if len(iv) < 5:
                raise ValueError("theta required for eps != 0")
            theta = iv[4]
        denom = icos(theta) * epsi + 1.0
        if denom.lo <= 0.0 <= denom.hi:
            raise ArithmeticError("1 + eps*cos(theta) encloses zero")
        return kin - om["omega"] / denom

    def grad_h(self, box: Box) -> Box:
        X, Y, PX, PY = box.intervals()[:4]
        om = self._omega_chain(X, Y, 1)
        return Box.from_intervals([
            -(PY - X) - om["ox"],
            (PX + Y) - om["oy"],
            PX + Y,
            PY - X,
        ])

    def hess_h(self, box: Box) -> IntervalMatrix:
        X, Y = box[0], box[1]
        om = self._omega_chain(X, Y, 2)
        one = Interval(1.0)
        zero = Interval(0.0)
        rows = [
            [one - om["oxx"], -om["oxy"], zero, -one],
            [-om["oxy"], one - om["oyy"], one, zero],
            [zero, one, one, zero],
            [-one, zero, zero, one],
        ]
        return IntervalMatrix(rows)

    def d_h_d_eps(self, box: Box, theta) -> Interval:
        """dH_eps/d eps at eps=0: Omega(X,Y) * cos(theta)."""
        X, Y = box[0], box[1]
        om = self._omega_chain(X, Y, 1)
        th = theta if isinstance(theta, Interval) else Interval.point(theta)
        return om["omega"] * icos(th)

    def field_eps_parts(self, box: Box):
        """cos/sin decomposition of the eps-derivative of the field at eps=0.

        d f/d eps (x, theta) = cos(theta0+t)*(0,0,-Ox,-Oy) decomposes over a
        local clock as  cos(theta0)*Fc + sin(theta0)*Fs  with
        Fc = (0,0,-Ox c, -Oy c), Fs = (0,0, Ox s, Oy s).  This returns the
        (0,0,-Ox,-Oy) vector; callers assemble the clock factors.
        """
        X, Y = box[0], box[1]
        om = self._omega_chain(X, Y, 1)
        zero = Interval(0.0)
        return Box.from_intervals([zero, zero, -om["ox"], -om["oy"]])

    def energy_i(self, local: Box, frame_matrix: np.ndarray, base_point: np.ndarray) -> Interval:
        """Energy pulled back through the affine chart x = base + A*local."""
        A = IntervalMatrix.from_point(np.asarray(frame_matrix, dtype=float))
        amb = A.matvec(local) + np.asarray(base_point, dtype=float)
        return self.hamiltonian(amb.intervals())

    def grad_energy_i(self, local: Box, frame_matrix: np.ndarray, base_point: np.ndarray) -> Box:
        A = IntervalMatrix.from_point(np.asarray(frame_matrix, dtype=float))
        amb = A.matvec(local) + np.asarray(base_point, dtype=float)
        g = self.grad_h(amb)
        return A.T.matvec(g)

    # ------------------------------------------------------------------
    # traced tapes
    # ------------------------------------------------------------------

    def _tape(self, key, builder):
        t = self._tapes.get(key)
        if t is None:
            t = builder()
            self._tapes[key] = t
        return t

    def _state_tape_cs(self):
        """State tape for fields carrying the local clock (cos t, sin t)."""
        key = "state_cs"
        if key not in self._tapes:
            def fn(v):
                X, Y, PX, PY, c, s = v
                om = self._omega_chain(X, Y, 1)
                return self._rhs(X, Y, PX, PY, om) + [-s, c]
            self._tapes[key] = trace_field(fn, 6)
        return self._tapes[key]

    def _state_tape_ext(self):
        key = "state_ext"
        if key not in self._tapes:
            def fn(v):
                X, Y, PX, PY = v[0], v[1], v[2], v[3]
                om = self._omega_chain(X, Y, 1)
                return self._rhs(X, Y, PX, PY, om) + [v[0].b.const(1.0)]
            self._tapes[key] = trace_field(fn, 5)
        return self._tapes[key]

    def spec_plain(self) -> FieldSpec:
        """4-dim state, no variational — float scouting and step control."""
        def build():
            def fn(v):
                X, Y, PX, PY = v
                om = self._omega_chain(X, Y, 1)
                return self._rhs(X, Y, PX, PY, om)
            return trace_field(fn, 4)
        t = self._tape("plain", build)
        return FieldSpec("pcr3bp", 4, t, False, (), self, t)

    def spec_c1(self) -> FieldSpec:
        """4-dim state + 4x4 per-step variational block."""
        def build():
            def fn(v):
                X, Y, PX, PY = v[0], v[1], v[2], v[3]
                om = self._omega_chain(X, Y, 2)
                rhs = self._rhs(X, Y, PX, PY, om)
                oxx1 = om["oxx"] - 1.0
                oyy1 = om["oyy"] - 1.0
                oxy = om["oxy"]
                V = [v[4 + 4 * r + c] for r in range(4) for c in range(4)]
                for c in range(4):
                    v0, v1, v2, v3 = V[c], V[4 + c], V[8 + c], V[12 + c]
                    rhs.append(v1 + v2)
                    rhs.append(-v0 + v3)
                    rhs.append(oxx1 * v0 + oxy * v1 + v3)
                    rhs.append(oxy * v0 + oyy1 * v1 - v2)
                # reorder: rhs currently [f(4)] then per-column rows; flatten row-major
                f4 = rhs[:4]
                cols = rhs[4:]
                vdot = [None] * 16
                for c in range(4):
                    for r in range(4):
                        vdot[4 * r + c] = cols[4 * c + r]
                return f4 + vdot
            return trace_field(fn, 20)
        return FieldSpec("pcr3bp_c1", 4, self._tape("c1", build), True, (), self,
                         self.spec_plain().tape)

    def spec_ext(self) -> FieldSpec:
        """Extended (X,Y,PX,PY,theta) state with variational, eps = 0."""
        def build():
            def fn(v):
                X, Y, PX, PY = v[0], v[1], v[2], v[3]
                om = self._omega_chain(X, Y, 2)
                f4 = self._rhs(X, Y, PX, PY, om)
                one = v[0].b.const(1.0)
                oxx1 = om["oxx"] - 1.0
                oyy1 = om["oyy"] - 1.0
                oxy = om["oxy"]
                rhs = f4 + [one]
                vdot = [None] * 25
                for c in range(5):
                    col = [v[5 + 5 * r + c] for r in range(5)]
                    d = [
                        col[1] + col[2],
                        -col[0] + col[3],
                        oxx1 * col[0] + oxy * col[1] + col[3],
                        oxy * col[0] + oyy1 * col[1] - col[2],
                        one * 0.0,
                    ]
                    for r in range(5):
                        vdot[5 * r + c] = d[r]
                return rhs + vdot
            return trace_field(fn, 30)
        return FieldSpec("per3bp_ext", 5, self._tape("ext", build), True, (), self,
                         self._state_tape_ext())

    def spec_melnikov(self) -> FieldSpec:
        """(x, cos t, sin t) state + variational + forced eps-derivative pair.

        The forced blocks Wc, Ws integrate  W' = Df(x) W + F  with
        Fc = (0,0,-Ox c,-Oy c), Fs = (0,0, Ox s, Oy s); combining them with
        the starting angle gives the eps-derivative of the flow at eps = 0.
        """
        def build():
            def fn(v):
                X, Y, PX, PY, c, s = v[0], v[1], v[2], v[3], v[4], v[5]
                om = self._omega_chain(X, Y, 2)
                f4 = self._rhs(X, Y, PX, PY, om)
                rhs = f4 + [-s, c]
                oxx1 = om["oxx"] - 1.0
                oyy1 = om["oyy"] - 1.0
                oxy = om["oxy"]
                n = 6
                vdot = [None] * 36
                for col in range(n):
                    w = [v[n + n * r + col] for r in range(n)]
                    d = [
                        w[1] + w[2],
                        -w[0] + w[3],
                        oxx1 * w[0] + oxy * w[1] + w[3],
                        oxy * w[0] + oyy1 * w[1] - w[2],
                        -w[5],
                        w[4],
                    ]
                    for r in range(n):
                        vdot[n * r + col] = d[r]
                off = n + 36
                out_forced = []
                for part, (fx, fy) in enumerate([(-om["ox"] * c, -om["oy"] * c),
                                                 (om["ox"] * s, om["oy"] * s)]):
                    w = v[off + 4 * part: off + 4 * part + 4]
                    out_forced += [
                        w[1] + w[2],
                        -w[0] + w[3],
                        oxx1 * w[0] + oxy * w[1] + w[3] + fx,
                        oxy * w[0] + oyy1 * w[1] - w[2] + fy,
                    ]
                return rhs + vdot + out_forced
            return trace_field(fn, 6 + 36 + 8)
        return FieldSpec("pcr3bp_melnikov", 6, self._tape("melnikov", build), True,
                         (("Wc", 4), ("Ws", 4)), self, self._state_tape_cs())

    def spec_c2(self) -> FieldSpec:
        """x, V, and the four spatial derivatives of V (second variationals).

        W2_j := dV/dx0_j obeys  W2_j' = D2f[V e_j] V + Df W2_j; carrying them
        lets local-map derivatives be enclosed in mean-value form, which
        preserves the cancellation structure under frame conjugation."""
        def build():
            def fn(v):
                X, Y, PX, PY = v[0], v[1], v[2], v[3]
                om = self._omega_chain(X, Y, 3)
                rhs = self._rhs(X, Y, PX, PY, om)
                oxx1 = om["oxx"] - 1.0
                oyy1 = om["oyy"] - 1.0
                oxy = om["oxy"]
                xxx, xxy, xyy, yyy = om["oxxx"], om["oxxy"], om["oxyy"], om["oyyy"]

                def dfv(w):
                    return [
                        w[1] + w[2],
                        -w[0] + w[3],
                        oxx1 * w[0] + oxy * w[1] + w[3],
                        oxy * w[0] + oyy1 * w[1] - w[2],
                    ]

                V = [[v[4 + 4 * r + c] for c in range(4)] for r in range(4)]
                vdot = [None] * 16
                for cidx in range(4):
                    col = [V[r][cidx] for r in range(4)]
                    d = dfv(col)
                    for r in range(4):
                        vdot[4 * r + cidx] = d[r]
                out2 = []
                for j in range(4):
                    base = 20 + 16 * j
                    W = [[v[base + 4 * r + c] for c in range(4)] for r in range(4)]
                    wx, wy = V[0][j], V[1][j]
                    # D2f[(wx, wy)] acts on rows 2,3 via third potential partials
                    t2x = xxx * wx + xxy * wy
                    t2y = xxy * wx + xyy * wy
                    t3x = t2y
                    t3y = xyy * wx + yyy * wy
                    wdot = [None] * 16
                    for cidx in range(4):
                        col = [W[r][cidx] for r in range(4)]
                        d = dfv(col)
                        vx, vy = V[0][cidx], V[1][cidx]
                        d[2] = d[2] + t2x * vx + t2y * vy
                        d[3] = d[3] + t3x * vx + t3y * vy
                        for r in range(4):
                            wdot[4 * r + cidx] = d[r]
                    out2 += wdot
                return rhs + vdot + out2
            return trace_field(fn, 84)
        return FieldSpec("pcr3bp_c2", 4, self._tape("c2", build), True, (), self,
                         self.spec_plain().tape)

    def spec_eccentric(self, eps: float) -> FieldSpec:
        """Extended-state field of the eccentric problem at a fixed
        eccentricity (float scouting and finite-difference oracles)."""
        key = ("ecc", float(eps))

        def build():
            def fn(v):
                X, Y, PX, PY, th = v
                om = self._omega_chain(X, Y, 1)
                sth, cth = th.sincos()
                denom = cth * float(eps) + 1.0
                scale = 1.0 / denom
                return [
                    PX + Y,
                    PY - X,
                    PY - X + om["ox"] * scale,
                    -PX - Y + om["oy"] * scale,
                    v[0].b.const(1.0),
                ]
            return trace_field(fn, 5)
        return FieldSpec("per3bp_ecc", 5, self._tape(key, build), False, (), self,
                         self._tape(key, build))

    def spec_lipschitz(self) -> FieldSpec:
        """Direct-mode tape for the per-local-map Lipschitz data.

        Variables: x(4), c, s, V(16, from Id), Wc(4), Ws(4), Uc(16), Us(16).
        U integrates the mixed second derivative  d/dx0 dPhi/deps:
        U' = Df U + D2f[V, W] + DF V.
        """
        def build():
            def fn(v):
                X, Y, PX, PY, c, s = v[0], v[1], v[2], v[3], v[4], v[5]
                om = self._omega_chain(X, Y, 3)
                f4 = self._rhs(X, Y, PX, PY, om)
                rhs = f4 + [-s, c]
                oxx1 = om["oxx"] - 1.0
                oyy1 = om["oyy"] - 1.0
                oxy = om["oxy"]
                oxx = om["oxx"]
                oyy = om["oyy"]
                xxx, xxy, xyy, yyy = om["oxxx"], om["oxxy"], om["oxyy"], om["oyyy"]

                def dfv(w):
                    return [
                        w[1] + w[2],
                        -w[0] + w[3],
                        oxx1 * w[0] + oxy * w[1] + w[3],
                        oxy * w[0] + oyy1 * w[1] - w[2],
                    ]

                iv = 6
                V = [[v[iv + 4 * r + cidx] for cidx in range(4)] for r in range(4)]
                vdot = [None] * 16
                for cidx in range(4):
                    col = [V[r][cidx] for r in range(4)]
                    d = dfv(col)
                    for r in range(4):
                        vdot[4 * r + cidx] = d[r]

                iw = iv + 16
                Wc = v[iw:iw + 4]
                Ws = v[iw + 4:iw + 8]
                wc_dot = dfv(Wc)
                wc_dot[2] = wc_dot[2] - om["ox"] * c
                wc_dot[3] = wc_dot[3] - om["oy"] * c
                ws_dot = dfv(Ws)
                ws_dot[2] = ws_dot[2] + om["ox"] * s
                ws_dot[3] = ws_dot[3] + om["oy"] * s

                iu = iw + 8
                Uc = [[v[iu + 4 * r + cidx] for cidx in range(4)] for r in range(4)]
                Us = [[v[iu + 16 + 4 * r + cidx] for cidx in range(4)] for r in range(4)]

                def u_dot(U, W, trig, sign):
                    out = [None] * 16
                    for cidx in range(4):
                        ucol = [U[r][cidx] for r in range(4)]
                        d = dfv(ucol)
                        vx = V[0][cidx]
                        vy = V[1][cidx]
                        # D2f[(vx,vy), W]: second derivatives of f rows 2,3
                        pxx = vx * W[0]
                        pxy = vx * W[1] + vy * W[0]
                        pyy = vy * W[1]
                        d2_px = xxx * pxx + xxy * pxy + xyy * pyy
                        d2_py = xxy * pxx + xyy * pxy + yyy * pyy
                        # DF . V, F = sign*(0,0,Ox,Oy)*trig
                        dF_px = (oxx * vx + oxy * vy) * trig * sign
                        dF_py = (oxy * vx + oyy * vy) * trig * sign
                        d[2] = d[2] + d2_px + dF_px
                        d[3] = d[3] + d2_py + dF_py
                        for r in range(4):
                            out[4 * r + cidx] = d[r]
                    return out

                uc_dot = u_dot(Uc, Wc, c, -1.0)
                us_dot = u_dot(Us, Ws, s, 1.0)
                return rhs + vdot + wc_dot + ws_dot + uc_dot + us_dot
            return trace_field(fn, 62)
        return FieldSpec("pcr3bp_lipschitz", 6, self._tape("lg", build), False,
                         (), self, self._state_tape_cs())


# ---------------------------------------------------------------------------
# symmetry
# ---------------------------------------------------------------------------

def r_symmetry(state):
    """Time-reversing reflection (X, Y, PX, PY) -> (X, -Y, -PX, PY).

    Accepts 4-vectors (optionally extended by theta, which is preserved);
    works on floats, Intervals or mixed sequences.  Exact sign flips.
    """
    out = list(state)
    out[1] = -out[1]
    out[2] = -out[2]
    return type(state)(out) if isinstance(state, tuple) else out


def r_symmetry_box(box: Box) -> Box:
    lo = box.lo.copy()
    hi = box.hi.copy()
    lo[1], hi[1] = -box.hi[1], -box.lo[1]
    lo[2], hi[2] = -box.hi[2], -box.lo[2]
    return Box(lo, hi, _raw=True)

"""Parallel shooting for R-symmetric orbits, verified with Krawczyk.

The residual, for unknowns (s, tau, x1..xn) and a boundary curve p,

    F = ( Phi_tau(p(s)) - x1,
          Phi_tau(x1) - x2, ..., Phi_tau(x_{n-1}) - x_n,
          pi_Y Phi_tau(x_n),  pi_PX Phi_tau(x_n) )

vanishes exactly when x_{n+1} := Phi_tau(x_n) is a reflection-symmetric
turning point (Y = PX = 0), so the mirror extension x_{n+k} = R(x_{n+2-k})
closes an R-symmetric orbit: periodic when p parameterizes the symmetry
plane, homoclinic when p parameterizes the verified unstable-manifold curve.

The family parameter (the X-axis crossing of the orbit) enters the residual
as an interval constant, so one verified Krawczyk box certifies the whole
one-parameter family of orbits at once.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dfield

import numpy as np

from .interval import Interval, hull
from .intlin import Box, IntervalMatrix
from .jets import jet_eval
from .flow import Flow, IntegratorOptions, SectionSpec, IntegrationError
from .model import Model, r_symmetry_box
from .roots import newton_refine, krawczyk_solve, RootError

__all__ = [
    "BoundaryCurve",
    "LyapunovCurve",
    "ManifoldCurve",
    "ShootingSystem",
    "OrbitCertificate",
    "verify_lyapunov_family",
    "verify_homoclinic",
    "lyapunov_seed",
    "homoclinic_seed",
    "FloatFlow",
]


# ---------------------------------------------------------------------------
# float scouting flow (seeds, frames); same tapes, plain float coefficients
# ---------------------------------------------------------------------------

class FloatFlow:
    """Non-rigorous Taylor integration on the traced field (plain floats)."""

    def __init__(self, model: Model, order=18, tol=1e-16, variational=False):
        self.model = model
        self.spec = model.spec_c1() if variational else model.spec_plain()
        self.tape = self.spec.tape
        self.nvars = self.tape.nvars
        self.order = order
        self.tol = tol

    def _init(self, x0, variational):
        v = list(map(float, x0))
        if variational:
            v += [1.0 if r == c else 0.0 for r in range(4) for c in range(4)]
        return v

    def _h(self, jets):
        amax = max(abs(jets[i][self.order]) for i in range(4)) + 1e-300
        return min(0.9 * (self.tol / amax) ** (1.0 / self.order), 0.3)

    def flow(self, x0, t_end):
        v = self._init(x0, self.nvars == 20)
        t = 0.0
        while t < t_end:
            jets = self.tape.ode_jets(v, self.order)
            h = min(self._h(jets), t_end - t)
            v = [jet_eval(j, h) for j in jets]
            t += h
        return np.array(v)

    def to_section(self, x0, index=1, count=1, skip_time=1e-3, t_max=50.0,
                   constraint=None):
        """Integrate to the count-th crossing of coordinate `index` = 0 at a
        time greater than `skip_time`.

        Returns (state, t).  Non-rigorous; bisection on the jet polynomial.
        """
        v = self._init(x0, self.nvars == 20)
        t = 0.0
        found = 0
        while t < t_max:
            jets = self.tape.ode_jets(v, self.order)
            h = self._h(jets)
            s0 = v[index]
            s1 = jet_eval(jets[index], h)
            if s0 * s1 < 0:
                a, b = 0.0, h
                fa = s0
                for _ in range(80):
                    mth = 0.5 * (a + b)
                    fm = jet_eval(jets[index], mth)
                    if fa * fm <= 0:
                        b = mth
                    else:
                        a, fa = mth, fm
                sig = 0.5 * (a + b)
                if t + sig > skip_time:
                    state = np.array([jet_eval(j, sig) for j in jets])
                    if constraint is None or constraint(state):
                        found += 1
                        if found == count:
                            return state, t + sig
            v = [jet_eval(j, h) for j in jets]
            t += h
        raise RootError("no float section crossing found")


# ---------------------------------------------------------------------------
# boundary curves
# ---------------------------------------------------------------------------

class BoundaryCurve:
    def eval(self, s) -> Box:
        raise NotImplementedError

    def deriv(self, s) -> Box:
        raise NotImplementedError

    def eval_float(self, s: float) -> np.ndarray:
        raise NotImplementedError


@dataclass
class LyapunovCurve(BoundaryCurve):
    """p(s) = (X, 0, 0, s) with the family interval X as a constant."""

    family_x: Interval

    def eval(self, s) -> Box:
        si = s if isinstance(s, Interval) else Interval.point(s)
        return Box.from_intervals([self.family_x, Interval(0.0), Interval(0.0), si])

    def deriv(self, s) -> Box:
        return Box.from_point([0.0, 0.0, 0.0, 1.0])

    def eval_float(self, s: float) -> np.ndarray:
        return np.array([self.family_x.mid, 0.0, 0.0, s])


@dataclass
class ManifoldCurve(BoundaryCurve):
    """p(s) = x0 + A0 pu(s) on the verified unstable-manifold curve.

    pu is known only through its certificate: pu(s) = (s, p2, p3, 0) with
    |p_k(s)| <= L |s| and d pu/ds in {1} x [-L, L]^2 x {0}; the fourth
    component vanishes because the curve lies in the section {Y = 0}.
    """

    x0: Box
    A0: np.ndarray
    cone_l: float
    radius: float

    def _pu(self, si: Interval) -> Box:
        m = si.mag
        if m > self.radius * (1.0 + 1e-9):
            raise ValueError("curve parameter outside certified radius")
        slack = Interval(-self.cone_l * m, self.cone_l * m)
        return Box.from_intervals([si, slack, slack, Interval(0.0)])

    def eval(self, s) -> Box:
        si = s if isinstance(s, Interval) else Interval.point(s)
        A = IntervalMatrix.from_point(self.A0)
        return self.x0 + A.matvec(self._pu(si))

    def deriv(self, s) -> Box:
        L = self.cone_l
        d = Box.from_intervals([Interval(1.0), Interval(-L, L), Interval(-L, L),
                                Interval(0.0)])
        return IntervalMatrix.from_point(self.A0).matvec(d)

    def eval_float(self, s: float) -> np.ndarray:
        return self.x0.mid + self.A0 @ np.array([s, 0.0, 0.0, 0.0])


# ---------------------------------------------------------------------------
# the shooting system
# ---------------------------------------------------------------------------

class ShootingSystem:
    """Residual and interval Jacobian of the parallel-shooting map."""

    def __init__(self, model: Model, curve: BoundaryCurve, n: int,
                 opts: IntegratorOptions = IntegratorOptions()):
        self.model = model
        self.curve = curve
        self.n = n
        self.dim = 4 * n + 2
        self.flow = Flow(model.spec_c1(), opts)

    # unknown layout: v[0] = s, v[1] = tau, v[2+4i .. 5+4i] = x_{i+1}

    def _segment_starts(self, v: Box):
        outs = [self.curve.eval(v[0])]
        for i in range(1, self.n):
            outs.append(v[2 + 4 * (i - 1): 2 + 4 * i])
        outs.append(v[2 + 4 * (self.n - 1): 2 + 4 * self.n])
        return outs

    def _flow_segment(self, x0: Box, tau: Interval, vacc: bool):
        st = self.flow.start(x0, vacc=vacc)
        st = self.flow.run_time(st, tau)
        hull = st.hull()
        f_end = self.flow.f_state(hull)
        V = st.vacc.hull() if vacc else None
        return hull, f_end, V

    def residual(self, v: Box) -> Box:
        tau = v[1]
        starts = self._segment_starts(v)
        rows = []
        for i in range(self.n):
            img, _, _ = self._flow_segment(starts[i], tau, vacc=False)
            nxt = v[2 + 4 * i: 6 + 4 * i]
            rows.append(img - nxt)
        img, _, _ = self._flow_segment(starts[self.n], tau, vacc=False)
        out = rows[0]
        for r in rows[1:]:
            out = out.concat(r)
        return out.concat(Box.from_intervals([img[1], img[2]]))

    def jacobian(self, V: Box) -> IntervalMatrix:
        n = self.n
        dim = self.dim
        tau = V[1]
        starts = self._segment_starts(V)
        lo = np.zeros((dim, dim))
        hi = np.zeros((dim, dim))
        J = IntervalMatrix(lo, hi, _raw=True)

        def put(r0, c0, block):
            if isinstance(block, Box):
                J.lo[r0: r0 + block.dim, c0] = block.lo
                J.hi[r0: r0 + block.dim, c0] = block.hi
            else:
                J.lo[r0: r0 + block.rows, c0: c0 + block.cols] = block.lo
                J.hi[r0: r0 + block.rows, c0: c0 + block.cols] = block.hi

        for i in range(n + 1):
            img, f_end, DPhi = self._flow_segment(starts[i], tau, vacc=True)
            if i == 0:
                dcol = DPhi.matvec(self.curve.deriv(V[0]))
            row0 = 4 * i
            if i < n:
                if i == 0:
                    put(0, 0, dcol)
                else:
                    put(row0, 2 + 4 * (i - 1), DPhi)
                put(row0, 1, f_end[:4])
                eye = IntervalMatrix.from_point(-np.eye(4))
                put(row0, 2 + 4 * i, eye)
            else:
                rY = DPhi.row(1)
                rPX = DPhi.row(2)
                c0 = 2 + 4 * (n - 1)
                J.lo[dim - 2, c0:c0 + 4] = rY.lo
                J.hi[dim - 2, c0:c0 + 4] = rY.hi
                J.lo[dim - 1, c0:c0 + 4] = rPX.lo
                J.hi[dim - 1, c0:c0 + 4] = rPX.hi
                put(dim - 2, 1, Box.from_intervals([f_end[1]]))
                put(dim - 1, 1, Box.from_intervals([f_end[2]]))
        return J

    # float versions for Newton seeding

    def residual_float(self, v: np.ndarray, ff: FloatFlow) -> np.ndarray:
        n = self.n
        tau = v[1]
        out = np.zeros(self.dim)
        x = self.curve.eval_float(v[0])
        for i in range(n):
            img = ff.flow(x, tau)[:4]
            nxt = v[2 + 4 * i: 6 + 4 * i]
            out[4 * i: 4 * i + 4] = img - nxt
            x = nxt
        img = ff.flow(x, tau)[:4]
        out[-2] = img[1]
        out[-1] = img[2]
        return out

    def jacobian_float(self, v: np.ndarray, ffv: FloatFlow) -> np.ndarray:
        n = self.n
        tau = v[1]
        J = np.zeros((self.dim, self.dim))
        x = self.curve.eval_float(v[0])
        dp = self.curve.deriv(v[0]).mid
        for i in range(n + 1):
            full = ffv.flow(x, tau)
            img = full[:4]
            V = full[4:20].reshape(4, 4)
            fimg = np.array(self.model.field_value(Box.from_point(img)).mid)
            if i < n:
                if i == 0:
                    J[0:4, 0] = V @ dp
                else:
                    J[4 * i: 4 * i + 4, 2 + 4 * (i - 1): 6 + 4 * (i - 1)] = V
                J[4 * i: 4 * i + 4, 1] = fimg
                J[4 * i: 4 * i + 4, 2 + 4 * i: 6 + 4 * i] = -np.eye(4)
                x = v[2 + 4 * i: 6 + 4 * i]
            else:
                J[-2, 2 + 4 * (n - 1): 6 + 4 * (n - 1)] = V[1]
                J[-1, 2 + 4 * (n - 1): 6 + 4 * (n - 1)] = V[2]
                J[-2, 1] = fimg[1]
                J[-1, 1] = fimg[2]
        return J


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

@dataclass
class OrbitCertificate:
    kind: str                 # 'periodic' | 'homoclinic'
    mu: float
    family_x: Interval        # interval of X-axis crossings covered
    s: Interval               # verified boundary parameter
    step_time: Interval       # tau (periodic) or h (homoclinic)
    points: list              # x_0 .. x_{n+1} (Boxes)
    seg_variationals: list    # DPhi_tau over each segment start box
    period: Interval = None   # periodic only: 2 (n+1) tau
    max_radius: float = 0.0

    @property
    def n(self) -> int:
        return len(self.points) - 2

    def mirror_points(self):
        """Full list through the R-symmetric second half:
        x_{n+k} = R(x_{n+2-k}), k = 2..n+2."""
        n = self.n
        out = list(self.points)
        for k in range(2, n + 3):
            out.append(r_symmetry_box(self.points[n + 2 - k]))
        return out

    def summary(self):
        return {
            "kind": self.kind,
            "mu": self.mu,
            "n": self.n,
            "s": [self.s.lo, self.s.hi],
            "step_time": [self.step_time.lo, self.step_time.hi],
            "max_radius": self.max_radius,
        }


def _verify(system: ShootingSystem, seed: np.ndarray, r0: float):
    F = system.residual
    DF = system.jacobian
    cert = krawczyk_solve(F, DF, seed, r0=r0)
    if not cert.verified:
        raise RootError(
            "Krawczyk verification failed; consider subdividing the family interval")
    return cert


def _assemble(system: ShootingSystem, cert, kind: str, family_x: Interval,
              mu: float) -> OrbitCertificate:
    K = cert.K
    n = system.n
    s = K[0]
    tau = K[1]
    x0 = system.curve.eval(s)
    pts = [x0]
    for i in range(n):
        pts.append(K[2 + 4 * i: 6 + 4 * i])
    # x_{n+1} = Phi_tau(x_n), with the symmetric-turning-point refinement
    img, f_end, DPhi = system._flow_segment(pts[n], tau, vacc=True)
    if not (img[1].contains(0.0) and img[2].contains(0.0)):
        raise RootError("verified endpoint misses the symmetry plane")
    xe = img.replace(1, Interval(0.0)).replace(2, Interval(0.0))
    pts.append(xe)
    segv = []
    for i in range(n + 1):
        _, _, V = system._flow_segment(pts[i], tau, vacc=True)
        segv.append(V)
    radius = max(p.max_rad() for p in pts)
    out = OrbitCertificate(
        kind=kind, mu=mu, family_x=family_x, s=s, step_time=tau,
        points=pts, seg_variationals=segv, max_radius=radius)
    if kind == "periodic":
        out.period = tau * (2 * (n + 1))
    return out


def verify_lyapunov_family(model: Model, family_x: Interval, n: int = 14,
                           seed=None, opts: IntegratorOptions = IntegratorOptions(),
                           ) -> OrbitCertificate:
    """Krawczyk-verified family of R-symmetric periodic orbits crossing the
    symmetry plane at X in `family_x`.  Returns points over half the orbit;
    the other half is the R-mirror."""
    curve = LyapunovCurve(family_x)
    system = ShootingSystem(model, curve, n, opts)
    if seed is None:
        seed = lyapunov_seed(model, family_x.mid, n)
    cert = _verify(system, np.asarray(seed, dtype=float), r0=2e-8)
    return _assemble(system, cert, "periodic", family_x, model.mu)


def verify_homoclinic(model: Model, curve: ManifoldCurve, n: int = 20,
                      seed=None, opts: IntegratorOptions = IntegratorOptions(),
                      family_x: Interval = None) -> OrbitCertificate:
    """Krawczyk-verified R-symmetric homoclinic orbit seeded on the verified
    unstable-manifold curve."""
    system = ShootingSystem(model, curve, n, opts)
    if seed is None:
        raise RootError("homoclinic seed required")
    seed = np.asarray(seed, dtype=float)
    # the curve parameter must stay inside the certified radius; give it a
    # much smaller candidate radius than the shooting points
    r0 = np.full(system.dim, 5e-8)
    r0[0] = min(6e-9, 0.4 * (curve.radius - abs(seed[0])))
    if r0[0] <= 0:
        raise RootError("seed parameter too close to the certified curve edge")
    r0[1] = 1e-8
    cert = _verify(system, seed, r0=r0)
    return _assemble(system, cert, "homoclinic",
                     family_x if family_x is not None else Interval(model.mu) * 0.0,
                     model.mu)


# ---------------------------------------------------------------------------
# seed searches (non-rigorous; results frozen into the seed fixture)
# ---------------------------------------------------------------------------

def lyapunov_seed(model: Model, XL: float, n: int = 14,
                  py_bracket=(-0.87, -0.80)) -> np.ndarray:
    """Find (s, tau, x1..xn) for the symmetric periodic orbit through
    (XL, 0, 0, s): bisect the symmetric-return defect in s, then Newton on
    the full shooting system."""
    ff = FloatFlow(model)

    def first_return(py):
        state, t = ff.to_section((XL, 0.0, 0.0, py), index=1)
        return state, t

    def defect(py):
        return first_return(py)[0][2]

    def on_branch(py):
        # the half-turn of an L1 Lyapunov orbit: a short first crossing on
        # the L1 side, not a loop around the small primary
        st, t = first_return(py)
        return t < 2.5 and XL - 0.02 < st[0] < -0.85

    a, b = py_bracket
    grid = np.linspace(a, b, 81)
    vals = []
    for g in grid:
        try:
            vals.append(defect(g))
        except RootError:
            vals.append(np.nan)
    lohi = None
    for i in range(len(grid) - 1):
        if np.isnan(vals[i]) or np.isnan(vals[i + 1]):
            continue
        if vals[i] * vals[i + 1] < 0 and on_branch(grid[i]) and on_branch(grid[i + 1]):
            lohi = (grid[i], grid[i + 1])
            break
    if lohi is None:
        raise RootError("no symmetric return bracket in the PY range")
    a, b = lohi
    fa = defect(a)
    for _ in range(80):
        mid = 0.5 * (a + b)
        fm = defect(mid)
        if fa * fm <= 0:
            b = mid
        else:
            a, fa = mid, fm
    s = 0.5 * (a + b)
    _, t_half = first_return(s)
    tau = t_half / (n + 1)
    v = [s, tau]
    x = np.array([XL, 0.0, 0.0, s])
    for _ in range(n):
        x = ff.flow(x, tau)[:4]
        v.extend(x)
    v = np.array(v)
    system = ShootingSystem(model, LyapunovCurve(Interval(XL)), n)
    ffv = FloatFlow(model, variational=True)
    v, res = newton_refine(lambda z: system.residual_float(z, ff),
                           lambda z: system.jacobian_float(z, ffv),
                           v, tol=5e-13)
    return v


def homoclinic_seed(model: Model, x0_mid: np.ndarray, A0: np.ndarray,
                    radius: float, n: int = 20,
                    crossing_number: int = 5) -> np.ndarray:
    """Find (s, h, x1..xn) for the symmetric homoclinic orbit: scan the
    unstable-curve parameter for a sign change of PX at the distant
    symmetry-plane crossing (Y = 0, X < -1), bisect, then Newton."""
    ff = FloatFlow(model)

    def far_crossing(s):
        x = x0_mid + A0 @ np.array([s, 0.0, 0.0, 0.0])
        state, t = ff.to_section(x, index=1, count=1, t_max=30.0,
                                 constraint=lambda st: st[0] < -1.0)
        return state, t

    def defect(s):
        state, _ = far_crossing(s)
        return state[2]

    # geometric scan on both sides
    best = None
    for sgn in (-1.0, 1.0):
        mags = np.geomspace(radius * 1e-3, radius, 25)
        vals = []
        for mch in mags:
            try:
                vals.append(defect(sgn * mch))
            except RootError:
                vals.append(np.nan)
        for i in range(len(mags) - 1):
            if np.isnan(vals[i]) or np.isnan(vals[i + 1]):
                continue
            if vals[i] * vals[i + 1] < 0:
                best = (sgn * mags[i], sgn * mags[i + 1])
                break
        if best:
            break
    if best is None:
        raise RootError("no homoclinic bracket on the unstable curve")
    a, b = best
    fa = defect(a)
    for _ in range(90):
        mid = 0.5 * (a + b)
        fm = defect(mid)
        if fa * fm <= 0:
            b = mid
        else:
            a, fa = mid, fm
    s = 0.5 * (a + b)
    _, t_cross = far_crossing(s)
    h = t_cross / (n + 1)
    v = [s, h]
    x = x0_mid + A0 @ np.array([s, 0.0, 0.0, 0.0])
    for _ in range(n):
        x = ff.flow(x, h)[:4]
        v.extend(x)
    v = np.array(v)
    curve = ManifoldCurve(Box.from_point(x0_mid), A0, 0.0, radius * 4.0)
    system = ShootingSystem(model, curve, n)
    ffv = FloatFlow(model, variational=True)
    v, res = newton_refine(lambda z: system.residual_float(z, ff),
                           lambda z: system.jacobian_float(z, ffv),
                           v, tol=5e-13)
    return v

"""Top-level drift certificates: transversality, persistence derivatives,
the angle shift of the outer (scattering) return, the Lipschitz constant of
the first-order energy increment, strip-wise discrete Melnikov sums, and the
final inequality.

Geometry recap.  On the section {Y = 0}, in the affine chart of the
canonical frame at the symmetric orbit point, the return map (two section
crossings) fixes the family of verified orbits; its local unstable set is
certified by `cones`.  The homoclinic orbit links the unstable fiber of a
point to the stable fiber of another point on the same energy level, with a
verified angle shift.  For the elliptic perturbation, the first-order energy
increment of one return at starting angle theta decomposes exactly as
A cos(theta) + B sin(theta) with A, B computable by integrating a forced
pair of linear equations along the unperturbed orbit; this module assembles
those coefficients along the homoclinic excursion and near the orbit, and
evaluates the strip-wise sums with the Lipschitz penalty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield

import numpy as np

from .interval import Interval, icos, isin, hull, reduce_mod_2pi, TWO_PI
from .intlin import Box, IntervalMatrix, mat_mul, max_norm
from .flow import Flow, flow_direct, IntegratorOptions, SectionSpec, \
    SectionMonitor, IntegrationError
from .model import Model
from .shooting import OrbitCertificate, FloatFlow
from .cones import UnstableCertificate, FiberCertificate, CANONICAL_FRAME, \
    ConeError

__all__ = [
    "TransversalityCertificate",
    "check_transversality",
    "PersistenceDerivatives",
    "persistence_derivatives",
    "ScatteringBound",
    "scattering_bound",
    "LipschitzBound",
    "lipschitz_lg",
    "MelnikovData",
    "melnikov_data",
    "melnikov_sum",
    "StripSpec",
    "FragmentReport",
    "DiffusionCertificate",
    "certify_diffusion",
    "DiffusionError",
]

Y_SECTION = SectionSpec(normal=(0.0, 1.0, 0.0, 0.0))


class DiffusionError(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# transversality of the manifold intersection
# ---------------------------------------------------------------------------

@dataclass
class TransversalityCertificate:
    """Normalized tangent of the unstable curve at the distant symmetric
    crossing, projected to (X, PX); both components strictly positive, so by
    the reflection the stable curve crosses it transversally."""

    tangent_ratio: Interval    # PX-slope over X-slope
    x_component: Interval
    px_component: Interval

    def summary(self):
        return {"tangent_ratio": [self.tangent_ratio.lo, self.tangent_ratio.hi],
                "x_component": [self.x_component.lo, self.x_component.hi]}


def check_transversality(model: Model, homoclinic: OrbitCertificate,
                         manifold: UnstableCertificate,
                         opts: IntegratorOptions = None) -> TransversalityCertificate:
    """Push the unstable-curve derivative cone along the verified homoclinic
    chain to the far symmetric crossing and check the sign conditions."""
    if opts is None:
        opts = IntegratorOptions(order=16, h_max=0.2)
    L = manifold.aperture
    A0 = manifold.frame0.matrix
    dp = IntervalMatrix.from_point(A0).matvec(Box.from_intervals(
        [Interval(1.0), Interval(-L, L), Interval(-L, L), Interval(0.0)]))
    spec = model.spec_c1()
    h = homoclinic.step_time
    w = dp
    n = homoclinic.n
    for j in range(n + 1):
        x = homoclinic.points[j]
        inits = list(x.intervals()) + [Interval(1.0 if r == c else 0.0)
                                       for r in range(4) for c in range(4)]
        vals, _, _, _ = flow_direct(spec, inits, h, opts)
        V = IntervalMatrix([[vals[4 + 4 * r + c] for c in range(4)]
                            for r in range(4)])
        w = V.matvec(w)
        nm = float(np.abs(w.mid).max())
        w = w * (1.0 / nm)
    # time correction onto the section at the symmetric endpoint
    y = homoclinic.points[n + 1]
    fy = model.field_value(y)
    if 0.0 in fy[1]:
        raise DiffusionError("endpoint crossing not transversal")
    w = w - fy * (w[1] / fy[1])
    wx, wpx = w[0], w[2]
    if not (wx.lo > 0.0 or wx.hi < 0.0):
        raise DiffusionError("sign of the X component is not decided")
    if wx.hi < 0.0:
        w = -1.0 * w
        wx, wpx = w[0], w[2]
    if not wpx.lo > 0.0:
        raise DiffusionError("PX component of the tangent not strictly positive")
    ratio = wpx / wx
    return TransversalityCertificate(tangent_ratio=ratio, x_component=wx,
                                     px_component=wpx)


# ---------------------------------------------------------------------------
# persistence (twist) derivatives of the family
# ---------------------------------------------------------------------------

@dataclass
class PersistenceDerivatives:
    ds_dx: Interval
    dtau_dx: Interval
    dT_dx: Interval
    dH_dx: Interval

    def summary(self):
        return {k: [getattr(self, k).lo, getattr(self, k).hi]
                for k in ("ds_dx", "dtau_dx", "dT_dx", "dH_dx")}


def persistence_derivatives(model: Model, family: OrbitCertificate
                            ) -> PersistenceDerivatives:
    """Implicit-function derivatives of the symmetric-return conditions
    g(X, s, tau) = (Y, PX) at the half turn; both twist quantities must
    exclude zero."""
    n = family.n
    half = None
    for V in family.seg_variationals:
        half = V if half is None else mat_mul(V, half)
    np_half = n + 1  # number of segments to the half-turn point
    f_half = model.field_value(family.points[n + 1])
    dg_dX = Box.from_intervals([half[1, 0], half[2, 0]])
    dg_ds = Box.from_intervals([half[1, 3], half[2, 3]])
    dg_dtau = Box.from_intervals([f_half[1] * float(np_half),
                                  f_half[2] * float(np_half)])
    # solve [dg_ds dg_dtau] (ds, dtau)^T = -dg_dX  (2x2 interval system)
    a, b = dg_ds[0], dg_dtau[0]
    c, d = dg_ds[1], dg_dtau[1]
    det = a * d - b * c
    if 0.0 in det:
        raise DiffusionError("return-condition Jacobian not invertible")
    rx, ry = -dg_dX[0], -dg_dX[1]
    ds = (d * rx - b * ry) / det
    dtau = (a * ry - c * rx) / det
    dT = dtau * float(2 * (n + 1))
    g0 = model.grad_h(family.points[0])
    dH = g0[0] + g0[3] * ds
    if 0.0 in dT:
        raise DiffusionError("period twist does not exclude zero")
    if 0.0 in dH:
        raise DiffusionError("energy twist does not exclude zero")
    return PersistenceDerivatives(ds_dx=ds, dtau_dx=dtau, dT_dx=dT, dH_dx=dH)


# ---------------------------------------------------------------------------
# outer-return angle shift
# ---------------------------------------------------------------------------

@dataclass
class ScatteringBound:
    shift: Interval
    fiber_slack: Interval
    excursion_time: Interval
    orbit_time: Interval

    def summary(self):
        return {"shift": [self.shift.lo, self.shift.hi]}


def scattering_bound(family: OrbitCertificate, homoclinic: OrbitCertificate,
                     fiber: FiberCertificate) -> ScatteringBound:
    """theta-shift of the outer map: fiber slack, the 42 h excursion, fiber
    slack again, minus five full turns.  Exact interval bookkeeping."""
    mr = fiber.theta_slack
    exc = homoclinic.step_time * 42.0
    five_t = family.period * 5.0
    shift = mr + exc + mr - five_t
    return ScatteringBound(shift=shift, fiber_slack=mr, excursion_time=exc,
                           orbit_time=five_t)


# ---------------------------------------------------------------------------
# Lipschitz constant of the first-order energy increment
# ---------------------------------------------------------------------------

@dataclass
class LipschitzBound:
    lg: float          # certified constant (raw bound times the safety factor)
    lg_raw: float      # the computed composition bound itself
    safety: float
    per_map: list
    op_norms: list
    windows: list

    def summary(self):
        return {"lg": self.lg, "lg_raw": self.lg_raw, "safety": self.safety,
                "max_window": max(self.windows)}


def _combine_parts(bc: Box, bs: Box) -> Box:
    """Enclosure of cc*bc + cs*bs over the whole circle of starting angles
    (cc, cs each within [-1, 1])."""
    u = Interval(-1.0, 1.0)
    return bc * u + bs * u


def lipschitz_lg(model: Model, family: OrbitCertificate,
                 manifold: UnstableCertificate,
                 opts: IntegratorOptions = None,
                 safety: float = 2.0) -> LipschitzBound:
    """Composable Lipschitz bound for the energy component of the
    first-order perturbation of the return map, on the manifold
    neighborhood.

    Per local map an interval row majorizes the gradient of
    d/d eps [ H0 after the map ]; composition follows the chain-splitting
    inequality with per-map operator norms over windows that grow with the
    accumulated stretch (the pairs the theorem needs stay inside them).
    Any number above a valid bound is again a valid bound; the certified
    constant carries a safety factor on top of the computed composition to
    absorb model-parameter sensitivity."""
    if opts is None:
        opts = IntegratorOptions(order=14, h_max=0.12)
    spec = model.spec_lipschitz()
    frames = manifold.frames
    pts = family.mirror_points()
    N = len(frames)
    tau = family.step_time
    r = manifold.radius
    mhat_guess = [manifold.m_bar.hi * 1.05] * N
    sec = Y_SECTION
    for _attempt in range(4):
        windows = []
        acc = 1.0
        for k in range(N):
            windows.append(r * acc)
            acc *= mhat_guess[k]
        per_map = []
        op_norms = []
        for k in range(1, N + 1):
            fr_in = frames[k - 1]
            fr_out = frames[k] if k < N else frames[0]
            rho = windows[k - 1]
            Bw = Box.from_intervals([Interval(-rho, rho)] * 4)
            amb = fr_in.base + IntervalMatrix.from_point(fr_in.matrix).matvec(Bw)
            inits = (list(amb.intervals()) + [Interval(1.0), Interval(0.0)]
                     + [Interval(1.0 if rr == cc else 0.0)
                        for rr in range(4) for cc in range(4)]
                     + [Interval(0.0)] * 40)
            last = k == N
            if not last:
                vals, _, _, _ = flow_direct(spec, inits, tau, opts)
            else:
                vals, _, _, _ = flow_direct(spec, inits, Interval(tau.hi * 3.0),
                                            opts, section=sec)
            y = Box.from_intervals(vals[:4])
            V = IntervalMatrix([[vals[6 + 4 * rr + cc] for cc in range(4)]
                                for rr in range(4)])
            Wc = Box.from_intervals(vals[22:26])
            Ws = Box.from_intervals(vals[26:30])
            Uc = IntervalMatrix([[vals[30 + 4 * rr + cc] for cc in range(4)]
                                 for rr in range(4)])
            Us = IntervalMatrix([[vals[46 + 4 * rr + cc] for cc in range(4)]
                                 for rr in range(4)])
            if last:
                y = y.replace(1, Interval(0.0))
                fy = model.field_value(y)
                fY = fy[1]
                if 0.0 in fY:
                    raise DiffusionError("non-transversal final map")
                rhs = spec.tape.eval0(vals)
                Wc_dot = Box.from_intervals(rhs[22:26])
                Ws_dot = Box.from_intervals(rhs[26:30])
                grho = V.row(1) * (-1.0 / fY)
                DP = V + _outer(fy, grho)
                Dfy = model.field_jacobian(y)
                eyDfDP = mat_mul(Dfy, DP).row(1)

                def correct(W, U, W_dot):
                    rho_eps = -W[1] / fY
                    Wt = W + fy * rho_eps
                    drho = (W_dot[1] * grho + U.row(1)) * (-1.0 / fY) + \
                        eyDfDP * (W[1] / (fY * fY))
                    Ut = U + _outer(W_dot, grho) + mat_mul(Dfy, DP) * rho_eps \
                        + _outer(fy, drho)
                    return Wt, Ut

                Wc, Uc = correct(Wc, Uc, Wc_dot)
                Ws, Us = correct(Ws, Us, Ws_dot)
                V_used = DP
            else:
                V_used = V
            gH = model.grad_h(y)
            HH = model.hess_h(y)
            W_all = _combine_parts(Wc, Ws)
            U_all_rows = []
            u = Interval(-1.0, 1.0)
            for rr in range(4):
                U_all_rows.append(Uc.row(rr) * u + Us.row(rr) * u)
            # v_x = W^T D2H DPhi A + gradH^T U A
            left = HH.rmatvec(W_all)              # row: W^T D2H
            row1 = V_used.rmatvec(left)           # times DPhi
            row2_parts = []
            for cc in range(4):
                acc_e = Interval(0.0)
                for rr in range(4):
                    acc_e = acc_e + gH[rr] * U_all_rows[rr][cc]
                row2_parts.append(acc_e)
            row = Box.from_intervals([row1[i] + row2_parts[i] for i in range(4)])
            vx = IntervalMatrix.from_point(fr_in.matrix).rmatvec(row)
            # v_theta = gradH . dW/dtheta0, with dW/dtheta0 in the same hull
            vth = gH.dot(Wc) * u + gH.dot(Ws) * u
            l1 = sum(float(vx[i].mag) for i in range(4)) + float(vth.mag)
            per_map.append(l1)
            dfc = mat_mul(mat_mul(fr_out.inverse, V_used),
                          IntervalMatrix.from_point(fr_in.matrix))
            op_norms.append(float(max_norm(dfc).hi))
        ok = all(op_norms[k] <= mhat_guess[k] * (1.0 + 1e-12) for k in range(N))
        if ok:
            break
        mhat_guess = [max(op_norms[k] * 1.02, mhat_guess[k]) for k in range(N)]
    else:
        raise DiffusionError("window operator norms failed to settle")
    lg_raw = 0.0
    stretch = 1.0
    for k in range(N):
        lg_raw += per_map[k] * stretch
        stretch *= op_norms[k]
    return LipschitzBound(lg=lg_raw * safety, lg_raw=lg_raw, safety=safety,
                          per_map=per_map, op_norms=op_norms, windows=windows)


def _outer(col: Box, row: Box) -> IntervalMatrix:
    n = col.dim
    m = row.dim
    lo = np.empty((n, m))
    hi = np.empty((n, m))
    for i in range(n):
        prod = row * col[i]
        lo[i] = prod.lo
        hi[i] = prod.hi
    return IntervalMatrix(lo, hi, _raw=True)


# ---------------------------------------------------------------------------
# Melnikov data: excursion and near-orbit return coefficients
# ---------------------------------------------------------------------------

@dataclass
class MelnikovData:
    """Everything needed to evaluate the energy-increment sums.

    Each return starting at angle theta contributes
    A cos(theta) + B sin(theta); the five excursion returns have their own
    coefficient pairs and start at theta0 + T_i (cumulative crossing times);
    later returns happen near the orbit with base coefficients (A0, B0) at
    angles advanced by the period, with a Lipschitz slack for the fiber
    offset decaying by the contraction rate per turn."""

    excursion: list            # (A_i, B_i, T_i) for i = 0..4
    base: tuple                # (A0, B0)
    period: Interval
    fiber_slack: Interval      # +- M r
    sigma_shift: Interval
    contraction: Interval
    radius: float

    def term_count_excursion(self):
        return len(self.excursion)


def _melnikov_iterate(model: Model, flow: Flow, box4: Box, t0: Interval,
                      pins=None):
    """One double-crossing return with the eccentricity-derivative pair.

    Returns (A, B, end_box4, end_time) where A, B are the coefficient
    enclosures of the energy increment for this return, referenced to the
    local clock started at the iterate beginning."""
    cs = Box.from_intervals([Interval(1.0), Interval(0.0)])
    st = flow.start(box4.concat(cs), t0=t0, vacc=False, forced=True)
    mon = SectionMonitor(Y_SECTION)
    if pins:
        for pin_t, pin_box in pins:
            if (pin_t - st.t).lo <= 0:
                continue
            st = flow.run_time(st, pin_t - st.t, monitor=mon)
            # the pin time itself encloses the true elapsed time; adopting it
            # stops the accumulated time width from compounding
            st.t = pin_t
            done = [e for e in mon.events if e.index == 2]
            if done:
                break
            hull = st.hull()
            refined = hull[:4].intersect(pin_box).concat(hull[4:6])
            st.refine(refined)
    ev = None
    for e in mon.events:
        if e.index == 2:
            ev = e
    if ev is None:
        ev, _ = flow.run_to_crossing(st, mon, 2, t_budget=8.0)
    y4 = ev.state[:4]
    gH = model.grad_h(y4)
    Wc = ev.blocks_section["Wc"]
    Ws = ev.blocks_section["Ws"]
    A = gH.dot(Wc)
    B = gH.dot(Ws)
    return A, B, ev.state, ev.time


def melnikov_data(model: Model, family: OrbitCertificate,
                  homoclinic: OrbitCertificate,
                  manifold: UnstableCertificate, fiber: FiberCertificate,
                  sigma: ScatteringBound,
                  opts: IntegratorOptions = None) -> MelnikovData:
    """Integrate the forced eccentricity-derivative pair along the verified
    homoclinic excursion (five returns, pinned to the verified chain) and
    along one return of the orbit-neighborhood box."""
    if opts is None:
        opts = IntegratorOptions(order=18, h_max=0.3)
    flow = Flow(model.spec_melnikov(), opts)
    chain = homoclinic.mirror_points()
    h = homoclinic.step_time
    # pin schedule: skip grid times too close to a predicted crossing
    ff = FloatFlow(model)
    t_cross = []
    x = chain[0].mid
    t_acc = 0.0
    for _ in range(10):
        state, tc = ff.to_section(x, index=1, skip_time=0.1, t_max=4.0)
        t_acc += tc
        t_cross.append(t_acc)
        x = state[:4]
    pins = []
    for j in range(1, 43):
        tj = j * h.mid
        if min(abs(tj - tc) for tc in t_cross) < 0.12:
            continue
        pins.append((j, chain[j]))
    excursion = []
    box = chain[0]
    t_now = Interval(0.0)
    for i in range(5):
        pins_i = [(h * j, pb) for j, pb in pins]
        A, B, state6, t_end = _melnikov_iterate(
            model, flow, box, t_now, pins=pins_i)
        excursion.append((A, B, t_now))
        box = state6[:4]
        t_now = t_end
    # near-orbit base coefficients over the family box, pinned to the
    # verified orbit chain (the turn crosses the section at the half turn)
    base_box = family.points[0]
    tau = family.step_time
    orbit_chain = family.mirror_points()
    n_seg = len(orbit_chain) - 1
    base_pins = []
    for j in range(1, n_seg):
        tj = j * tau.mid
        if min(abs(tj - 15 * tau.mid * k) for k in (1, 2)) < 0.12:
            continue
        base_pins.append((tau * j, orbit_chain[j]))
    A0, B0, _, _ = _melnikov_iterate(model, flow, base_box, Interval(0.0),
                                     pins=base_pins)
    return MelnikovData(
        excursion=[(A, B, (ts - Interval(0.0))) for (A, B, ts) in excursion],
        base=(A0, B0),
        period=family.period,
        fiber_slack=fiber.theta_slack,
        sigma_shift=sigma.shift,
        contraction=manifold.contraction,
        radius=manifold.radius)


def melnikov_sum(data: MelnikovData, theta: Interval, m: int,
                 lg: float = 0.0, first_only: int = None) -> Interval:
    """Enclosure of the m-term energy-increment sum for starting angles in
    `theta` (the fragment), assembled in cos/sin-coefficient form so that
    the cancellation across terms survives interval evaluation."""
    P = Interval(0.0)
    Q = Interval(0.0)
    slack = Interval(0.0)
    terms = range(len(data.excursion)) if first_only is None \
        else range(min(first_only, len(data.excursion)))
    for i in terms:
        A, B, Ti = data.excursion[i]
        phi = Ti + data.fiber_slack
        cph, sph = icos(phi), isin(phi)
        P = P + A * cph + B * sph
        Q = Q + (B * cph - A * sph)
    if first_only is None:
        A0, B0 = data.base
        lam = data.contraction
        for i in range(5, m):
            phi = data.sigma_shift + data.period * float(i)
            phi = reduce_mod_2pi(phi)
            cph, sph = icos(phi), isin(phi)
            P = P + A0 * cph + B0 * sph
            Q = Q + (B0 * cph - A0 * sph)
            amount = lg * data.radius * (lam ** (i - 5)).hi if i > 5 \
                else lg * data.radius
            slack = slack + Interval(-amount, amount)
    ct, stt = icos(theta), isin(theta)
    return P * ct + Q * stt + slack


# ---------------------------------------------------------------------------
# strips, fragments, the final inequality
# ---------------------------------------------------------------------------

@dataclass
class StripSpec:
    center: float
    half_width: float = 0.125
    fragments: int = 25
    sign: int = +1       # +1: sums must exceed the penalty; -1: fall below
    m_schedule: tuple = None

    def fragment(self, j: int) -> Interval:
        edges = np.linspace(self.center - self.half_width,
                            self.center + self.half_width, self.fragments + 1)
        return Interval(edges[j], edges[j + 1])

    def interval(self) -> Interval:
        return Interval(self.center - self.half_width,
                        self.center + self.half_width)

    def schedule(self, j: int) -> int:
        if self.m_schedule is not None:
            return self.m_schedule[j]
        if j < 3:
            return 21
        if j >= self.fragments - 3:
            return 25
        return 23


@dataclass
class FragmentReport:
    strip_sign: int
    index: int
    theta: Interval
    m: int
    sum: Interval
    margin: float
    return_angle: Interval
    reach_n: int


@dataclass
class DiffusionCertificate:
    mu: float
    lg: float
    contraction: Interval
    radius: float
    penalty: Interval
    fragments: list
    strips: tuple

    @property
    def verified(self) -> bool:
        return all(f.margin > 0.0 for f in self.fragments)

    def summary(self):
        return {
            "mu": self.mu,
            "lg": self.lg,
            "penalty": [self.penalty.lo, self.penalty.hi],
            "fragments": len(self.fragments),
            "min_margin": min(f.margin for f in self.fragments),
            "verified": self.verified,
        }


def _return_condition(strip: StripSpec, frag: Interval, m: int,
                      sigma: Interval, period: Interval):
    """Angle after the outer shift and m full turns, reduced into the
    strip's window; containment certifies the return."""
    ret = frag + sigma + period * float(m)
    target = strip.interval()
    shifted = ret - target.mid
    k = math.floor(shifted.mid / (2.0 * math.pi) + 0.5)
    from .interval import _pi_multiple
    ret_red = ret - _pi_multiple(2 * k)
    return ret_red, target.contains(ret_red)


def _reach_witness(frag: Interval, other: StripSpec, period: Interval,
                   n_max: int = 20000):
    """Smallest n with frag + n*period inside the other strip (mod 2 pi)."""
    from .interval import _pi_multiple
    target = other.interval()
    for n in range(1, n_max):
        ang = frag + period * float(n)
        shifted = ang - target.mid
        k = math.floor(shifted.mid / (2.0 * math.pi) + 0.5)
        red = ang - _pi_multiple(2 * k)
        if target.contains(red):
            return n
    raise DiffusionError("no strip-to-strip passage witness found")


def certify_diffusion(model: Model, data: MelnikovData, lip: LipschitzBound,
                      strips=None, auto_m: bool = True) -> DiffusionCertificate:
    """Check, fragment by fragment, the return condition and the signed
    sum-vs-penalty inequality for both strips, plus the mutual reachability
    of the strips under the inner dynamics."""
    if strips is None:
        strips = (StripSpec(center=math.pi + 0.65, sign=+1),
                  StripSpec(center=0.65, sign=-1))
    lam = data.contraction
    if not lam.hi < 1.0:
        raise DiffusionError("contraction rate not below one")
    penalty = (1.0 + lam) / (1.0 - lam) * lip.lg * data.radius
    reports = []
    for strip in strips:
        other = strips[1] if strip is strips[0] else strips[0]
        for j in range(strip.fragments):
            frag = strip.fragment(j)
            m_try = [strip.schedule(j)]
            if auto_m:
                m_try += [mm for mm in range(18, 29)
                          if mm != m_try[0]]
            placed = None
            for m in m_try:
                ret, ok = _return_condition(strip, frag, m,
                                            data.sigma_shift, data.period)
                if not ok:
                    continue
                s = melnikov_sum(data, frag, m, lg=lip.lg)
                if strip.sign > 0:
                    margin = s.lo - penalty.hi
                else:
                    margin = -(s.hi + penalty.hi)
                if margin > 0.0:
                    placed = (m, s, margin, ret)
                    break
                if placed is None or margin > placed[2]:
                    placed = (m, s, margin, ret)
            if placed is None:
                raise DiffusionError(
                    f"no return iterate found for fragment {j} of strip "
                    f"{strip.center:+.3f}")
            m, s, margin, ret = placed
            n_reach = _reach_witness(frag, other, data.period)
            reports.append(FragmentReport(
                strip_sign=strip.sign, index=j, theta=frag, m=m, sum=s,
                margin=margin, return_angle=ret, reach_n=n_reach))
    return DiffusionCertificate(
        mu=model.mu, lg=lip.lg, contraction=lam, radius=data.radius,
        penalty=penalty, fragments=reports, strips=strips)


def five_term_sweep(data: MelnikovData, samples: int = 200):
    """(theta, lo, hi) rows of the five-excursion-term sum across the
    circle; the sign structure locates the strips."""
    if samples <= 0:
        raise ValueError("sample count must be positive")
    rows = []
    for k in range(samples):
        th = 2.0 * math.pi * k / samples
        s = melnikov_sum(data, Interval(th), 5, first_only=5)
        rows.append((th, s.lo, s.hi))
    return rows

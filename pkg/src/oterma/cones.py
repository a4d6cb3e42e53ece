"""Cone conditions along the verified periodic orbit.

The full turn around the orbit is split into N local maps

    f_i(v) = A_i^{-1} ( Phi_tau(A_{i-1} v + x_{i-1}) - x_i ),   i = 1..N-1,
    f_N(v) = A_0^{-1} ( P(A_{N-1} v + x_{N-1}) - x_0 ),

with P the flow-to-section map of {Y = 0}.  In these frames the machinery
certifies, over the window B = [-r, r]^4 of each chart:

* cone propagation  [Df_i(B)] V_{i-1} inside the cone of V_i,
* a uniform expansion factor m > 1 inside the cones,
* a uniform Lipschitz factor m_bar on cone vectors,
* eigenvalue separation of DF(0) via Gershgorin discs,

which together yield a graph parameterization of the local unstable set of
the origin for the composed return map: a curve through the orbit point,
contained in the starting cone, with derivative in the cone — and, in the
extended phase space, angular control of the unstable fibers of every point
of the invariant circle (the constant M below).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield

import numpy as np

from .interval import Interval, hull
from .intlin import Box, IntervalMatrix, mat_mul, mat_inverse_enclosure, \
    gershgorin_enclosure, max_norm
from .flow import flow_direct, IntegratorOptions, SectionSpec, IntegrationError
from .jets import jet_eval
from .model import Model
from .shooting import OrbitCertificate, FloatFlow

__all__ = [
    "CANONICAL_FRAME",
    "AffineFrame",
    "ConeSchedule",
    "LocalMapData",
    "build_frames",
    "build_local_maps",
    "check_cone_propagation",
    "expansion_bound",
    "lipschitz_bound",
    "UnstableCertificate",
    "certify_unstable_manifold",
    "FiberCertificate",
    "certify_extended_fibers",
    "ConeError",
]


class ConeError(ArithmeticError):
    pass


# Canonical section frame at the symmetric orbit point: column 1 spans the
# unstable direction, column 3 its reflection (the stable one), column 2 a
# center direction, column 4 the only off-section direction (Y = 0.816632 v4).
CANONICAL_FRAME = np.array([
    [0.280324, -0.220733, 0.280324, 0.0],
    [0.0, 0.0, 0.0, 0.816632],
    [1.0, 0.0, -1.0, -1.0],
    [-0.343269, 1.0, -0.343269, 0.0],
])


@dataclass
class AffineFrame:
    base: Box                 # enclosure of the chart base point
    matrix: np.ndarray        # point matrix
    inverse: IntervalMatrix   # verified enclosure of matrix^{-1}

    @staticmethod
    def build(base: Box, matrix: np.ndarray) -> "AffineFrame":
        return AffineFrame(base, matrix, mat_inverse_enclosure(matrix))


@dataclass
class ConeSchedule:
    """Per-chart cone coefficients a_{i,k} in (0,1), k = 1..3; the chart-0
    cone (index 0 and N) is pinned to the uniform aperture L."""

    coeffs: np.ndarray  # (N+1, 3)

    def rep(self, i: int) -> Box:
        a = self.coeffs[i]
        return Box.from_intervals([
            Interval(1.0),
            Interval(-a[0], a[0]),
            Interval(-a[1], a[1]),
            Interval(-a[2], a[2]),
        ])


@dataclass
class LocalMapData:
    """Derivative enclosure of one local map over its window, and the
    crossing data of the final (section) map."""

    index: int
    df: IntervalMatrix
    window: float
    crossing_grad_rho: Box = None   # d rho / d(chart coords), final map only


def _eigenframe(model: Model, orbit: OrbitCertificate):
    """Accurate float analogue of the canonical frame at the orbit point:
    (unstable eigenvector, family tangent, stable eigenvector, flow
    direction), each scaled like the canonical columns.  Also returns the
    full-turn monodromy and its unstable eigenvalue."""
    pts = orbit.mirror_points()
    N = len(pts) - 1
    tau = orbit.step_time.mid
    ffv = FloatFlow(model, variational=True)
    MT = np.eye(4)
    for i in range(N):
        full = ffv.flow(pts[i].mid, tau)
        MT = full[4:20].reshape(4, 4) @ MT
    x0 = pts[0].mid
    f0 = np.array(model.field_value(Box.from_point(x0)).mid)
    # section-corrected full-turn map: rank-one update killing the flow
    P = (np.eye(4) - np.outer(f0, [0.0, 1.0, 0.0, 0.0]) / f0[1]) @ MT
    evals, evecs = np.linalg.eig(P)
    order = np.argsort(-np.abs(evals))
    lam_u = float(np.real(evals[order[0]]))
    vu = np.real(evecs[:, order[0]])
    vu = vu / vu[2]                       # PX component 1, like the canonical
    # family tangent (eigenvalue ~1): nearest eigenvalue to 1
    k1 = int(np.argmin(np.abs(evals - 1.0)))
    vc = np.real(evecs[:, k1])
    vc = vc / vc[3]                       # PY component 1
    vs = np.array([vu[0], -vu[1], -vu[2], vu[3]])   # reflection
    vf = f0 * (CANONICAL_FRAME[1, 3] / f0[1])       # Y component as canonical
    E = np.stack([vu, vc, vs, vf], axis=1)
    return E, MT, lam_u


def build_frames(model: Model, orbit: OrbitCertificate,
                 A0: np.ndarray = None) -> list:
    """Frames A_0..A_{N-1} along the full orbit (A_N = A_0 implicitly).

    Chart 0 keeps the canonical frame; the interior frames are variational
    images of an accurately eigen-aligned version of it, column-normalized
    by the geometric mean growth over the full turn, which makes every
    Df_i(0) nearly diagonal with nearly equal diagonal entries."""
    if A0 is None:
        A0 = CANONICAL_FRAME
    pts = orbit.mirror_points()
    N = len(pts) - 1
    tau = orbit.step_time.mid
    E, MT, lam_u = _eigenframe(model, orbit)
    # only the unstable column gets a growth normalization: the raw flow
    # images of the section-stable direction carry an O(1) flow-direction
    # component, so their norms stay O(1) without rescaling
    growth = np.array([abs(lam_u) ** (1.0 / N), 1.0, 1.0, 1.0])
    ffv = FloatFlow(model, variational=True)
    frames = [AffineFrame.build(pts[0], A0.copy())]
    M = np.eye(4)
    n2 = np.linalg.norm(E[:, 1])
    n3 = np.linalg.norm(E[:, 2])
    for i in range(1, N):
        full = ffv.flow(pts[i - 1].mid, tau)
        M = full[4:20].reshape(4, 4) @ M
        Ai = (M @ E) / (growth[None, :] ** i)
        # the raw flow transport leaks the flow direction into the family
        # tangent (linearly: the period varies along the family) and into
        # the stable column (whose genuine part decays); project it out and
        # renormalize so the frame never degenerates toward the flow column
        fi = np.array(model.field_value(Box.from_point(pts[i].mid)).mid)
        u = fi / np.linalg.norm(fi)
        for col, nrm in ((1, n2), (2, n3)):
            c = Ai[:, col] - np.dot(Ai[:, col], u) * u
            Ai[:, col] = c * (nrm / np.linalg.norm(c))
        frames.append(AffineFrame.build(pts[i], Ai))
    return frames


def _subdiv_boxes(rho: float, splits):
    """Chart window [-rho, rho]^4 cut into a grid of sub-boxes."""
    if len(splits) == 2:
        splits = (splits[0], 1, 1, splits[1])
    cuts = [np.linspace(-rho, rho, n + 1) for n in splits]
    out = []
    for a in range(splits[0]):
        for b in range(splits[1]):
            for c in range(splits[2]):
                for d in range(splits[3]):
                    out.append(Box.from_intervals([
                        Interval(cuts[0][a], cuts[0][a + 1]),
                        Interval(cuts[1][b], cuts[1][b + 1]),
                        Interval(cuts[2][c], cuts[2][c + 1]),
                        Interval(cuts[3][d], cuts[3][d + 1])]))
    return out


def build_local_maps(model: Model, orbit: OrbitCertificate, frames: list,
                     windows=None, opts: IntegratorOptions = None,
                     splits=(1, 1), splits_last=(8, 8)) -> list:
    """[Df_i] over the window box of each chart, i = 1..N.

    windows: per-map half-widths of the chart window B.  Each window may be
    subdivided (hulling the sub-enclosures) to fight the crossing-time
    spread; the final section map gets its own, finer split.
    """
    if opts is None:
        opts = IntegratorOptions(order=14, h_max=0.12)
    pts = orbit.mirror_points()
    N = len(pts) - 1
    if windows is None:
        raise ValueError("windows required")
    spec = model.spec_c1()
    spec2 = model.spec_c2()
    tau = orbit.step_time
    out = []
    sec = SectionSpec(normal=(0.0, 1.0, 0.0, 0.0))

    def sandwich(fr_in, fr_out, M):
        return mat_mul(mat_mul(fr_out.inverse, M),
                       IntervalMatrix.from_point(fr_in.matrix))

    _shared = {}

    def section_shared():
        """Reference crossing time of the final chart origin and the
        second-variational slope enclosures over its whole window."""
        if "tstar" in _shared:
            return _shared["tstar"], _shared["W2"]
        fr_in = frames[N - 1]
        c_inits = list(fr_in.base.intervals()) + \
            [Interval(1.0 if r == c else 0.0) for r in range(4) for c in range(4)]
        budget = Interval(tau.hi * 3.0)
        _, t_cross, _, _ = flow_direct(spec, c_inits, budget, opts, section=sec)
        tstar = t_cross.mid
        rho = windows[N - 1]
        Bw = Box.from_intervals([Interval(-rho, rho)] * 4)
        amb = fr_in.base + IntervalMatrix.from_point(fr_in.matrix).matvec(Bw)
        w2_inits = list(amb.intervals()) + \
            [Interval(1.0 if r == c else 0.0) for r in range(4) for c in range(4)] + \
            [Interval(0.0)] * 64
        wvals, _, _, _ = flow_direct(spec2, w2_inits, tstar, opts)
        W2 = [IntervalMatrix([[wvals[20 + 16 * j + 4 * r + c]
                               for c in range(4)] for r in range(4)])
              for j in range(4)]
        _shared["tstar"] = tstar
        _shared["W2"] = W2
        return tstar, W2

    def dfv_bound(y_mid: Box, V_mid: IntervalMatrix, dt: Interval):
        """Enclosure of Df(x(s)) V(s) over |s - s_mid| <= |dt| by a short
        Picard argument around the midpoint values."""
        sym = Interval(-dt.mag, dt.mag)
        y_r = y_mid
        for _ in range(3):
            y_new = y_mid + model.field_value(y_r) * sym
            y_r = y_new.hull(y_r).inflate(1e-14)
        V_r = V_mid
        for _ in range(3):
            V_new = V_mid + mat_mul(model.field_jacobian(y_r), V_r) * sym
            V_r = V_new.hull(V_r).inflate(1e-14)
        ok = V_r.contains((V_mid + mat_mul(model.field_jacobian(y_r), V_r) * sym).mid)
        if not ok:
            raise ConeError("time-correction enclosure failed to settle")
        return mat_mul(model.field_jacobian(y_r), V_r)

    def flow_df(fr_in, fr_out, piece, to_section):
        """Chart derivative enclosure over one window piece.

        Time uncertainty (the family's step-time interval, the crossing-time
        spread) is carried in mean-value form -- midpoint evaluation plus an
        explicit (dt * Df V) term -- and the chart conjugation is applied to
        each term separately, which avoids conditioning blow-up of the raw
        interval evaluation at an interval time."""
        amb = fr_in.base + IntervalMatrix.from_point(fr_in.matrix).matvec(piece)
        inits = list(amb.intervals()) + [Interval(1.0 if r == c else 0.0)
                                         for r in range(4) for c in range(4)]
        if not to_section:
            # mean-value form in space: V over the window is the center
            # value plus window-coordinate deviations times the enclosed
            # second variationals, each frame-conjugated separately
            center = fr_in.base + fr_in.matrix @ piece.mid
            c_inits = list(center.intervals()) + \
                [Interval(1.0 if r == c else 0.0) for r in range(4) for c in range(4)]
            cvals, _, _, _ = flow_direct(spec, c_inits, tau.mid, opts)
            y_c = Box.from_intervals(cvals[:4])
            V_c = IntervalMatrix([[cvals[4 + 4 * r + c] for c in range(4)]
                                  for r in range(4)])
            w2_inits = inits + [Interval(0.0)] * 64
            wvals, _, _, _ = flow_direct(spec2, w2_inits, tau.mid, opts)
            W2 = [IntervalMatrix([[wvals[20 + 16 * j + 4 * r + c]
                                   for c in range(4)] for r in range(4)])
                  for j in range(4)]
            df = sandwich(fr_in, fr_out, V_c)
            A_in = fr_in.matrix
            for jc in range(4):
                Gj = None
                for k in range(4):
                    term = W2[k] * A_in[k, jc]
                    Gj = term if Gj is None else Gj + term
                span = piece[jc] - piece[jc].mid
                df = df + sandwich(fr_in, fr_out, Gj) * span
            y_mid = Box.from_intervals(wvals[:4])
            V_mid = IntervalMatrix([[wvals[4 + 4 * r + c] for c in range(4)]
                                    for r in range(4)])
            dtau = tau - tau.mid
            DfV = dfv_bound(y_mid, V_mid, dtau)
            df = df + sandwich(fr_in, fr_out, DfV) * dtau
            return df, None
        # section map: everything expands around (t*, piece center) with the
        # global reference time t*; the crossing-time variation is
        # linearized in the chart deviations (it correlates with them
        # through n^T V), and per-piece center offsets move only midpoints
        tstar, W2 = section_shared()
        center = fr_in.base + fr_in.matrix @ piece.mid
        c_inits = list(center.intervals()) + \
            [Interval(1.0 if r == c else 0.0) for r in range(4) for c in range(4)]
        cvals, _, _, _ = flow_direct(spec, c_inits, tstar, opts)
        V_c = IntervalMatrix([[cvals[4 + 4 * r + c] for c in range(4)]
                              for r in range(4)])
        bvals, _, _, _ = flow_direct(spec, inits, tstar, opts)
        y_box = Box.from_intervals(bvals[:4])
        V_box = IntervalMatrix([[bvals[4 + 4 * r + c] for c in range(4)]
                                for r in range(4)])
        # crossing-time offsets eta(x): s(y(t*,x)) + eta * n.f = 0 along the
        # trajectory; enclose eta by a short Picard + interval Newton
        s_box = y_box[1]
        f_box = model.field_value(y_box)
        if 0.0 in f_box[1]:
            raise ConeError("non-transversal section return")
        a0 = s_box.mag / f_box[1].mig * 1.5 + 1e-15
        eta0 = Interval(-a0, a0)
        y_span = y_box
        for _ in range(3):
            y_new = y_box + model.field_value(y_span) * eta0
            y_span = y_new.hull(y_span).inflate(1e-15)
        f_span = model.field_value(y_span)
        if 0.0 in f_span[1]:
            raise ConeError("non-transversal section neighborhood")
        eta = -(s_box / f_span[1])
        if not eta0.contains(eta):
            raise ConeError("crossing-offset enclosure failed")
        DfV = dfv_bound(y_box, V_box, eta)
        y_cross = y_span.replace(1, Interval(0.0))
        fy = model.field_value(y_cross)
        fY = fy[1]
        if 0.0 in fY:
            raise ConeError("non-transversal section return")

        def project(M):
            Vn = M.row(1)
            lo = np.empty((4, 4))
            hi = np.empty((4, 4))
            for r in range(4):
                row = Vn * (fy[r] / fY) * -1.0
                lo[r] = row.lo
                hi[r] = row.hi
            return M + IntervalMatrix(lo, hi, _raw=True)

        PDfV = project(DfV)
        # s(y(t*,x)) = s_c + (n^T V A) dv  componentwise in chart deviations
        s_c = Box.from_intervals(cvals[:4])[1]
        qv_chart = IntervalMatrix.from_point(fr_in.matrix).rmatvec(V_box.row(1))
        df = sandwich(fr_in, fr_out, project(V_c)) + \
            sandwich(fr_in, fr_out, PDfV) * (-s_c / f_span[1])
        A_in = fr_in.matrix
        for jc in range(4):
            Gj = None
            for k in range(4):
                term = W2[k] * A_in[k, jc]
                Gj = term if Gj is None else Gj + term
            Gj = project(Gj) + PDfV * (-qv_chart[jc] / f_span[1])
            span = piece[jc] - piece[jc].mid
            df = df + sandwich(fr_in, fr_out, Gj) * span
        V_full = V_box + DfV * eta
        grho_amb = V_full.row(1) * (-1.0 / fY)
        return df, grho_amb

    for i in range(1, N + 1):
        fr_in = frames[i - 1]
        fr_out = frames[i] if i < N else frames[0]
        rho = windows[i - 1]
        last = i == N
        pieces = _subdiv_boxes(rho, splits_last if last else splits)
        dfh = None
        gh = None
        for piece in pieces:
            df, g = flow_df(fr_in, fr_out, piece, last)
            dfh = df if dfh is None else dfh.hull(df)
            if g is not None:
                gh = g if gh is None else gh.hull(g)
        if last:
            grho = IntervalMatrix.from_point(fr_in.matrix).rmatvec(gh)
            out.append(LocalMapData(i, dfh, rho, crossing_grad_rho=grho))
        else:
            out.append(LocalMapData(i, dfh, rho))
    return out


def _propagate_once(df: IntervalMatrix, rep: Box):
    w = df.matvec(rep)
    pin = w[0]
    if 0.0 in pin:
        raise ConeError("cone propagation lost the expanding component")
    # the normalized direction has first component exactly one
    return Box.from_intervals([Interval(1.0)] + [w[k] / pin for k in range(1, 4)]), pin


def check_cone_propagation(maps: list, cones: ConeSchedule):
    """Check [Df_i] V_{i-1} inside cone(V_i) for all maps; returns margins.

    margin[i][k] = a_{i,k} - |normalized component k| (>0 means strict)."""
    N = len(maps)
    margins = np.zeros((N, 3))
    for i, lm in enumerate(maps, start=1):
        w, _ = _propagate_once(lm.df, cones.rep(i - 1))
        tgt = cones.coeffs[i]
        for k in range(3):
            margins[i - 1, k] = tgt[k] - w[k + 1].mag
    ok = bool(np.all(margins > 0.0))
    return ok, margins


def tune_cones(maps: list, L: float, headroom: float = 0.02,
               cap: float = 1e-3) -> ConeSchedule:
    """Minimal consistent apertures by forward propagation.

    The chart-0 cone is pinned to L; each interior aperture is set just
    above the arriving propagated set (tight interior cones leak the least
    into the closing map).  Fails if the cycle does not re-enter the pinned
    cone."""
    N = len(maps)
    coeffs = np.full((N + 1, 3), L)
    w = ConeSchedule(coeffs).rep(0)
    for i, lm in enumerate(maps, start=1):
        w, _ = _propagate_once(lm.df, w)
        if i < N:
            for k in range(3):
                a = w[k + 1].mag * (1.0 + headroom)
                if a > cap:
                    raise ConeError("cone aperture cap reached")
                coeffs[i, k] = a
            w = ConeSchedule(coeffs).rep(i)
        else:
            for k in range(3):
                if w[k + 1].mag >= L:
                    raise ConeError(
                        "cone cycle does not close at the pinned aperture; "
                        f"component {k + 1} reaches {w[k + 1].mag:.3e}")
    return ConeSchedule(coeffs)


def expansion_bound(df: IntervalMatrix, in_cone: np.ndarray) -> Interval:
    """Lower expansion factor on cone vectors in the max norm:
    m = c - |A12| max(a), requiring the (1,1) entry positive."""
    a11 = df[0, 0]
    if a11.lo <= 0.0:
        raise ConeError("expanding entry not positive")
    a12 = sum(df[0, k].mag for k in range(1, 4))
    amax = float(np.max(in_cone))
    m = a11 - a12 * amax
    if m.lo <= 0.0:
        raise ConeError("no expansion on the cone")
    return m


def lipschitz_bound(df: IntervalMatrix, in_cone: np.ndarray) -> Interval:
    """Upper bound on |f(v)|/|v| over cone vectors in the max norm:
    max(|A11| + a |A12|, |A21| + a |A22|)."""
    a = float(np.max(in_cone))
    a11 = abs(df[0, 0])
    a12 = Interval(0.0)
    for k in range(1, 4):
        a12 = a12 + abs(df[0, k])
    top = a11 + a12 * a
    best = top
    for r in range(1, 4):
        a21 = abs(df[r, 0])
        a22 = Interval(0.0)
        for k in range(1, 4):
            a22 = a22 + abs(df[r, k])
        cand = a21 + a22 * a
        best = Interval(max(best.lo, cand.lo), max(best.hi, cand.hi))
    return best


@dataclass
class UnstableCertificate:
    """Graph/cone/expansion certificate for the local unstable set of the
    symmetric orbit point on the section, radius r in the chart of A_0.

    The certified curve u -> p(u), |u| <= r, satisfies p(0) = 0 (the orbit
    point), first component = u, remaining components within L|u| (fourth
    exactly 0: the curve lies in the section), derivative inside the
    aperture-L cone; points on the curve expand under the return map by at
    least m per local map and by at most m_bar."""

    radius: float
    aperture: float
    frames: list
    cones: ConeSchedule
    m: Interval
    m_bar: Interval
    df0_product: IntervalMatrix
    unstable_disc: Interval
    contraction: Interval      # per-turn rate lambda = m^-N (upper bound used)
    margins: np.ndarray
    maps_window: list = None   # LocalMapData over B = [-r, r]^4
    maps_base: list = None     # LocalMapData at the orbit points

    @property
    def frame0(self) -> AffineFrame:
        return self.frames[0]

    def summary(self):
        return {
            "radius": self.radius,
            "aperture": self.aperture,
            "m": [self.m.lo, self.m.hi],
            "m_bar": [self.m_bar.lo, self.m_bar.hi],
            "unstable_disc": [self.unstable_disc.lo, self.unstable_disc.hi],
            "contraction": [self.contraction.lo, self.contraction.hi],
        }


def certify_unstable_manifold(model: Model, orbit: OrbitCertificate,
                              radius: float = 3e-8, aperture: float = 5e-6,
                              frames: list = None,
                              opts: IntegratorOptions = None,
                              splits_last=(4, 4, 4, 4)) -> UnstableCertificate:
    """Run every hypothesis check and issue the manifold certificate."""
    if frames is None:
        frames = build_frames(model, orbit)
    N = len(frames)
    maps = build_local_maps(model, orbit, frames,
                            windows=[radius] * N, opts=opts,
                            splits_last=splits_last)
    cones = tune_cones(maps, aperture)
    ok, margins = check_cone_propagation(maps, cones)
    if not ok:
        raise ConeError("cone propagation failed after tuning")
    m_lo = None
    m_hi = None
    for i, lm in enumerate(maps, start=1):
        mi = expansion_bound(lm.df, cones.coeffs[i - 1])
        bi = lipschitz_bound(lm.df, cones.coeffs[i - 1])
        m_lo = mi if m_lo is None else Interval(min(m_lo.lo, mi.lo), min(m_lo.hi, mi.hi))
        m_hi = bi if m_hi is None else Interval(max(m_hi.lo, bi.lo), max(m_hi.hi, bi.hi))
    if not m_lo.lo > 1.0:
        raise ConeError(f"uniform expansion fails: m = {m_lo}")
    # eigenvalue separation of DF(0) via Gershgorin
    prod = None
    base_maps = build_local_maps(model, orbit, frames,
                                 windows=[1e-14] * N, opts=opts)
    for lm in base_maps:
        prod = lm.df if prod is None else mat_mul(lm.df, prod)
    discs = gershgorin_enclosure(prod)
    unstable = None
    for disc, isolated in discs:
        if disc.lo > m_lo.lo:
            if not isolated:
                raise ConeError("dominant Gershgorin disc not isolated")
            unstable = disc
        else:
            if not (abs(disc).hi < m_lo.lo):
                raise ConeError("a non-dominant disc reaches the expansion rate")
    if unstable is None:
        raise ConeError("no dominant eigenvalue disc")
    lam = (1.0 / m_lo) ** N
    return UnstableCertificate(
        radius=radius, aperture=aperture, frames=frames, cones=cones,
        m=m_lo, m_bar=m_hi, df0_product=prod, unstable_disc=unstable,
        contraction=lam, margins=margins,
        maps_window=maps, maps_base=base_maps)


# ---------------------------------------------------------------------------
# extended phase space: fibers of the invariant circle
# ---------------------------------------------------------------------------

@dataclass
class FiberCertificate:
    angular: float                  # the constant M
    eigvec: Box                     # (1, v2, v3, v4, w) enclosure
    grad_rho_chart: Box             # d(return time)/d(chart coords) row
    theta_slack: Interval           # r * M bound on fiber angle offsets

    def summary(self):
        return {"M": self.angular,
                "eigvec": [[c.lo, c.hi] for c in self.eigvec.intervals()],
                "theta_slack": [self.theta_slack.lo, self.theta_slack.hi]}


def certify_extended_fibers(model: Model, orbit: OrbitCertificate,
                            manifold: UnstableCertificate,
                            angular: float = 3.0,
                            opts: IntegratorOptions = None) -> FiberCertificate:
    """Extended-cone certificate: the unstable eigenvector of the extended
    return-map derivative lies inside the cone with angular coefficient M,
    and the extended cones propagate around the turn; fiber angles then obey
    |theta - lambda| <= r M.

    At zero eccentricity the return map is independent of the angle, so one
    check covers every point of the invariant circle.
    """
    P4 = manifold.df0_product
    frames = manifold.frames
    N = len(frames)
    # chart gradient of the total return time: only the final (section) map
    # contributes, pulled back through the chain derivative
    base_maps = manifold.maps_base
    if base_maps is None:
        base_maps = build_local_maps(model, orbit, frames,
                                     windows=[1e-14] * N, opts=opts)
    last = base_maps[-1]
    chain = None
    for lm in base_maps[:-1]:
        chain = lm.df if chain is None else mat_mul(lm.df, chain)
    q = chain.rmatvec(last.crossing_grad_rho) if chain is not None \
        else last.crossing_grad_rho
    # unstable eigenpair of P4 by Krawczyk on (v2,v3,v4,lambda), v1 = 1
    from .roots import krawczyk_solve
    evals, evecs = np.linalg.eig(P4.mid)
    k = int(np.argmax(np.abs(evals)))
    v = np.real(evecs[:, k])
    v = v / v[0]
    lam0 = float(np.real(evals[k]))

    def eig_F(u: Box) -> Box:
        vec = Box.from_intervals([Interval(1.0), u[0], u[1], u[2]])
        lamv = u[3]
        img = P4.matvec(vec)
        rows = [img[r] - lamv * vec[r] for r in range(4)]
        return Box.from_intervals(rows)

    def eig_DF(u: Box) -> IntervalMatrix:
        vec = Box.from_intervals([Interval(1.0), u[0], u[1], u[2]])
        lamv = u[3]
        lo = np.zeros((4, 4))
        hi = np.zeros((4, 4))
        J = IntervalMatrix(lo, hi, _raw=True)
        for r in range(4):
            for c in range(3):
                entry = P4[r, c + 1] - (lamv if r == c + 1 else 0.0 * lamv)
                J.lo[r, c] = entry.lo
                J.hi[r, c] = entry.hi
            J.lo[r, 3] = (-vec[r]).lo
            J.hi[r, 3] = (-vec[r]).hi
        return J

    seed = np.array([v[1], v[2], v[3], lam0])
    cert = krawczyk_solve(eig_F, eig_DF, seed, r0=1e-6)
    if not cert.verified:
        raise ConeError("unstable eigenvector enclosure failed")
    K = cert.K
    lam_enc = K[3]
    vec4 = Box.from_intervals([Interval(1.0), K[0], K[1], K[2]])
    w = q.dot(vec4) / (lam_enc - 1.0)
    eigext = vec4.concat(Box.from_intervals([w]))
    L = manifold.aperture
    for k3 in range(1, 4):
        if eigext[k3].mag > L:
            raise ConeError("eigenvector leaves the L-cone")
    if eigext[4].mag > angular:
        raise ConeError("eigenvector angular component exceeds M")
    # extended cone propagation around the turn: the theta component is
    # unchanged by the fixed-time maps and shifted by grad-rho at the final
    # one; normalization shrinks it by the expansion factor each step
    maps = manifold.maps_window
    if maps is None:
        maps = build_local_maps(model, orbit, frames,
                                windows=[manifold.radius] * N, opts=opts)
    wtheta = Interval(-angular, angular)
    for i, lm in enumerate(maps, start=1):
        w4, pin = _propagate_once(lm.df, manifold.cones.rep(i - 1))
        if lm.crossing_grad_rho is not None:
            wtheta = (lm.crossing_grad_rho.dot(manifold.cones.rep(i - 1))
                      + wtheta) / pin
        else:
            wtheta = wtheta / pin
        if i < N:
            continue
        for k3 in range(1, 4):
            if w4[k3].mag > manifold.cones.coeffs[0][k3 - 1]:
                raise ConeError("extended cone cycle fails in space components")
        if wtheta.mag > angular:
            raise ConeError("extended cone cycle fails in the angle")
    slack = Interval(0.0, manifold.radius) * angular
    return FiberCertificate(angular=angular, eigvec=eigext,
                            grad_rho_chart=q,
                            theta_slack=Interval(-slack.hi, slack.hi))

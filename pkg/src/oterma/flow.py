"""Rigorous ODE flows: enclosures of trajectories, variational matrices and
eccentricity-derivative blocks, with Poincare section crossings.

Two drivers share the Taylor-jet machinery of `jets.py`:

* `Flow` -- a Lohner-type integrator.  The state enclosure is kept as a
  doubleton  m + C*r0 + Q*r  (point center, initial-box part, QR-stabilized
  remainder), which controls the wrapping effect over long integrations.
  Auxiliary quantities satisfying linear equations along the trajectory
  (accumulated variational matrices, forced eccentricity derivatives) are
  carried as blocks transported by the per-step derivative enclosure, which
  is exact for them by the cocycle property.

* `flow_direct` -- plain interval Taylor stepping of a full augmented tape,
  for short local maps where wrapping is irrelevant but exotic blocks
  (mixed second derivatives) are needed.

Every step validates a first-order Picard enclosure over the step interval
and bounds the Taylor remainder by the order-(p+1) solution coefficient
evaluated on it, so all returned enclosures are mathematically rigorous.
Section crossings are localized by interval Newton in time; by the mean
value theorem every produced iterate encloses the crossing times of all
trajectories from the initial box, so the readouts are enclosures of the
exact flow-to-section images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield

import numpy as np

from .interval import Interval
from .intlin import Box, IntervalMatrix, mat_inverse_enclosure, mat_mul
from .jets import jet_eval

__all__ = [
    "IntegratorOptions",
    "SectionSpec",
    "FlowEnclosure",
    "CrossingEvent",
    "SectionMonitor",
    "Flow",
    "flow_direct",
    "IntegrationError",
]


class IntegrationError(ArithmeticError):
    """Rigorous integration could not be completed; message says why/where."""


@dataclass(frozen=True)
class IntegratorOptions:
    order: int = 18
    tol: float = 1e-16
    h_max: float = 0.35
    h_min: float = 1e-7
    safety: float = 0.8
    max_steps: int = 1_000_000
    picard_tries: int = 30
    picard_inflate: float = 0.6   # widening as a fraction of the Picard increment
    picard_pad: float = 1e-14

    def scaled(self, **kw):
        d = self.__dict__.copy()
        d.update(kw)
        return IntegratorOptions(**d)


@dataclass(frozen=True)
class SectionSpec:
    """Affine section {x : normal . x + offset = 0} with crossing filters.

    direction: +1 counts crossings with d(normal.x)/dt > 0, -1 the opposite,
    0 counts both.  `constraint` (optional) receives the crossing state box
    and returns True (keep) or False (skip); it must raise on ambiguity.
    """

    normal: tuple
    offset: float = 0.0
    direction: int = 0
    constraint: object = None

    def value(self, box: Box) -> Interval:
        n = np.asarray(self.normal, dtype=float)
        return box[: len(n)].dot(n) + self.offset

    def deriv(self, f_box: Box) -> Interval:
        n = np.asarray(self.normal, dtype=float)
        return f_box[: len(n)].dot(n)

    def normal_index(self):
        n = np.asarray(self.normal, dtype=float)
        nz = np.nonzero(n)[0]
        if len(nz) == 1 and self.offset == 0.0:
            return int(nz[0])
        return None


@dataclass
class FlowEnclosure:
    """Result of a rigorous flow: state image plus requested derivatives.

    `variational` is the raw d Phi; for section hits `variational_section`
    carries the Jacobian of the flow-to-section map (rank-one corrected) and
    `blocks_section` the time-corrected forced blocks.
    """

    state: Box
    time: Interval
    variational: IntervalMatrix = None
    variational_section: IntervalMatrix = None
    blocks: dict = dfield(default_factory=dict)
    blocks_section: dict = dfield(default_factory=dict)
    f_end: Box = None
    crossings: list = dfield(default_factory=list)


@dataclass
class CrossingEvent:
    index: int
    time: Interval
    state: Box
    f_end: Box
    variational: IntervalMatrix = None
    variational_section: IntervalMatrix = None
    blocks: dict = dfield(default_factory=dict)
    blocks_section: dict = dfield(default_factory=dict)
    direction: int = 0


# ---------------------------------------------------------------------------
# doubleton containers
# ---------------------------------------------------------------------------

class _VecDoubleton:
    """v in mid + Q*r with float mid, float near-orthogonal Q, interval r."""

    __slots__ = ("mid", "Q", "r")

    def __init__(self, mid, Q=None, r=None):
        self.mid = np.asarray(mid, dtype=float)
        n = self.mid.shape[0]
        self.Q = np.eye(n) if Q is None else Q
        self.r = Box(np.zeros(n), np.zeros(n), _raw=True) if r is None else r

    def hull(self) -> Box:
        return IntervalMatrix.from_point(self.Q).matvec(self.r) + self.mid

    @staticmethod
    def from_box(box: Box) -> "_VecDoubleton":
        m = box.mid
        return _VecDoubleton(m, np.eye(box.dim), box - m)

    def transported(self, A: IntervalMatrix, extra: Box = None) -> "_VecDoubleton":
        base = A.matvec(Box.from_point(self.mid))
        if extra is not None:
            base = base + extra
        new_mid = base.mid
        E = base - new_mid
        M = mat_mul(A, IntervalMatrix.from_point(self.Q))
        Qn, _ = np.linalg.qr(M.mid)
        Qi = mat_inverse_enclosure(Qn)
        rn = mat_mul(Qi, M).matvec(self.r) + Qi.matvec(E)
        return _VecDoubleton(new_mid, Qn, rn)


class _MatBlock:
    """Matrix carried as independent column doubletons (cocycle transport)."""

    __slots__ = ("cols",)

    def __init__(self, cols):
        self.cols = cols

    @staticmethod
    def identity(n):
        return _MatBlock([_VecDoubleton(np.eye(n)[:, j]) for j in range(n)])

    @staticmethod
    def from_matrix(M: IntervalMatrix):
        return _MatBlock([_VecDoubleton.from_box(M.col(j)) for j in range(M.cols)])

    def hull(self) -> IntervalMatrix:
        cols = [c.hull() for c in self.cols]
        lo = np.stack([c.lo for c in cols], axis=1)
        hi = np.stack([c.hi for c in cols], axis=1)
        return IntervalMatrix(lo, hi, _raw=True)

    def transported(self, A: IntervalMatrix):
        return _MatBlock([c.transported(A) for c in self.cols])


class FlowState:
    """Integrator state: doubleton for the tape state variables plus blocks."""

    def __init__(self, mid, C, r0, Q, r, t: Interval, vacc=None, forced=None):
        self.mid = mid
        self.C = C
        self.r0 = r0
        self.Q = Q
        self.r = r
        self.t = t
        self.vacc = vacc
        self.forced = forced or {}

    @staticmethod
    def from_box(box: Box, t=Interval(0.0), with_vacc=False, forced_sizes=None):
        m = box.mid
        n = box.dim
        forced = {name: _VecDoubleton(np.zeros(k))
                  for name, k in (forced_sizes or {}).items()}
        return FlowState(
            m, np.eye(n), box - m, np.eye(n),
            Box(np.zeros(n), np.zeros(n), _raw=True), t,
            _MatBlock.identity(n) if with_vacc else None,
            forced,
        )

    def hull(self) -> Box:
        Cpart = IntervalMatrix.from_point(self.C).matvec(self.r0)
        Qpart = IntervalMatrix.from_point(self.Q).matvec(self.r)
        return Cpart + Qpart + self.mid

    def refine(self, box: Box):
        """Restart the doubleton from `box` (e.g. after a pin intersection),
        keeping time and blocks."""
        m = box.mid
        n = box.dim
        self.mid = m
        self.C = np.eye(n)
        self.r0 = box - m
        self.Q = np.eye(n)
        self.r = Box(np.zeros(n), np.zeros(n), _raw=True)


# ---------------------------------------------------------------------------
# step record: lets monitors evaluate the accepted step at interior times
# ---------------------------------------------------------------------------

class _StepRecord:
    __slots__ = ("h", "state_prev", "pjets", "hjets_v", "hjets_forced",
                 "rem_state", "rem_v", "rem_forced", "t_prev", "sd")

    def _sig_pow(self, sigma) -> Interval:
        p = len(self.pjets[0])
        s = sigma if isinstance(sigma, Interval) else Interval.point(sigma)
        mag = max(abs(s.lo), abs(s.hi))
        w = mag ** p
        return Interval(-w, w) if s.lo < 0 else Interval(0.0, w)

    def eval_transport(self, sigma) -> IntervalMatrix:
        d = self.sd
        rows = [[jet_eval(self.hjets_v[d * i + j], sigma) for j in range(d)]
                for i in range(d)]
        return IntervalMatrix(rows) + self.rem_v * self._sig_pow(sigma)

    def eval_state(self, sigma) -> Box:
        d = self.sd
        pt = Box.from_intervals([jet_eval(self.pjets[i], sigma) for i in range(d)])
        pt = pt + self.rem_state * self._sig_pow(sigma)
        A = self.eval_transport(sigma)
        st = self.state_prev
        spread = IntervalMatrix.from_point(st.C).matvec(st.r0) + \
            IntervalMatrix.from_point(st.Q).matvec(st.r)
        return pt + A.matvec(spread)

    def eval_forced(self, name, sigma) -> Box:
        jets = self.hjets_forced[name]
        beta = Box.from_intervals([jet_eval(j, sigma) for j in jets])
        return beta + self.rem_forced[name] * self._sig_pow(sigma)


# ---------------------------------------------------------------------------
# section monitor
# ---------------------------------------------------------------------------

class SectionMonitor:
    """Detects, localizes, and reads out section crossings along steps.

    One monitor survives across driver calls so crossing counts and arming
    state persist through pinned, segmented integrations.
    """

    def __init__(self, section: SectionSpec, events=None):
        self.section = section
        self.events = [] if events is None else events
        self.count = 0
        self.armed = None       # sign of s once definitely nonzero
        self.escape_dir = None  # sign of ds/dt while leaving the section

    def scan(self, flow: "Flow", rec: _StepRecord, h_iv: Interval):
        sec = self.section
        span = Interval(0.0, max(h_iv.hi, 0.0))
        sweep = rec.eval_state(span)
        s_range = sec.value(sweep)
        end_hull = rec.eval_state(h_iv)
        s_end = sec.value(end_hull)

        if self.armed is None:
            if 0.0 not in s_range:
                self.armed = 1 if s_range.lo > 0 else -1
                return
            ds = sec.deriv(flow.f_state(sweep))
            if 0.0 in ds:
                raise _ScanRetry("tangential while leaving section")
            d = 1 if ds.lo > 0 else -1
            if self.escape_dir is None:
                s0 = sec.value(rec.eval_state(Interval(0.0)))
                if not (s0.lo == 0.0 == s0.hi):
                    raise IntegrationError(
                        "initial box straddles the section; cannot certify first crossing")
                self.escape_dir = d
            elif d != self.escape_dir:
                raise IntegrationError("section escape lost monotonicity")
            if 0.0 not in s_end:
                self.armed = 1 if s_end.lo > 0 else -1
            return

        if 0.0 not in s_range:
            return
        dsdt = sec.deriv(flow.f_state(sweep))
        if 0.0 in dsdt:
            raise _ScanRetry("tangential crossing candidate")
        if 0.0 in s_end:
            raise _ScanRetry("crossing too close to step end")
        new_sign = 1 if s_end.lo > 0 else -1
        if new_sign == self.armed:
            return
        sig = self._newton_sigma(flow, rec, h_iv, dsdt)
        direction = 1 if dsdt.lo > 0 else -1
        self.armed = new_sign
        if sec.direction != 0 and direction != sec.direction:
            return
        state = rec.eval_state(sig)
        ni = sec.normal_index()
        if ni is not None:
            iv = state[ni]
            if not (iv.lo <= 0.0 <= iv.hi):
                raise IntegrationError("crossing state does not meet the section")
            state = state.replace(ni, Interval(0.0))
        if sec.constraint is not None and not sec.constraint(state):
            return
        self.count += 1
        ev = CrossingEvent(
            index=self.count,
            time=rec.t_prev + sig,
            state=state,
            f_end=flow.f_state(state),
            direction=direction,
        )
        st = rec.state_prev
        A = rec.eval_transport(sig)
        if st.vacc is not None:
            ev.variational = mat_mul(A, st.vacc.hull())
        for name, blk in st.forced.items():
            k = blk.mid.shape[0]
            ev.blocks[name] = _sub_matrix(A, k).matvec(blk.hull()) \
                + rec.eval_forced(name, sig)
        _section_corrections(flow, sec, ev)
        self.events.append(ev)

    def _newton_sigma(self, flow, rec, h_iv, dsdt) -> Interval:
        sec = self.section
        n = np.asarray(sec.normal, dtype=float)
        dom = Interval(0.0, h_iv.hi)

        def s_mid(sig):
            vals = [jet_eval([c.mid for c in rec.pjets[i]], sig)
                    for i in range(len(n))]
            return float(np.dot(vals, n) + sec.offset)

        a, b = 0.0, h_iv.hi
        fa, fb = s_mid(a), s_mid(b)
        sig = dom
        if fa * fb <= 0:
            for _ in range(60):
                m = 0.5 * (a + b)
                fm = s_mid(m)
                if fa * fm <= 0:
                    b, fb = m, fm
                else:
                    a, fa = m, fm
            sig = Interval(max(a - 4.0 * (b - a) - 1e-13, 0.0),
                           min(b + 4.0 * (b - a) + 1e-13, dom.hi))
        # interval Newton; every iterate encloses all crossing times
        for _ in range(80):
            mid = sig.mid
            smid = sec.value(rec.eval_state(Interval(mid)))
            newton = Interval(mid) - smid / dsdt
            try:
                new_sig = newton.intersect(sig)
            except ValueError:
                # fall back to the full domain intersection
                try:
                    new_sig = newton.intersect(dom)
                except ValueError:
                    raise IntegrationError("crossing-time Newton left the step")
            if new_sig.width >= sig.width * 0.9:
                sig = new_sig
                break
            sig = new_sig
        return sig


class _ScanRetry(Exception):
    pass


def _sub_matrix(A: IntervalMatrix, k: int) -> IntervalMatrix:
    """Leading k x k block; valid as the transport of k-dimensional forced
    blocks because the first k state components form a closed subsystem."""
    if A.rows == k:
        return A
    return IntervalMatrix(A.lo[:k, :k].copy(), A.hi[:k, :k].copy(), _raw=True)


def _picard_iterate(tape, inits, hiv: Interval, opts) -> list:
    """First-order enclosure: find Z with inits + [0,h] f(Z) contained in Z.

    Widening is per-component and scaled to the Picard increment, so a
    failing variational entry does not balloon well-behaved position
    components into the singularities.
    """
    def widen(base, inc_width):
        return base.inflate(opts.picard_pad + opts.picard_inflate * inc_width)

    rhs0 = tape.eval0(inits)
    cand = [widen((inits[i] + hiv * rhs0[i]).hull(inits[i]),
                  (hiv * rhs0[i]).width) for i in range(len(inits))]
    scale0 = [max(c.mag, 1.0) for c in cand]
    for _ in range(opts.picard_tries):
        rhs = tape.eval0(cand)
        new = [inits[i] + hiv * rhs[i] for i in range(len(cand))]
        bad = [i for i in range(len(cand)) if not cand[i].contains(new[i])]
        if not bad:
            return cand
        for i in bad:
            cand[i] = widen(new[i].hull(cand[i]), (hiv * rhs[i]).width)
            if cand[i].mag > 100.0 * scale0[i]:
                raise IntegrationError("Picard enclosure diverging")
    raise IntegrationError("Picard enclosure did not stabilize")


def _section_corrections(flow, sec: SectionSpec, ev: CrossingEvent):
    """Rank-one time corrections turning flow enclosures at the crossing
    into flow-to-section enclosures."""
    d = flow.sd
    n = np.asarray(sec.normal, dtype=float)
    nfull = np.zeros(d)
    nfull[: len(n)] = n
    fy = ev.f_end
    denom = fy.dot(nfull)
    if 0.0 in denom:
        raise IntegrationError("non-transversal crossing readout")
    if ev.variational is not None:
        Vn = ev.variational.rmatvec(nfull)
        lo = np.empty((d, d))
        hi = np.empty((d, d))
        for i in range(d):
            row = Vn * (fy[i] / denom) * -1.0
            lo[i] = row.lo
            hi[i] = row.hi
        ev.variational_section = ev.variational + IntervalMatrix(lo, hi, _raw=True)
    for name, W in ev.blocks.items():
        k = W.dim
        rho_eps = -(W.dot(nfull[:k])) / denom
        ev.blocks_section[name] = W + fy[:k] * rho_eps


# ---------------------------------------------------------------------------
# the Lohner driver
# ---------------------------------------------------------------------------

class Flow:
    """Lohner integrator bound to one FieldSpec and option set."""

    def __init__(self, spec, opts: IntegratorOptions = IntegratorOptions()):
        if not spec.has_vstep:
            raise ValueError("Lohner driver needs a tape with a variational block")
        if spec.state_tape is None:
            raise ValueError("FieldSpec must carry a state tape")
        self.spec = spec
        self.opts = opts
        self.sd = spec.state_dim
        self.tape = spec.tape
        self.state_tape = spec.state_tape
        self.fslices = spec.forced_slices()

    def f_state(self, state_box: Box) -> Box:
        """Field value in full state dimension."""
        return self.spec.f_state(state_box)

    def start(self, box: Box, t0=Interval(0.0), vacc=False, forced=False) -> FlowState:
        sizes = {n: k for n, k in self.spec.forced} if forced else {}
        return FlowState.from_box(box, t0, with_vacc=vacc, forced_sizes=sizes)

    # -- machinery --

    def _propose_h(self, mid, order):
        jets = self.state_tape.ode_jets(list(mid), order)
        h_best = self.opts.h_max
        for p in (order, order - 1):
            amax = max(abs(jets[i][p]) for i in range(self.sd)) + 1e-300
            h_best = min(h_best, (self.opts.tol / amax) ** (1.0 / p))
        # keep the first-order Picard enclosure contractive
        if self.spec.model is not None:
            J = self.spec.model.field_jacobian(
                Box.from_point(np.asarray(mid[:4])))
            lip = float(J.abs_row_sums().max())
            h_best = min(h_best, 0.7 / max(lip, 1e-6))
        return max(self.opts.safety * h_best, self.opts.h_min)

    def _picard(self, hull: Box, h_iv: Interval):
        opts = self.opts
        d = self.sd
        inits = [iv.inflate(opts.picard_pad) for iv in hull.intervals()]
        for r in range(d):
            for c in range(d):
                inits.append(Interval(1.0 if r == c else 0.0))
        for name, size in self.spec.forced:
            inits += [Interval(0.0)] * size
        hiv = Interval(min(h_iv.lo, 0.0), max(h_iv.hi, 0.0))
        return _picard_iterate(self.tape, inits, hiv, opts)

    def _step(self, st: FlowState, h_iv: Interval, order: int):
        d = self.sd
        hull = st.hull()
        self.spec.check_domain(hull)
        try:
            Z = self._picard(hull, h_iv)
        except (ZeroDivisionError, ValueError, ArithmeticError) as exc:
            if isinstance(exc, IntegrationError):
                raise
            raise IntegrationError(f"Picard failed: {exc}") from exc
        inits_h = list(hull.intervals())
        for r in range(d):
            for c in range(d):
                inits_h.append(Interval(1.0 if r == c else 0.0))
        for name, size in self.spec.forced:
            inits_h += [Interval(0.0)] * size
        try:
            jets_hull = self.tape.ode_jets(inits_h, order)
            jets_pt = self.state_tape.ode_jets([Interval(v) for v in st.mid], order)
            jets_rem = self.tape.ode_jets(Z, order + 1)
        except (ZeroDivisionError, ValueError, ArithmeticError) as exc:
            if isinstance(exc, IntegrationError):
                raise
            raise IntegrationError(f"jet evaluation failed: {exc}") from exc

        rec = _StepRecord()
        rec.sd = d
        rec.h = h_iv
        rec.state_prev = st
        rec.t_prev = st.t
        rec.pjets = [jets_pt[i] for i in range(d)]
        vsl = self.spec.vstep_slice
        rec.hjets_v = [jets_hull[i] for i in range(vsl.start, vsl.stop)]
        rec.rem_state = Box.from_intervals([jets_rem[i][order + 1] for i in range(d)])
        rem_v_vals = [jets_rem[i][order + 1] for i in range(vsl.start, vsl.stop)]
        rec.rem_v = IntervalMatrix([[rem_v_vals[d * r + c] for c in range(d)]
                                    for r in range(d)])
        rec.hjets_forced = {}
        rec.rem_forced = {}
        for name, sl in self.fslices.items():
            rec.hjets_forced[name] = [jets_hull[i] for i in range(sl.start, sl.stop)]
            rec.rem_forced[name] = Box.from_intervals(
                [jets_rem[i][order + 1] for i in range(sl.start, sl.stop)])

        A = rec.eval_transport(h_iv)
        pt_end = Box.from_intervals([jet_eval(rec.pjets[i], h_iv) for i in range(d)])
        pt_end = pt_end + rec.rem_state * rec._sig_pow(h_iv)
        new_mid = pt_end.mid
        delta = pt_end - new_mid
        AC = mat_mul(A, IntervalMatrix.from_point(st.C))
        Cn = AC.mid
        EC = AC - Cn
        AQ = mat_mul(A, IntervalMatrix.from_point(st.Q))
        Qn, _ = np.linalg.qr(AQ.mid)
        Qi = mat_inverse_enclosure(Qn)
        rn = mat_mul(Qi, AQ).matvec(st.r) + Qi.matvec(EC.matvec(st.r0) + delta)
        new = FlowState(new_mid, Cn, st.r0, Qn, rn, st.t + h_iv)
        if st.vacc is not None:
            new.vacc = st.vacc.transported(A)
        for name, blk in st.forced.items():
            beta = rec.eval_forced(name, h_iv)
            k = blk.mid.shape[0]
            new.forced[name] = blk.transported(_sub_matrix(A, k), extra=beta)
        return new, rec

    # -- drivers --

    def run_time(self, st: FlowState, duration, monitor: SectionMonitor = None):
        """Advance `st` by `duration` (float or Interval); returns the final
        FlowState.  A monitor, when given, records crossings in passing."""
        opts = self.opts
        order = opts.order
        dur = duration if isinstance(duration, Interval) else Interval(float(duration))
        t_end = st.t + dur
        steps = 0
        while True:
            steps += 1
            if steps > opts.max_steps:
                raise IntegrationError("max step count exceeded")
            remain = t_end - st.t
            if remain.hi < 0:
                raise IntegrationError("overshot the target time")
            h_prop = self._propose_h(st.mid, order)
            final = h_prop >= remain.lo
            h_iv = remain if final else Interval(h_prop)
            h_try = h_iv
            attempts = 0
            while True:
                try:
                    new, rec = self._step(st, h_try, order)
                    if monitor is not None:
                        monitor.scan(self, rec, h_try)
                    break
                except (_ScanRetry, IntegrationError) as exc:
                    attempts += 1
                    if attempts > 60:
                        raise IntegrationError(f"step retries exhausted: {exc}")
                    if final:
                        if remain.lo <= opts.h_min:
                            raise IntegrationError(
                                f"cannot complete final partial step: {exc}")
                        # take a plain smaller step first
                        final = False
                        h_try = Interval(max(remain.lo * 0.5, opts.h_min))
                    else:
                        hval = h_try.hi * 0.5
                        if hval < opts.h_min:
                            raise IntegrationError(f"step size underflow: {exc}")
                        h_try = Interval(hval)
            st = new
            if final:
                return st

    def run_to_crossing(self, st: FlowState, monitor: SectionMonitor,
                        target_index: int, t_budget: float = 1e4):
        """Advance until the monitor has accepted crossing `target_index`;
        returns (CrossingEvent, FlowState at the crossing)."""
        opts = self.opts
        order = opts.order
        t0 = st.t
        while True:
            for ev in monitor.events:
                if ev.index == target_index:
                    return ev, self.state_at_crossing(ev)
            if (st.t - t0).hi > t_budget:
                raise IntegrationError("no section crossing within time budget")
            h_iv = Interval(self._propose_h(st.mid, order))
            attempts = 0
            while True:
                try:
                    new, rec = self._step(st, h_iv, order)
                    monitor.scan(self, rec, h_iv)
                    break
                except (_ScanRetry, IntegrationError) as exc:
                    attempts += 1
                    hval = h_iv.hi * 0.5
                    if hval < opts.h_min or attempts > 60:
                        raise IntegrationError(f"step failed near t={st.t}: {exc}")
                    h_iv = Interval(hval)
            st = new

    def state_at_crossing(self, ev: CrossingEvent) -> FlowState:
        st = FlowState.from_box(ev.state, ev.time,
                                with_vacc=ev.variational is not None,
                                forced_sizes={n: b.dim for n, b in ev.blocks.items()})
        if ev.variational is not None:
            st.vacc = _MatBlock.from_matrix(ev.variational)
        for name, val in ev.blocks.items():
            st.forced[name] = _VecDoubleton.from_box(val)
        return st

    # -- public one-shot wrappers --

    def flow(self, x0: Box, t, vacc=True, forced=False) -> FlowEnclosure:
        """Enclosure of the time-t image of x0 (t float or Interval)."""
        st = self.start(x0, vacc=vacc, forced=forced)
        st = self.run_time(st, t)
        return self._enclosure(st)

    def poincare(self, x0: Box, section: SectionSpec, count: int = 1,
                 vacc=True, forced=False, t_budget: float = 1e4) -> FlowEnclosure:
        """Enclosure of the `count`-th section crossing image of x0."""
        st = self.start(x0, vacc=vacc, forced=forced)
        mon = SectionMonitor(section)
        ev, _ = self.run_to_crossing(st, mon, count, t_budget)
        out = FlowEnclosure(
            state=ev.state, time=ev.time, variational=ev.variational,
            variational_section=ev.variational_section,
            blocks=ev.blocks, blocks_section=ev.blocks_section,
            f_end=ev.f_end, crossings=[e.time for e in mon.events])
        return out

    def _enclosure(self, st: FlowState) -> FlowEnclosure:
        hull = st.hull()
        return FlowEnclosure(
            state=hull,
            time=st.t,
            variational=st.vacc.hull() if st.vacc is not None else None,
            blocks={k: v.hull() for k, v in st.forced.items()},
            f_end=self.f_state(hull),
        )


# ---------------------------------------------------------------------------
# direct interval Taylor driver (short local maps, exotic blocks)
# ---------------------------------------------------------------------------

class DirectStep:
    """One accepted direct step: interval jets over the box + remainder."""

    __slots__ = ("jets", "rem", "h", "t_prev")

    def __init__(self, jets, rem, h, t_prev):
        self.jets = jets
        self.rem = rem
        self.h = h
        self.t_prev = t_prev

    def eval(self, sigma, idx=None) -> list:
        n = len(self.jets)
        idxs = range(n) if idx is None else idx
        p = len(self.jets[0])
        s = sigma if isinstance(sigma, Interval) else Interval.point(sigma)
        mag = max(abs(s.lo), abs(s.hi))
        w = mag ** p
        spow = Interval(-w, w) if s.lo < 0 else Interval(0.0, w)
        return [jet_eval(self.jets[i], s) + self.rem[i] * spow for i in idxs]


def _direct_picard(tape, box_vals, h_hi, opts):
    inits = [v.inflate(opts.picard_pad) for v in box_vals]
    hiv = Interval(0.0, h_hi)
    return _picard_iterate(tape, inits, hiv, opts)


def _direct_f(spec, sweep: Box) -> Box:
    return spec.f_state(sweep)


def flow_direct(spec, inits, duration, opts: IntegratorOptions = IntegratorOptions(),
                section: SectionSpec = None):
    """Direct interval Taylor integration of the full tape.

    `inits`: one Interval per tape variable.  Integrates for `duration`
    (float/Interval), or, when `section` is given, until the first accepted
    crossing (duration is then a time budget).

    Returns (values, time, DirectStep, sigma): the enclosures of every tape
    variable at the final time; for section stops `sigma` is the crossing
    time interval within the last step.
    """
    tape = spec.tape
    order = opts.order
    vals = [v if isinstance(v, Interval) else Interval.point(v) for v in inits]
    t = Interval(0.0)
    target = duration if isinstance(duration, Interval) else Interval(float(duration))
    sd = spec.state_dim
    armed = None
    escape_dir = None
    steps = 0
    while True:
        steps += 1
        if steps > opts.max_steps:
            raise IntegrationError("max step count exceeded (direct)")
        mids = [Interval(v.mid) for v in vals]
        mjets = tape.ode_jets(mids, order)
        amax = 1e-300
        for i in range(sd):
            amax = max(amax, abs(mjets[i][order].mid))
        h = max(min(opts.safety * (opts.tol / amax) ** (1.0 / order), opts.h_max),
                opts.h_min)
        if section is not None and (t - Interval(0.0)).hi > target.hi:
            raise IntegrationError("no crossing within budget (direct)")
        final = section is None and h >= (target - t).lo
        ok = False
        for attempt in range(60):
            heval = (target - t) if final else Interval(h)
            try:
                hmag = max(abs(heval.lo), abs(heval.hi))
                spec.check_domain(Box.from_intervals(vals[:4]))
                Z = _direct_picard(tape, vals, hmag, opts)
                jets = tape.ode_jets(vals, order)
                rjets = tape.ode_jets(Z, order + 1)
                rem = [rjets[i][order + 1] for i in range(len(vals))]
                step = DirectStep(jets, rem, heval, t)
                if section is not None:
                    armed, escape_dir, sig = _direct_scan(
                        spec, step, heval, section, armed, escape_dir)
                    if sig is not None:
                        vals_c = step.eval(sig)
                        return vals_c, t + sig, step, sig
                vals = step.eval(heval)
                t = t + heval
                ok = True
                break
            except _ScanRetry:
                h *= 0.5
                if h < opts.h_min:
                    raise IntegrationError("step underflow in direct section scan")
            except IntegrationError:
                if final:
                    raise
                h *= 0.5
                if h < opts.h_min:
                    raise
        if not ok:
            raise IntegrationError("direct step retries exhausted")
        if final:
            return vals, t, step, None


def _direct_scan(spec, step: DirectStep, h: Interval, section: SectionSpec,
                 armed, escape_dir):
    sd = spec.state_dim
    span = Interval(0.0, h.hi)
    sweep = Box.from_intervals(step.eval(span, idx=range(sd)))
    s_range = section.value(sweep)
    endv = Box.from_intervals(step.eval(h, idx=range(sd)))
    s_end = section.value(endv)
    if armed is None:
        if 0.0 not in s_range:
            return (1 if s_range.lo > 0 else -1), escape_dir, None
        ds = section.deriv(_direct_f(spec, sweep))
        if 0.0 in ds:
            raise _ScanRetry("tangential while leaving section (direct)")
        d = 1 if ds.lo > 0 else -1
        if escape_dir is None:
            s0 = section.value(Box.from_intervals(step.eval(Interval(0.0), idx=range(sd))))
            if not (s0.lo == 0.0 == s0.hi):
                raise IntegrationError("initial box straddles the section (direct)")
            escape_dir = d
        elif d != escape_dir:
            raise IntegrationError("section escape lost monotonicity (direct)")
        if 0.0 not in s_end:
            return (1 if s_end.lo > 0 else -1), escape_dir, None
        return None, escape_dir, None
    if 0.0 not in s_range:
        return armed, escape_dir, None
    ds = section.deriv(_direct_f(spec, sweep))
    if 0.0 in ds or 0.0 in s_end:
        raise _ScanRetry("tangential or boundary crossing (direct)")
    new_sign = 1 if s_end.lo > 0 else -1
    if new_sign == armed:
        return armed, escape_dir, None
    direction = 1 if ds.lo > 0 else -1
    if section.direction != 0 and direction != section.direction:
        return new_sign, escape_dir, None
    dom = Interval(0.0, h.hi)
    sig = dom
    for _ in range(80):
        mid = sig.mid
        sm = section.value(Box.from_intervals(step.eval(Interval(mid), idx=range(sd))))
        newton = Interval(mid) - sm / ds
        try:
            sig_new = newton.intersect(sig)
        except ValueError:
            try:
                sig_new = newton.intersect(dom)
            except ValueError:
                raise IntegrationError("direct crossing Newton left the step")
        if sig_new.width >= sig.width * 0.9:
            sig = sig_new
            break
        sig = sig_new
    state = Box.from_intervals(step.eval(sig, idx=range(sd)))
    if section.constraint is not None and not section.constraint(state):
        return new_sign, escape_dir, None
    return armed, escape_dir, sig

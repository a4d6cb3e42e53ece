"""Newton refinement and the Krawczyk existence/uniqueness test.

`newton_refine` is plain float Newton, used to polish seeds.  The rigorous
part is `krawczyk_verify`: for F with an interval-Jacobian enclosure and a
candidate box X around a center x, the operator

    K(x, X, F) = x - C F(x) + (Id - C [DF(X)]) (X - x)

verifies, when K is strictly interior to X, that F has one and only one zero
inside X.  F(x) may evaluate to an interval even at a point (the map may
carry interval parameters, e.g. a whole family of problems); verification
then holds for every parameter selection simultaneously.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interval import Interval
from .intlin import Box, IntervalMatrix, mat_mul

__all__ = [
    "newton_refine",
    "KrawczykProblem",
    "KrawczykCertificate",
    "krawczyk_verify",
    "krawczyk_solve",
    "epsilon_inflate",
]


class RootError(ArithmeticError):
    pass


def newton_refine(f, df, x0, iters=30, tol=1e-13):
    """Float Newton iteration; returns (x, residual_norm).

    f(x) -> array, df(x) -> matrix, both plain floats.  Raises RootError on
    a singular Jacobian or failure to meet `tol`.
    """
    x = np.array(x0, dtype=float)
    best = None
    for _ in range(iters):
        r = np.asarray(f(x), dtype=float)
        rn = float(np.abs(r).max())
        if best is None or rn < best[1]:
            best = (x.copy(), rn)
        if rn < tol:
            return x, rn
        J = np.asarray(df(x), dtype=float)
        try:
            dx = np.linalg.solve(J, r)
        except np.linalg.LinAlgError as exc:
            raise RootError(f"singular Jacobian at residual {rn:.3e}") from exc
        x = x - dx
    r = np.asarray(f(x), dtype=float)
    rn = float(np.abs(r).max())
    if rn < tol:
        return x, rn
    raise RootError(f"Newton did not converge: best residual {best[1]:.3e}")


@dataclass
class KrawczykProblem:
    """F: box -> Box (interval-valued), DF: box -> IntervalMatrix, candidate
    X with center x inside it, and a point preconditioner C (defaults to the
    float inverse of mid DF(x))."""

    F: object
    DF: object
    X: Box
    x: np.ndarray = None
    C: np.ndarray = None

    def __post_init__(self):
        if self.x is None:
            self.x = self.X.mid
        if not self.X.contains(self.x):
            raise ValueError("center not inside candidate box")


@dataclass
class KrawczykCertificate:
    verified: bool
    X: Box
    K: Box
    unique: bool

    @property
    def radius(self) -> float:
        return self.K.max_rad() if self.verified else self.X.max_rad()


def krawczyk_verify(prob: KrawczykProblem) -> KrawczykCertificate:
    """One Krawczyk test; certificate.verified means existence AND
    uniqueness of a zero in prob.X (for each parameter selection when F is
    interval-valued at points)."""
    x = prob.x
    Fx = prob.F(Box.from_point(x))
    DFX = prob.DF(prob.X)
    C = prob.C
    if C is None:
        DFx = prob.DF(Box.from_point(x))
        C = np.linalg.inv(DFx.mid)
    Ci = IntervalMatrix.from_point(C)
    n = prob.X.dim
    Id = IntervalMatrix.identity(n)
    G = Id - mat_mul(Ci, DFX)
    K = (Box.from_point(x) - Ci.matvec(Fx)) + G.matvec(prob.X - x)
    verified = prob.X.strictly_contains(K)
    return KrawczykCertificate(verified, prob.X, K, verified)


def epsilon_inflate(X: Box, factor: float = 3.0, floor: float = 1e-14) -> Box:
    """Symmetric inflation about the midpoint; deterministic."""
    m = X.mid
    rad = np.maximum(X.rad * factor, floor)
    return Box.ball(m, rad)


def krawczyk_solve(F, DF, x0, r0=None, rounds: int = 5, factor: float = 3.0,
                   floor: float = 1e-14) -> KrawczykCertificate:
    """Inflate-and-verify loop around a Newton-refined center.

    Starts from a candidate of radius `r0` (default: derived from the
    residual) and retries with inflated candidates up to `rounds` times;
    returns the first verified certificate, after one refinement pass that
    replaces the candidate with the computed K (often much tighter).
    """
    x0 = np.asarray(x0, dtype=float)
    if r0 is None:
        Fx = F(Box.from_point(x0))
        r0 = max(float(Fx.mag.max()) * 4.0, floor)
    X = Box.ball(x0, r0)  # r0 may be a scalar or per-component array
    last = None
    for _ in range(rounds):
        cert = krawczyk_verify(KrawczykProblem(F, DF, X, x=x0))
        last = cert
        if cert.verified:
            # one refinement pass: K is itself a valid candidate
            refined = krawczyk_verify(KrawczykProblem(F, DF, cert.K, x=cert.K.mid))
            return refined if refined.verified else cert
        X = epsilon_inflate(cert.K.hull(X), factor, floor)
    return last

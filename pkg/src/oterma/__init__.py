"""oterma: validated numerics for drift orbits in the planar restricted
three-body problem.

The package certifies, with outward-rounded interval arithmetic, every
computational ingredient of an energy-drift construction for the planar
elliptic problem seen as a perturbation of the circular one: rigorous flows
with variational and eccentricity derivatives, Krawczyk-verified symmetric
orbits, cone-based invariant-manifold bounds, and the final strip-wise
drift inequality.
"""

from .interval import Interval, PI, TWO_PI, HALF_PI, icos, isin, hull
from .intlin import (
    Box,
    IntervalMatrix,
    mat_mul,
    mat_inverse_enclosure,
    gershgorin_enclosure,
    max_norm,
)

__version__ = "1.0.0"

__all__ = [
    "Interval",
    "Box",
    "IntervalMatrix",
    "PI",
    "TWO_PI",
    "HALF_PI",
    "icos",
    "isin",
    "hull",
    "mat_mul",
    "mat_inverse_enclosure",
    "gershgorin_enclosure",
    "max_norm",
    "__version__",
]

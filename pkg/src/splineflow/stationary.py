"""Stationary configurations of the flow for the target ``f(x) = x^2``.

For this target the trapped (non-minimizing) stationary states are atomic
with equidistant knots: M atoms spaced ``dh = (6M - sqrt(6)) / (6M^2 - 1)``
with knots ``h_i = 1 - i dh``.  On each inter-knot interval the induced
prediction is exactly the least-squares linear fit of ``x^2``, whose slope on
[a, b] is ``a + b``; the coefficients below are solved from those slope
conditions and the family is then re-verified stationary by the generic
residual probe.  The target overshoots every such fit by the same margin
``dh^2 / 6`` at each knot.

The support of a stationary state decides its nature: full knot support on
[0, 1] forces the global minimizer, support entirely at ``h >= 1`` is the
invisible (frozen) branch, and finitely many interior atoms are the trapped
equidistant families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import UnsupportedCaseError
from .meanfield import (
    DensityPiece,
    MixedDensity,
    PointMass,
    mean_field_loss,
    prediction,
    stationarity_residual,
)
from .spline_model import Monomial

__all__ = [
    "AtomFamily",
    "equidistant_family",
    "knot_residuals",
    "SupportClass",
    "classify_support",
    "global_minimizer_density",
    "family_loss",
]

_SQRT6 = math.sqrt(6.0)


@dataclass(frozen=True)
class AtomFamily:
    """Equidistant stationary family: M atoms of mass 1/M each.

    Knots decrease from ``1 - dh`` to ``1 - M dh``; coefficients are ordered
    to match the knots.
    """

    M: int
    delta_h: float
    knots: tuple
    coefficients: tuple

    def mass(self) -> float:
        return 1.0 / self.M

    def to_density(self) -> MixedDensity:
        m = 1.0 / self.M
        return MixedDensity(
            atoms=tuple(
                PointMass(c=c, h=h, mass=m)
                for c, h in zip(self.coefficients, self.knots)
            )
        )


def equidistant_family(M: int) -> AtomFamily:
    """Construct the M-atom stationary family for the target ``x^2``.

    The spacing has the closed form above; cumulative coefficient sums make
    the prediction's slope on each interval equal the regression slope of
    ``x^2`` there, which pins every coefficient: the leftmost atom carries
    ``M (2 - (2M - 1) dh)`` and all others ``2 M dh``.
    """
    if M < 1:
        raise ValueError("need at least one atom")
    dh = (6.0 * M - _SQRT6) / (6.0 * M * M - 1.0)
    knots = tuple(1.0 - i * dh for i in range(1, M + 1))
    coeffs = [2.0 * M * dh] * M
    coeffs[-1] = M * (2.0 - (2.0 * M - 1.0) * dh)
    return AtomFamily(
        M=M, delta_h=dh, knots=knots, coefficients=tuple(coeffs)
    )


def knot_residuals(fam: AtomFamily) -> np.ndarray:
    """Target-minus-prediction gap at each knot; all equal ``dh^2 / 6``."""
    truth = Monomial(1.0, 2)
    h = np.asarray(fam.knots, dtype=float)
    return truth(h) - prediction(fam.to_density(), h)


class SupportClass(Enum):
    GLOBAL_MIN = "global-min"
    FINITE_ATOMS = "finite-atoms"
    RIGHT_OF_ONE = "right-of-one"
    NON_STATIONARY = "non-stationary"


def _active_pieces(p: MixedDensity):
    return [pc for pc in p.pieces if pc.c != 0.0]


def _active_atoms(p: MixedDensity):
    return [a for a in p.atoms if a.c != 0.0 and a.mass != 0.0]


def classify_support(
    p: MixedDensity, truth, probe_grid: int = 256, tol: float = 1e-8
) -> SupportClass:
    """Which stationary branch a density belongs to, for the target ``x^2``.

    Classification is only meaningful for this target (the trapped-family
    structure is specific to it); any other truth raises.  Non-stationary
    densities are reported as such; otherwise the support of the
    weight-carrying part decides the branch.
    """
    if not (isinstance(truth, Monomial) and truth.a == 1.0 and truth.p == 2):
        raise UnsupportedCaseError(
            "support classification covers only the target x^2"
        )
    report = stationarity_residual(p, truth, probe_grid=probe_grid, tol=tol)
    if report.residual > tol:
        return SupportClass.NON_STATIONARY

    pieces = _active_pieces(p)
    atoms = _active_atoms(p)
    visible_atoms = [a for a in atoms if a.h < 1.0]
    visible_pieces = [pc for pc in pieces if pc.lo < 1.0]
    if not visible_atoms and not visible_pieces:
        return SupportClass.RIGHT_OF_ONE
    if not visible_pieces:
        return SupportClass.FINITE_ATOMS

    # a stationary state with smooth visible support must cover [0, 1]
    covered = 0.0
    for pc in sorted(visible_pieces, key=lambda q: q.lo):
        if pc.lo <= covered + 1e-9:
            covered = max(covered, min(pc.hi, 1.0))
    if covered >= 1.0 - 1e-9:
        return SupportClass.GLOBAL_MIN
    return SupportClass.FINITE_ATOMS


def global_minimizer_density() -> MixedDensity:
    """The full-support minimizer for the target ``x^2``: density 2 on [0,1]."""
    return MixedDensity(pieces=(DensityPiece(0.0, 1.0, poly=(2.0,)),))


def family_loss(fam: AtomFamily) -> float:
    """Mean-field loss of a family against its target ``x^2``."""
    return mean_field_loss(fam.to_density(), Monomial(1.0, 2))

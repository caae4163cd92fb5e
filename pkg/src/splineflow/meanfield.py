"""Mean-field densities over unit weights and their exact functionals.

A :class:`MixedDensity` is a (possibly signed) measure on weight space in
product form: smooth pieces are densities over the knot axis, each carrying a
single conditional output weight ``c``, and the atomic part is a list of
weighted points.  This covers every distribution the theory needs, including
eigen-modes of the linearized dynamics, which mix a smooth part with a point
mass.

The induced prediction, loss, and stationarity functionals are evaluated
with the same exact quadrature as the particle code; the prediction of an
empirical (all-atoms) measure goes through the identical piecewise-linear
code path as the ensemble prediction, so the two agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spline_model import ResidualIntegrals, SplinePrediction

__all__ = [
    "DensityPiece",
    "PointMass",
    "MixedDensity",
    "prediction",
    "mean_field_loss",
    "StationarityReport",
    "stationarity_residual",
    "global_minimizer_residuals",
]


@dataclass(frozen=True)
class DensityPiece:
    """Smooth density over [lo, hi] on the knot axis with conditional weight c.

    The density is ``poly(h) + sin_amp * sin(sin_omega * h + sin_phase)``
    with ascending polynomial coefficients; either part may be absent.
    """

    lo: float
    hi: float
    poly: tuple = ()
    sin_amp: float = 0.0
    sin_omega: float = 0.0
    sin_phase: float = 0.0
    c: float = 1.0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("piece interval must have positive length")
        if len(self.poly) > 4:
            raise ValueError("piece densities above cubic are not supported")
        object.__setattr__(self, "poly", tuple(float(a) for a in self.poly))

    def density(self, h):
        h = np.asarray(h, dtype=float)
        out = np.zeros_like(h)
        for a in reversed(self.poly):
            out = out * h + a
        if self.sin_amp:
            out = out + self.sin_amp * np.sin(self.sin_omega * h + self.sin_phase)
        return out

    def _moment(self, a, b, order):
        """Exact ``int_a^b h^order * density(h) dh`` for order in {0, 1}."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        out = np.zeros(np.broadcast(a, b).shape)
        for m, co in enumerate(self.poly):
            q = m + order + 1
            out += co * (b**q - a**q) / q
        if self.sin_amp:
            w, p = self.sin_omega, self.sin_phase
            if order == 0:
                out += self.sin_amp * (np.cos(w * a + p) - np.cos(w * b + p)) / w
            else:
                anti = lambda h: np.sin(w * h + p) / w**2 - h * np.cos(w * h + p) / w
                out += self.sin_amp * (anti(b) - anti(a))
        return out

    def mass(self) -> float:
        return float(self._moment(self.lo, self.hi, 0))

    def prediction_at(self, x):
        """Contribution ``c * int_lo^min(x,hi) density(h) (x - h) dh``."""
        x = np.asarray(x, dtype=float)
        top = np.clip(x, self.lo, self.hi)
        m0 = self._moment(self.lo, top, 0)
        m1 = self._moment(self.lo, top, 1)
        return self.c * (x * m0 - m1)

    def panel_hint(self):
        # keeps omega * panel <= pi/4 even for squared integrands
        if self.sin_amp and self.sin_omega:
            return math.pi / (4.0 * abs(self.sin_omega))
        return None


@dataclass(frozen=True)
class PointMass:
    """Atom at weight (c, h) with (possibly negative) mass."""

    c: float
    h: float
    mass: float


class _Prediction:
    """Evaluable mean-field prediction: atomic part plus smooth pieces."""

    def __init__(self, density: "MixedDensity"):
        atoms = density.atoms
        self._atomic = SplinePrediction(
            np.array([a.c for a in atoms]),
            np.array([a.h for a in atoms]),
            np.array([a.mass for a in atoms]),
        )
        self._pieces = density.pieces
        self._breaks = density.h_breakpoints()

    def __call__(self, x):
        out = self._atomic(x)
        for p in self._pieces:
            out = out + p.prediction_at(x)
        return out

    def interior_knots(self):
        return self._breaks


@dataclass(frozen=True)
class MixedDensity:
    """Signed measure on weight space: smooth knot pieces plus atoms."""

    pieces: tuple = ()
    atoms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))
        object.__setattr__(self, "atoms", tuple(self.atoms))
        spans = sorted((p.lo, p.hi) for p in self.pieces)
        for (_, hi), (lo, _) in zip(spans, spans[1:]):
            if lo < hi - 1e-15:
                raise ValueError("piece intervals must not overlap")

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_atoms(cls, entries) -> "MixedDensity":
        """Build from an iterable of ((c, h), mass) entries."""
        return cls(atoms=tuple(PointMass(c, h, m) for (c, h), m in entries))

    @classmethod
    def piecewise_constant(cls, spans, c: float = 1.0) -> "MixedDensity":
        """Build from (lo, hi, value) spans, all carrying the same weight c."""
        return cls(
            pieces=tuple(DensityPiece(lo, hi, poly=(v,), c=c) for lo, hi, v in spans)
        )

    @classmethod
    def from_ensemble(cls, e) -> "MixedDensity":
        """Empirical measure of an ensemble; prediction matches it exactly."""
        m = 1.0 / e.n
        return cls(
            atoms=tuple(
                PointMass(float(c), float(h), m) for c, h in zip(e.c, e.h)
            )
        )

    # -- basics -------------------------------------------------------------

    def total_mass(self) -> float:
        return float(
            sum(p.mass() for p in self.pieces) + sum(a.mass for a in self.atoms)
        )

    def h_breakpoints(self) -> np.ndarray:
        pts = [p.lo for p in self.pieces] + [p.hi for p in self.pieces]
        pts += [a.h for a in self.atoms]
        return np.unique(np.asarray(pts, dtype=float))

    def panel_hint(self):
        hints = [p.panel_hint() for p in self.pieces]
        hints = [h for h in hints if h is not None]
        return min(hints) if hints else None

    def prediction_parts(self):
        return _Prediction(self), self.panel_hint()

    def weighted_marginal_smooth(self, x):
        """Smooth part of ``int c p(c, x) dc``, the c-weighted knot marginal."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for p in self.pieces:
            m = (x >= p.lo) & (x <= p.hi)
            out[m] += p.c * p.density(x[m])
        return out


def prediction(density: MixedDensity, x):
    """Mean-field prediction ``int c (x - h)_+ p(dc, dh)`` at inputs x."""
    pred, _ = density.prediction_parts()
    return pred(x)


def _residual_integrals(density: MixedDensity, truth, extra=()):
    pred, hint = density.prediction_parts()
    return ResidualIntegrals(pred, truth, extra=extra, panel=hint)


def mean_field_loss(density: MixedDensity, truth) -> float:
    """Quadratic loss of the mean-field prediction against the truth."""
    return _residual_integrals(density, truth).half_square()


@dataclass(frozen=True)
class StationarityReport:
    residual: float
    verdict: str
    worst_probe: dict

    def to_json(self) -> dict:
        return {
            "residual": self.residual,
            "verdict": self.verdict,
            "worst_probe": dict(self.worst_probe),
        }


def stationarity_residual(
    density: MixedDensity, truth, probe_grid: int = 256, tol: float = 1e-8
) -> StationarityReport:
    """Sup of |grad u| over the support, probed at atoms and piece grids.

    Atoms are probed exactly; each smooth piece is probed at ``probe_grid``
    equispaced points including both endpoints.  Probes with h >= 1 have
    exactly zero gradient and short-circuit the quadrature.
    """
    probes_c, probes_h = [], []
    for a in density.atoms:
        probes_c.append(a.c)
        probes_h.append(a.h)
    for p in density.pieces:
        grid = np.linspace(p.lo, p.hi, probe_grid)
        probes_c.extend([p.c] * grid.size)
        probes_h.extend(grid.tolist())
    if not probes_h:
        return StationarityReport(0.0, "stationary", {})
    pc = np.asarray(probes_c)
    ph = np.asarray(probes_h)

    inside = ph < 1.0
    extra = ph[(ph > 0.0) & inside]
    ri = _residual_integrals(density, truth, extra=np.unique(extra))
    m = np.clip(ph, 0.0, 1.0)
    R, S = ri.at(m)
    gc = np.where(inside, S - ph * R, 0.0)
    gh = np.where(inside, -pc * R, 0.0)
    norms = np.sqrt(gc * gc + gh * gh)
    worst = int(np.argmax(norms))
    residual = float(norms[worst])
    return StationarityReport(
        residual=residual,
        verdict="stationary" if residual <= tol else "non-stationary",
        worst_probe={
            "c": float(pc[worst]),
            "h": float(ph[worst]),
            "grad_c": float(gc[worst]),
            "grad_h": float(gh[worst]),
        },
    )


def global_minimizer_residuals(
    density: MixedDensity, truth, probe_grid: int = 512
):
    """Residuals of the three global-minimizer conditions, as a tuple.

    (d2, f0, df0): sup over interior probes of |weighted marginal - f''|,
    then the mismatch of the two boundary conditions carried by mass at
    h < 0 against f(0) and f'(0).  All three vanish (to tolerance) exactly
    at global minimizers.
    """
    x = (np.arange(probe_grid) + 0.5) / probe_grid
    d2 = float(
        np.max(np.abs(density.weighted_marginal_smooth(x) - truth.second_derivative(x)))
    )

    f0 = 0.0
    df0 = 0.0
    for p in density.pieces:
        if p.lo < 0.0:
            b = min(p.hi, 0.0)
            f0 += -p.c * float(p._moment(p.lo, b, 1))
            df0 += p.c * float(p._moment(p.lo, b, 0))
    # an atom exactly at h = 0 still carries slope into (0, 1)
    for a in density.atoms:
        if a.h <= 0.0:
            f0 += -a.c * a.mass * a.h
            df0 += a.c * a.mass

    x0 = np.array([0.0])
    fv = float(truth(x0)[0])
    dfv = float(truth.derivative(x0)[0])
    return (d2, abs(f0 - fv), abs(df0 - dfv))

"""Moment closure for a localized cloud: center drift, covariance flow.

A tight particle cloud behaves like a Gaussian with center ``b = (c, h)`` and
covariance ``A``: the center follows the one-unit gradient flow and the
covariance obeys ``dA/dt = A H + H A`` with ``H`` the (distributional)
curvature of the potential at the center.  For ramp units the curvature is
exact and cheap:

    H_cc = 0                    (the output is linear in c)
    H_ch = int_h^1 r(x) dx      (r = prediction - truth at the center)
    H_hh = -c * r(h)            (point evaluation; the ramp's second
                                 derivative in h is a Dirac at x = h)

with the ``H_hh`` entry dropped when the knot leaves [0, 1].  At a stationary
center the ``c`` row and column vanish, so the sign of ``H_hh`` alone decides
whether the cloud spreads or contracts, at exponential rate ``2 H_hh``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ensemble import Ensemble, velocities
from .errors import NotStationaryError, NumericalError
from .spline_model import ResidualIntegrals, Weight

__all__ = [
    "GaussianState",
    "StabilityVerdict",
    "drift",
    "curvature_matrix",
    "evolve",
    "classify",
    "GaussianTrajectory",
]

_EIG_TOL = 1e-10


def _one_unit(b: Weight) -> Ensemble:
    return Ensemble(c=np.array([b.c]), h=np.array([b.h]))


@dataclass
class GaussianState:
    """Cloud summary: center weight, 2x2 covariance, time."""

    b: Weight
    A: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        if self.A.shape != (2, 2):
            raise ValueError("covariance must be a 2x2 matrix")
        if abs(self.A[0, 1] - self.A[1, 0]) > 1e-12:
            raise ValueError("covariance must be symmetric")
        if np.min(np.linalg.eigvalsh(0.5 * (self.A + self.A.T))) < -1e-12:
            raise ValueError("covariance must be positive semidefinite")

    @classmethod
    def isotropic(cls, b: Weight, sigma: float, t: float = 0.0):
        return cls(b=b, A=sigma**2 * np.eye(2), t=t)


def drift(b: Weight, truth):
    """Center velocity: the one-unit gradient flow at ``b``."""
    vc, vh = velocities(_one_unit(b), truth)
    return float(vc[0]), float(vh[0])


def curvature_matrix(b: Weight, truth) -> np.ndarray:
    """Exact curvature ``H`` of the potential at a one-unit center."""
    e = _one_unit(b)
    # strictly past the boundary the unit is frozen; at h == 1 exactly the
    # left-limit curvature applies (the boundary atom is stable, not neutral)
    if b.h > 1.0:
        return np.zeros((2, 2))
    ri = ResidualIntegrals(e.prediction(), truth)
    m = min(max(b.h, 0.0), 1.0)
    R, _ = ri.at(np.array([m]))
    h_ch = float(R[0])
    if 0.0 <= b.h <= 1.0:
        r_at_h = float(e.prediction()(np.array([b.h]))[0] - truth(np.array([b.h]))[0])
        h_hh = -b.c * r_at_h
    else:
        h_hh = 0.0
    return np.array([[0.0, h_ch], [h_ch, h_hh]])


@dataclass
class GaussianTrajectory:
    """Recorded moment-flow states on a uniform time grid."""

    t: np.ndarray
    b: np.ndarray  # (rows, 2) centers
    A: np.ndarray  # (rows, 2, 2) covariances

    def states(self):
        return [
            GaussianState(b=Weight(*bc), A=cov, t=float(tt))
            for tt, bc, cov in zip(self.t, self.b, self.A)
        ]

    def to_csv(self, path):
        path = Path(path)
        with open(path, "w") as fh:
            fh.write("t,b_c,b_h,A_cc,A_ch,A_hh\n")
            for tt, bc, cov in zip(self.t, self.b, self.A):
                row = (tt, bc[0], bc[1], cov[0, 0], cov[0, 1], cov[1, 1])
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _moment_rate(bc, bh, A, truth):
    b = Weight(float(bc), float(bh))
    vc, vh = drift(b, truth)
    H = curvature_matrix(b, truth)
    dA = A @ H + H @ A
    return np.array([vc, vh]), dA


def evolve(
    g0: GaussianState, truth, dt: float, t_end: float, record_every: int = 1
) -> GaussianTrajectory:
    """Integrate the (b, A) moment system by classic Runge-Kutta.

    The covariance is re-symmetrized each step; an eigenvalue sinking below
    -1e-9 aborts the run (the closure has left its regime of validity).
    """
    if dt <= 0 or t_end < 0:
        raise ValueError("need dt > 0 and t_end >= 0")
    steps = int(round(t_end / dt))
    bvec = np.array([g0.b.c, g0.b.h], dtype=float)
    A = np.asarray(g0.A, dtype=float).copy()
    ts, bs, As = [g0.t], [bvec.copy()], [A.copy()]
    for i in range(steps):
        kb1, kA1 = _moment_rate(bvec[0], bvec[1], A, truth)
        kb2, kA2 = _moment_rate(
            bvec[0] + 0.5 * dt * kb1[0], bvec[1] + 0.5 * dt * kb1[1],
            A + 0.5 * dt * kA1, truth,
        )
        kb3, kA3 = _moment_rate(
            bvec[0] + 0.5 * dt * kb2[0], bvec[1] + 0.5 * dt * kb2[1],
            A + 0.5 * dt * kA2, truth,
        )
        kb4, kA4 = _moment_rate(
            bvec[0] + dt * kb3[0], bvec[1] + dt * kb3[1],
            A + dt * kA3, truth,
        )
        bvec = bvec + (dt / 6.0) * (kb1 + 2 * kb2 + 2 * kb3 + kb4)
        A = A + (dt / 6.0) * (kA1 + 2 * kA2 + 2 * kA3 + kA4)
        A = 0.5 * (A + A.T)
        low = float(np.min(np.linalg.eigvalsh(A)))
        if low < -1e-9:
            raise NumericalError(
                f"covariance lost positive semidefiniteness at t = "
                f"{g0.t + (i + 1) * dt:.6g} (eigenvalue {low:.3e})"
            )
        if (i + 1) % record_every == 0 or i + 1 == steps:
            ts.append(g0.t + (i + 1) * dt)
            bs.append(bvec.copy())
            As.append(A.copy())
    return GaussianTrajectory(
        t=np.array(ts), b=np.stack(bs), A=np.stack(As)
    )


@dataclass(frozen=True)
class StabilityVerdict:
    """Curvature eigen-analysis of a stationary center."""

    H: np.ndarray
    eigenvalues: tuple
    classification: str
    block_form_residual: float

    def to_json(self) -> dict:
        return {
            "H": [[float(v) for v in row] for row in self.H],
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "classification": self.classification,
            "block_form_residual": float(self.block_form_residual),
        }


def classify(b: Weight, truth, drift_tol: float = 1e-8) -> StabilityVerdict:
    """Stability of a stationary center by the sign pattern of H's spectrum.

    Requires the center to be stationary to ``drift_tol``; raises otherwise,
    carrying the measured drift norm.  Classification with tolerance 1e-10:
    any positive eigenvalue means unstable (the cloud spreads along that
    direction); otherwise a negative one means stable; all-zero is neutral.
    """
    vc, vh = drift(b, truth)
    norm = float(np.hypot(vc, vh))
    if norm > drift_tol:
        raise NotStationaryError(norm)
    H = curvature_matrix(b, truth)
    lo, hi = (float(v) for v in np.linalg.eigvalsh(H))
    if hi > _EIG_TOL:
        verdict = "unstable"
    elif lo < -_EIG_TOL:
        verdict = "stable"
    else:
        verdict = "neutral"
    return StabilityVerdict(
        H=H,
        eigenvalues=(lo, hi),
        classification=verdict,
        block_form_residual=abs(H[0, 0]) + abs(H[0, 1]),
    )

"""Particle simulation of gradient flow for wide shallow ReLU networks.

A network with one hidden layer of ramp units is represented by a cloud of
weight particles; training the infinitely wide network by gradient descent
becomes a deterministic flow of the cloud.  The package simulates that flow
on one-dimensional regression problems, evaluates the known closed forms it
should track (stationary particle arrangements, early-time spectral decay,
local Gaussian moment dynamics), and checks the two against each other.

Main entry points:

- :mod:`splineflow.ensemble` evolves a finite particle cloud.
- :mod:`splineflow.stationary` builds the equidistant stationary families.
- :mod:`splineflow.spectral` evaluates the flow kernels' eigensystems and
  the closed-form loss curves of the two linear regimes.
- :mod:`splineflow.gaussian_local` propagates mean and covariance of a
  narrow Gaussian cloud near a single point.
- :mod:`splineflow.verify` holds the independent numerical oracles.
- ``splineflow <scenario>`` on the command line runs a packaged experiment.
"""

from .ensemble import (
    AtomInit,
    DeltaCUniformHInit,
    Ensemble,
    GaussianInit,
    StratifiedInit,
    Trace,
    UniformBoxInit,
    init,
    loss,
    loss_rate_identity,
    simulate,
    velocities,
)
from .errors import (
    ConfigError,
    NotStationaryError,
    NumericalError,
    UnsupportedCaseError,
)
from .gaussian_local import GaussianState, classify, curvature_matrix, evolve
from .meanfield import (
    DensityPiece,
    MixedDensity,
    PointMass,
    StationarityReport,
    mean_field_loss,
    stationarity_residual,
)
from .spectral import (
    KernelEigenpair,
    LinearizedEigenpair,
    kernel_eigenpair,
    linearized_eigenpair,
    linearized_loss,
    small_output_loss,
    small_output_shift,
    spectral_table,
)
from .spline_model import (
    Monomial,
    PiecewisePoly,
    SineScaled,
    SplinePrediction,
    Weight,
)
from .stationary import AtomFamily, classify_support, equidistant_family

__version__ = "0.1.0"

__all__ = [
    "AtomFamily",
    "AtomInit",
    "ConfigError",
    "DeltaCUniformHInit",
    "DensityPiece",
    "Ensemble",
    "GaussianInit",
    "GaussianState",
    "KernelEigenpair",
    "LinearizedEigenpair",
    "MixedDensity",
    "Monomial",
    "NotStationaryError",
    "NumericalError",
    "PiecewisePoly",
    "PointMass",
    "SineScaled",
    "SplinePrediction",
    "StationarityReport",
    "StratifiedInit",
    "Trace",
    "UniformBoxInit",
    "UnsupportedCaseError",
    "Weight",
    "classify",
    "classify_support",
    "curvature_matrix",
    "equidistant_family",
    "evolve",
    "init",
    "kernel_eigenpair",
    "linearized_eigenpair",
    "linearized_loss",
    "loss",
    "loss_rate_identity",
    "mean_field_loss",
    "simulate",
    "small_output_loss",
    "small_output_shift",
    "spectral_table",
    "stationarity_residual",
    "velocities",
]

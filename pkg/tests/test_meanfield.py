import numpy as np
import pytest
from numpy.testing import assert_allclose

from splineflow.ensemble import Ensemble
from splineflow.meanfield import (
    DensityPiece,
    MixedDensity,
    PointMass,
    global_minimizer_residuals,
    mean_field_loss,
    prediction,
    stationarity_residual,
)
from splineflow.spline_model import (
    Monomial,
    make_partition,
    panelize,
    piecewise_integral,
)
from splineflow.stationary import equidistant_family, global_minimizer_density

SQUARE = Monomial(1.0, 2)
HALF = Monomial(0.5, 2)


def test_density_piece_mass_and_moment():
    p = DensityPiece(0.2, 0.7, poly=(2.0,))
    assert_allclose(p.mass(), 1.0)
    # first moment of the flat density 2 on [0.2, 0.7]
    assert_allclose(p._moment(0.2, 0.7, 1), 2.0 * (0.7**2 - 0.2**2) / 2.0)


def test_density_piece_prediction_closed_form():
    p = DensityPiece(0.0, 1.0, poly=(1.0,))
    x = np.linspace(0, 1, 11)
    assert_allclose(p.prediction_at(x), x**2 / 2.0, rtol=0, atol=1e-14)


def test_mixed_density_overlap_rejected():
    with pytest.raises(ValueError):
        MixedDensity(pieces=(
            DensityPiece(0.0, 0.6, poly=(1.0,)),
            DensityPiece(0.5, 1.0, poly=(1.0,)),
        ))


def test_from_atoms_prediction():
    d = MixedDensity.from_atoms([((1.5, 0.3), 1.0)])
    x = np.array([0.2, 0.5, 1.0])
    assert_allclose(prediction(d, x), 1.5 * np.maximum(x - 0.3, 0.0))


def test_from_ensemble_matches_particle_loss():
    rng = np.random.default_rng(12)
    e = Ensemble(c=rng.uniform(-1, 2, 15), h=rng.uniform(-0.2, 1.2, 15))
    from splineflow.ensemble import loss as particle_loss

    d = MixedDensity.from_ensemble(e)
    assert_allclose(mean_field_loss(d, SQUARE), particle_loss(e, SQUARE),
                    rtol=1e-12)


def test_sine_payload_prediction_against_quadrature():
    d = DensityPiece(0.0, 1.0, sin_amp=0.7, sin_omega=3.0)
    for x in (0.25, 0.6, 1.0):
        cuts = panelize(make_partition([x]), d.panel_hint())
        cuts = cuts[cuts <= x]
        want = piecewise_integral(
            lambda h: (x - h) * 0.7 * np.sin(3.0 * h), cuts
        )
        assert_allclose(d.prediction_at(np.array([x]))[0], want,
                        rtol=0, atol=1e-13)


def test_equidistant_families_stationary():
    for m in (1, 2, 5):
        fam = equidistant_family(m)
        rep = stationarity_residual(fam.to_density(), SQUARE)
        assert rep.verdict == "stationary"
        assert rep.residual <= 1e-10


def test_single_atom_perturbed_not_stationary():
    fam = equidistant_family(1)
    (c, h), mass = (fam.coefficients[0], fam.knots[0]), fam.mass()
    d = MixedDensity.from_atoms([((c + 0.05, h), mass)])
    rep = stationarity_residual(d, SQUARE)
    assert rep.verdict == "non-stationary"
    assert rep.worst_probe["c"] == pytest.approx(c + 0.05)
    assert abs(rep.worst_probe["grad_c"]) > 1e-6 or \
        abs(rep.worst_probe["grad_h"]) > 1e-6


def test_empty_density_is_stationary():
    rep = stationarity_residual(MixedDensity(), SQUARE)
    assert rep.verdict == "stationary"
    assert rep.residual == 0.0


def test_invisible_atoms_are_stationary():
    d = MixedDensity(atoms=(PointMass(2.0, 1.4, 1.0),))
    rep = stationarity_residual(d, SQUARE)
    assert rep.verdict == "stationary"


def test_stationarity_report_json():
    rep = stationarity_residual(equidistant_family(2).to_density(), SQUARE)
    parsed = rep.to_json()
    assert set(parsed) == {"residual", "verdict", "worst_probe"}


def test_global_minimizer_conditions():
    d2, f0, df0 = global_minimizer_residuals(
        global_minimizer_density(), SQUARE
    )
    assert max(abs(d2), abs(f0), abs(df0)) <= 1e-12


def test_global_minimizer_knot_only_flat():
    # flat unit-slope density on [0, 1] builds x^2/2 exactly
    d = MixedDensity(pieces=(DensityPiece(0.0, 1.0, poly=(1.0,)),))
    assert_allclose(mean_field_loss(d, HALF), 0.0, rtol=0, atol=1e-16)
    d2, f0, df0 = global_minimizer_residuals(d, HALF)
    assert max(abs(d2), abs(f0), abs(df0)) <= 1e-12


def test_mean_field_loss_positive_off_minimum():
    d = MixedDensity(pieces=(DensityPiece(0.3, 0.8, poly=(2.0,)),))
    assert mean_field_loss(d, HALF) > 1e-4

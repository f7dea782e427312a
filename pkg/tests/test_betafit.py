"""Steepness fitting: round trips, anchors, saturation, degenerate input."""

import numpy as np
import pytest
from scipy.special import expit

from agepost import FitDiverged, fit_beta, golden_section_minimize


def curve_samples(beta, diffs):
    return [(float(d), float(expit(beta * d))) for d in diffs]


def test_round_trip_default_beta():
    model = fit_beta(curve_samples(0.36, range(-15, 16)))
    assert model.beta == pytest.approx(0.36, abs=1e-3)


@pytest.mark.parametrize("beta_true", [0.1, 0.25, 0.36, 0.5, 0.75, 1.0])
def test_round_trip_across_range(beta_true):
    model = fit_beta(curve_samples(beta_true, range(-15, 16)))
    assert model.beta == pytest.approx(beta_true, abs=1e-3)


def test_two_anchor_points():
    # Frozen from a dense grid-scan oracle over beta in [1e-3, 10]:
    # argmin of (sig(5b)-0.85)^2 + (sig(10b)-0.95)^2 is 0.334772.
    model = fit_beta([(5, 0.85), (10, 0.95)])
    assert model.beta == pytest.approx(0.334772, abs=1e-4)
    assert model.beta == pytest.approx(0.34, abs=0.05)


def test_saturated_fractions_pin_at_upper_bound():
    model = fit_beta([(5, 1.0), (10, 1.0), (15, 1.0)])
    assert model.beta == pytest.approx(10.0, abs=1e-3)


def test_all_half_fractions_diverge():
    with pytest.raises(FitDiverged):
        fit_beta([(5, 0.5), (10, 0.5)])


def test_too_few_samples():
    with pytest.raises(ValueError):
        fit_beta([(5, 0.85)])


def test_duplicate_diffs_rejected():
    with pytest.raises(ValueError):
        fit_beta([(5, 0.8), (5, 0.9)])


def test_fraction_out_of_range():
    with pytest.raises(ValueError):
        fit_beta([(5, 1.2), (10, 0.9)])


def test_golden_section_quadratic():
    argmin = golden_section_minimize(lambda x: (x - 1.7) ** 2, -5.0, 5.0, tol=1e-8)
    assert argmin == pytest.approx(1.7, abs=1e-6)


def test_golden_section_monotone_hits_bound():
    argmin = golden_section_minimize(lambda x: -x, 0.0, 2.0, tol=1e-8)
    assert argmin == pytest.approx(2.0, abs=1e-6)

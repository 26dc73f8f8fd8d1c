import numpy as np
import pytest

from atomchain import model
from atomchain.model import ChainParams, coupling_rate, coupling_rate_xi, detector_direction, dipole_pattern


def test_single_atom_rate_is_exact():
    params = ChainParams(M=51, lambda_over_a=0.5)
    assert coupling_rate(params, 0) == complex(1.0, -2.0 / np.pi)


def test_rates_at_half_wavelength_spacing():
    params = ChainParams(M=51, lambda_over_a=0.5)
    g0 = coupling_rate(params, 0)
    g1 = coupling_rate(params, 1)
    assert (round(g0.real, 3), round(g0.imag, 3)) == (1.0, -0.637)
    assert (round(g1.real, 3), round(g1.imag, 3)) == (0.009, -0.119)


@pytest.mark.parametrize("theta", [0.0, np.pi / 5, np.pi / 3, np.pi / 2])
def test_small_separation_limit_of_real_part(theta):
    assert abs(coupling_rate_xi(1e-4, theta).real - 1) <= 1e-3


def test_series_and_direct_branches_join():
    below = coupling_rate_xi(model._SERIES_XI * (1 - 1e-9), np.pi / 3)
    above = coupling_rate_xi(model._SERIES_XI * (1 + 1e-9), np.pi / 3)
    assert abs(below - above) <= 1e-6 * abs(above)


def test_rate_table_matches_single_calls():
    params = ChainParams(M=21, lambda_over_a=0.7, theta=np.pi / 4)
    table = model.coupling_rates(params, 10)
    assert np.allclose(table, [coupling_rate(params, x) for x in range(11)], rtol=0, atol=1e-15)


def test_negative_separation_rejected():
    with pytest.raises(ValueError):
        coupling_rate(ChainParams(M=5, lambda_over_a=1.0), -1)


@pytest.mark.parametrize(
    "fields",
    [
        dict(M=4, lambda_over_a=0.5),
        dict(M=1, lambda_over_a=0.5),
        dict(M=5, lambda_over_a=0.0),
        dict(M=5, lambda_over_a=0.5, U=-1.0),
        dict(M=5, lambda_over_a=0.5, theta=2.0),
        dict(M=5, lambda_over_a=0.5, gamma0=0.0),
    ],
)
def test_invalid_parameters(fields):
    with pytest.raises(ValueError):
        ChainParams(**fields)


def test_regime_classification():
    base = ChainParams(M=5, lambda_over_a=0.5)
    assert base.regime == "free"
    assert base.with_(U=2.0).regime == "finite"
    assert base.with_(U=1e3).regime == "strong"
    assert base.N == 4 and base.half_N == 2


@pytest.mark.parametrize(
    "theta, r_hat, expected",
    [
        (0.0, [1.0, 0.0, 0.0], 1.0),  # perpendicular to the dipole
        (0.0, [0.0, 0.0, 1.0], 0.0),  # along the dipole
        (np.pi / 2, [0.0, 0.0, 1.0], 1.0),
    ],
)
def test_dipole_pattern_examples(theta, r_hat, expected):
    assert dipole_pattern(r_hat, theta) == pytest.approx(expected, abs=1e-15)


def test_dipole_pattern_rejects_non_unit_vector():
    with pytest.raises(ValueError):
        dipole_pattern([1.0, 1.0, 0.0], 0.0)


def test_detector_direction_is_unit_and_perpendicular_by_default():
    for beta in np.linspace(-np.pi / 2, np.pi / 2, 7):
        r = detector_direction(beta)
        assert np.linalg.norm(r) == pytest.approx(1.0)
        # the default azimuth is perpendicular to a dipole along x
        assert dipole_pattern(r, np.pi / 2) == pytest.approx(1.0)

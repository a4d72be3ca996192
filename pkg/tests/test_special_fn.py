import math

import numpy as np
import pytest
from scipy import special

from ls_sparsify.special_fn import (
    BesselDomainError,
    GreenKind,
    bessel_j0_y0,
    green,
    hankel1_0,
)


# ============================================================================
# J0 / Y0
# ============================================================================

@pytest.mark.parametrize("x", [1e-8, 1e-3, 0.5, 1.0, 2.404825557695773, 4.999, 5.0, 5.001, 10.0, 87.3, 1e4])
def test_j0_y0_match_scipy(x):
    j0, y0 = bessel_j0_y0(x)
    assert j0 == pytest.approx(special.j0(x), rel=1e-12, abs=1e-15)
    assert y0 == pytest.approx(special.y0(x), rel=1e-12, abs=1e-15)


def test_array_input_keeps_shape():
    x = np.linspace(0.01, 40.0, 2001).reshape(3, 667)
    j0, y0 = bessel_j0_y0(x)
    assert j0.shape == x.shape
    np.testing.assert_allclose(j0, special.j0(x), rtol=1e-11, atol=1e-14)
    np.testing.assert_allclose(y0, special.y0(x), rtol=1e-11, atol=1e-14)


def test_wronskian():
    # J1 Y0 - J0 Y1 = 2 / (pi x)
    x = np.geomspace(1e-3, 200.0, 500)
    j0, y0 = bessel_j0_y0(x)
    w = special.j1(x) * y0 - j0 * special.y1(x)
    np.testing.assert_allclose(w, 2.0 / (np.pi * x), rtol=1e-10)


def test_first_zero_of_j0():
    j0, _ = bessel_j0_y0(2.404825557695773)
    assert abs(j0) < 1e-14


def test_scalar_returns_floats():
    j0, y0 = bessel_j0_y0(3.0)
    assert isinstance(j0, float) and isinstance(y0, float)


@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
def test_domain_errors(bad):
    with pytest.raises(BesselDomainError):
        bessel_j0_y0(bad)


def test_hankel_matches_scipy():
    x = np.array([0.1, 1.0, 7.5, 300.0])
    np.testing.assert_allclose(hankel1_0(x), special.hankel1(0, x), rtol=1e-11)
    assert isinstance(hankel1_0(2.0), complex)


# ============================================================================
# Green's functions
# ============================================================================

def test_green_2d():
    kind = GreenKind(dim=2, omega=30.0)
    r = np.array([0.01, 0.1, 0.7])
    np.testing.assert_allclose(green(kind, r), 0.25j * special.hankel1(0, 30.0 * r), rtol=1e-11)


def test_green_3d_helmholtz_and_laplace():
    r = np.array([0.05, 0.5, 2.0])
    np.testing.assert_allclose(green(GreenKind(3, 10.0), r), np.exp(10j * r) / (4 * np.pi * r))
    lap = green(GreenKind(3, 0.0), r)
    np.testing.assert_allclose(lap, 1.0 / (4 * np.pi * r))
    assert lap.dtype == complex


def test_green_scalar_is_complex():
    assert isinstance(green(GreenKind(3, 1.0), 0.3), complex)


def test_green_rejects_zero_distance():
    with pytest.raises(BesselDomainError):
        green(GreenKind(3, 1.0), np.array([0.0, 1.0]))


@pytest.mark.parametrize("dim,omega", [(1, 1.0), (4, 1.0), (2, 0.0), (3, -1.0), (3, math.inf)])
def test_green_kind_validation(dim, omega):
    with pytest.raises(ValueError):
        GreenKind(dim, omega)


def test_laplace_flag():
    assert GreenKind(3, 0.0).is_laplace
    assert not GreenKind(2, 1.0).is_laplace

import math

import numpy as np
import pytest
import scipy.special
from numpy.polynomial import polynomial as npoly
from scipy.integrate import quad

from link_multiplicity.errors import DomainError
from link_multiplicity.specialfn import (
    BetaArgs,
    ComplexPolynomial,
    Root,
    ball_volume,
    betainc,
    complex_roots,
    regularized_incomplete_beta,
)


def beta_by_quadrature(a: float, b: float, y: float) -> float:
    """I_y(a, b) by algebraic-weight quadrature, integrating away from the singular endpoint."""
    full = scipy.special.beta(a, b)
    if y == 0.0:
        return 0.0
    if y <= 0.5:
        value, _ = quad(
            lambda t: (1.0 - t) ** (b - 1.0), 0.0, y, weight="alg", wvar=(a - 1.0, 0.0), epsabs=1e-14, epsrel=1e-13
        )
        return value / full
    tail, _ = quad(lambda t: t ** (a - 1.0), y, 1.0, weight="alg", wvar=(0.0, b - 1.0), epsabs=1e-14, epsrel=1e-13)
    return 1.0 - tail / full


class TestIncompleteBeta:
    def test_endpoints(self):
        assert betainc(2.0, 3.0, 0.0) == 0.0
        assert betainc(2.0, 3.0, 1.0) == 1.0

    def test_known_values(self):
        assert betainc(0.5, 0.5, 0.5) == pytest.approx(0.5, abs=1e-12)
        assert betainc(1.0, 1.0, 0.3) == pytest.approx(0.3, abs=1e-12)
        assert betainc(2.0, 1.0, 0.3) == pytest.approx(0.09, abs=1e-12)

    @pytest.mark.parametrize("a", [0.25, 1.5, 5.0])
    @pytest.mark.parametrize("b", [0.5, 2.0, 4.75])
    def test_symmetry(self, a, b):
        for y in np.linspace(0.05, 0.95, 7):
            assert betainc(a, b, y) == pytest.approx(1.0 - betainc(b, a, 1.0 - y), abs=1e-9)

    def test_monotone_in_y(self):
        values = [betainc(1.5, 0.5, y) for y in np.linspace(0.0, 1.0, 101)]
        assert all(lo <= hi for lo, hi in zip(values, values[1:], strict=False))

    def test_matches_quadrature_on_coarse_grid(self):
        for a in np.linspace(0.25, 5.0, 5):
            for b in np.linspace(0.25, 5.0, 5):
                for y in np.linspace(0.0, 1.0, 6):
                    assert betainc(a, b, y) == pytest.approx(beta_by_quadrature(a, b, y), abs=1e-8)

    @pytest.mark.slow
    def test_matches_quadrature_on_fine_grid(self):
        grid = np.linspace(0.25, 5.0, 20)
        for a in grid:
            for b in grid:
                for y in np.linspace(0.0, 1.0, 20):
                    assert betainc(a, b, y) == pytest.approx(beta_by_quadrature(a, b, y), abs=1e-8)

    def test_matches_scipy(self, rng):
        for a, b, y in zip(rng.uniform(0.1, 8, 200), rng.uniform(0.1, 8, 200), rng.uniform(0, 1, 200), strict=True):
            assert betainc(a, b, y) == pytest.approx(scipy.special.betainc(a, b, y), abs=1e-10)

    @pytest.mark.parametrize(("a", "b"), [(1.5, 0.5), (0.5, 1.5), (2.0, 3.0), (0.25, 4.0)])
    def test_tails_near_the_endpoints(self, a, b):
        for y in np.logspace(-6, -1, 11):
            assert betainc(a, b, y) == pytest.approx(scipy.special.betainc(a, b, y), rel=1e-9)
            assert betainc(a, b, 1.0 - y) == pytest.approx(scipy.special.betainc(a, b, 1.0 - y), abs=1e-12)

    def test_closed_form_at_three_halves_one_half(self):
        for y in np.logspace(-6, 0, 25):
            exact = (2 / math.pi) * (math.asin(math.sqrt(y)) - math.sqrt(y * (1 - y)))
            assert betainc(1.5, 0.5, y) == pytest.approx(exact, rel=1e-9, abs=1e-15)

    @pytest.mark.parametrize(("y", "a", "b"), [(1.1, 1.0, 1.0), (-0.1, 1.0, 1.0), (0.5, 0.0, 1.0), (0.5, 1.0, -2.0)])
    def test_domain(self, y, a, b):
        with pytest.raises(DomainError):
            regularized_incomplete_beta(BetaArgs(y=y, a=a, b=b))


class TestBallVolume:
    def test_low_dimensions(self):
        assert ball_volume(1, 0.5) == pytest.approx(1.0)
        assert ball_volume(2, 0.5) == pytest.approx(math.pi / 4)
        assert ball_volume(3, 1.0) == pytest.approx(4 * math.pi / 3)

    def test_scaling(self):
        assert ball_volume(4, 2.0) == pytest.approx(2.0**4 * ball_volume(4, 1.0))

    @pytest.mark.parametrize(("k", "x"), [(0, 1.0), (2, 0.0), (2, -1.0)])
    def test_domain(self, k, x):
        with pytest.raises(DomainError):
            ball_volume(k, x)


class TestComplexRoots:
    def test_double_root_at_zero(self):
        assert complex_roots(ComplexPolynomial((0, 0, 1))) == [Root(0j, 2)]

    def test_simple_real_roots(self):
        roots = complex_roots(ComplexPolynomial((-1, 0, 1)))
        assert [r.multiplicity for r in roots] == [1, 1]
        assert roots[0].value == pytest.approx(-1.0)
        assert roots[1].value == pytest.approx(1.0)

    def test_repeated_nonzero_root(self):
        # (t - 2)^2 (t + 1)
        poly = ComplexPolynomial(tuple(npoly.polyfromroots([2, 2, -1])))
        roots = complex_roots(poly)
        assert sorted(r.multiplicity for r in roots) == [1, 2]
        double = next(r for r in roots if r.multiplicity == 2)
        assert double.value == pytest.approx(2.0, abs=1e-6)

    def test_trailing_zeros_dropped(self):
        poly = ComplexPolynomial((1, 2, 0, 0))
        assert poly.degree == 1
        assert poly.coefficients == (1 + 0j, 2 + 0j)

    def test_derivative(self):
        assert ComplexPolynomial((1, 2, 3)).derivative() == ComplexPolynomial((2, 6))

    @pytest.mark.parametrize("coefficients", [(0,), (0, 0), (3,)])
    def test_no_finite_root_set(self, coefficients):
        with pytest.raises(DomainError):
            complex_roots(ComplexPolynomial(coefficients))

    def test_reconstructs_random_polynomials(self, rng):
        for degree in range(1, 11):
            coeffs = rng.standard_normal(degree + 1) + 1j * rng.standard_normal(degree + 1)
            poly = ComplexPolynomial(tuple(coeffs))
            roots = complex_roots(poly)
            assert sum(r.multiplicity for r in roots) == degree
            expanded = [r.value for r in roots for _ in range(r.multiplicity)]
            rebuilt = coeffs[-1] * npoly.polyfromroots(expanded)
            assert np.max(np.abs(rebuilt - coeffs)) <= 1e-6 * np.max(np.abs(coeffs))

    def test_residuals_small(self, rng):
        coeffs = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        poly = ComplexPolynomial(tuple(coeffs))
        for root in complex_roots(poly):
            assert abs(poly(root.value)) <= 1e-8 * np.max(np.abs(coeffs))

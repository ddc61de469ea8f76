import math

import numpy as np
import pytest
import scipy.special
from scipy.integrate import quad

from link_multiplicity.bound import (
    BoundQuery,
    beta_M,
    bound_report,
    sample_size_bound,
    sample_size_value,
)
from link_multiplicity.corpus import RegularityData
from link_multiplicity.errors import DomainError, ValidationError


def regularity(delta: float = 1.0, volume: float = 4 * math.pi) -> RegularityData:
    return RegularityData(tau_M=delta, tau_boundary=delta, rho_M=delta, volume=volume)


def beta_by_hand(volume: float, delta: float, x: float) -> float:
    theta = math.asin(x / (4 * delta))
    y = 1 - (x * math.cos(theta)) ** 2 / (16 * delta**2)
    a, b = 1.5, 0.5
    integral, _ = quad(
        lambda t: (1 - t) ** (b - 1), 0.0, y, weight="alg", wvar=(a - 1, 0.0), epsabs=1e-14, epsrel=1e-13, limit=200
    )
    shrink = math.cos(theta) ** 2 / 8 * integral / scipy.special.beta(a, b)
    return volume / (shrink * math.pi * x**2)


class TestBetaM:
    def test_against_independent_quadrature(self):
        assert beta_M(regularity(), 0.1) == pytest.approx(beta_by_hand(4 * math.pi, 1.0, 0.1), rel=1e-8)

    def test_strictly_decreasing(self):
        reg = regularity()
        values = [beta_M(reg, x) for x in np.linspace(0.01, 1.99, 60)]
        assert all(hi > lo for hi, lo in zip(values, values[1:], strict=False))

    def test_small_radius_limit(self):
        reg = regularity()
        scaled = [beta_M(reg, x) * x**2 for x in (1e-3, 1e-4, 1e-5, 1e-6)]
        assert all(math.isfinite(v) and v > 0 for v in scaled)
        assert scaled[-1] == pytest.approx(8 * reg.volume / math.pi, rel=1e-5)

    @pytest.mark.parametrize("x", [0.0, -0.1, 4.0, 4.1])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            beta_M(regularity(), x)


class TestSampleSize:
    def test_hypotheses(self):
        with pytest.raises(ValidationError, match="radius"):
            BoundQuery(radius=0.5, confidence_gap=0.1, regularity=regularity())
        with pytest.raises(ValidationError, match="gamma"):
            BoundQuery(radius=0.1, confidence_gap=1.0, regularity=regularity())

    def test_both_violations_are_reported(self):
        with pytest.raises(ValidationError) as excinfo:
            BoundQuery(radius=0.0, confidence_gap=0.0, regularity=regularity())
        assert len(excinfo.value.violations) == 2

    def test_monotone_in_radius_and_gamma(self):
        reg = regularity()
        radii = np.linspace(0.01, 0.49, 10)
        gammas = np.linspace(0.01, 0.99, 10)
        table = np.array([[sample_size_value(BoundQuery(r, g, reg)) for g in gammas] for r in radii])
        assert np.all(np.diff(table, axis=0) < 0)
        assert np.all(np.diff(table, axis=1) < 0)

    def test_scale_invariance(self):
        for s in (0.1, 3.0, 17.0):
            base = sample_size_value(BoundQuery(0.2, 0.1, regularity()))
            scaled = sample_size_value(BoundQuery(0.2 * s, 0.1, regularity(delta=s, volume=4 * math.pi * s**2)))
            assert scaled == pytest.approx(base, rel=1e-9)

    def test_gamma_near_one(self):
        reg = regularity()
        r = 0.2
        query = BoundQuery(r, 1 - 1e-12, reg)
        assert sample_size_bound(query) == math.ceil(beta_M(reg, r) * beta_M(reg, r / 2))

    def test_report(self):
        reg = regularity()
        report = bound_report(reg, 0.2, 0.1)
        assert report.sample_size == math.ceil(report.value)
        assert report.value == pytest.approx(report.beta_r * (report.beta_half_r + math.log(10)))
        assert report.theta == pytest.approx(math.asin(0.05))
        assert 0 < report.y < 1
        assert report.regularity is reg


def closed_form_beta(volume: float, delta: float, x: float) -> float:
    # k = 2: I_y(3/2, 1/2) = (2/pi)(asin(sqrt(y)) - sqrt(y(1-y)))
    theta = math.asin(x / (4 * delta))
    y = 1 - (x * math.cos(theta)) ** 2 / (16 * delta**2)
    shrink = math.cos(theta) ** 2 / 8 * (2 / math.pi) * (math.asin(math.sqrt(y)) - math.sqrt(y * (1 - y)))
    return volume / (shrink * math.pi * x**2)


class TestGoldenValues:
    def test_closed_form_incomplete_beta(self):
        reg = RegularityData(tau_M=1.0, tau_boundary=0.5, rho_M=2.0, volume=3.0)
        for x in (0.01, 0.2, 1.0, 1.9):
            assert beta_M(reg, x) == pytest.approx(closed_form_beta(3.0, 0.5, x), rel=1e-10)

    def test_hand_built_regularity(self):
        reg = RegularityData(tau_M=1.0, tau_boundary=0.5, rho_M=2.0, volume=3.0)
        report = bound_report(reg, 0.2, 0.05)
        assert report.beta_r == pytest.approx(220.84701638924147, rel=1e-10)
        assert report.beta_half_r == pytest.approx(817.8367336008198, rel=1e-10)
        assert report.value == pytest.approx(181278.40104377933, rel=1e-10)
        assert report.sample_size == 181279

    def test_flat_annulus(self):
        # a flat annulus 0.05 < |z| < 0.5: Delta_M is half the inner radius, area is exact
        reg = RegularityData(tau_M=math.inf, tau_boundary=0.025, rho_M=0.05, volume=math.pi * (0.25 - 0.0025))
        report = bound_report(reg, 0.9 * 0.0125, 0.1)
        assert report.beta_r == pytest.approx(18468.058885538583, rel=1e-10)
        assert report.beta_half_r == pytest.approx(67608.283975590297, rel=1e-10)
        assert report.value == pytest.approx(1248636293.8885026, rel=1e-10)
        assert report.sample_size == 1248636294

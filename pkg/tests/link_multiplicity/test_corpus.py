import math

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.stats import chisquare, ks_2samp, kstest

from link_multiplicity.corpus import (
    RegularityData,
    builtin_corpus,
    corpus_curve,
    estimate_regularity,
    monomial_curve,
    reach_from_probes,
    ring_spacing,
    sample_uniform,
    tangent_frames,
)
from link_multiplicity.errors import ValidationError
from link_multiplicity.geometry import AnnulusSpec, ChartPoint, in_annulus, to_complex

from .conftest import TEST_PROBE_DENSITY


def circle(count: int, radius: float = 1.0) -> np.ndarray:
    angles = 2.0 * math.pi * np.arange(count) / count
    return radius * np.column_stack([np.cos(angles), np.sin(angles)])


def monomial_radius(a: int, b: int, level: float) -> float:
    """Parameter radius rho with rho^(2a) + rho^(2b) = level^2."""
    return brentq(lambda r: r ** (2 * a) + r ** (2 * b) - level**2, 0.0, 2.0, xtol=1e-15)


class TestCorpus:
    def test_builtin_curves(self):
        multiplicities = {curve.id: curve.true_multiplicity for curve in builtin_corpus()}
        assert multiplicities == {"smooth": 1, "cusp": 2, "node": 2, "triple": 3, "quadruple": 4}

    def test_base_points_on_curves(self):
        for curve in builtin_corpus():
            x0, y0 = curve.base_point.complex_coords
            assert curve.implicit(x0, y0) == 0

    def test_unknown_curve(self):
        with pytest.raises(ValidationError, match="known curves"):
            corpus_curve("lemniscate")

    def test_monomial_exponents_must_be_coprime(self):
        with pytest.raises(ValidationError):
            monomial_curve("bad", 2, 4)

    def test_preimages(self, cusp):
        t = 0.3 + 0.1j
        found = cusp.require_parametrization().preimages(cusp.require_parametrization()(t))
        assert any(abs(s - t) < 1e-9 for s in found)


class TestSampling:
    @pytest.mark.parametrize("curve_id", ["smooth", "cusp", "node", "triple", "quadruple"])
    def test_points_lie_on_the_annulus(self, curve_id, annulus):
        curve = corpus_curve(curve_id)
        sample = sample_uniform(curve, annulus, 500, seed=1)
        assert len(sample) == 500
        assert np.all(in_annulus(annulus, sample.points))
        z = to_complex(sample.points)
        assert np.max(np.abs(curve.implicit(z[:, 0], z[:, 1]))) <= 1e-9

    def test_same_seed_same_points(self, cusp, annulus):
        first = sample_uniform(cusp, annulus, 300, seed=42)
        second = sample_uniform(cusp, annulus, 300, seed=42)
        np.testing.assert_array_equal(first.points, second.points)
        assert first == second

    def test_different_seeds_differ(self, cusp, annulus):
        first = sample_uniform(cusp, annulus, 300, seed=1)
        second = sample_uniform(cusp, annulus, 300, seed=2)
        assert not np.array_equal(first.points, second.points)

    def test_points_are_read_only(self, cusp, annulus):
        sample = sample_uniform(cusp, annulus, 10, seed=0)
        with pytest.raises(ValueError):
            sample.points[0, 0] = 1.0

    def test_count_must_be_positive(self, cusp, annulus):
        with pytest.raises(ValidationError):
            sample_uniform(cusp, annulus, 0, seed=0)

    def test_line_radius_distribution(self, annulus):
        line = corpus_curve("smooth")

        def cdf(r):
            return (np.clip(r, 0.05, 0.5) ** 2 - 0.05**2) / (0.5**2 - 0.05**2)

        p_values = []
        for seed in range(3):
            sample = sample_uniform(line, annulus, 5000, seed=seed)
            p_values.append(kstest(np.abs(sample.parameters), cdf).pvalue)
        assert max(p_values) > 0.01

    def test_cusp_radial_and_angular_uniformity(self, cusp, annulus):
        rho_in, rho_out = monomial_radius(2, 3, annulus.inner), monomial_radius(2, 3, annulus.outer)

        def area_below(rho):
            return 2 * rho**4 + 3 * rho**6

        passed = []
        for seed in range(3):
            t = sample_uniform(cusp, annulus, 10_000, seed=seed).parameters
            u = (area_below(np.abs(t)) - area_below(rho_in)) / (area_below(rho_out) - area_below(rho_in))
            radial = np.histogram(u, bins=20, range=(0.0, 1.0))[0]
            angular = np.histogram(np.angle(t), bins=20, range=(-math.pi, math.pi))[0]
            passed.append(chisquare(radial).pvalue > 0.01 and chisquare(angular).pvalue > 0.01)
        assert any(passed)

    @pytest.mark.parametrize("curve_id", ["node", "quadruple"])
    def test_seeds_and_positions_are_exchangeable(self, curve_id, annulus):
        curve = corpus_curve(curve_id)
        first = sample_uniform(curve, annulus, 4000, seed=3).points
        second = sample_uniform(curve, annulus, 4000, seed=4).points
        for a, b in [(first, second), (first[:2000], first[2000:])]:
            assert ks_2samp(np.sum(a**2, axis=1), np.sum(b**2, axis=1)).pvalue > 1e-3
            assert ks_2samp(a[:, 0], b[:, 0]).pvalue > 1e-3


class TestRegularity:
    def test_delta_is_the_minimum(self):
        data = RegularityData(tau_M=0.3, tau_boundary=0.2, rho_M=0.4, volume=1.0)
        assert data.delta_M == 0.2

    @pytest.mark.parametrize("field", ["tau_M", "tau_boundary", "rho_M", "volume"])
    def test_values_must_be_positive(self, field):
        values = {"tau_M": 1.0, "tau_boundary": 1.0, "rho_M": 1.0, "volume": 1.0, field: 0.0}
        with pytest.raises(ValidationError, match=field):
            RegularityData(**values)

    def test_circle_tangents(self):
        points = circle(200)
        frames = tangent_frames(points, intrinsic_dim=1)
        assert frames.shape == (200, 1, 2)
        np.testing.assert_allclose(np.einsum("ij,ij->i", frames[:, 0, :], points), 0.0, atol=1e-9)

    def test_circle_reach(self):
        coarse = reach_from_probes(circle(400), intrinsic_dim=1)
        fine = reach_from_probes(circle(800), intrinsic_dim=1)
        assert 0.45 <= coarse <= 0.5 + 1e-9
        assert fine <= 1.05 * coarse

    def test_reach_scales_with_the_circle(self):
        assert reach_from_probes(circle(300, radius=3.0), intrinsic_dim=1) == pytest.approx(1.5, rel=1e-6)

    def test_line_is_limited_by_the_inner_boundary(self, annulus):
        data = estimate_regularity(corpus_curve("smooth"), annulus, probe_density=TEST_PROBE_DENSITY)
        assert data.tau_M == math.inf
        assert data.tau_boundary == pytest.approx(0.5 * annulus.inner, rel=1e-3)
        assert data.delta_M == data.tau_boundary
        assert data.volume == pytest.approx(math.pi * (0.5**2 - 0.05**2), rel=1e-6)

    def test_cusp_volume(self, cusp, annulus):
        data = estimate_regularity(cusp, annulus, probe_density=TEST_PROBE_DENSITY)
        rho_in, rho_out = monomial_radius(2, 3, annulus.inner), monomial_radius(2, 3, annulus.outer)
        exact = math.pi * ((2 * rho_out**4 + 3 * rho_out**6) - (2 * rho_in**4 + 3 * rho_in**6))
        assert data.volume == pytest.approx(exact, rel=1e-6)
        assert data.probe_density == TEST_PROBE_DENSITY
        assert 0.0 < data.delta_M < annulus.inner

    def test_cusp_reach_shrinks_with_the_inner_radius(self, cusp):
        origin = ChartPoint.origin(2)
        wide = estimate_regularity(cusp, AnnulusSpec(origin, 0.5, 0.05), probe_density=TEST_PROBE_DENSITY)
        narrow = estimate_regularity(cusp, AnnulusSpec(origin, 0.5, 0.01), probe_density=TEST_PROBE_DENSITY)
        assert narrow.tau_M < wide.tau_M

    @pytest.mark.slow
    def test_doubling_probe_density_is_stable(self, cusp, annulus):
        coarse = estimate_regularity(cusp, annulus, probe_density=64)
        fine = estimate_regularity(cusp, annulus, probe_density=128)
        assert fine.tau_M <= 1.05 * coarse.tau_M

    def test_ring_spacing_covers_every_ring(self):
        fine, coarse = circle(64), circle(8)
        assert ring_spacing([fine, coarse]) == pytest.approx(2 * math.sin(math.pi / 8))
        assert ring_spacing([coarse, fine]) == pytest.approx(2 * math.sin(math.pi / 8))

    def test_ring_spacing_includes_the_wrap(self):
        half = circle(8)[:5]
        assert ring_spacing([half]) == pytest.approx(2.0)

    def test_too_few_probes(self, cusp, annulus):
        with pytest.raises(ValidationError):
            estimate_regularity(cusp, annulus, probe_density=4)

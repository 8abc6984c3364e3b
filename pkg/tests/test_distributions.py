"""Attribute densities: normalisation, CDF/moment consistency and inverse-CDF sampling."""

import numpy as np
import pytest
from scipy import integrate, stats

from aigc_incentive.core import QualityModel
from aigc_incentive.distributions import (AttributeDistribution, LinearDensity, PointMass,
                                          TabulatedDensity, make_density)
from aigc_incentive.errors import ParameterError

KINDS = ("LID", "UD", "LDD")


def closed_cdf(kind, upper):
    # hand-integrated CDFs of 2x/U^2, 1/U and 2/U - 2x/U^2
    if kind == "LID":
        return lambda x: np.clip(x / upper, 0, 1) ** 2
    if kind == "UD":
        return lambda x: np.clip(x / upper, 0, 1)
    return lambda x: 2 * np.clip(x / upper, 0, 1) - np.clip(x / upper, 0, 1) ** 2


class TestLinearDensity:
    @pytest.mark.parametrize("kind", KINDS)
    def test_normalised(self, kind):
        d = LinearDensity(kind, 3.0)
        np.testing.assert_allclose(d.total_mass(), 1.0, atol=1e-12)
        mass, _ = integrate.quad(lambda x: float(d.pdf(x)), 0, 3.0)
        np.testing.assert_allclose(mass, 1.0, atol=1e-9)

    @pytest.mark.parametrize("kind", KINDS)
    def test_cdf_and_moment_against_quadrature(self, kind):
        d = LinearDensity(kind, 0.1)
        for x in (0.0, 0.013, 0.05, 0.0999, 0.1, 0.2):
            cdf, _ = integrate.quad(lambda t: float(d.pdf(t)), 0, min(x, 0.1))
            pm, _ = integrate.quad(lambda t: t * float(d.pdf(t)), 0, min(x, 0.1))
            np.testing.assert_allclose(d.cdf(x), cdf, atol=1e-12)
            np.testing.assert_allclose(d.cdf(x), closed_cdf(kind, 0.1)(x), atol=1e-12)
            np.testing.assert_allclose(d.partial_moment(x), pm, atol=1e-12)

    @pytest.mark.parametrize("kind", KINDS)
    def test_ppf_inverts_cdf(self, kind):
        d = LinearDensity(kind, 3.0)
        u = np.linspace(0, 1, 101)
        np.testing.assert_allclose(d.cdf(d.ppf(u)), u, atol=1e-12)

    def test_ldd_inverse_formula(self):
        # [DERIVED] lambda * (1 - sqrt(1 - u))
        d = LinearDensity("LDD", 3.0)
        u = np.array([0.1, 0.5, 0.9, 1.0])
        np.testing.assert_allclose(d.ppf(u), 3.0 * (1 - np.sqrt(1 - u)), rtol=1e-12)
        # first-order expansion near zero, where the textbook form cancels
        np.testing.assert_allclose(d.ppf(1e-12), 3.0 * 0.5e-12, rtol=1e-9)

    @pytest.mark.parametrize("kind", KINDS)
    def test_ks(self, kind):
        # [DERIVED] statistical oracle at significance 0.01
        d = LinearDensity(kind, 3.0)
        draws = d.sample(np.random.default_rng(2024), 10_000)
        assert np.all((draws > 0) & (draws <= 3.0))
        assert stats.kstest(draws, closed_cdf(kind, 3.0)).pvalue > 0.01

    def test_unknown_kind(self):
        with pytest.raises(ParameterError):
            LinearDensity("XYZ", 1.0)

    def test_means(self):
        np.testing.assert_allclose(LinearDensity("LID", 3.0).mean, 2.0)
        np.testing.assert_allclose(LinearDensity("UD", 3.0).mean, 1.5)
        np.testing.assert_allclose(LinearDensity("LDD", 3.0).mean, 1.0)


class TestTabulated:
    def test_normalises_weights(self):
        d = TabulatedDensity((0.0, 1.0, 3.0), (2.0, 1.0))
        np.testing.assert_allclose(d.total_mass(), 1.0, atol=1e-12)
        np.testing.assert_allclose(d.cdf(1.0), 0.5)
        np.testing.assert_allclose(d.partial_moment(3.0), 0.25 + 0.25 * (9 - 1) / 2)

    def test_ppf_inverts(self):
        d = TabulatedDensity((0.0, 0.5, 1.0, 3.0), (1.0, 0.0, 2.0))
        u = np.linspace(0.0, 1.0, 41)
        np.testing.assert_allclose(d.cdf(d.ppf(u)), u, atol=1e-12)

    def test_bad_edges(self):
        with pytest.raises(ParameterError):
            TabulatedDensity((0.0, 2.0, 1.0), (1.0, 1.0))
        with pytest.raises(ParameterError):
            TabulatedDensity((0.0, 1.0), (1.0, 1.0))


class TestPointMass:
    def test_sampling_and_cdf(self):
        d = PointMass(0.04, 0.1)
        assert np.all(d.sample(np.random.default_rng(0), 5) == 0.04)
        assert d.cdf(0.039) == 0.0 and d.cdf(0.04) == 1.0
        assert d.partial_moment(1.0) == 0.04

    def test_outside_support(self):
        with pytest.raises(ParameterError):
            PointMass(0.2, 0.1)


class TestAttributeDistribution:
    def test_make_density_forms(self):
        assert isinstance(make_density("ud", 1.0), LinearDensity)
        assert isinstance(make_density({"kind": "point", "value": 0.5}, 1.0), PointMass)
        t = make_density({"kind": "tabulated", "edges": [0, 0.5, 1.0], "weights": [1, 3]}, 1.0)
        assert isinstance(t, TabulatedDensity)
        with pytest.raises(ParameterError):
            make_density({"kind": "tabulated", "edges": [0, 0.5], "weights": [1]}, 1.0)
        with pytest.raises(ParameterError):
            make_density({"kind": "beta"}, 1.0)

    def test_support_mismatch(self):
        with pytest.raises(ParameterError):
            AttributeDistribution(0.1, 3.0, LinearDensity("UD", 0.2), LinearDensity("UD", 3.0))

    def test_s_max_below_zeta3(self):
        q = QualityModel(3.0, 2.45, 1.05, 0.8)
        AttributeDistribution.of_kind("UD", "UD", 0.1, 3.0).check_against(q)
        wide = AttributeDistribution.of_kind("UD", "UD", 0.7, 3.0)
        with pytest.raises(ParameterError, match="zeta3"):
            wide.check_against(q)
        wide.check_against(q, require_below_zeta3=False)

    def test_sample_deterministic(self):
        dist = AttributeDistribution.of_kind("LID", "LDD", 0.1, 3.0)
        a = dist.sample(np.random.default_rng(5), 50)
        b = dist.sample(np.random.default_rng(5), 50)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

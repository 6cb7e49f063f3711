import math

import numpy as np
import pytest

import netipw as ni
from netipw.exceptions import SingularMatrixError, ValidationError
from netipw.graph import components
from netipw.propensity import StudyData, closed_neighborhoods
from netipw.variance import (
    ThetaVector,
    contrast_se,
    effect_lambda,
    effect_with_ci,
    estimate_theta,
    psi_component,
    psi_matrix,
    sandwich,
    wald_ci,
)


def _case(seed=0, m=30):
    rng = np.random.default_rng(seed)
    net = ni.gen_regular_network(m, 10.0, 4, rng)
    part = components(net)
    z = (rng.random(net.n) < 0.5).astype(float)[:, None]
    table = ni.gen_potential_outcomes(net, z, "stratified", rng)
    a = ni.gen_exposures(net, z, part, "ranef", rng)
    y = ni.observed_outcomes(table, net, a)
    return net, part, StudyData(exposure=a, outcome=y, covariates=z)


class _KnownFlat:
    """Propensity known exactly (no nuisance parameters to estimate)."""

    kind = "ipw1"

    def __init__(self, net, value=0.25):
        self.structure = closed_neighborhoods(net)
        self.value = value

    def param_vector(self):
        return np.zeros(0)

    def replace_params(self, vec):
        return self

    def propensities(self, net, data):
        return np.full(net.n, self.value)


class TestPsiStack:
    def test_single_alpha_length(self):
        net, part, data = _case(1, m=10)
        fit = ni.fit_ipw2(net, data)
        theta = estimate_theta(net, data, fit, part, (0.5,))
        row = psi_component(1, theta, (0.5,), net, data, fit, part)
        assert row.shape == (fit.param_vector().shape[0] + 3,)

    def test_two_alpha_stacked_display_order(self):
        # layout matches the two-strategy stack: score block, then
        # unexposed(a1, a0), exposed(a1, a0), marginal(a1, a0)
        net, part, data = _case(2, m=10)
        fit = ni.fit_ipw2(net, data)
        p = fit.param_vector().shape[0]
        theta = estimate_theta(net, data, fit, part, (0.7, 0.3))
        assert theta.dim == p + 6
        assert theta.target_index("unexposed", 0.7) == p
        assert theta.target_index("unexposed", 0.3) == p + 1
        assert theta.target_index("exposed", 0.7) == p + 2
        assert theta.target_index("marginal", 0.3) == p + 5
        row = psi_component(2, theta, (0.7, 0.3), net, data, fit, part)
        assert row.shape == (p + 6,)

    def test_equations_sum_to_zero_at_solution(self):
        net, part, data = _case(3)
        for fit in (ni.fit_ipw1(net, data), ni.fit_ipw2(net, data)):
            theta = estimate_theta(net, data, fit, part, (0.25, 0.5, 0.75))
            psis = psi_matrix(theta, net, data, fit, part)
            assert np.abs(psis.sum(axis=0)).max() < 1e-6

    def test_targets_match_estimator_module(self):
        net, part, data = _case(4)
        fit = ni.fit_ipw1(net, data)
        theta = estimate_theta(net, data, fit, part, (0.25, 0.5, 0.75))
        for arm in ("unexposed", "exposed", "marginal"):
            for alpha in (0.25, 0.5, 0.75):
                direct = ni.y_hat(fit.kind, arm, alpha, net, data, fit, part).value
                assert theta.target(arm, alpha) == pytest.approx(direct, abs=1e-12)

    def test_mismatched_grid_rejected(self):
        net, part, data = _case(5, m=6)
        fit = ni.fit_ipw2(net, data)
        theta = estimate_theta(net, data, fit, part, (0.5,))
        with pytest.raises(ValidationError):
            psi_component(1, theta, (0.25,), net, data, fit, part)


class TestSandwich:
    def test_known_propensity_reduces_to_component_variance(self):
        # with no nuisance block the covariance of a target is the empirical
        # variance of per-component means divided by m
        net, part, data = _case(6, m=20)
        fit = _KnownFlat(net)
        theta = estimate_theta(net, data, fit, part, (0.5,))
        cov = sandwich(theta, net, data, fit, part)
        k = net.n / part.m
        t0, t1, tm = ni.weighted_terms(fit, net, data, 0.5)
        labels = part.assignment - 1
        for arm_pos, terms in enumerate((t0, t1, tm)):
            g = np.bincount(labels, weights=terms, minlength=part.m) / k
            expected = float(((g - g.mean()) ** 2).mean() / part.m)
            assert cov.sigma[arm_pos, arm_pos] == pytest.approx(expected, abs=1e-12)

    def test_symmetric_and_psd(self):
        net, part, data = _case(7)
        fit = ni.fit_ipw1(net, data)
        theta = estimate_theta(net, data, fit, part, (0.25, 0.5, 0.75))
        cov = sandwich(theta, net, data, fit, part)
        assert cov.max_asymmetry < 1e-10
        assert cov.min_eigenvalue >= -1e-8
        assert cov.psi_sum_max < 1e-6

    def test_meat_is_psd_by_construction(self):
        net, part, data = _case(8, m=12)
        fit = ni.fit_ipw2(net, data)
        theta = estimate_theta(net, data, fit, part, (0.5,))
        psis = psi_matrix(theta, net, data, fit, part)
        meat = psis.T @ psis / part.m
        assert np.linalg.eigvalsh(meat).min() >= -1e-10

    def test_singular_bread_raises_with_condition_number(self):
        class Degenerate(_KnownFlat):
            # a parameter the propensity ignores: its bread column is zero
            def param_vector(self):
                return np.zeros(1)

            def log_propensity(self, net, data):
                return np.log(self.propensities(net, data))

        net, part, data = _case(9, m=8)
        fit = Degenerate(net)
        theta = estimate_theta(net, data, fit, part, (0.5,))
        with pytest.raises(SingularMatrixError) as err:
            sandwich(theta, net, data, fit, part)
        assert err.value.condition_number > 1e10

    def test_requires_two_parts(self):
        net, part, data = _case(10, m=5)
        single = ni.ComponentPartition(
            assignment=np.ones(net.n, dtype=np.intp), m=1, kind="observed-components"
        )
        fit = _KnownFlat(net)
        theta = estimate_theta(net, data, fit, single, (0.5,))
        with pytest.raises(ValidationError):
            sandwich(theta, net, data, fit, single)


class TestContrasts:
    def _theta_cov(self, seed=11):
        net, part, data = _case(seed, m=25)
        fit = ni.fit_ipw1(net, data)
        grid = (0.25, 0.5, 0.75)
        theta = estimate_theta(net, data, fit, part, grid)
        cov = sandwich(theta, net, data, fit, part)
        return theta, cov

    def test_single_coordinate_selector(self):
        theta, cov = self._theta_cov()
        lam = np.zeros(theta.dim)
        idx = theta.target_index("marginal", 0.5)
        lam[idx] = 1.0
        assert contrast_se(cov, lam) == pytest.approx(
            math.sqrt(cov.sigma[idx, idx]), abs=1e-14
        )

    def test_indirect_quadratic_form_expansion(self):
        theta, cov = self._theta_cov()
        lam = effect_lambda(theta, "indirect", 0.75, 0.25)
        i = theta.target_index("unexposed", 0.75)
        j = theta.target_index("unexposed", 0.25)
        expected = cov.sigma[i, i] + cov.sigma[j, j] - 2 * cov.sigma[i, j]
        assert contrast_se(cov, lam) ** 2 == pytest.approx(expected, abs=1e-14)

    def test_duplicated_alpha_contrast_is_zero(self):
        theta, cov = self._theta_cov()
        lam = effect_lambda(theta, "indirect", 0.5, 0.5)
        assert contrast_se(cov, lam) == 0.0

    def test_effect_lambda_matches_score_stack_layout(self):
        theta, _ = self._theta_cov()
        p = theta.n_nuisance
        # two-strategy layout: lambda = (0_p, 1, -1, 0, 0, 0, 0)
        theta2 = ThetaVector(theta.nuisance, (0.75, 0.25), np.zeros(6))
        lam = effect_lambda(theta2, "indirect", 0.75, 0.25)
        expected = np.concatenate([np.zeros(p), [1.0, -1.0, 0, 0, 0, 0]])
        assert np.array_equal(lam, expected)

    def test_length_mismatch_rejected(self):
        theta, cov = self._theta_cov()
        with pytest.raises(ValidationError):
            contrast_se(cov, np.zeros(theta.dim + 1))


class TestWaldCi:
    def test_standard_normal_quantile(self):
        lo, hi = wald_ci(0.0, 1.0, 0.95)
        assert lo == pytest.approx(-1.959964, abs=1e-6)
        assert hi == pytest.approx(1.959964, abs=1e-6)

    def test_interval_identity_matches_reported_shape(self):
        # reported shape: estimate -0.18 with CI about (-0.49, 0.14)
        se = (0.14 - (-0.49)) / (2 * 1.959963984540054)
        lo, hi = wald_ci(-0.175, se, 0.95)
        assert lo == pytest.approx(-0.49, abs=5e-3)
        assert hi == pytest.approx(0.14, abs=5e-3)

    def test_zero_se_degenerates(self):
        assert wald_ci(0.3, 0.0) == (0.3, 0.3)

    def test_negative_se_rejected(self):
        with pytest.raises(ValidationError):
            wald_ci(0.0, -1.0)


class TestEffectWithCi:
    def test_ci_contains_estimate_and_se_nonnegative(self):
        net, part, data = _case(12, m=25)
        fit = ni.fit_ipw2(net, data)
        grid = (0.25, 0.5, 0.75)
        theta = estimate_theta(net, data, fit, part, grid)
        cov = sandwich(theta, net, data, fit, part)
        for kind, a1, a0 in ni.effect_pairs(grid, ("direct", "indirect", "total", "overall")):
            est = effect_with_ci(theta, cov, "ipw2", kind, a1, a0)
            assert est.se >= 0
            assert est.ci[0] <= est.estimate <= est.ci[1]

    def test_partition_changes_variance_not_point(self):
        net, data = ni.trip_like_fixture()
        part = components(net)
        fit = ni.fit_ipw1(net, data)
        comm = ni.fast_greedy_communities(net)
        assert comm.m > part.m
        grid = (0.3, 0.6)
        th_obs = estimate_theta(net, data, fit, part, grid)
        th_com = estimate_theta(net, data, fit, comm, grid)
        assert np.allclose(th_obs.targets, th_com.targets, atol=1e-12)
        cov_obs = sandwich(th_obs, net, data, fit, part)
        cov_com = sandwich(th_com, net, data, fit, comm)
        assert not np.allclose(cov_obs.sigma, cov_com.sigma)

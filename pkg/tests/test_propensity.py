import math

import numpy as np
import pytest
from scipy.special import expit
from sklearn.linear_model import LogisticRegression

import netipw as ni
from netipw.exceptions import IsolateError, SeparationError, ValidationError
from netipw.graph import components, load_network
from netipw.propensity import (
    Ipw1Fit,
    Ipw2Fit,
    StudyData,
    closed_neighborhoods,
    component_groups,
    eval_f1,
    eval_f2,
    fit_ipw1,
    fit_ipw2,
    neighbor_exposure_counts,
    score,
    score_components,
    validate_study,
)

from conftest import clique_edges


def _sim_data(m=50, seed=0, mechanism="ranef"):
    rng = np.random.default_rng(seed)
    net = ni.gen_regular_network(m, 10.0, 4, rng)
    part = components(net)
    z = (rng.random(net.n) < 0.5).astype(float)[:, None]
    table = ni.gen_potential_outcomes(net, z, "stratified", rng)
    a = ni.gen_exposures(net, z, part, mechanism, rng)
    y = ni.observed_outcomes(table, net, a)
    return net, part, StudyData(exposure=a, outcome=y, covariates=z)


def dense_f1_oracle(eta0_members, a_members, psi, n_points=100_000):
    """Trapezoid integration of the latent-intercept likelihood over b."""
    if psi == 0:
        return float(np.exp((a_members * eta0_members
                             - np.logaddexp(0.0, eta0_members)).sum()))
    half = 10.0 * math.sqrt(psi)
    b = np.linspace(-half, half, n_points)
    eta = eta0_members[:, None] + b[None, :]
    ll = (a_members[:, None] * eta - np.logaddexp(0.0, eta)).sum(axis=0)
    dens = np.exp(-0.5 * b**2 / psi) / math.sqrt(2 * math.pi * psi)
    return float(np.trapezoid(np.exp(ll) * dens, b))


def _star_fit(d, gamma, psi, exposures, quad=25):
    """Fit object on a star of degree d with given parameters and exposures."""
    net = load_network([("c", str(i)) for i in range(d)])
    z = np.linspace(-0.7, 0.9, net.n)[:, None]
    data = StudyData(
        exposure=np.asarray(exposures, dtype=np.int8),
        outcome=np.zeros(net.n),
        covariates=z,
    )
    fit = Ipw1Fit(
        gamma=np.asarray(gamma, dtype=float),
        psi=psi,
        loglik=0.0,
        quadrature_nodes=quad,
        structure=closed_neighborhoods(net),
        psi_fixed=(psi == 0.0),
    )
    return net, data, fit


class TestValidation:
    def test_isolates_rejected_by_name(self):
        net = ni.Network(["a", "b", "c"], [{1}, {0}, set()])
        data = StudyData(
            exposure=np.array([1, 0, 0]),
            outcome=np.zeros(3),
            covariates=np.zeros((3, 1)),
        )
        with pytest.raises(IsolateError, match="c"):
            validate_study(net, data)

    def test_misaligned_rows(self):
        net = load_network([("a", "b")])
        data = StudyData(
            exposure=np.array([1, 0, 1]),
            outcome=np.zeros(3),
            covariates=np.zeros((3, 1)),
        )
        with pytest.raises(ValidationError):
            validate_study(net, data)

    def test_nonbinary_exposure(self):
        net = load_network([("a", "b")])
        data = StudyData(
            exposure=np.array([2, 0]),
            outcome=np.zeros(2),
            covariates=np.zeros((2, 1)),
        )
        with pytest.raises(ValidationError):
            validate_study(net, data)


class TestInterferenceStructure:
    def test_closed_neighborhoods_match_adjacency(self):
        net, _, data = _sim_data(m=5, seed=1)
        struct = closed_neighborhoods(net)
        s = neighbor_exposure_counts(struct, data.exposure)
        for i in range(net.n):
            assert s[i] == data.exposure[net.adjacency[i]].sum()
            assert struct.set_size[i] == net.degrees[i]

    def test_component_groups_share_one_group(self):
        net, part, data = _sim_data(m=5, seed=2)
        struct = component_groups(net, part)
        s = neighbor_exposure_counts(struct, data.exposure)
        for nu, members in enumerate(part.parts):
            total = data.exposure[members].sum()
            for i in members:
                assert struct.node_group[i] == nu
                assert s[i] == total - data.exposure[i]
                assert struct.set_size[i] == len(members) - 1


class TestF1Evaluation:
    def test_psi_zero_is_product_of_logistics(self):
        # gamma = 0 makes every p_j = 1/2; closed neighborhood of size d+1
        net, data, fit = _star_fit(4, [0.0, 0.0], 0.0, [1, 0, 1, 0, 1])
        center = net.index_of("c")
        d = int(net.degrees[center])
        assert eval_f1(fit, net, data, center) == pytest.approx(
            0.5 ** (d + 1), abs=1e-12
        )

    def test_degree_two_half_probability_case(self):
        net = load_network([("c", "x"), ("c", "y")])
        data = StudyData(
            exposure=np.array([1, 0, 1]),
            outcome=np.zeros(3),
            covariates=np.zeros((3, 1)),
        )
        fit = Ipw1Fit(
            gamma=np.zeros(2),
            psi=0.0,
            loglik=0.0,
            quadrature_nodes=25,
            structure=closed_neighborhoods(net),
            psi_fixed=True,
        )
        assert eval_f1(fit, net, data, net.index_of("c")) == pytest.approx(0.125)

    @pytest.mark.parametrize("psi", [0.1, 0.5, 1.0])
    @pytest.mark.parametrize("d", [1, 2, 3, 4, 5, 6])
    def test_quadrature_matches_dense_oracle(self, psi, d):
        rng = np.random.default_rng(d * 17 + int(psi * 10))
        exposures = rng.integers(0, 2, d + 1)
        net, data, fit = _star_fit(d, [0.3, -0.6], psi, exposures)
        center = net.index_of("c")
        members = [center] + [int(j) for j in net.adjacency[center]]
        eta0 = data.design_matrix() @ fit.gamma
        oracle = dense_f1_oracle(eta0[members], data.exposure[members].astype(float), psi)
        assert eval_f1(fit, net, data, center) == pytest.approx(oracle, abs=1e-6)

    @pytest.mark.parametrize("psi", [0.1, 0.5, 1.0])
    def test_quadrature_node_convergence(self, psi):
        rng = np.random.default_rng(11)
        exposures = rng.integers(0, 2, 5)
        net, data, fit25 = _star_fit(4, [0.3, -0.6], psi, exposures, quad=25)
        _, _, fit51 = _star_fit(4, [0.3, -0.6], psi, exposures, quad=51)
        center = net.index_of("c")
        v25 = eval_f1(fit25, net, data, center)
        v51 = eval_f1(fit51, net, data, center)
        assert abs(v25 - v51) < 1e-8

    def test_latent_variance_changes_all_ones_probability(self):
        net, data, fit0 = _star_fit(3, [0.2, 0.4], 0.0, [1, 1, 1, 1])
        _, _, fit1 = _star_fit(3, [0.2, 0.4], 0.8, [1, 1, 1, 1])
        center = net.index_of("c")
        v0 = eval_f1(fit0, net, data, center)
        v1 = eval_f1(fit1, net, data, center)
        assert abs(v1 - v0) > 1e-3
        # oracle confirms the direction of the shift
        members = [center] + [int(j) for j in net.adjacency[center]]
        eta0 = data.design_matrix() @ fit1.gamma
        oracle = dense_f1_oracle(eta0[members], np.ones(4), 0.8)
        assert v1 == pytest.approx(oracle, abs=1e-6)

    def test_isolate_rejected(self):
        net = ni.Network(["a", "b", "c"], [{1}, {0}, set()])
        data = StudyData(
            exposure=np.array([1, 0, 0]),
            outcome=np.zeros(3),
            covariates=np.zeros((3, 1)),
        )
        fit = Ipw1Fit(
            gamma=np.zeros(2),
            psi=0.2,
            loglik=0.0,
            quadrature_nodes=25,
            structure=closed_neighborhoods(net),
        )
        with pytest.raises(IsolateError):
            eval_f1(fit, net, data, 2)


class TestFitIpw1:
    def test_recovers_generating_coefficients(self):
        net, part, data = _sim_data(m=100, seed=5)
        fit = fit_ipw1(net, data)
        assert abs(fit.gamma[0] - 0.7) < 0.15
        assert abs(fit.gamma[1] + 1.4) < 0.15
        assert fit.psi >= 0.0
        assert math.isfinite(fit.loglik)

    def test_fixed_psi_zero_equals_plain_logistic_on_regular_graph(self):
        # equal degrees make every node enter the composite the same number
        # of times, so the weighted likelihood matches unweighted logistic
        net, part, data = _sim_data(m=30, seed=6)
        fit = fit_ipw1(net, data, fix_psi=0.0)
        skl = LogisticRegression(penalty=None, tol=1e-10, max_iter=1000)
        skl.fit(data.covariates, data.exposure)
        assert fit.gamma[0] == pytest.approx(float(skl.intercept_[0]), abs=1e-5)
        assert fit.gamma[1] == pytest.approx(float(skl.coef_[0][0]), abs=1e-5)

    def test_all_exposed_is_separation(self):
        net = load_network(clique_edges([0, 1, 2, 3]))
        data = StudyData(
            exposure=np.ones(4, dtype=np.int8),
            outcome=np.zeros(4),
            covariates=np.linspace(0, 1, 4)[:, None],
        )
        with pytest.raises(SeparationError):
            fit_ipw1(net, data)

    def test_rank_deficient_design(self):
        net, _, data = _sim_data(m=5, seed=7)
        dup = StudyData(
            exposure=data.exposure,
            outcome=data.outcome,
            covariates=np.hstack([data.covariates, data.covariates]),
        )
        with pytest.raises(ValidationError):
            fit_ipw1(net, dup)


class TestFitIpw2:
    def test_recovers_individual_model(self):
        net, part, data = _sim_data(m=100, seed=8)
        fit = fit_ipw2(net, data)
        assert abs(fit.gamma[0] - 0.7) < 0.15
        assert abs(fit.gamma[1] + 1.4) < 0.15

    def test_null_slope_ci_covers_zero(self):
        # exposure independent of the covariate: the sandwich CI for the
        # individual-model slope should cover zero in most replicates
        hits = 0
        for r in range(100):
            rng = np.random.default_rng(1000 + r)
            net = ni.gen_regular_network(40, 8.0, 4, rng)
            part = components(net)
            z = rng.normal(0.0, 1.0, net.n)[:, None]
            a = (rng.random(net.n) < 0.4).astype(np.int8)
            if a.min() == a.max():
                continue
            y = rng.random(net.n)
            data = StudyData(exposure=a, outcome=y, covariates=z)
            fit = fit_ipw2(net, data)
            theta = ni.estimate_theta(net, data, fit, part, (0.5,))
            cov = ni.sandwich(theta, net, data, fit, part)
            slope = fit.gamma[1]
            se = math.sqrt(cov.sigma[1, 1])
            if abs(slope) <= 1.959963984540054 * se:
                hits += 1
        assert hits >= 90

    def test_all_unexposed_is_separation(self):
        net = load_network(clique_edges([0, 1, 2, 3]))
        data = StudyData(
            exposure=np.zeros(4, dtype=np.int8),
            outcome=np.zeros(4),
            covariates=np.linspace(0, 1, 4)[:, None],
        )
        with pytest.raises(SeparationError):
            fit_ipw2(net, data)

    @pytest.mark.parametrize("aggregator", ["mean", "sum", "proportion-positive"])
    def test_aggregators_fit(self, aggregator):
        net, _, data = _sim_data(m=20, seed=9)
        fit = fit_ipw2(net, data, aggregator=aggregator)
        assert np.isfinite(fit.param_vector()).all()


class TestF2Evaluation:
    def _manual_fit(self, net, p1, p2):
        # intercept-only design: delta[0] and gamma[0] pin p1 and p2
        return Ipw2Fit(
            gamma=np.array([math.log(p2 / (1 - p2))]),
            beta=0.0,
            delta=np.array([math.log(p1 / (1 - p1))]),
            aggregator="mean",
            loglik=0.0,
            structure=closed_neighborhoods(net),
        )

    def test_half_probabilities(self):
        net = load_network([("c", "x"), ("c", "y")])
        data = StudyData(
            exposure=np.array([1, 1, 0]),  # c exposed, S_c = 1
            outcome=np.zeros(3),
            covariates=np.zeros((3, 0)),
        )
        fit = self._manual_fit(net, 0.5, 0.5)
        assert eval_f2(fit, net, data, net.index_of("c")) == pytest.approx(0.25)

    def test_generic_arithmetic(self):
        net = load_network([("c", str(i)) for i in range(4)])
        exposure = np.array([0, 1, 1, 0, 0], dtype=np.int8)  # c unexposed, S_c=2
        data = StudyData(
            exposure=exposure, outcome=np.zeros(5), covariates=np.zeros((5, 0))
        )
        fit = self._manual_fit(net, 0.3, 0.6)
        expected = 6 * 0.3**2 * 0.7**2 * 0.4
        assert eval_f2(fit, net, data, net.index_of("c")) == pytest.approx(
            expected, abs=1e-12
        )

    def test_weight_cancellation_identity(self):
        # [pi(S;alpha)/f2] * f2 == pi(S;alpha); the binomial coefficients in
        # pi(S;alpha)/f21 cancel algebraically
        from netipw.policy import pi_count

        net = load_network([("c", str(i)) for i in range(4)])
        exposure = np.array([1, 1, 0, 1, 0], dtype=np.int8)
        data = StudyData(
            exposure=exposure, outcome=np.zeros(5), covariates=np.zeros((5, 0))
        )
        fit = self._manual_fit(net, 0.35, 0.55)
        c = net.index_of("c")
        f2 = eval_f2(fit, net, data, c)
        s, d = 2, 4
        ratio = pi_count(s, d, 0.4) / f2
        assert ratio * f2 == pytest.approx(pi_count(s, d, 0.4), abs=1e-14)
        kernel = 0.35**s * 0.65 ** (d - s) * 0.55  # no comb, A=1 -> p2
        assert ratio == pytest.approx(
            ni.pi_vector(s, d, 0.4) / kernel, rel=1e-12
        )


class TestScores:
    def test_scores_sum_to_zero_at_mle(self):
        net, part, data = _sim_data(m=40, seed=10)
        for fit in (fit_ipw1(net, data), fit_ipw2(net, data)):
            total = score_components(fit, net, data, part).sum(axis=0)
            assert np.abs(total).max() < 1e-4

    def test_matches_analytic_logistic_score_at_psi_zero(self):
        net, part, data = _sim_data(m=10, seed=11)
        fit = fit_ipw1(net, data, fix_psi=0.0)
        gamma = fit.gamma + np.array([0.05, -0.1])  # move off the optimum
        shifted = fit.replace_params(gamma)
        rows = score_components(shifted, net, data, part)
        # with psi = 0 a node's log f is the sum of X'(A - p) terms over its
        # closed neighborhood, so the analytic oracle is a double loop
        x = data.design_matrix()
        p = expit(x @ gamma)
        k = net.n / part.m
        resid = (data.exposure - p)[:, None] * x
        expected = np.zeros_like(rows)
        for nu, members in enumerate(part.parts):
            total = np.zeros(x.shape[1])
            for i in members:
                group = [i] + [int(j) for j in net.adjacency[i]]
                total += resid[group].sum(axis=0)
            expected[nu] = total / k
        assert np.abs(rows - expected).max() < 1e-6

    def test_perturbation_flips_score_sign(self):
        net, part, data = _sim_data(m=30, seed=12)
        fit = fit_ipw1(net, data)
        params = fit.param_vector()
        up = params.copy()
        up[0] += 0.1
        dn = params.copy()
        dn[0] -= 0.1
        s_up = score_components(fit.replace_params(up), net, data, part).sum(axis=0)
        s_dn = score_components(fit.replace_params(dn), net, data, part).sum(axis=0)
        assert s_up[0] * s_dn[0] < 0
        assert s_up[0] < 0 < s_dn[0]

    def test_score_wrapper_indexes_parts(self):
        net, part, data = _sim_data(m=6, seed=13)
        fit = fit_ipw2(net, data)
        rows = score_components(fit, net, data, part)
        assert np.allclose(score(fit, net, data, part, 1), rows[0])
        assert rows.shape == (part.m, fit.param_vector().shape[0])

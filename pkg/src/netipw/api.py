"""Scikit-learn style front end over the estimation pipeline.

``NetworkIPWEstimator`` composes the full chain (propensity fit, potential
outcome targets, sandwich covariance, effect contrasts) behind a
``fit``/``get_params`` surface so it plugs into sklearn-style tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import variance
from .estimator import EFFECT_KINDS
from .exceptions import ValidationError
from .graph import Network, components, fast_greedy_communities, load_network
from .propensity import StudyData, fit_ipw1, fit_ipw2, validate_study

__all__ = ["NetworkIPWEstimator", "estimate_effects", "effect_pairs"]


def effect_pairs(alpha_grid, effects):
    """Ordered (kind, alpha1, alpha0) rows for a coverage grid.

    Direct effects contrast arms at each single alpha; the two-alpha effects
    use every ordered pair with alpha1 > alpha0.
    """
    grid = sorted(set(float(a) for a in alpha_grid))
    pairs = []
    for kind in EFFECT_KINDS:
        if kind not in effects:
            continue
        if kind == "direct":
            pairs.extend((kind, a, a) for a in grid)
        else:
            pairs.extend(
                (kind, a1, a0)
                for a1 in grid
                for a0 in grid
                if a1 > a0
            )
    return pairs


def estimate_effects(
    net,
    data,
    method="ipw1",
    alpha_grid=(0.25, 0.5, 0.75),
    effects=EFFECT_KINDS,
    partition=None,
    ci_level=0.95,
    aggregator="mean",
    quadrature_nodes=25,
    weight_floor=1e-10,
    truncate_quantile=None,
    structure=None,
):
    """Full pipeline for one estimator; returns (fit, theta, cov, results)."""
    if partition is None:
        partition = components(net)
    if method == "ipw1":
        fit = fit_ipw1(
            net, data, structure=structure, quadrature_nodes=quadrature_nodes
        )
    elif method == "ipw2":
        fit = fit_ipw2(net, data, aggregator=aggregator, structure=structure)
    else:
        raise ValidationError(f"unknown estimator {method!r}")
    weight_kw = {"weight_floor": weight_floor, "truncate_quantile": truncate_quantile}
    theta = variance.estimate_theta(net, data, fit, partition, alpha_grid, **weight_kw)
    cov = variance.sandwich(theta, net, data, fit, partition, **weight_kw)
    results = [
        variance.effect_with_ci(theta, cov, method, kind, a1, a0, level=ci_level)
        for kind, a1, a0 in effect_pairs(alpha_grid, effects)
    ]
    return fit, theta, cov, results


class NetworkIPWEstimator(BaseEstimator):
    """Estimate direct/spillover/total/overall effects on an observed network.

    Parameters
    ----------
    method : {"ipw1", "ipw2"}
        Propensity model: mixed-model joint score or factored
        individual-times-binomial score.
    alpha_grid : sequence of float in (0, 1)
        Counterfactual coverage levels; all levels are stacked jointly so
        cross-level covariances feed the contrast standard errors.
    effects : subset of {"direct", "indirect", "total", "overall"}
    partition : {"observed", "community"}
        Independence units for the variance: observed components or
        fast-greedy modularity communities.
    ci_level : float
        Wald confidence level.
    aggregator : {"mean", "sum", "proportion-positive"}
        Neighbor-covariate aggregation for the factored model.
    quadrature_nodes : int
        Gauss-Hermite nodes for the mixed-model integral.
    weight_floor : float
        Hard positivity floor on evaluated propensities.
    truncate_quantile : float or None
        Opt-in weight truncation quantile; replaces the hard floor error.
    """

    def __init__(
        self,
        method="ipw1",
        alpha_grid=(0.25, 0.5, 0.75),
        effects=EFFECT_KINDS,
        partition="observed",
        ci_level=0.95,
        aggregator="mean",
        quadrature_nodes=25,
        weight_floor=1e-10,
        truncate_quantile=None,
    ):
        self.method = method
        self.alpha_grid = alpha_grid
        self.effects = effects
        self.partition = partition
        self.ci_level = ci_level
        self.aggregator = aggregator
        self.quadrature_nodes = quadrature_nodes
        self.weight_floor = weight_floor
        self.truncate_quantile = truncate_quantile

    def fit(self, network, data):
        """Fit the propensity model and estimate all requested contrasts.

        ``network`` is a :class:`Network` or an iterable of (id, id) edge
        rows; ``data`` is a :class:`StudyData` aligned with the network.
        """
        net = network if isinstance(network, Network) else load_network(network)
        if not isinstance(data, StudyData):
            raise ValidationError("data must be a StudyData instance")
        validate_study(net, data)
        if self.partition == "community":
            part = fast_greedy_communities(net)
        elif self.partition == "observed":
            part = components(net)
        else:
            raise ValidationError("partition must be 'observed' or 'community'")

        fit, theta, cov, results = estimate_effects(
            net,
            data,
            method=self.method,
            alpha_grid=tuple(self.alpha_grid),
            effects=tuple(self.effects),
            partition=part,
            ci_level=self.ci_level,
            aggregator=self.aggregator,
            quadrature_nodes=self.quadrature_nodes,
            weight_floor=self.weight_floor,
            truncate_quantile=self.truncate_quantile,
        )
        self.network_ = net
        self.data_ = data
        self.partition_ = part
        self.propensity_fit_ = fit
        self.theta_ = theta
        self.sigma_ = cov
        self.results_ = results
        return self

    def _check_fitted(self):
        if not hasattr(self, "results_"):
            raise NotFittedError("call fit() before requesting results")

    def potential_outcome(self, arm, alpha):
        """Point estimate and standard error for one (arm, alpha) target."""
        self._check_fitted()
        idx = self.theta_.target_index(arm, alpha)
        se = float(np.sqrt(max(self.sigma_.sigma[idx, idx], 0.0)))
        return self.theta_.target(arm, alpha), se

    def effect_table(self):
        """Effect rows as plain records (one per estimator/effect/alpha pair)."""
        self._check_fitted()
        return [e.to_record() for e in self.results_]

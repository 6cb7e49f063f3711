"""Closed-form sandwich variance from stacked component-level estimating equations.

The stacked parameter is theta = (nuisance propensity parameters; then, for
each allocation strategy on the grid, the unexposed, exposed, and marginal
average potential outcomes).  Each partition part contributes one estimating
function, so parts act as the independence units.  The bread matrix is built
by central finite differences in the nuisance block only; the derivative of
the target equations with respect to the targets is exactly minus the
identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import ndtri

from .estimator import EffectEstimate, weighted_terms
from .exceptions import SingularMatrixError, ValidationError
from .policy import _alpha_of
from .propensity import score_components

__all__ = [
    "ThetaVector",
    "SandwichCovariance",
    "estimate_theta",
    "psi_matrix",
    "psi_component",
    "sandwich",
    "contrast_se",
    "wald_ci",
    "effect_lambda",
    "effect_with_ci",
]

ARM_ORDER = ("unexposed", "exposed", "marginal")


@dataclass(frozen=True)
class ThetaVector:
    """Stacked parameter: nuisance block then target block.

    Targets are laid out arm-major: all unexposed averages over the alpha
    grid, then all exposed averages, then all marginal averages.
    """

    nuisance: np.ndarray
    alpha_grid: tuple
    targets: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "nuisance", np.asarray(self.nuisance, dtype=float)
        )
        object.__setattr__(self, "targets", np.asarray(self.targets, dtype=float))
        object.__setattr__(self, "alpha_grid", tuple(float(a) for a in self.alpha_grid))
        if self.targets.shape[0] != 3 * len(self.alpha_grid):
            raise ValidationError("target block does not match the alpha grid")

    @property
    def n_nuisance(self):
        return self.nuisance.shape[0]

    @property
    def dim(self):
        return self.n_nuisance + self.targets.shape[0]

    def stacked(self):
        return np.concatenate([self.nuisance, self.targets])

    def target_index(self, arm, alpha):
        """Absolute index of a target coordinate in the stacked vector."""
        alpha = _alpha_of(alpha)
        try:
            g = self.alpha_grid.index(alpha)
        except ValueError:
            raise ValidationError(f"alpha {alpha} is not on the grid {self.alpha_grid}")
        blocks = len(self.alpha_grid)
        return self.n_nuisance + ARM_ORDER.index(arm) * blocks + g

    def target(self, arm, alpha):
        return float(self.stacked()[self.target_index(arm, alpha)])


@dataclass(frozen=True)
class SandwichCovariance:
    """Empirical sandwich covariance of the stacked parameter, scaled by 1/m."""

    sigma: np.ndarray
    m: int
    condition_number: float = math.nan
    psi_sum_max: float = math.nan  # max-norm of the summed estimating equations

    @property
    def max_asymmetry(self):
        return float(np.abs(self.sigma - self.sigma.T).max())

    @property
    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh((self.sigma + self.sigma.T) / 2.0).min())


def _target_values(net, data, fit, partition, alpha_grid, **weight_kw):
    """Target block and the per-node term arrays reused by the psi stack."""
    k = net.n / partition.m
    f = fit.propensities(net, data)
    per_alpha = []
    for alpha in alpha_grid:
        per_alpha.append(
            weighted_terms(fit, net, data, alpha, propensities=f, **weight_kw)
        )
    blocks = []
    for arm_pos in range(3):  # unexposed, exposed, marginal term order
        blocks.extend(
            float(per_alpha[g][arm_pos].sum() / (partition.m * k))
            for g in range(len(alpha_grid))
        )
    return np.asarray(blocks), per_alpha


def estimate_theta(net, data, fit, partition, alpha_grid, **weight_kw):
    """Stack the fitted nuisance parameters with the target estimates."""
    alpha_grid = tuple(_alpha_of(a) for a in alpha_grid)
    targets, _ = _target_values(net, data, fit, partition, alpha_grid, **weight_kw)
    return ThetaVector(
        nuisance=fit.param_vector(), alpha_grid=alpha_grid, targets=targets
    )


def psi_matrix(theta, net, data, fit, partition, fd_step=1e-5, **weight_kw):
    """All parts' estimating equations at ``theta``; returns (m, dim).

    Row nu stacks the part's propensity score block and, per allocation
    strategy, the three centered target equations.
    """
    fit_at = fit.replace_params(theta.nuisance)
    scores = score_components(fit_at, net, data, partition, fd_step=fd_step)
    k = net.n / partition.m
    labels = partition.assignment - 1
    _, per_alpha = _target_values(
        net, data, fit_at, partition, theta.alpha_grid, **weight_kw
    )
    cols = [scores]
    blocks = len(theta.alpha_grid)
    for arm_pos in range(3):
        for g in range(blocks):
            part_sums = (
                np.bincount(labels, weights=per_alpha[g][arm_pos], minlength=partition.m)
                / k
            )
            target = theta.targets[arm_pos * blocks + g]
            cols.append((part_sums - target)[:, None])
    return np.hstack(cols)


def psi_component(nu, theta, alpha_grid, net, data, fit, partition, k=None, **kw):
    """Estimating-equation vector of part ``nu`` (1-based)."""
    if partition.m < 2:
        raise ValidationError("variance estimation needs at least 2 parts")
    if tuple(_alpha_of(a) for a in alpha_grid) != theta.alpha_grid:
        raise ValidationError("alpha grid does not match the theta vector")
    return psi_matrix(theta, net, data, fit, partition, **kw)[nu - 1]


def sandwich(
    theta,
    net,
    data,
    fit,
    partition,
    fd_step=1e-5,
    cond_limit=1e10,
    **weight_kw,
):
    """Empirical sandwich covariance (1/m) A^-1 B A^-T of the stacked theta.

    A's nuisance columns come from central finite differences of the stacked
    equations with step ``fd_step * max(1, |theta_j|)``; its target block is
    the identity.  Raises :class:`SingularMatrixError` when A's condition
    number exceeds ``cond_limit``.
    """
    if partition.m < 2:
        raise ValidationError("variance estimation needs at least 2 parts")
    m = partition.m
    dim = theta.dim
    p = theta.n_nuisance

    psis = psi_matrix(theta, net, data, fit, partition, fd_step=fd_step, **weight_kw)
    bread = np.zeros((dim, dim))
    bread[p:, p:] = np.eye(dim - p)
    base = theta.stacked()
    for j in range(p):
        h = fd_step * max(1.0, abs(base[j]))
        up = base.copy()
        up[j] += h
        dn = base.copy()
        dn[j] -= h
        theta_up = ThetaVector(up[:p], theta.alpha_grid, up[p:])
        theta_dn = ThetaVector(dn[:p], theta.alpha_grid, dn[p:])
        psi_up = psi_matrix(
            theta_up, net, data, fit, partition, fd_step=fd_step, **weight_kw
        )
        psi_dn = psi_matrix(
            theta_dn, net, data, fit, partition, fd_step=fd_step, **weight_kw
        )
        bread[:, j] = -(psi_up.mean(axis=0) - psi_dn.mean(axis=0)) / (2.0 * h)

    cond = float(np.linalg.cond(bread))
    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularMatrixError(cond)
    q, r = np.linalg.qr(bread)
    bread_inv = solve_triangular(r, q.T)
    meat = psis.T @ psis / m
    sigma = bread_inv @ meat @ bread_inv.T / m
    return SandwichCovariance(
        sigma=sigma,
        m=m,
        condition_number=cond,
        psi_sum_max=float(np.abs(psis.sum(axis=0)).max()),
    )


def contrast_se(cov, lam):
    """Standard error of a linear contrast lam' theta."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape[0] != cov.sigma.shape[0]:
        raise ValidationError(
            f"selector length {lam.shape[0]} does not match theta dim {cov.sigma.shape[0]}"
        )
    var = float(lam @ cov.sigma @ lam)
    if var < -1e-8:
        raise ValidationError(f"contrast variance {var:.3e} is negative")
    return math.sqrt(max(var, 0.0))


def wald_ci(estimate, se, level=0.95):
    """Wald confidence interval estimate +/- z * se."""
    if se < 0:
        raise ValidationError("standard error must be nonnegative")
    if not (0.0 < level < 1.0):
        raise ValidationError("confidence level must be inside (0, 1)")
    z = float(ndtri((1.0 + level) / 2.0))
    return (estimate - z * se, estimate + z * se)


_EFFECT_OPERANDS = {
    "direct": (("exposed", 1), ("unexposed", 1)),
    "indirect": (("unexposed", 1), ("unexposed", 0)),
    "total": (("exposed", 1), ("unexposed", 0)),
    "overall": (("marginal", 1), ("marginal", 0)),
}


def effect_lambda(theta, kind, alpha1, alpha0):
    """Delta-method selector vector for one effect contrast."""
    if kind not in _EFFECT_OPERANDS:
        raise ValidationError(f"unknown effect kind {kind!r}")
    if kind == "direct" and _alpha_of(alpha1) != _alpha_of(alpha0):
        raise ValidationError("direct effects contrast arms at a single alpha")
    (arm_hi, which_hi), (arm_lo, which_lo) = _EFFECT_OPERANDS[kind]
    alphas = (alpha0, alpha1)
    lam = np.zeros(theta.dim)
    lam[theta.target_index(arm_hi, alphas[which_hi])] += 1.0
    lam[theta.target_index(arm_lo, alphas[which_lo])] -= 1.0
    return lam


def effect_with_ci(theta, cov, estimator_kind, kind, alpha1, alpha0, level=0.95):
    """Effect estimate with sandwich standard error and Wald interval."""
    lam = effect_lambda(theta, kind, alpha1, alpha0)
    estimate = float(lam @ theta.stacked())
    se = contrast_se(cov, lam)
    return EffectEstimate(
        estimator=estimator_kind,
        kind=kind,
        alpha1=_alpha_of(alpha1),
        alpha0=_alpha_of(alpha0),
        estimate=estimate,
        se=se,
        ci=wald_ci(estimate, se, level),
    )

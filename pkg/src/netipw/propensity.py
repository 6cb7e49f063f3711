"""Joint exposure propensity models and their scores.

Two models are supported:

* ``ipw1``: the observed own-plus-neighbor exposure vector is modeled with a
  logistic regression sharing one latent normal intercept per interference
  group, integrated out by Gauss-Hermite quadrature.  Parameters ``gamma``
  (log-odds coefficients) and ``psi`` (latent-intercept variance) maximize a
  composite log-likelihood with one term per group; inference downstream uses
  the sandwich covariance, as composite likelihood requires.
* ``ipw2``: the joint propensity factors into an individual Bernoulli
  logistic model and a binomial model for the number of exposed neighbors
  given own exposure and aggregated neighbor covariates.

Interference groups default to closed neighborhoods (node plus its nearest
neighbors).  A component-level grouping is available as the
partial-interference baseline used for variance comparisons.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logsumexp

from .exceptions import (
    ConvergenceError,
    EmptyInputError,
    IsolateError,
    SeparationError,
    ValidationError,
)
from .policy import log_binom_coef

__all__ = [
    "StudyData",
    "Interference",
    "Ipw1Fit",
    "Ipw2Fit",
    "validate_study",
    "closed_neighborhoods",
    "component_groups",
    "neighbor_exposure_counts",
    "fit_ipw1",
    "fit_ipw2",
    "eval_f1",
    "eval_f2",
    "score",
    "score_components",
    "read_study_csv",
]

PROB_EPS = 1e-10  # separation floor on fitted probabilities
PSI_BOUNDARY = 1e-4  # latent variance below this collapses to the psi=0 model


@dataclass(frozen=True)
class StudyData:
    """Per-node exposure, outcome, and covariates aligned with a Network.

    ``covariates`` excludes the intercept; the design matrix adds a leading
    column of ones.
    """

    exposure: np.ndarray
    outcome: np.ndarray
    covariates: np.ndarray

    def __post_init__(self):
        # copies decouple the frozen instance from caller-owned buffers
        object.__setattr__(self, "exposure", np.array(self.exposure, dtype=np.int8))
        object.__setattr__(self, "outcome", np.array(self.outcome, dtype=float))
        z = np.array(self.covariates, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        object.__setattr__(self, "covariates", z)
        for arr in (self.exposure, self.outcome, self.covariates):
            arr.setflags(write=False)

    @property
    def n(self):
        return self.exposure.shape[0]

    def design_matrix(self):
        return np.hstack([np.ones((self.n, 1)), self.covariates])


def validate_study(net, data, *, allow_isolates=False):
    """Check study data against the network; raises on any violation."""
    if data.n != net.n or data.outcome.shape[0] != net.n:
        raise ValidationError(
            f"study data has {data.n} rows but the network has {net.n} nodes"
        )
    if data.covariates.shape[0] != net.n:
        raise ValidationError("covariate rows are not aligned with the network")
    if not np.isin(data.exposure, (0, 1)).all():
        raise ValidationError("exposure must be binary 0/1")
    if not np.isfinite(data.outcome).all():
        raise ValidationError("outcome contains non-finite values")
    if not np.isfinite(data.covariates).all():
        raise ValidationError("covariates contain non-finite values")
    if not allow_isolates:
        isolated = np.flatnonzero(net.degrees == 0)
        if isolated.size:
            raise IsolateError([net.node_ids[i] for i in isolated])


@dataclass(frozen=True)
class Interference:
    """Grouping over which the joint exposure probability is evaluated.

    Groups are stored CSR-style (``ptr``/``idx``); every group contains the
    focal node itself.  ``node_group`` maps each node to the group whose
    probability serves as its propensity score, and ``set_size`` is the size
    of the node's interference set (the group minus the node itself).
    """

    kind: str
    ptr: np.ndarray
    idx: np.ndarray
    node_group: np.ndarray
    set_size: np.ndarray

    def __post_init__(self):
        for arr in (self.ptr, self.idx, self.node_group, self.set_size):
            arr.setflags(write=False)

    @property
    def n_groups(self):
        return self.ptr.shape[0] - 1

    def group_sum(self, values):
        """Sum ``values`` over each group's members; returns (n_groups,)."""
        return np.add.reduceat(values[self.idx], self.ptr[:-1])

    def owner_count(self):
        """How many nodes use each group as their propensity (>=1 per group)."""
        return np.bincount(self.node_group, minlength=self.n_groups).astype(float)

    def member_weight(self):
        """Total owner-weighted number of group terms each node appears in.

        With nearest-neighbor groups this is 1 + degree; with shared
        component groups it is the component size.
        """
        owners = self.owner_count()
        sizes = np.diff(self.ptr)
        return np.bincount(
            self.idx,
            weights=np.repeat(owners, sizes),
            minlength=self.node_group.shape[0],
        )


def closed_neighborhoods(net):
    """One group per node: the node together with its nearest neighbors."""
    ptr = np.zeros(net.n + 1, dtype=np.intp)
    members = []
    for i in range(net.n):
        members.append(i)
        members.extend(int(j) for j in net.adjacency[i])
        ptr[i + 1] = len(members)
    return Interference(
        kind="nearest-neighbor",
        ptr=ptr,
        idx=np.asarray(members, dtype=np.intp),
        node_group=np.arange(net.n, dtype=np.intp),
        set_size=net.degrees.copy(),
    )


def component_groups(net, partition):
    """One shared group per partition part (partial-interference baseline)."""
    parts = partition.parts
    ptr = np.zeros(len(parts) + 1, dtype=np.intp)
    members = []
    node_group = np.empty(net.n, dtype=np.intp)
    for g, part in enumerate(parts):
        members.extend(int(i) for i in part)
        ptr[g + 1] = len(members)
        node_group[part] = g
    sizes = np.array([len(p) for p in parts], dtype=np.intp)
    return Interference(
        kind="component",
        ptr=ptr,
        idx=np.asarray(members, dtype=np.intp),
        node_group=node_group,
        set_size=sizes[node_group] - 1,
    )


def neighbor_exposure_counts(structure, exposure):
    """Number of exposed members of each node's interference set."""
    a = np.asarray(exposure, dtype=np.intp)
    return structure.group_sum(a)[structure.node_group] - a


@lru_cache(maxsize=8)
def _gh_rule(n_nodes):
    x, w = np.polynomial.hermite.hermgauss(n_nodes)
    # integral of g against N(0, psi): sum_k exp(logw_k) * g(sqrt(2 psi) x_k)
    return x, np.log(w) - 0.5 * math.log(math.pi)


def _minimize_smooth(fun_grad, x0, gtol, max_iter, args=(), polish_grad=None, stop=None):
    """Quasi-Newton with line search, then damped Newton polish on the gradient.

    BFGS can stall on line-search precision loss while the gradient max-norm
    is still above ``gtol`` (objective improvements near the optimum fall
    under float roundoff for large samples); the polish phase steps on the
    finite-difference Jacobian of the gradient and only accepts steps that
    shrink the gradient max-norm.  ``polish_grad`` maps (x, grad) to the
    gradient whose root defines convergence; it defaults to the objective
    gradient and lets callers converge on a reparameterized score.
    """
    if polish_grad is None:
        polish_grad = lambda x, g: g

    def target(x):
        f, g = fun_grad(x, *args)
        return f, polish_grad(x, g)

    res = minimize(
        fun_grad,
        x0,
        args=args,
        jac=True,
        method="BFGS",
        options={"gtol": gtol, "maxiter": max_iter},
    )
    x = np.asarray(res.x, dtype=float)
    f, g = target(x)
    n_iter = int(res.nit)
    polish = 0
    while np.abs(g).max() > gtol and polish < 50:
        if stop is not None and stop(x):
            break
        p = x.shape[0]
        jac = np.empty((p, p))
        for j in range(p):
            h = 1e-6 * max(1.0, abs(x[j]))
            up = x.copy()
            up[j] += h
            dn = x.copy()
            dn[j] -= h
            jac[:, j] = (target(up)[1] - target(dn)[1]) / (2 * h)
        step, *_ = np.linalg.lstsq(jac, -g, rcond=None)
        accepted = False
        t = 1.0
        for _ in range(40):
            xn = x + t * step
            fn, gn = target(xn)
            if np.abs(gn).max() < np.abs(g).max():
                x, f, g = xn, fn, gn
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        polish += 1
        n_iter += 1
    return x, f, g, n_iter


def _bernoulli_loglik(eta, a):
    return a * eta - np.logaddexp(0.0, eta)


def _f1_group_logf(eta0, a, psi, structure, gh_x, gh_logw):
    """Log integrated likelihood of each group's exposure sub-vector."""
    if psi == 0.0:
        return structure.group_sum(_bernoulli_loglik(eta0, a))
    b = np.sqrt(2.0 * psi) * gh_x
    eta = eta0[:, None] + b[None, :]
    lmat = a[:, None] * eta - np.logaddexp(0.0, eta)
    group_l = np.add.reduceat(lmat[structure.idx, :], structure.ptr[:-1], axis=0)
    return logsumexp(group_l + gh_logw[None, :], axis=1)


def _f1_negloglik_and_grad(params, x_design, a, structure, gh_x, gh_logw, fix_psi):
    # One log f term per node, i.e. each group's term weighted by its owner
    # count, so the maximizer solves the per-node score equations exactly.
    if fix_psi is None:
        gamma = params[:-1]
        psi = math.exp(params[-1])
    else:
        gamma = params
        psi = fix_psi
    eta0 = x_design @ gamma

    if psi == 0.0:
        p = expit(eta0)
        mult = structure.member_weight()
        loglik = float((mult * _bernoulli_loglik(eta0, a)).sum())
        grad = x_design.T @ (mult * (a - p))
        if fix_psi is None:
            grad = np.append(grad, 0.0)
        return -loglik, -grad

    owners = structure.owner_count()
    b = np.sqrt(2.0 * psi) * gh_x
    eta = eta0[:, None] + b[None, :]
    pmat = expit(eta)
    lmat = a[:, None] * eta - np.logaddexp(0.0, eta)
    group_l = np.add.reduceat(lmat[structure.idx, :], structure.ptr[:-1], axis=0)
    h = group_l + gh_logw[None, :]
    logf = logsumexp(h, axis=1)
    post = np.exp(h - logf[:, None]) * owners[:, None]
    resid = a[:, None] - pmat

    grad = np.empty(params.shape[0])
    for c in range(x_design.shape[1]):
        gsum = np.add.reduceat(
            (resid * x_design[:, c : c + 1])[structure.idx, :],
            structure.ptr[:-1],
            axis=0,
        )
        grad[c] = (post * gsum).sum()
    if fix_psi is None:
        gsum = np.add.reduceat(resid[structure.idx, :], structure.ptr[:-1], axis=0)
        # d eta / d log(psi) = b/2 at each quadrature node
        grad[-1] = (post * gsum * (b[None, :] / 2.0)).sum()
    return -float((owners * logf).sum()), -grad


@dataclass(frozen=True)
class Ipw1Fit:
    """Fitted mixed-model joint propensity (estimator ``ipw1``)."""

    gamma: np.ndarray
    psi: float
    loglik: float
    quadrature_nodes: int
    structure: Interference
    psi_fixed: bool = False
    n_iter: int = 0

    kind = "ipw1"

    def param_vector(self):
        if self.psi_fixed:
            return np.asarray(self.gamma, dtype=float).copy()
        return np.append(np.asarray(self.gamma, dtype=float), self.psi)

    def replace_params(self, vec):
        vec = np.asarray(vec, dtype=float)
        if self.psi_fixed:
            return replace(self, gamma=vec.copy())
        return replace(self, gamma=vec[:-1].copy(), psi=float(vec[-1]))

    def log_propensity(self, net, data):
        """Per-node log joint propensity of the observed group exposures."""
        struct = self.structure
        if np.any(struct.set_size == 0):
            bad = np.flatnonzero(struct.set_size == 0)
            raise IsolateError([net.node_ids[i] for i in bad])
        gh_x, gh_logw = _gh_rule(self.quadrature_nodes)
        eta0 = data.design_matrix() @ self.gamma
        group_logf = _f1_group_logf(
            eta0, data.exposure.astype(float), self.psi, struct, gh_x, gh_logw
        )
        return group_logf[struct.node_group]

    def propensities(self, net, data):
        return np.exp(self.log_propensity(net, data))

    def summary(self):
        return {
            "estimator": self.kind,
            "gamma": np.asarray(self.gamma).tolist(),
            "psi": self.psi,
            "loglik": self.loglik,
            "quadrature_nodes": self.quadrature_nodes,
            "groups": self.structure.kind,
            "iterations": self.n_iter,
        }


def fit_ipw1(
    net,
    data,
    *,
    structure=None,
    quadrature_nodes=25,
    fix_psi=None,
    gtol=1e-6,
    max_iter=500,
):
    """Maximize the composite log-likelihood of the mixed propensity model.

    ``fix_psi`` pins the latent variance (0 collapses the integral to an
    independence product).  When the estimated variance lands on the zero
    boundary the fit is re-run with ``psi = 0`` so that score equations
    remain exactly solved at the reported parameters.
    """
    validate_study(net, data)
    struct = structure if structure is not None else closed_neighborhoods(net)
    x_design = data.design_matrix()
    if np.linalg.matrix_rank(x_design) < x_design.shape[1]:
        raise ValidationError("design matrix is rank deficient")
    a = data.exposure.astype(float)
    if a.min() == a.max():
        raise SeparationError("all exposures identical; propensity model separates")

    gh_x, gh_logw = _gh_rule(quadrature_nodes)
    p = x_design.shape[1]
    if fix_psi is None:
        x0 = np.zeros(p + 1)
        x0[-1] = math.log(0.25)
    else:
        if fix_psi < 0:
            raise ValidationError("fix_psi must be nonnegative")
        x0 = np.zeros(p)

    if fix_psi is None:
        # converge on the natural-parameter score (d/d psi, not d/d log psi),
        # which is what the downstream estimating equations differentiate
        def natural_grad(params, grad):
            psi = math.exp(params[-1])
            out = grad.copy()
            if psi > 0:
                out[-1] = grad[-1] / psi
            return out

        stop = lambda params: params[-1] < math.log(PSI_BOUNDARY)
    else:
        natural_grad = None
        stop = None
    x, fval, grad, n_iter = _minimize_smooth(
        _f1_negloglik_and_grad,
        x0,
        gtol=gtol,
        max_iter=max_iter,
        args=(x_design, a, struct, gh_x, gh_logw, fix_psi),
        polish_grad=natural_grad,
        stop=stop,
    )

    if fix_psi is None and math.exp(x[-1]) < PSI_BOUNDARY:
        # boundary solution: the latent variance is numerically zero
        return fit_ipw1(
            net,
            data,
            structure=struct,
            quadrature_nodes=quadrature_nodes,
            fix_psi=0.0,
            gtol=gtol,
            max_iter=max_iter,
        )
    grad_norm = float(np.abs(grad).max())
    if grad_norm > gtol:
        raise ConvergenceError(
            f"ipw1 fit stopped with gradient max-norm {grad_norm:.2e} > {gtol:.0e}",
            last_params=x,
            grad_norm=grad_norm,
        )

    if fix_psi is None:
        gamma = x[:-1]
        psi = math.exp(x[-1])
        psi_fixed = False
    else:
        gamma = x
        psi = float(fix_psi)
        psi_fixed = True

    probs = expit(x_design @ gamma)
    if probs.min() < PROB_EPS or probs.max() > 1.0 - PROB_EPS:
        raise SeparationError(
            "fitted exposure probabilities reached 0/1; model separates"
        )
    return Ipw1Fit(
        gamma=gamma,
        psi=psi,
        loglik=-fval,
        quadrature_nodes=quadrature_nodes,
        structure=struct,
        psi_fixed=psi_fixed,
        n_iter=n_iter,
    )


def eval_f1(fit, net, data, i):
    """Joint propensity of node ``i``'s observed group exposures, in (0, 1]."""
    if fit.structure.set_size[i] == 0:
        raise IsolateError([net.node_ids[i]])
    return float(np.exp(fit.log_propensity(net, data)[i]))


def _aggregate_neighbors(structure, x_design, aggregator):
    """Aggregate interference-set covariate rows per the declared h."""
    if aggregator not in ("mean", "sum", "proportion-positive"):
        raise ValidationError(f"unknown aggregator {aggregator!r}")
    base = x_design if aggregator != "proportion-positive" else (x_design > 0).astype(float)
    totals = np.add.reduceat(base[structure.idx, :], structure.ptr[:-1], axis=0)
    neigh = totals[structure.node_group, :] - base
    if aggregator == "sum":
        return neigh
    sizes = structure.set_size.astype(float)[:, None]
    return neigh / sizes


def _fit_binomial_glm(w_design, successes, trials, gtol, max_iter, label):
    def negloglik(beta):
        eta = w_design @ beta
        ll = successes * eta - trials * np.logaddexp(0.0, eta)
        grad = w_design.T @ (successes - trials * expit(eta))
        return -float(ll.sum()), -grad

    x, fval, grad, n_iter = _minimize_smooth(
        negloglik, np.zeros(w_design.shape[1]), gtol=gtol, max_iter=max_iter
    )
    grad_norm = float(np.abs(grad).max())
    if grad_norm > gtol:
        raise ConvergenceError(
            f"{label} fit stopped with gradient max-norm {grad_norm:.2e} > {gtol:.0e}",
            last_params=x,
            grad_norm=grad_norm,
        )
    probs = expit(w_design @ x)
    if probs.min() < PROB_EPS or probs.max() > 1.0 - PROB_EPS:
        raise SeparationError(f"{label} fitted probabilities reached 0/1")
    return x, -fval, n_iter


@dataclass(frozen=True)
class Ipw2Fit:
    """Fitted factored propensity (estimator ``ipw2``).

    ``gamma`` parameterizes the individual exposure model on the design
    matrix; ``beta`` and ``delta`` parameterize the binomial model for the
    number of exposed interference-set members given own exposure and the
    aggregated covariates ``h``.
    """

    gamma: np.ndarray
    beta: float
    delta: np.ndarray
    aggregator: str
    loglik: float
    structure: Interference
    n_iter: int = 0

    kind = "ipw2"

    def param_vector(self):
        return np.concatenate([self.gamma, [self.beta], self.delta])

    def replace_params(self, vec):
        vec = np.asarray(vec, dtype=float)
        p = self.gamma.shape[0]
        return replace(
            self,
            gamma=vec[:p].copy(),
            beta=float(vec[p]),
            delta=vec[p + 1 :].copy(),
        )

    def _linear_predictors(self, data):
        x_design = data.design_matrix()
        h = _aggregate_neighbors(self.structure, x_design, self.aggregator)
        a = data.exposure.astype(float)
        eta1 = a * self.beta + h @ self.delta
        eta2 = x_design @ self.gamma
        return eta1, eta2

    def neighbor_probabilities(self, data):
        """Per-node binomial success probability p1."""
        return expit(self._linear_predictors(data)[0])

    def individual_probabilities(self, data):
        """Per-node own-exposure probability p2."""
        return expit(self._linear_predictors(data)[1])

    def log_propensity(self, net, data):
        struct = self.structure
        if np.any(struct.set_size == 0):
            bad = np.flatnonzero(struct.set_size == 0)
            raise IsolateError([net.node_ids[i] for i in bad])
        eta1, eta2 = self._linear_predictors(data)
        a = data.exposure.astype(float)
        s = neighbor_exposure_counts(struct, data.exposure).astype(float)
        d = struct.set_size.astype(float)
        log_f21 = log_binom_coef(d, s) + s * eta1 - d * np.logaddexp(0.0, eta1)
        log_f22 = a * eta2 - np.logaddexp(0.0, eta2)
        return log_f21 + log_f22

    def propensities(self, net, data):
        return np.exp(self.log_propensity(net, data))

    def summary(self):
        return {
            "estimator": self.kind,
            "gamma": np.asarray(self.gamma).tolist(),
            "beta": self.beta,
            "delta": np.asarray(self.delta).tolist(),
            "aggregator": self.aggregator,
            "loglik": self.loglik,
            "groups": self.structure.kind,
            "iterations": self.n_iter,
        }


def fit_ipw2(
    net,
    data,
    aggregator="mean",
    *,
    structure=None,
    gtol=1e-6,
    max_iter=500,
):
    """Fit the two factors of the factored propensity by maximum likelihood."""
    validate_study(net, data)
    struct = structure if structure is not None else closed_neighborhoods(net)
    x_design = data.design_matrix()
    if np.linalg.matrix_rank(x_design) < x_design.shape[1]:
        raise ValidationError("design matrix is rank deficient")
    a = data.exposure.astype(float)
    if a.min() == a.max():
        raise SeparationError("all exposures identical; propensity model separates")
    s = neighbor_exposure_counts(struct, data.exposure).astype(float)
    d = struct.set_size.astype(float)
    if s.sum() == 0 or (d - s).sum() == 0:
        raise SeparationError(
            "exposed-neighbor counts are degenerate; binomial model separates"
        )
    h = _aggregate_neighbors(struct, x_design, aggregator)
    if not np.isfinite(h).all():
        raise ValidationError("aggregated neighbor covariates are not finite")

    gamma, ll_ind, it_ind = _fit_binomial_glm(
        x_design, a, np.ones(net.n), gtol, max_iter, "individual exposure model"
    )
    w_design = np.hstack([a[:, None], h])
    coef, ll_nb, it_nb = _fit_binomial_glm(
        w_design, s, d, gtol, max_iter, "exposed-neighbor count model"
    )
    return Ipw2Fit(
        gamma=gamma,
        beta=float(coef[0]),
        delta=coef[1:].copy(),
        aggregator=aggregator,
        loglik=ll_ind + ll_nb,
        structure=struct,
        n_iter=it_ind + it_nb,
    )


def eval_f2(fit, net, data, i):
    """Factored propensity of node ``i``'s observed exposures, in (0, 1]."""
    if fit.structure.set_size[i] == 0:
        raise IsolateError([net.node_ids[i]])
    return float(np.exp(fit.log_propensity(net, data)[i]))


def score_components(fit, net, data, partition, fd_step=1e-5):
    """Per-part score sums of the fitted log propensity.

    Row ``nu`` holds (1/k) * sum over the part's nodes of the central
    finite-difference derivative of log f with respect to each parameter,
    with step ``fd_step * max(1, |param|)`` and k = n/m from the partition.
    """
    theta = fit.param_vector()
    k = net.n / partition.m
    per_node = np.empty((net.n, theta.shape[0]))
    for j in range(theta.shape[0]):
        h = fd_step * max(1.0, abs(theta[j]))
        up = theta.copy()
        up[j] += h
        dn = theta.copy()
        dn[j] -= h
        lp = fit.replace_params(up).log_propensity(net, data)
        lm = fit.replace_params(dn).log_propensity(net, data)
        per_node[:, j] = (lp - lm) / (2.0 * h)
    out = np.zeros((partition.m, theta.shape[0]))
    np.add.at(out, partition.assignment - 1, per_node)
    return out / k


def score(fit, net, data, partition, nu, fd_step=1e-5):
    """Score vector of component ``nu`` (1-based part id)."""
    return score_components(fit, net, data, partition, fd_step=fd_step)[nu - 1]


def read_study_csv(path):
    """Read an ``id,exposure,outcome,z...`` CSV; empty outcomes become NaN.

    Returns (ids, exposure, outcome, covariates, covariate_names).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyInputError(f"{path}: empty file")
        lowered = [h.lower() for h in header]
        if lowered[:3] != ["id", "exposure", "outcome"]:
            raise ValidationError(
                f"{path}: expected header starting 'id,exposure,outcome', got {header!r}"
            )
        ids, expo, outc, zrows = [], [], [], []
        for rownum, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(
                    f"{path}: row {rownum} has {len(row)} fields, expected {len(header)}"
                )
            ids.append(row[0].strip())
            try:
                expo.append(int(row[1]))
            except ValueError:
                raise ValidationError(f"{path}: row {rownum}: bad exposure {row[1]!r}")
            outc.append(float(row[2]) if row[2].strip() != "" else math.nan)
            try:
                zrows.append([float(v) for v in row[3:]])
            except ValueError:
                raise ValidationError(f"{path}: row {rownum}: bad covariate value")
    if not ids:
        raise EmptyInputError(f"{path}: no data rows")
    z = np.asarray(zrows, dtype=float)
    if z.size == 0:
        z = np.zeros((len(ids), 0))
    return (
        ids,
        np.asarray(expo, dtype=np.int8),
        np.asarray(outc, dtype=float),
        z,
        header[3:],
    )

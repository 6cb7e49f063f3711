"""Synthetic networks, trial data, and the replicated-estimation harness.

A study draws, per replicate: covariates, a complete potential-outcome table,
exposures (optionally with a component-level latent intercept), and the
observed outcomes implied by consistency.  Both propensity models are then
fit, the potential-outcome targets estimated on the alpha grid, and sandwich
standard errors computed.  Reports aggregate bias, empirical SE, average
estimated SE, and Wald-interval coverage against the exact per-replicate
truth.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import variance
from .exceptions import (
    ConvergenceError,
    NetworkGenerationError,
    SeparationError,
    SingularMatrixError,
    StudyError,
    ValidationError,
    WeightFloorError,
)
from .graph import Network, components, fast_greedy_communities
from .policy import log_binom_coef, log_pi_vector
from .propensity import (
    StudyData,
    closed_neighborhoods,
    component_groups,
    fit_ipw1,
    fit_ipw2,
    neighbor_exposure_counts,
)

__all__ = [
    "SCENARIOS",
    "ScenarioConfig",
    "PotentialOutcomeTable",
    "SimulationReport",
    "gen_regular_network",
    "gen_potential_outcomes",
    "gen_exposures",
    "observed_outcomes",
    "true_estimands",
    "run_study",
    "trip_like_fixture",
    "replicate_seed",
]

SCENARIOS = (
    "main",
    "no-ranef",
    "shifted-exposure",
    "stratified-violation",
    "trip-like",
    "regen-network",
)

_MASK64 = (1 << 64) - 1


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def replicate_seed(base_seed, r):
    """Stream seed for replicate ``r`` (1-based): base_seed xor splitmix(r)."""
    return (int(base_seed) & _MASK64) ^ _splitmix64(int(r))


# ---------------------------------------------------------------------------
# Network generation


def _pairing_edges(size, degree, rng):
    stubs = np.repeat(np.arange(size), degree)
    rng.shuffle(stubs)
    pairs = stubs.reshape(-1, 2)
    edges = set()
    for u, v in pairs:
        u, v = int(u), int(v)
        if u == v:
            return None
        key = (u, v) if u < v else (v, u)
        if key in edges:
            return None
        edges.add(key)
    return edges


def _is_connected(size, edges):
    adj = [[] for _ in range(size)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = [False] * size
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                stack.append(v)
    return count == size


def gen_regular_network(m, mean_size, degree, rng, sizes=None, max_attempts=1000):
    """Union of ``m`` connected degree-regular components.

    Component sizes are Poisson(``mean_size``) resampled until at least
    degree + 1 and size * degree is even; ``sizes`` overrides the draw.
    Each component uses stub pairing with rejection of self-loops and
    duplicate edges plus a connectivity check, retried up to
    ``max_attempts`` times.
    """
    if degree < 1:
        raise NetworkGenerationError("degree must be at least 1")
    if sizes is not None and len(sizes) != m:
        raise NetworkGenerationError("sizes override must list one size per component")

    node_ids = []
    adjacency = []
    offset = 0
    for comp in range(m):
        if sizes is not None:
            size = int(sizes[comp])
            if size < degree + 1 or (size * degree) % 2 == 1:
                raise NetworkGenerationError(
                    f"component size {size} is infeasible for degree {degree}"
                )
        else:
            size = 0
            for _ in range(max_attempts):
                size = int(rng.poisson(mean_size))
                if size >= degree + 1 and (size * degree) % 2 == 0:
                    break
            else:
                raise NetworkGenerationError(
                    f"could not draw a feasible size for degree {degree} "
                    f"from Poisson({mean_size})"
                )
        edges = None
        for _ in range(max_attempts):
            cand = _pairing_edges(size, degree, rng)
            if cand is not None and _is_connected(size, cand):
                edges = cand
                break
        if edges is None:
            raise NetworkGenerationError(
                f"pairing failed after {max_attempts} attempts "
                f"(size {size}, degree {degree})"
            )
        neigh = [set() for _ in range(size)]
        for u, v in edges:
            neigh[u].add(offset + v)
            neigh[v].add(offset + u)
        node_ids.extend(str(offset + i) for i in range(size))
        adjacency.extend(neigh)
        offset += size
    return Network(node_ids, adjacency)


# ---------------------------------------------------------------------------
# Potential outcomes and exposures


@dataclass(frozen=True)
class PotentialOutcomeTable:
    """Complete potential outcomes for every node.

    ``kind`` is "stratified" (outcomes keyed by own exposure and the exposed
    neighbor count; ``values[a, i, s]``) or "full-vector" (keyed by the full
    neighbor-exposure configuration as a bitmask over the node's sorted
    neighbor list; ``values[a, i, mask]``).  Entries outside a node's valid
    key range are zero-filled and never read.
    """

    kind: str
    values: np.ndarray  # (2, n, width) of {0,1}
    degrees: np.ndarray
    generator: str

    def __post_init__(self):
        self.values.setflags(write=False)
        self.degrees.setflags(write=False)

    @property
    def n(self):
        return self.degrees.shape[0]


def _stratified_cell_probs(a, frac, z):
    return expit(-1.75 + 0.5 * a + frac - 1.5 * a * frac + 0.5 * z)


def gen_potential_outcomes(net, z, model="stratified", rng=None):
    """Draw a complete Bernoulli potential-outcome table.

    ``model="stratified"`` keys outcomes by the exposed-neighbor count;
    ``model="full-vector"`` keys them by the whole neighbor configuration,
    with same-covariate neighbors pulling the outcome probability down and
    different-covariate neighbors pushing it up (violating stratified
    interference).
    """
    if rng is None:
        raise ValidationError("an rng is required")
    z = np.asarray(z, dtype=float)
    zmain = z[:, 0] if z.ndim == 2 else z
    deg = net.degrees
    if np.any(deg == 0):
        raise ValidationError("potential-outcome generation requires no isolates")

    if model == "stratified":
        width = int(deg.max()) + 1
        s_grid = np.arange(width)[None, :]
        frac = s_grid / deg[:, None]  # cells beyond a node's degree are never read
        values = np.empty((2, net.n, width), dtype=np.int8)
        for a in (0, 1):
            p = _stratified_cell_probs(a, frac, zmain[:, None])
            values[a] = rng.random((net.n, width)) < p
        return PotentialOutcomeTable(
            kind="stratified", values=values, degrees=deg.copy(), generator=model
        )

    if model == "full-vector":
        width = 1 << int(deg.max())
        values = np.zeros((2, net.n, width), dtype=np.int8)
        for i in range(net.n):
            d = int(deg[i])
            neigh = net.adjacency[i]
            same = (zmain[neigh] == zmain[i]).astype(float)
            masks = np.arange(1 << d, dtype=np.int64)
            bits = (masks[:, None] >> np.arange(d)) & 1  # column b = sorted neighbor b
            s_same = bits @ same
            s_diff = bits @ (1.0 - same)
            for a in (0, 1):
                p = expit(
                    -1.75
                    + 0.5 * a
                    - 2.0 * s_same / d
                    + 5.0 * s_diff / d
                    + 0.5 * zmain[i]
                )
                values[a, i, : 1 << d] = rng.random(1 << d) < p
        return PotentialOutcomeTable(
            kind="full-vector", values=values, degrees=deg.copy(), generator=model
        )

    raise ValidationError(f"unknown potential-outcome model {model!r}")


EXPOSURE_MECHANISMS = ("ranef", "no-ranef", "shifted", "four-covariate")


def gen_exposures(net, z, partition, mechanism, rng):
    """Draw exposures; latent intercepts are shared within partition parts."""
    z = np.asarray(z, dtype=float)
    if mechanism == "four-covariate":
        if z.ndim != 2 or z.shape[1] != 4:
            raise ValidationError("four-covariate mechanism needs a (n, 4) z matrix")
        eta = -1.4 * z[:, 0] + 2.0 * z[:, 1] - 1.5 * z[:, 2] + 1.2 * z[:, 3]
    else:
        zmain = z[:, 0] if z.ndim == 2 else z
        if mechanism == "ranef":
            b = rng.normal(0.0, 0.5, size=partition.m)
            eta = 0.7 - 1.4 * zmain + b[partition.assignment - 1]
        elif mechanism == "no-ranef":
            eta = 0.7 - 1.4 * zmain
        elif mechanism == "shifted":
            b = rng.normal(0.0, 0.5, size=partition.m)
            eta = -0.5 - 1.5 * zmain + b[partition.assignment - 1]
        else:
            raise ValidationError(f"unknown exposure mechanism {mechanism!r}")
    return (rng.random(net.n) < expit(eta)).astype(np.int8)


def observed_outcomes(table, net, exposure):
    """Outcomes implied by consistency at the realized exposures."""
    a = np.asarray(exposure, dtype=np.intp)
    y = np.empty(table.n, dtype=float)
    if table.kind == "stratified":
        struct = closed_neighborhoods(net)
        s = neighbor_exposure_counts(struct, a)
        y[:] = table.values[a, np.arange(table.n), s]
    else:
        for i in range(table.n):
            bits = a[net.adjacency[i]].astype(np.int64)
            mask = int((bits << np.arange(bits.shape[0], dtype=np.int64)).sum())
            y[i] = table.values[a[i], i, mask]
    return y


def true_estimands(table, alpha_grid):
    """Exact average potential outcomes implied by a complete table.

    Returns {(arm, alpha): value} with arms "exposed", "unexposed",
    "marginal".  Stratified tables use binomial weights over the exposed
    count; full-vector tables enumerate every neighbor configuration.
    """
    out = {}
    deg = table.degrees.astype(float)
    n = table.n
    if table.kind == "stratified":
        width = table.values.shape[2]
        s_grid = np.arange(width, dtype=float)[None, :]
        with np.errstate(invalid="ignore"):
            log_comb = log_binom_coef(deg[:, None], s_grid)
        valid = s_grid <= deg[:, None]
    for alpha in alpha_grid:
        ybar = {}
        if table.kind == "stratified":
            logw = (
                log_comb
                + s_grid * math.log(alpha)
                + (deg[:, None] - s_grid) * math.log1p(-alpha)
            )
            w = np.where(valid, np.exp(np.where(valid, logw, -np.inf)), 0.0)
            for a in (0, 1):
                per_node = (w * table.values[a]).sum(axis=1)
                ybar[a] = float(per_node.mean())
        else:
            per_node = np.zeros((2, n))
            for i in range(n):
                d = int(deg[i])
                masks = np.arange(1 << d, dtype=np.int64)
                pc = ((masks[:, None] >> np.arange(d)) & 1).sum(axis=1).astype(float)
                w = np.exp(log_pi_vector(pc, float(d), alpha))
                for a in (0, 1):
                    per_node[a, i] = float(w @ table.values[a, i, : 1 << d])
            ybar = {0: float(per_node[0].mean()), 1: float(per_node[1].mean())}
        out[("unexposed", alpha)] = ybar[0]
        out[("exposed", alpha)] = ybar[1]
        out[("marginal", alpha)] = alpha * ybar[1] + (1.0 - alpha) * ybar[0]
    return out


# ---------------------------------------------------------------------------
# TRIP-like synthetic fixture (the real study network is private)

TRIP_COMPONENT_SIZES = (185, 9, 6, 3, 3, 2, 2, 2, 2, 2)
TRIP_EDGE_TOTAL = 362
_TRIP_SMALL_EDGES = (11, 7, 3, 2, 1, 1, 1, 1, 1)  # per small component
TRIP_FIXTURE_SEED = 20130615


def _random_connected_component(size, n_edges, rng, degree_cap=12, wedge_bias=0.35):
    if n_edges < size - 1:
        raise NetworkGenerationError("too few edges for a connected component")
    adj = [set() for _ in range(size)]
    edges = set()

    def add(u, v):
        key = (u, v) if u < v else (v, u)
        if u == v or key in edges:
            return False
        if len(adj[u]) >= degree_cap or len(adj[v]) >= degree_cap:
            return False
        edges.add(key)
        adj[u].add(v)
        adj[v].add(u)
        return True

    for v in range(1, size):
        add(int(rng.integers(0, v)), v)
    guard = 0
    while len(edges) < n_edges:
        guard += 1
        if guard > 100000:
            raise NetworkGenerationError("fixture edge fill did not terminate")
        if rng.random() < wedge_bias:
            w = int(rng.integers(0, size))
            neigh = list(adj[w])
            if len(neigh) < 2:
                continue
            u, v = rng.choice(neigh, size=2, replace=False)
            add(int(u), int(v))
        else:
            u, v = rng.integers(0, size, size=2)
            add(int(u), int(v))
    return edges


def trip_like_fixture(seed=TRIP_FIXTURE_SEED):
    """Synthetic network and study data shaped like the motivating study.

    Entirely synthetic: 10 components with the published size profile
    (n = 216, 362 edges), a ~12% exposure rate driven by three baseline
    covariates with a component-level latent intercept, and a binary outcome
    that responds to own and neighborhood exposure.
    """
    rng = np.random.default_rng(seed)
    big_edges = TRIP_EDGE_TOTAL - sum(_TRIP_SMALL_EDGES)
    per_comp_edges = (big_edges,) + _TRIP_SMALL_EDGES

    node_ids = []
    adjacency = []
    offset = 0
    for size, n_edges in zip(TRIP_COMPONENT_SIZES, per_comp_edges):
        edges = _random_connected_component(size, n_edges, rng)
        neigh = [set() for _ in range(size)]
        for u, v in edges:
            neigh[u].add(offset + v)
            neigh[v].add(offset + u)
        node_ids.extend(f"p{offset + i:03d}" for i in range(size))
        adjacency.extend(neigh)
        offset += size
    net = Network(node_ids, adjacency)

    part = components(net)
    z1 = (rng.random(net.n) < 0.5).astype(float)
    z2 = (rng.random(net.n) < 0.73).astype(float)
    z3 = rng.normal(0.0, 1.0, net.n)
    b = rng.normal(0.0, 0.4, part.m)
    eta = -1.95 + 0.5 * z1 - 0.3 * z2 + 0.3 * z3 + b[part.assignment - 1]
    exposure = (rng.random(net.n) < expit(eta)).astype(np.int8)

    struct = closed_neighborhoods(net)
    s = neighbor_exposure_counts(struct, exposure).astype(float)
    frac = s / np.maximum(net.degrees, 1)
    eta_y = -0.2 - 0.45 * exposure - 1.1 * frac + 0.4 * z2 - 0.2 * z1
    outcome = (rng.random(net.n) < expit(eta_y)).astype(float)

    data = StudyData(
        exposure=exposure,
        outcome=outcome,
        covariates=np.column_stack([z1, z2, z3]),
    )
    return net, data


# ---------------------------------------------------------------------------
# Replicated study harness


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "main"
    m: int = 100
    mean_size: float = 10.0
    degree: int = 4
    reps: int = 1000
    seed: int = 20240901
    alpha_grid: tuple = (0.25, 0.5, 0.75)
    estimators: tuple = ("ipw1", "ipw2")
    partition: str = "observed"  # partition used for variance estimation
    four_covariates: bool = False
    variance_baseline: bool = False  # also run the shared component-propensity variant
    threads: int = 1
    quadrature_nodes: int = 25

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValidationError(f"unknown scenario {self.scenario!r}")
        if self.reps < 1:
            raise ValidationError("reps must be >= 1")
        if self.m < 2:
            raise ValidationError("at least 2 components are required")
        if not all(0.0 < a < 1.0 for a in self.alpha_grid):
            raise ValidationError("alpha grid must be strictly inside (0, 1)")
        if self.partition not in ("observed", "community"):
            raise ValidationError("partition must be 'observed' or 'community'")
        for e in self.estimators:
            if e not in ("ipw1", "ipw2"):
                raise ValidationError(f"unknown estimator {e!r}")

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "m": self.m,
            "mean_size": self.mean_size,
            "degree": self.degree,
            "reps": self.reps,
            "seed": self.seed,
            "alpha_grid": list(self.alpha_grid),
            "estimators": list(self.estimators),
            "partition": self.partition,
            "four_covariates": self.four_covariates,
            "variance_baseline": self.variance_baseline,
            "threads": self.threads,
            "quadrature_nodes": self.quadrature_nodes,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("alpha_grid", "estimators"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass(frozen=True)
class EstimandRow:
    estimator: str
    arm: str
    alpha: float
    truth: float
    bias: float
    ese: float
    ase: float
    ecp: float


@dataclass(frozen=True)
class SimulationReport:
    config: dict
    rows: tuple
    n_reps: int
    failures: dict
    ecp_margin: float
    diagnostics: dict = field(default_factory=dict)

    def row(self, estimator, arm, alpha):
        for r in self.rows:
            if r.estimator == estimator and r.arm == arm and r.alpha == alpha:
                return r
        raise KeyError((estimator, arm, alpha))

    def to_csv_text(self):
        lines = ["estimator,arm,alpha,true,bias,ese,ase,ecp"]
        for r in self.rows:
            lines.append(
                "%s,%s,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g"
                % (r.estimator, r.arm, r.alpha, r.truth, r.bias, r.ese, r.ase, r.ecp)
            )
        return "\n".join(lines) + "\n"

    def to_json_text(self):
        payload = {
            "config": self.config,
            "n_reps": self.n_reps,
            "failures": self.failures,
            "ecp_margin": self.ecp_margin,
            "ese_defined": self.n_reps > 1,
            "diagnostics": self.diagnostics,
            "rows": [
                {
                    "estimator": r.estimator,
                    "arm": r.arm,
                    "alpha": r.alpha,
                    "true": r.truth,
                    "bias": r.bias,
                    "ese": r.ese,
                    "ase": r.ase,
                    "ecp": r.ecp,
                }
                for r in self.rows
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


_FIT_FAILURES = (
    SeparationError,
    ConvergenceError,
    WeightFloorError,
    SingularMatrixError,
    ValidationError,
)


def _scenario_mechanism(scenario, four_covariates):
    if four_covariates:
        return "four-covariate"
    return {
        "main": "ranef",
        "no-ranef": "no-ranef",
        "shifted-exposure": "shifted",
        "stratified-violation": "ranef",
        "trip-like": "ranef",
        "regen-network": "ranef",
    }[scenario]


def _draw_covariates(n, four_covariates, rng):
    if four_covariates:
        return np.column_stack(
            [
                (rng.random(n) < 0.5).astype(float),
                (rng.random(n) < 0.5).astype(float),
                rng.normal(1.0, 0.5, n),
                rng.normal(0.0, 1.0, n),
            ]
        )
    return (rng.random(n) < 0.5).astype(float)[:, None]


def _estimand_keys(alpha_grid):
    keys = [("exposed", a) for a in alpha_grid]
    keys += [("unexposed", a) for a in alpha_grid]
    keys += [("marginal", a) for a in alpha_grid]
    return keys


def _replicate(ctx, r):
    """One simulated dataset: returns truth plus per-estimator results."""
    rng = np.random.default_rng(replicate_seed(ctx["seed"], r))
    if ctx["net"] is None:
        net = gen_regular_network(ctx["m"], ctx["mean_size"], ctx["degree"], rng)
        obs_part = components(net)
        var_part = obs_part
    else:
        net = ctx["net"]
        obs_part = ctx["obs_part"]
        var_part = ctx["var_part"]

    z = _draw_covariates(net.n, ctx["four_covariates"], rng)
    outcome_model = (
        "full-vector" if ctx["scenario"] == "stratified-violation" else "stratified"
    )
    table = gen_potential_outcomes(net, z, model=outcome_model, rng=rng)
    exposure = gen_exposures(
        net, z, obs_part, _scenario_mechanism(ctx["scenario"], ctx["four_covariates"]), rng
    )
    y = observed_outcomes(table, net, exposure)
    data = StudyData(exposure=exposure, outcome=y, covariates=z)

    keys = _estimand_keys(ctx["alpha_grid"])
    truths = true_estimands(table, ctx["alpha_grid"])
    truth_vec = np.array([truths[k] for k in keys])

    out = {"truth": truth_vec}
    for name in ctx["estimators"]:
        out[name] = _fit_and_summarize(
            name, net, data, var_part, ctx["alpha_grid"], ctx["quadrature_nodes"], None
        )
    if ctx["variance_baseline"]:
        out["ipw1-pi"] = _fit_and_summarize(
            "ipw1",
            net,
            data,
            var_part,
            ctx["alpha_grid"],
            ctx["quadrature_nodes"],
            component_groups(net, obs_part),
        )
    return out


def _fit_and_summarize(name, net, data, var_part, alpha_grid, quad_nodes, structure):
    try:
        if name == "ipw1":
            fit = fit_ipw1(
                net, data, structure=structure, quadrature_nodes=quad_nodes
            )
        else:
            fit = fit_ipw2(net, data, structure=structure)
        theta = variance.estimate_theta(net, data, fit, var_part, alpha_grid)
        cov = variance.sandwich(theta, net, data, fit, var_part)
    except _FIT_FAILURES as exc:
        return {"error": type(exc).__name__}

    keys = _estimand_keys(alpha_grid)
    est = np.array([theta.target(arm, a) for arm, a in keys])
    idx = [theta.target_index(arm, a) for arm, a in keys]
    se = np.sqrt(np.maximum(np.diag(cov.sigma)[idx], 0.0))
    return {
        "est": est,
        "se": se,
        "psi_sum_max": cov.psi_sum_max,
        "sigma_asym": cov.max_asymmetry,
        "sigma_min_eig": cov.min_eigenvalue,
    }


def _run_chunk(ctx, reps):
    return [(r, _replicate(ctx, r)) for r in reps]


def run_study(config):
    """Run a replicated simulation study and aggregate the report.

    Replicate r draws its generator from ``replicate_seed(seed, r)``; results
    are reduced in replicate order, so reports are byte-identical for a given
    config regardless of thread count.  A study fails if more than 5% of
    replicates fail for any estimator.
    """
    rng_net = np.random.default_rng(config.seed)
    if config.scenario == "trip-like":
        net, _ = trip_like_fixture()
    elif config.scenario == "regen-network":
        net = None
    else:
        net = gen_regular_network(config.m, config.mean_size, config.degree, rng_net)

    obs_part = var_part = None
    if net is not None:
        obs_part = components(net)
        var_part = (
            fast_greedy_communities(net)
            if config.partition == "community"
            else obs_part
        )

    ctx = {
        "seed": config.seed,
        "scenario": config.scenario,
        "m": config.m,
        "mean_size": config.mean_size,
        "degree": config.degree,
        "alpha_grid": tuple(config.alpha_grid),
        "estimators": tuple(config.estimators),
        "four_covariates": config.four_covariates,
        "variance_baseline": config.variance_baseline,
        "quadrature_nodes": config.quadrature_nodes,
        "net": net,
        "obs_part": obs_part,
        "var_part": var_part,
    }

    rep_ids = list(range(1, config.reps + 1))
    if config.threads > 1 and config.reps > 1:
        n_chunks = min(len(rep_ids), config.threads * 4)
        chunks = [rep_ids[i::n_chunks] for i in range(n_chunks)]
        results = {}
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            for part in pool.map(_run_chunk, [ctx] * len(chunks), chunks):
                for r, res in part:
                    results[r] = res
    else:
        results = {r: _replicate(ctx, r) for r in rep_ids}

    names = list(config.estimators) + (
        ["ipw1-pi"] if config.variance_baseline else []
    )
    keys = _estimand_keys(config.alpha_grid)
    rows = []
    failures = {}
    diag = {"psi_sum_max": 0.0, "sigma_max_asymmetry": 0.0, "sigma_min_eigenvalue": 0.0}
    truth_all = np.array([results[r]["truth"] for r in rep_ids])
    for name in names:
        oks = [r for r in rep_ids if "error" not in results[r][name]]
        failures[name] = config.reps - len(oks)
        if failures[name] > 0.05 * config.reps:
            raise StudyError(
                f"{failures[name]} of {config.reps} replicates failed for {name}"
            )
        est = np.array([results[r][name]["est"] for r in oks])
        se = np.array([results[r][name]["se"] for r in oks])
        truth = np.array([results[r]["truth"] for r in oks])
        diag["psi_sum_max"] = max(
            diag["psi_sum_max"], max(results[r][name]["psi_sum_max"] for r in oks)
        )
        diag["sigma_max_asymmetry"] = max(
            diag["sigma_max_asymmetry"], max(results[r][name]["sigma_asym"] for r in oks)
        )
        diag["sigma_min_eigenvalue"] = min(
            diag["sigma_min_eigenvalue"],
            min(results[r][name]["sigma_min_eig"] for r in oks),
        )
        z975 = 1.959963984540054
        for j, (arm, alpha) in enumerate(keys):
            bias = float((est[:, j] - truth[:, j]).mean())
            ese = float(est[:, j].std(ddof=1)) if len(oks) > 1 else math.nan
            ase = float(se[:, j].mean())
            covered = np.abs(est[:, j] - truth[:, j]) <= z975 * se[:, j]
            rows.append(
                EstimandRow(
                    estimator=name,
                    arm=arm,
                    alpha=float(alpha),
                    truth=float(truth_all[:, j].mean()),
                    bias=bias,
                    ese=ese,
                    ase=ase,
                    ecp=float(covered.mean()),
                )
            )

    margin = 1.96 * math.sqrt(0.95 * 0.05 / config.reps)
    return SimulationReport(
        config=config.to_dict(),
        rows=tuple(rows),
        n_reps=config.reps,
        failures=failures,
        ecp_margin=margin,
        diagnostics=diag,
    )

"""Shared fixtures: small graphs, known-propensity doubles, enumeration oracle."""

import itertools

import numpy as np
import pytest

from netipw.graph import load_network
from netipw.propensity import closed_neighborhoods


def clique_edges(nodes):
    return [(str(a), str(b)) for a, b in itertools.combinations(nodes, 2)]


def cycle_edges(nodes):
    return [
        (str(nodes[i]), str(nodes[(i + 1) % len(nodes)])) for i in range(len(nodes))
    ]


@pytest.fixture
def two_clique_bridge():
    """Two 4-cliques joined by one bridge edge (planted 2-community toy)."""
    edges = clique_edges([0, 1, 2, 3]) + clique_edges([4, 5, 6, 7]) + [("3", "4")]
    return load_network(edges)


@pytest.fixture
def sample_two_component_net():
    """Two components of sizes 5 and 8 with known small neighborhoods."""
    edges = [
        ("1", "3"),
        ("3", "4"),
        ("2", "4"),
        ("2", "5"),
        ("1", "5"),
        ("6", "9"),
        ("6", "10"),
        ("6", "13"),
        ("7", "9"),
        ("8", "10"),
        ("11", "13"),
        ("12", "13"),
    ]
    return load_network(edges)


def enumeration_network():
    """K4 plus a 5-cycle: 2 components, sizes 4 and 5, 9 nodes."""
    return load_network(clique_edges([0, 1, 2, 3]) + cycle_edges([4, 5, 6, 7, 8]))


def exact_component_law(net, part, gamma, psi, z, n_quad=80):
    """Joint exposure law per component under a shared latent intercept.

    Probabilities are computed by quadrature; every marginal used downstream
    is derived from this same joint by exact summation, so identities that
    algebraically cancel the propensity hold to float precision regardless of
    quadrature error.
    """
    x = np.hstack([np.ones((net.n, 1)), z])
    eta0 = x @ gamma
    nodes_x, w = np.polynomial.hermite.hermgauss(n_quad)
    logw = np.log(w) - 0.5 * np.log(np.pi)
    laws = []
    for members in part.parts:
        members = [int(i) for i in members]
        law = {}
        for config in itertools.product((0, 1), repeat=len(members)):
            a = np.asarray(config, dtype=float)
            b = np.sqrt(2.0 * psi) * nodes_x
            eta = eta0[members][:, None] + b[None, :]
            ll = (a[:, None] * eta - np.logaddexp(0.0, eta)).sum(axis=0)
            law[config] = float(np.exp(ll + logw).sum())
        total = sum(law.values())
        laws.append({k: v / total for k, v in law.items()})
    return laws


class KnownPropensity:
    """Evaluation-only stand-in whose propensities are exact joint-law marginals."""

    def __init__(self, kind, net, part, laws):
        self.kind = kind
        self.structure = closed_neighborhoods(net)
        self._net = net
        self._part = part
        self._laws = laws
        self._tables = self._marginal_tables()

    def _marginal_tables(self):
        net, part = self._net, self._part
        tables = []
        for i in range(net.n):
            nu = part.assignment[i] - 1
            members = [int(v) for v in part.parts[nu]]
            law = self._laws[nu]
            pos = {v: j for j, v in enumerate(members)}
            own = pos[i]
            neigh = [pos[int(j)] for j in net.adjacency[i]]
            table = {}
            for config, p in law.items():
                if self.kind == "ipw1":
                    key = (config[own], tuple(config[j] for j in neigh))
                else:
                    key = (config[own], sum(config[j] for j in neigh))
                table[key] = table.get(key, 0.0) + p
            tables.append(table)
        return tables

    def param_vector(self):
        return np.zeros(0)

    def replace_params(self, vec):
        return self

    def log_propensity(self, net, data):
        return np.log(self.propensities(net, data))

    def propensities(self, net, data):
        a = data.exposure
        out = np.empty(net.n)
        for i in range(net.n):
            if self.kind == "ipw1":
                key = (int(a[i]), tuple(int(a[int(j)]) for j in net.adjacency[i]))
            else:
                key = (int(a[i]), int(sum(a[int(j)] for j in net.adjacency[i])))
            out[i] = self._tables[i][key]
        return out


def joint_probability(part, laws, exposure):
    """Probability of a full exposure vector under the per-component laws."""
    p = 1.0
    for nu, members in enumerate(part.parts):
        config = tuple(int(exposure[int(i)]) for i in members)
        p *= laws[nu][config]
    return p


def brute_force_truth(net, table, alpha):
    """Average potential outcomes by enumerating every neighbor vector."""
    ybar = {0: 0.0, 1: 0.0}
    for i in range(net.n):
        d = int(net.degrees[i])
        for a in (0, 1):
            total = 0.0
            for config in itertools.product((0, 1), repeat=d):
                s = sum(config)
                w = alpha**s * (1 - alpha) ** (d - s)
                total += w * float(table.values[a, i, s])
            ybar[a] += total / net.n
    return {
        "unexposed": ybar[0],
        "exposed": ybar[1],
        "marginal": alpha * ybar[1] + (1 - alpha) * ybar[0],
    }

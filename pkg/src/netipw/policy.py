"""Bernoulli allocation-strategy probabilities.

All probabilities are computed in log space and exponentiated so that hub
nodes with large neighborhoods cannot overflow.  Functions accept either an
:class:`AllocationPolicy` or a bare float in (0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

__all__ = [
    "AllocationPolicy",
    "pi_vector",
    "pi_individual",
    "pi_count",
    "pi_joint",
]


@dataclass(frozen=True)
class AllocationPolicy:
    """Counterfactual coverage: each neighbor exposed with probability alpha."""

    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must be strictly inside (0, 1), got {self.alpha}")


def _alpha_of(policy):
    a = policy.alpha if isinstance(policy, AllocationPolicy) else float(policy)
    if not (0.0 < a < 1.0):
        raise ValueError(f"alpha must be strictly inside (0, 1), got {a}")
    return a


def log_pi_vector(sum_exposed, degree, alpha):
    """Vectorized log of alpha^s (1-alpha)^(d-s); inputs may be arrays."""
    s = np.asarray(sum_exposed, dtype=float)
    d = np.asarray(degree, dtype=float)
    if np.any(s < 0) or np.any(s > d):
        raise ValueError("sum_exposed must lie in [0, degree]")
    return s * math.log(alpha) + (d - s) * math.log1p(-alpha)


def log_binom_coef(degree, count):
    d = np.asarray(degree, dtype=float)
    s = np.asarray(count, dtype=float)
    return gammaln(d + 1.0) - gammaln(s + 1.0) - gammaln(d - s + 1.0)


def pi_vector(sum_exposed, degree, policy):
    """Probability of one specific neighbor-exposure vector with ``sum_exposed`` ones."""
    return float(np.exp(log_pi_vector(sum_exposed, degree, _alpha_of(policy))))


def pi_individual(a, policy):
    """Probability of own exposure ``a`` under the allocation strategy."""
    if a not in (0, 1):
        raise ValueError(f"exposure must be 0 or 1, got {a!r}")
    alpha = _alpha_of(policy)
    return alpha if a == 1 else 1.0 - alpha


def pi_count(s, degree, policy):
    """Binomial probability of ``s`` exposed neighbors out of ``degree``."""
    alpha = _alpha_of(policy)
    return float(np.exp(log_binom_coef(degree, s) + log_pi_vector(s, degree, alpha)))


def pi_joint(a, s, degree, policy):
    """Joint probability of own exposure ``a`` and ``s`` exposed neighbors."""
    return pi_count(s, degree, policy) * pi_individual(a, policy)

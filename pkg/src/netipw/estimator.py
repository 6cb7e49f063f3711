"""IPW point estimation of average potential outcomes and effect contrasts.

The estimator averages per-part means: with parts C_1..C_m and k = n/m the
average part size, the estimate for arm ``a`` under coverage ``alpha`` is
(1/m) sum_nu (1/k) sum_{i in C_nu} Y_i I(A_i=a) pi(neighbors; alpha) / f(i),
where f is the fitted joint propensity.  Because m*k equals n exactly, point
estimates do not depend on which partition is supplied; the partition matters
only for variance estimation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError, WeightFloorError
from .policy import _alpha_of, log_binom_coef
from .propensity import neighbor_exposure_counts

__all__ = [
    "ARMS",
    "EFFECT_KINDS",
    "PotentialOutcomeEstimate",
    "EffectEstimate",
    "weighted_terms",
    "y_hat",
    "effect",
    "effects_to_records",
    "effects_from_records",
]

ARMS = ("unexposed", "exposed", "marginal")
EFFECT_KINDS = ("direct", "indirect", "total", "overall")

WEIGHT_FLOOR = 1e-10


@dataclass(frozen=True)
class PotentialOutcomeEstimate:
    estimator: str
    arm: str  # "exposed" | "unexposed" | "marginal"
    alpha: float
    value: float


@dataclass(frozen=True)
class EffectEstimate:
    """One effect contrast; se and ci are filled by the variance module."""

    estimator: str
    kind: str  # "direct" | "indirect" | "total" | "overall"
    alpha1: float
    alpha0: float
    estimate: float
    se: float = math.nan
    ci: tuple = (math.nan, math.nan)

    def to_record(self):
        return {
            "estimator": self.estimator,
            "effect": self.kind,
            "alpha1": self.alpha1,
            "alpha0": self.alpha0,
            "estimate": self.estimate,
            "se": self.se,
            "ci_lo": self.ci[0],
            "ci_hi": self.ci[1],
        }


def weighted_terms(
    fit,
    net,
    data,
    policy,
    *,
    weight_floor=WEIGHT_FLOOR,
    truncate_quantile=None,
    propensities=None,
):
    """Per-node IPW terms for one allocation strategy.

    Returns arrays (t0, t1, tm): the unexposed-arm, exposed-arm, and marginal
    summands.  The numerator uses the exposed count of the interference set
    (the allocation probability of a neighbor vector depends on the vector
    only through its sum); the factored estimator adds the binomial
    coefficient, matching the count-based allocation probability.

    Raises
    ------
    WeightFloorError
        If any propensity falls below ``weight_floor``; pass
        ``truncate_quantile`` to instead clip weights at that quantile.
    """
    alpha = _alpha_of(policy)
    f = propensities if propensities is not None else fit.propensities(net, data)
    if truncate_quantile is None:
        low = np.flatnonzero(f < weight_floor)
        if low.size:
            i = int(low[0])
            raise WeightFloorError(net.node_ids[i], float(f[i]), weight_floor)

    struct = fit.structure
    s = neighbor_exposure_counts(struct, data.exposure).astype(float)
    d = struct.set_size.astype(float)
    lognum = s * math.log(alpha) + (d - s) * math.log1p(-alpha)
    if fit.kind == "ipw2":
        lognum = lognum + log_binom_coef(d, s)
    w = np.exp(lognum - np.log(f))
    if truncate_quantile is not None:
        w = np.minimum(w, np.quantile(w, truncate_quantile))

    a = data.exposure
    y = data.outcome
    t1 = np.where(a == 1, y * w, 0.0)
    t0 = np.where(a == 0, y * w, 0.0)
    tm = y * w * np.where(a == 1, alpha, 1.0 - alpha)
    return t0, t1, tm


def y_hat(
    estimator_kind,
    arm,
    policy,
    net,
    data,
    fit,
    partition,
    k=None,
    *,
    weight_floor=WEIGHT_FLOOR,
    truncate_quantile=None,
):
    """Population average potential outcome for one (arm, alpha)."""
    if fit.kind != estimator_kind:
        raise ValidationError(
            f"fit is for {fit.kind!r} but {estimator_kind!r} was requested"
        )
    if arm not in ARMS:
        raise ValidationError(f"unknown arm {arm!r}")
    alpha = _alpha_of(policy)
    t0, t1, tm = weighted_terms(
        fit,
        net,
        data,
        alpha,
        weight_floor=weight_floor,
        truncate_quantile=truncate_quantile,
    )
    if k is None:
        k = net.n / partition.m
    total = {"unexposed": t0, "exposed": t1, "marginal": tm}[arm].sum()
    return PotentialOutcomeEstimate(
        estimator=estimator_kind,
        arm=arm,
        alpha=alpha,
        value=float(total / (partition.m * k)),
    )


_EFFECT_ARMS = {
    "direct": ("exposed", "unexposed"),
    "indirect": ("unexposed", "unexposed"),
    "total": ("exposed", "unexposed"),
    "overall": ("marginal", "marginal"),
}


def effect(kind, alpha1, alpha0, first, second):
    """Contrast two potential-outcome estimates into an effect estimate.

    ``first`` must be the (arm, alpha1) operand and ``second`` the
    (arm, alpha0) operand required by the contrast; a direct effect requires
    alpha1 == alpha0.
    """
    if kind not in EFFECT_KINDS:
        raise ValidationError(f"unknown effect kind {kind!r}")
    if first.estimator != second.estimator:
        raise ValidationError("operands come from different estimators")
    arm1, arm0 = _EFFECT_ARMS[kind]
    a1, a0 = _alpha_of(alpha1), _alpha_of(alpha0)
    if kind == "direct" and a1 != a0:
        raise ValidationError("direct effects contrast arms at a single alpha")
    ok = (
        first.arm == arm1
        and second.arm == arm0
        and first.alpha == a1
        and second.alpha == a0
    )
    if not ok:
        raise ValidationError(
            f"{kind} effect needs ({arm1}, alpha1={a1}) vs ({arm0}, alpha0={a0}); "
            f"got ({first.arm}, {first.alpha}) vs ({second.arm}, {second.alpha})"
        )
    return EffectEstimate(
        estimator=first.estimator,
        kind=kind,
        alpha1=a1,
        alpha0=a0,
        estimate=first.value - second.value,
    )


def effects_to_records(estimates):
    return [e.to_record() for e in estimates]


def effects_from_records(records):
    out = []
    for r in records:
        out.append(
            EffectEstimate(
                estimator=r["estimator"],
                kind=r["effect"],
                alpha1=float(r["alpha1"]),
                alpha0=float(r["alpha0"]),
                estimate=float(r["estimate"]),
                se=float(r["se"]),
                ci=(float(r["ci_lo"]), float(r["ci_hi"])),
            )
        )
    return out

"""Univariate streaming anomaly detection with a probability-weighted EWMA.

The detector keeps two exponentially discounted moments (s1, s2) of the
stream. Each incoming point is standardized against the current estimates,
and the forgetting factor applied to the moments is scaled down by the
point's own probability density: surprising points barely move the
estimates, so a level shift does not poison the mean before the detector
has had a chance to flag it. A plain EWMA baseline (``ewma_step``) is the
special case beta = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidInputError, UninitializedStateError

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class PewmaParams:
    """Detector parameters.

    alpha: base forgetting factor in (0, 1).
    beta: weight of the probability discount in [0, 1]; 0 recovers EWMA.
    tau: density threshold below which a point is flagged (strict).
    warmup_T: number of leading points scored but never flagged, during
        which the moments follow the exact running mean.
    sigma_floor: lower clamp for the standard-deviation estimate.
    """

    alpha: float = 0.98
    beta: float = 0.98
    tau: float = 0.0044
    warmup_T: int = 30
    sigma_floor: float = 1e-8

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha < 1.0):
            raise InvalidInputError(f"alpha must be in (0, 1), got {self.alpha}")
        if not (0.0 <= self.beta <= 1.0):
            raise InvalidInputError(f"beta must be in [0, 1], got {self.beta}")
        if not (math.isfinite(self.tau) and self.tau >= 0.0):
            raise InvalidInputError(f"tau must be finite and >= 0, got {self.tau}")
        if self.warmup_T < 1:
            raise InvalidInputError(f"warmup_T must be >= 1, got {self.warmup_T}")
        if not (math.isfinite(self.sigma_floor) and self.sigma_floor > 0.0):
            raise InvalidInputError(f"sigma_floor must be > 0, got {self.sigma_floor}")


@dataclass(frozen=True)
class PewmaState:
    """Running moments after absorbing ``t`` points.

    x_hat and sigma_hat are the mean/stddev estimates that will be used to
    standardize the next point.
    """

    s1: float
    s2: float
    t: int
    x_hat: float
    sigma_hat: float


@dataclass(frozen=True)
class ScoredPoint:
    """Verdict for one point: standardized residual, density, and flag."""

    value: float
    z: float
    density: float
    is_anomaly: bool
    mean_estimate: float
    stddev_estimate: float


def pewma_init(x1: float, params: PewmaParams) -> PewmaState:
    """State after the first observation: s1 = x1, s2 = x1²."""
    if not math.isfinite(x1):
        raise InvalidInputError(f"first observation must be finite, got {x1}")
    return PewmaState(s1=x1, s2=x1 * x1, t=1, x_hat=x1, sigma_hat=params.sigma_floor)


def pewma_step(state: PewmaState, x: float, params: PewmaParams) -> tuple[PewmaState, ScoredPoint]:
    """Score one point against the current state and absorb it.

    The incoming point is the (t+1)-th of the stream. While its index is
    below warmup_T the moments use the forgetting factor 1 - 1/t (exact
    running mean); afterwards the factor is alpha * (1 - beta * density),
    which discounts the influence of improbable points. The verdict is
    density < tau, gated off during warmup.
    """
    if state.t < 1:
        raise UninitializedStateError("state has absorbed no points; call pewma_init first")
    if not math.isfinite(x):
        raise InvalidInputError(f"observation must be finite, got {x}")

    z = (x - state.x_hat) / state.sigma_hat
    density = INV_SQRT_2PI * math.exp(-0.5 * z * z)

    t_in = state.t + 1
    if t_in < params.warmup_T:
        a_t = 1.0 - 1.0 / t_in
    else:
        a_t = (1.0 - params.beta * density) * params.alpha

    s1 = a_t * state.s1 + (1.0 - a_t) * x
    s2 = a_t * state.s2 + (1.0 - a_t) * x * x
    sigma = math.sqrt(max(s2 - s1 * s1, params.sigma_floor * params.sigma_floor))

    new_state = PewmaState(s1=s1, s2=s2, t=t_in, x_hat=s1, sigma_hat=sigma)
    scored = ScoredPoint(
        value=x,
        z=z,
        density=density,
        is_anomaly=density < params.tau and t_in > params.warmup_T,
        mean_estimate=s1,
        stddev_estimate=sigma,
    )
    return new_state, scored


def ewma_step(mean: float, x: float, alpha: float) -> float:
    """One exponentially weighted moving-average step: alpha*mean + (1-alpha)*x."""
    if not (0.0 < alpha < 1.0):
        raise InvalidInputError(f"alpha must be in (0, 1), got {alpha}")
    if not (math.isfinite(mean) and math.isfinite(x)):
        raise InvalidInputError("mean and observation must be finite")
    return alpha * mean + (1.0 - alpha) * x

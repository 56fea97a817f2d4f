"""Multivariate online Gaussian anomaly detection.

A model is fit on an initial batch (mean, covariance as a lower Cholesky
factor, inverse covariance), then updated point by point: the factor and
the inverse are maintained incrementally through the rank-one kernels in
``linalg``, the mean through the exact incremental recurrence, and points
are classified by thresholding the Gaussian density. Models are values;
``update_online`` returns a new model and never mutates its argument.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from . import linalg
from .errors import InsufficientDataError, InvalidFactorError, InvalidInputError
from .linalg import CovBlend

LOG_2PI = math.log(2.0 * math.pi)
DRIFT_LIMIT = 1e-4
DEFAULT_REFACTOR_EVERY = 256
Z_MODES = ("whitened", "raw")


@dataclass(frozen=True)
class GaussianModel:
    """Gaussian stream model: N(mu, C) with C carried as factor @ factor.T.

    ``cinv`` tracks C⁻¹ independently of the factor; ``log_det`` caches
    log |C|. ``blend`` holds the forgetting weights applied per update, and
    ``updates_since_refactor`` counts rank-one inverse updates since the
    inverse was last rebuilt exactly from the factor.
    """

    m: int
    n: int
    mu: np.ndarray
    factor: np.ndarray
    cinv: np.ndarray
    log_det: float
    blend: CovBlend
    refactor_every: int = DEFAULT_REFACTOR_EVERY
    updates_since_refactor: int = 0
    jitter_used: float = 0.0

    def covariance(self) -> np.ndarray:
        """Expand the maintained factor into the full covariance matrix."""
        return self.factor @ self.factor.T


@dataclass(frozen=True)
class MultiVerdict:
    """Scoring result for one vector: density, Mahalanobis form, and flag."""

    x: np.ndarray
    log_density: float
    density: float
    mahalanobis_sq: float
    is_anomaly: bool


def derive_blend(n_static: int) -> CovBlend:
    """Blend weights from the static sample size.

    c_cov = 2 / (n² + 6) and alpha = 1 - c_cov, beta = c_cov, so the
    weights always sum to one and approach (1, 0) as n grows.
    """
    if n_static < 1:
        raise InvalidInputError(f"static sample size must be >= 1, got {n_static}")
    c_cov = 2.0 / (float(n_static) ** 2 + 6.0)
    return CovBlend(alpha=1.0 - c_cov, beta=c_cov)


def fit_static(
    data,
    jitter: float = 1e-10,
    refactor_every: int = DEFAULT_REFACTOR_EVERY,
) -> GaussianModel:
    """Fit the model on the initial batch: mean, unbiased covariance, factor.

    ``data`` is an (n, m) array (or a sequence of length-m vectors; plain
    1-D input is treated as n scalar samples). Requires n >= m + 1 so the
    sample covariance has full rank. The inverse is built directly from the
    factor, and the blend weights derive from n.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2:
        raise InvalidInputError(f"expected 2-D data, got shape {data.shape}")
    if not np.isfinite(data).all():
        raise InvalidInputError("data contains non-finite entries")
    n, m = data.shape
    if n <= m:
        raise InsufficientDataError(f"need at least {m + 1} samples for dimension {m}, got {n}")

    mu = data.mean(axis=0)
    cov = np.atleast_2d(np.cov(data, rowvar=False, ddof=1))
    factor, lam = linalg.cholesky_factorize(cov, jitter)
    return GaussianModel(
        m=m,
        n=n,
        mu=mu,
        factor=factor,
        cinv=linalg.inverse_from_factor(factor),
        log_det=linalg.log_det_from_factor(factor),
        blend=derive_blend(n),
        refactor_every=refactor_every,
        jitter_used=lam,
    )


def update_online(model: GaussianModel, x, z_mode: str = "whitened") -> GaussianModel:
    """Absorb one point: blend the covariance, update the inverse and mean.

    The residual d = x - mu is taken against the pre-update mean. In
    ``whitened`` mode the rank-one direction is z = factor⁻¹ d, so the
    blended covariance gains beta * d dᵀ (centered sample semantics); in
    ``raw`` mode z is the incoming point itself, and the inverse update
    uses v = factor @ z so both representations track the same matrix.

    A degenerate direction (x equal to the mean, to within norm² 1e-30)
    updates only the mean and count. A failed inverse update, a drift check
    above ``DRIFT_LIMIT``, or ``refactor_every`` accumulated updates all
    rebuild the inverse exactly from the factor.
    """
    if z_mode not in Z_MODES:
        raise InvalidInputError(f"z_mode must be one of {Z_MODES}, got {z_mode!r}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.m:
        raise InvalidInputError(f"expected a vector of length {model.m}, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise InvalidInputError("point contains non-finite entries")

    d = x - model.mu
    if z_mode == "whitened":
        z = np.empty_like(d)
        linalg._forward_solve(model.factor, d, z)
        v = d
    else:
        z = x
        v = model.factor @ z

    factor = model.factor
    cinv = model.cinv
    log_det = model.log_det
    updates = model.updates_since_refactor
    if float(z @ z) >= linalg.DEGENERATE_NORM_SQ:
        factor, new_cinv, log_det, denom_ok, drift = linalg._paired_update(
            model.factor, model.cinv, z, v, model.blend.alpha, model.blend.beta
        )
        if not denom_ok:
            # Sherman-Morrison hit a vanishing denominator: fall back to an
            # exact rebuild from the freshly updated factor.
            cinv = linalg.inverse_from_factor(factor)
            updates = 0
        else:
            updates += 1
            if updates >= model.refactor_every or drift > DRIFT_LIMIT:
                cinv = linalg.inverse_from_factor(factor)
                updates = 0
            else:
                cinv = new_cinv

    mu = (model.n * model.mu + x) / (model.n + 1)
    return replace(
        model,
        n=model.n + 1,
        mu=mu,
        factor=factor,
        cinv=cinv,
        log_det=log_det,
        updates_since_refactor=updates,
    )


def score(model: GaussianModel, x, tau: float) -> MultiVerdict:
    """Gaussian-density verdict for one vector against the current model.

    density = exp(-(m/2) log 2π - log|C|/2 - d²/2) with the Mahalanobis
    form d² = (x-mu)ᵀ C⁻¹ (x-mu); a point is anomalous when its density
    falls strictly below ``tau``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.m:
        raise InvalidInputError(f"expected a vector of length {model.m}, got shape {x.shape}")
    if not (math.isfinite(tau) and tau >= 0.0):
        raise InvalidInputError(f"tau must be finite and >= 0, got {tau}")
    d = x - model.mu
    maha = max(float(d @ model.cinv @ d), 0.0)
    log_density = -0.5 * (model.m * LOG_2PI + model.log_det + maha)
    try:
        density = math.exp(log_density)
    except OverflowError:
        density = math.inf
    return MultiVerdict(
        x=x,
        log_density=log_density,
        density=density,
        mahalanobis_sq=maha,
        is_anomaly=density < tau,
    )


def auto_tau(model: GaussianModel) -> float:
    """Density of the current model at Mahalanobis distance 3.

    Thresholding at this value flags exactly the points farther than three
    covariance-scaled standard deviations from the mean, mirroring the
    univariate 3-sigma calibration.
    """
    try:
        return math.exp(-0.5 * (model.m * LOG_2PI + model.log_det + 9.0))
    except OverflowError:
        return math.inf


# --- checkpoint serialization ------------------------------------------------
#
# Flat text format: one header line "m n", then the mean, then the factor
# rows, then the inverse-covariance rows, one line each, entries separated
# by single spaces with 17 significant digits (lossless for float64).


def _fmt_row(row) -> str:
    return " ".join(f"{v:.17g}" for v in row)


def save_model(model: GaussianModel, dest) -> None:
    """Write a model checkpoint to a path or text file object."""
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="ascii") as handle:
            save_model(model, handle)
        return
    dest.write(f"{model.m} {model.n}\n")
    dest.write(_fmt_row(model.mu) + "\n")
    for row in model.factor:
        dest.write(_fmt_row(row) + "\n")
    for row in model.cinv:
        dest.write(_fmt_row(row) + "\n")


def load_model(src, refactor_every: int = DEFAULT_REFACTOR_EVERY) -> GaussianModel:
    """Read a checkpoint written by ``save_model``.

    The log-determinant is recomputed from the stored factor, and the blend
    weights are re-derived from the stored sample count (the checkpoint
    format does not carry them separately).
    """
    if isinstance(src, (str, os.PathLike)):
        with open(src, "r", encoding="ascii") as handle:
            return load_model(handle, refactor_every=refactor_every)
    lines = [line.strip() for line in src if line.strip()]
    if not lines:
        raise InvalidInputError("empty checkpoint")
    header = lines[0].split()
    if len(header) != 2:
        raise InvalidInputError(f"malformed checkpoint header: {lines[0]!r}")
    try:
        m, n = int(header[0]), int(header[1])
    except ValueError as exc:
        raise InvalidInputError(f"malformed checkpoint header: {lines[0]!r}") from exc
    if m < 1 or n < 1:
        raise InvalidInputError(f"checkpoint header out of range: m={m} n={n}")
    expected = 1 + 1 + 2 * m
    if len(lines) != expected:
        raise InvalidInputError(f"checkpoint has {len(lines)} lines, expected {expected}")

    def parse_row(text, label):
        try:
            row = np.array([float(tok) for tok in text.split()], dtype=np.float64)
        except ValueError as exc:
            raise InvalidInputError(f"malformed {label} row: {text!r}") from exc
        if row.shape[0] != m:
            raise InvalidInputError(f"{label} row has {row.shape[0]} entries, expected {m}")
        return row

    mu = parse_row(lines[1], "mean")
    factor = np.vstack([parse_row(lines[2 + i], "factor") for i in range(m)])
    cinv = np.vstack([parse_row(lines[2 + m + i], "inverse") for i in range(m)])
    if np.any(np.triu(factor, 1) != 0.0):
        raise InvalidFactorError("checkpoint factor is not lower-triangular")
    return GaussianModel(
        m=m,
        n=n,
        mu=mu,
        factor=factor,
        cinv=cinv,
        log_det=linalg.log_det_from_factor(factor),
        blend=derive_blend(n),
        refactor_every=refactor_every,
    )


def model_to_text(model: GaussianModel) -> str:
    """Checkpoint contents as a string (convenience for tests and tools)."""
    buf = io.StringIO()
    save_model(model, buf)
    return buf.getvalue()

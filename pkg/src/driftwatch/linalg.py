"""Dense numerical kernels for streaming covariance maintenance.

Cholesky factorization with jitter escalation, forward substitution,
rank-one updates of a lower-triangular factor, Sherman-Morrison inverse
updates, and log-determinants. All functions are pure: they take plain
float64 numpy arrays (matrices ``(m, m)``, vectors ``(m,)``) and return
fresh arrays, so values can be shared across threads freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateDirectionError,
    InvalidFactorError,
    InvalidInputError,
    NotPositiveDefiniteError,
    SingularUpdateError,
)

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None

MAX_JITTER_DOUBLINGS = 40
DEGENERATE_NORM_SQ = 1e-30
SINGULAR_DENOMINATOR = 1e-12
SYMMETRY_TOL = 1e-9


@dataclass(frozen=True)
class CovBlend:
    """Weights of the covariance blend ``C' = alpha * C + beta * v vᵀ``.

    ``alpha`` must be strictly positive; ``beta`` may be zero, which turns
    the blend into a pure rescaling of the old covariance.
    """

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.alpha) and self.alpha > 0.0):
            raise InvalidInputError(f"blend alpha must be finite and > 0, got {self.alpha}")
        if not (math.isfinite(self.beta) and self.beta >= 0.0):
            raise InvalidInputError(f"blend beta must be finite and >= 0, got {self.beta}")


def _as_square_matrix(c, name: str) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise InvalidInputError(f"{name} must be a square matrix, got shape {c.shape}")
    return c


def _as_vector(b, dim: int, name: str) -> np.ndarray:
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 1 or b.shape[0] != dim:
        raise InvalidInputError(f"{name} must be a vector of length {dim}, got shape {b.shape}")
    return b


# --- jitted kernels ---------------------------------------------------------
#
# The three inner loops below dominate the per-point cost of the online
# detector, so they are compiled with numba when available. The pure-Python
# bodies are kept callable as a fallback (and are what numba compiles).


def _forward_solve_impl(lower, b, out):
    m = lower.shape[0]
    for i in range(m):
        acc = b[i]
        for k in range(i):
            acc -= lower[i, k] * out[k]
        out[i] = acc / lower[i, i]


def _lower_inverse_impl(lower, out):
    m = lower.shape[0]
    for j in range(m):
        out[j, j] = 1.0 / lower[j, j]
        for i in range(j + 1, m):
            acc = 0.0
            for k in range(j, i):
                acc -= lower[i, k] * out[k, j]
            out[i, j] = acc / lower[i, i]


def _chol_update_impl(lower, x):
    # In-place: lower <- L' with L' L'ᵀ = lower lowerᵀ + x xᵀ. Destroys x.
    m = lower.shape[0]
    for k in range(m):
        lkk = lower[k, k]
        xk = x[k]
        r = math.sqrt(lkk * lkk + xk * xk)
        c = r / lkk
        s = xk / lkk
        lower[k, k] = r
        for i in range(k + 1, m):
            lower[i, k] = (lower[i, k] + s * x[i]) / c
            x[i] = c * x[i] - s * lower[i, k]


def _paired_update_impl(factor, cinv, z, v, alpha, beta):
    # One fused detector step: rank-one update of the factor, rank-one
    # update of the inverse, fresh log-determinant, and the inverse-vs-
    # factor drift in one compiled call. Returns
    # (new_factor, new_cinv, log_det, denom_ok, drift); when the inverse
    # denominator is unsafe, new_cinv is unspecified and denom_ok False.
    m = factor.shape[0]
    new_factor = factor * math.sqrt(alpha)
    x = np.dot(factor, z) * math.sqrt(beta)
    for k in range(m):
        lkk = new_factor[k, k]
        xk = x[k]
        r = math.sqrt(lkk * lkk + xk * xk)
        c = r / lkk
        s = xk / lkk
        new_factor[k, k] = r
        for i in range(k + 1, m):
            new_factor[i, k] = (new_factor[i, k] + s * x[i]) / c
            x[i] = c * x[i] - s * new_factor[i, k]

    log_det = 0.0
    for i in range(m):
        log_det += math.log(new_factor[i, i])
    log_det *= 2.0

    new_cinv = np.empty_like(cinv)
    gamma = beta / alpha
    w = np.dot(cinv, v)
    denom = 1.0 + gamma * np.dot(v, w)
    denom_ok = math.isfinite(denom) and denom > SINGULAR_DENOMINATOR
    drift = 0.0
    if denom_ok:
        g = gamma / denom
        for i in range(m):
            for j in range(i + 1):
                val = 0.5 * (
                    (cinv[i, j] - g * w[i] * w[j]) + (cinv[j, i] - g * w[j] * w[i])
                ) / alpha
                new_cinv[i, j] = val
                new_cinv[j, i] = val
        cov = np.dot(new_factor, new_factor.T)
        resid = np.dot(new_cinv, cov)
        for i in range(m):
            row = 0.0
            for j in range(m):
                entry = resid[i, j]
                if i == j:
                    entry -= 1.0
                row += abs(entry)
            if row > drift:
                drift = row
    return new_factor, new_cinv, log_det, denom_ok, drift


if njit is not None:
    _forward_solve = njit(cache=True)(_forward_solve_impl)
    _lower_inverse = njit(cache=True)(_lower_inverse_impl)
    _chol_update = njit(cache=True)(_chol_update_impl)
    _paired_update = njit(cache=True)(_paired_update_impl)
else:  # pragma: no cover
    _forward_solve = _forward_solve_impl
    _lower_inverse = _lower_inverse_impl
    _chol_update = _chol_update_impl
    _paired_update = _paired_update_impl


# --- public operations ------------------------------------------------------


def cholesky_factorize(c, jitter: float = 1e-10) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of a symmetric matrix, with jitter escalation.

    Returns ``(factor, lam)`` where ``factor @ factor.T == c + lam * I``.
    ``lam`` is 0 when ``c`` factorizes directly; otherwise the smallest
    ``jitter * 2**k`` (k = 0, 1, 2, ...) that makes factorization succeed.

    Raises InvalidInputError for non-square, non-finite, or asymmetric
    input, and NotPositiveDefiniteError once the escalation ladder is
    exhausted after ``MAX_JITTER_DOUBLINGS`` doublings.
    """
    c = _as_square_matrix(c, "covariance")
    if not np.isfinite(c).all():
        raise InvalidInputError("covariance contains non-finite entries")
    if not (math.isfinite(jitter) and jitter > 0.0):
        raise InvalidInputError(f"jitter must be finite and > 0, got {jitter}")
    scale = max(1.0, float(np.abs(c).max())) if c.size else 1.0
    if c.size and float(np.abs(c - c.T).max()) > SYMMETRY_TOL * scale:
        raise InvalidInputError("covariance is not symmetric")
    c = 0.5 * (c + c.T)

    eye = np.eye(c.shape[0])
    ladder = [0.0] + [jitter * 2.0**k for k in range(MAX_JITTER_DOUBLINGS + 1)]
    for lam in ladder:
        try:
            return np.linalg.cholesky(c + lam * eye), lam
        except np.linalg.LinAlgError:
            continue
    raise NotPositiveDefiniteError(
        f"factorization failed after {MAX_JITTER_DOUBLINGS} jitter doublings (last lam={ladder[-1]:g})"
    )


def tri_solve_lower(a, b) -> np.ndarray:
    """Solve ``A y = b`` for lower-triangular ``A`` by forward substitution."""
    a = _as_square_matrix(a, "factor")
    b = _as_vector(b, a.shape[0], "rhs")
    out = np.empty_like(b)
    _forward_solve(a, b, out)
    return out


def factor_rank_one_update(a, z, blend: CovBlend) -> np.ndarray:
    """Lower-triangular factor of ``alpha * A Aᵀ + beta * v vᵀ`` with ``v = A z``.

    Computed as a rank-one Cholesky update of ``sqrt(alpha) * A`` with the
    vector ``sqrt(beta) * v``: O(m²), and the result keeps a strictly
    positive diagonal. (Adding the rank-one term ``v zᵀ`` to the factor
    directly would yield a dense square root of the same blend; the
    triangular factor of that blend is unique, and triangularity is what
    keeps forward substitution and the diagonal log-determinant valid.)

    Raises DegenerateDirectionError when ``‖z‖²`` is below 1e-30; callers
    should skip the update for such directions.
    """
    a = _as_square_matrix(a, "factor")
    z = _as_vector(z, a.shape[0], "direction")
    norm_sq = float(z @ z)
    if not math.isfinite(norm_sq):
        raise InvalidInputError("direction contains non-finite entries")
    if norm_sq < DEGENERATE_NORM_SQ:
        raise DegenerateDirectionError(f"direction norm² {norm_sq:g} is degenerate")
    v = a @ z
    out = a * math.sqrt(blend.alpha)
    x = v * math.sqrt(blend.beta)
    _chol_update(out, x)
    return out


def sherman_morrison_update(cinv, v, blend: CovBlend) -> np.ndarray:
    """Inverse of ``alpha * C + beta * v vᵀ`` given ``cinv = C⁻¹``.

    Uses the rank-one inverse identity

        (1/alpha) * (C⁻¹ - (beta/alpha) * C⁻¹ v vᵀ C⁻¹ / (1 + (beta/alpha) vᵀ C⁻¹ v))

    and symmetrizes the result to suppress floating-point asymmetry drift.
    Raises SingularUpdateError when the denominator falls to 1e-12 or below.
    """
    cinv = _as_square_matrix(cinv, "inverse covariance")
    v = _as_vector(v, cinv.shape[0], "direction")
    gamma = blend.beta / blend.alpha
    w = cinv @ v
    denom = 1.0 + gamma * float(v @ w)
    if not math.isfinite(denom) or denom <= SINGULAR_DENOMINATOR:
        raise SingularUpdateError(f"rank-one denominator {denom:g} is not safely positive")
    out = (cinv - np.outer(w, w) * (gamma / denom)) / blend.alpha
    return 0.5 * (out + out.T)


def log_det_from_factor(a) -> float:
    """``log |A Aᵀ| = 2 Σ log aᵢᵢ`` for a lower-triangular factor ``A``."""
    a = _as_square_matrix(a, "factor")
    diag = np.diag(a)
    if diag.size and (not np.isfinite(diag).all() or (diag <= 0.0).any()):
        raise InvalidFactorError("factor diagonal must be finite and strictly positive")
    return 2.0 * float(np.sum(np.log(diag)))


def inverse_from_factor(a) -> np.ndarray:
    """``(A Aᵀ)⁻¹`` from a lower-triangular factor, via triangular inversion.

    Inverts ``A`` by forward substitution against the identity, then forms
    ``A⁻ᵀ A⁻¹``; the result is symmetrized. This is the refactorization
    fallback used to clear accumulated drift in a maintained inverse.
    """
    a = _as_square_matrix(a, "factor")
    diag = np.diag(a)
    if diag.size and (not np.isfinite(diag).all() or (diag <= 0.0).any()):
        raise InvalidFactorError("factor diagonal must be finite and strictly positive")
    w = np.zeros_like(a)
    _lower_inverse(a, w)
    out = w.T @ w
    return 0.5 * (out + out.T)

"""Experiment engine: AAD metric, segmented static-vs-online protocols, and
synthetic stream generators.

Both experiment protocols split the stream into segments, fit the model on
a growing static prefix, run the online updates over part of the rest, and
score the maintained covariance against the batch covariance of everything
consumed. ``aad`` is the mean absolute relative deviation over the
flattened matrix entries.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .detector import fit_static, update_online
from .errors import DegenerateTruthError, InsufficientDataError, InvalidInputError

EXPERIMENT_1 = "experiment-1"
EXPERIMENT_2 = "experiment-2"
SHIFT_ABRUPT_TRANSIENT = "abrupt-transient"
SHIFT_ABRUPT_DISTRIBUTIONAL = "abrupt-distributional"
SHIFT_GRADUAL = "gradual-distributional"
SHIFT_KINDS = (SHIFT_ABRUPT_TRANSIENT, SHIFT_ABRUPT_DISTRIBUTIONAL, SHIFT_GRADUAL)

TRUTH_EPSILON = 1e-12
CSV_HEADER = "experiment,static_count,aad,points,seed,elapsed_ms"


@dataclass(frozen=True)
class SegmentPlan:
    """How to segment a stream and which protocol to run.

    ``static_count`` pins a single static-prefix size; when None the
    experiment sweeps every size from 1 to n_segments - 1.
    """

    n_segments: int = 5
    static_count: int | None = None
    mode: str = EXPERIMENT_1

    def __post_init__(self) -> None:
        if self.n_segments < 2:
            raise InvalidInputError(f"need at least 2 segments, got {self.n_segments}")
        if self.static_count is not None and not 1 <= self.static_count <= self.n_segments - 1:
            raise InvalidInputError(
                f"static_count must be in [1, {self.n_segments - 1}], got {self.static_count}"
            )
        if self.mode not in (EXPERIMENT_1, EXPERIMENT_2):
            raise InvalidInputError(f"unknown experiment mode {self.mode!r}")


@dataclass(frozen=True)
class AadReport:
    """Result of one (protocol, static prefix) run.

    ``aad`` scores the maintained covariance; ``aad_inverse`` scores the
    maintained inverse against the inverse of the batch covariance.
    ``elapsed`` is wall-clock seconds for the fit + online phase.
    """

    static_count: int
    aad: float
    points_evaluated: int
    elapsed: float
    aad_inverse: float


@dataclass(frozen=True)
class ShiftSpec:
    """One synthetic signal change: what kind, where, and how large."""

    kind: str
    at: float = 0.5
    magnitude: float = 1.0
    ramp: int = 1

    def __post_init__(self) -> None:
        if self.kind not in SHIFT_KINDS:
            raise InvalidInputError(f"kind must be one of {SHIFT_KINDS}, got {self.kind!r}")
        if not 0.0 < self.at < 1.0:
            raise InvalidInputError(f"at must be inside (0, 1), got {self.at}")
        if not np.isfinite(self.magnitude):
            raise InvalidInputError(f"magnitude must be finite, got {self.magnitude}")
        if self.kind == SHIFT_GRADUAL and self.ramp < 1:
            raise InvalidInputError(f"ramp must be >= 1 for gradual shifts, got {self.ramp}")


def aad(predicted, truth) -> float:
    """Mean absolute relative deviation between two same-shaped arrays.

    Entries whose ground truth is within 1e-12 of zero are skipped (a
    relative error is undefined there) and the divisor shrinks with them;
    at least one entry must survive.
    """
    predicted = np.asarray(predicted, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if predicted.shape != truth.shape:
        raise InvalidInputError(f"shape mismatch: {predicted.shape} vs {truth.shape}")
    p = predicted.ravel()
    y = truth.ravel()
    mask = np.abs(y) > TRUTH_EPSILON
    if not mask.any():
        raise DegenerateTruthError("every ground-truth entry is within 1e-12 of zero")
    return float(np.mean(np.abs((p[mask] - y[mask]) / y[mask])))


def split_segments(data: np.ndarray, n_segments: int) -> list[np.ndarray]:
    """Split rows into n_segments chunks; the remainder goes to the last."""
    n = data.shape[0]
    base = n // n_segments
    if base < 1:
        raise InsufficientDataError(f"{n} points cannot fill {n_segments} segments")
    bounds = [base * i for i in range(n_segments)] + [n]
    return [data[bounds[i] : bounds[i + 1]] for i in range(n_segments)]


def _run_protocol(data, plan: SegmentPlan, jitter: float) -> list[AadReport]:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, None]
    segments = split_segments(data, plan.n_segments)
    counts = (
        [plan.static_count]
        if plan.static_count is not None
        else list(range(1, plan.n_segments))
    )
    reports = []
    for static_count in counts:
        start = time.perf_counter()
        static = np.concatenate(segments[:static_count])
        model = fit_static(static, jitter=jitter)
        if plan.mode == EXPERIMENT_1:
            online = segments[static_count]
            consumed = np.concatenate(segments[: static_count + 1])
        else:
            online = np.concatenate(segments[static_count:])
            consumed = data
        for x in online:
            model = update_online(model, x)
        truth = np.atleast_2d(np.cov(consumed, rowvar=False, ddof=1))
        cov_err = aad(model.covariance(), truth)
        inv_err = aad(model.cinv, np.linalg.inv(truth))
        reports.append(
            AadReport(
                static_count=static_count,
                aad=cov_err,
                points_evaluated=online.shape[0],
                elapsed=time.perf_counter() - start,
                aad_inverse=inv_err,
            )
        )
    return reports


def run_experiment_1(data, plan: SegmentPlan | None = None, jitter: float = 1e-10) -> list[AadReport]:
    """Online phase over the single segment after the static prefix.

    For each static prefix size, fit on that prefix, update through the
    next segment only, and compare against the batch covariance of the
    prefix plus that segment.
    """
    plan = plan or SegmentPlan(mode=EXPERIMENT_1)
    if plan.mode != EXPERIMENT_1:
        raise InvalidInputError(f"plan mode {plan.mode!r} does not match experiment 1")
    return _run_protocol(data, plan, jitter)


def run_experiment_2(data, plan: SegmentPlan | None = None, jitter: float = 1e-10) -> list[AadReport]:
    """Online phase over every remaining segment.

    Same sweep as experiment 1, but the updates continue to the end of the
    stream and the comparison target is the batch covariance of all data.
    """
    plan = plan or SegmentPlan(mode=EXPERIMENT_2)
    if plan.mode != EXPERIMENT_2:
        raise InvalidInputError(f"plan mode {plan.mode!r} does not match experiment 2")
    return _run_protocol(data, plan, jitter)


def gen_random_stream(count: int, dim: int, seed: int) -> np.ndarray:
    """Deterministic i.i.d. standard-normal vectors, shape (count, dim)."""
    if count < 1 or dim < 1:
        raise InvalidInputError(f"count and dim must be >= 1, got {count}, {dim}")
    return np.random.default_rng(seed).standard_normal((count, dim))


def shift_offsets(count: int, spec: ShiftSpec) -> np.ndarray:
    """Additive mean profile of a shift over a length-``count`` stream."""
    pos = int(spec.at * count)
    offsets = np.zeros(count)
    if spec.kind == SHIFT_ABRUPT_TRANSIENT:
        offsets[pos] = spec.magnitude
    elif spec.kind == SHIFT_ABRUPT_DISTRIBUTIONAL:
        offsets[pos:] = spec.magnitude
    else:
        steps = np.arange(1, count - pos + 1, dtype=np.float64)
        offsets[pos:] = spec.magnitude * np.minimum(steps / spec.ramp, 1.0)
    return offsets


def gen_shift_stream(count: int, spec: ShiftSpec, seed: int) -> np.ndarray:
    """Standard-normal scalar stream with the given shift applied."""
    if count < 10:
        raise InvalidInputError(f"count must be >= 10, got {count}")
    base = np.random.default_rng(seed).standard_normal(count)
    return base + shift_offsets(count, spec)


def write_reports_csv(out, tagged_reports) -> None:
    """Write (experiment, seed, report) triples in the plot-ready CSV layout."""
    out.write(CSV_HEADER + "\n")
    for experiment, seed, report in tagged_reports:
        out.write(
            f"{experiment},{report.static_count},{report.aad:.17g},"
            f"{report.points_evaluated},{seed},{report.elapsed * 1000.0:.17g}\n"
        )

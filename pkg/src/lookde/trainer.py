"""Fitting kernel density models by leave-one-out likelihood.

The primary optimiser is EM with zero self-responsibility: the E-step
never lets a point explain itself, so the M-step cannot shrink a kernel
onto its own centre. An Adam optimiser on the analytic gradient is
provided for speed comparisons.
"""
from __future__ import annotations

import csv
import enum
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .data import Dataset, min_pairwise_distance
from .density import (
    KernelDensityModel,
    as_matrix,
    loo_gradient,
    loo_mll,
    loo_responsibilities,
    loo_upper_bound,
)

log = logging.getLogger(__name__)


class FitError(RuntimeError):
    """Training could not proceed or produced an invalid state."""


class DuplicateRowsError(FitError, ValueError):
    pass


class FitStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"


@dataclass(frozen=True)
class EmConfig:
    convergence_threshold: float = 1e-4
    max_iterations: int = 10_000
    initial_bandwidth: float = 0.1
    bandwidth_floor: float = 1e-10
    fit_weights: bool = False

    def __post_init__(self):
        if not self.convergence_threshold > 0:
            raise ValueError("convergence_threshold must be positive")
        if not self.initial_bandwidth > 0:
            raise ValueError("initial_bandwidth must be positive")
        if self.bandwidth_floor < 0:
            raise ValueError("bandwidth_floor must be non-negative")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 0.05
    batch_size: int = 128
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    convergence_threshold: float = 1e-4
    max_epochs: int = 5000
    initial_bandwidth: float = 0.1
    seed: int = 0
    divergence_drop: float = 1e3

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if not self.initial_bandwidth > 0:
            raise ValueError("initial_bandwidth must be positive")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    loo_mll: float
    min_sigma: float
    max_sigma: float
    seconds: float


@dataclass
class FitTrace:
    records: list[TraceRecord] = field(default_factory=list)
    status: FitStatus = FitStatus.MAX_ITERATIONS

    def append(self, iteration, value, bandwidths, t0):
        if not math.isfinite(value):
            raise FitError(f"non-finite objective at iteration {iteration}")
        self.records.append(
            TraceRecord(iteration, float(value), float(bandwidths.min()),
                        float(bandwidths.max()), time.perf_counter() - t0)
        )

    @property
    def objective(self) -> np.ndarray:
        return np.array([r.loo_mll for r in self.records])

    @property
    def n_iterations(self) -> int:
        return self.records[-1].iteration if self.records else 0

    @property
    def seconds(self) -> float:
        return self.records[-1].seconds if self.records else 0.0

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "loo_mll", "min_sigma", "max_sigma", "seconds"])
            for r in self.records:
                w.writerow([r.iteration, f"{r.loo_mll:.17g}", f"{r.min_sigma:.17g}",
                            f"{r.max_sigma:.17g}", f"{r.seconds:.6f}"])


def e_step(model: KernelDensityModel, sq_dists=None) -> np.ndarray:
    """Leave-one-out responsibilities ``r[i, j]``, with ``r[i, i] = 0``.

    Each row is normalised over ``j != i`` after a log-space max shift.
    """
    if model.n_kernels < 2:
        raise FitError("E-step needs at least two points")
    return loo_responsibilities(model, sq_dists)


def m_step(centers, r: np.ndarray, fit_weights: bool, sq_dists=None, previous=None):
    """Closed-form bandwidth and weight updates from responsibilities.

    ``s_j^2 = sum_i r_ij D_ij^2 / (d sum_i r_ij)``, and when fitting weights
    ``pi_j = sum_i r_ij / N``. A kernel with no responsibility keeps its
    previous bandwidth (1.0 if none is given) and gets zero weight.

    Returns
    -------
    bandwidths, weights : ndarray
    """
    x = as_matrix(centers)
    n, d = x.shape
    if sq_dists is None:
        sq_dists = cdist(x, x, "sqeuclidean")
    mass = r.sum(axis=0)
    if not np.any(mass > 0):
        raise FitError("all responsibilities are zero")
    empty = ~(mass > 0)
    safe = np.where(empty, 1.0, mass)
    bandwidths = np.sqrt((r * sq_dists).sum(axis=0) / (d * safe))
    if np.any(empty):
        prev = np.ones(n) if previous is None else np.asarray(previous, float)
        bandwidths = np.where(empty, prev, bandwidths)
    if fit_weights:
        weights = mass / n
        weights = np.where(empty, 0.0, weights)
        weights = weights / weights.sum()
    else:
        weights = np.full(n, 1.0 / n)
    return bandwidths, weights


def _check_trainable(train: Dataset | np.ndarray) -> np.ndarray:
    x = train.values if isinstance(train, Dataset) else as_matrix(train)
    if x.shape[0] < 2:
        raise FitError("need at least two training points")
    if min_pairwise_distance(x).has_repeats:
        raise DuplicateRowsError(
            "training data contains repeated rows; the leave-one-out objective is "
            "unbounded for repeated points, so deduplicate them first"
        )
    return x


def _make_model(x, bandwidths, weights, fit_weights) -> KernelDensityModel:
    if fit_weights:
        return KernelDensityModel.pi_kde(x, bandwidths, weights)
    return KernelDensityModel.a_kde(x, bandwidths)


def fit_em(train: Dataset | np.ndarray, config: EmConfig = EmConfig()):
    """Maximise the leave-one-out likelihood by modified EM.

    Starts from ``initial_bandwidth`` on every kernel and uniform weights.
    Stops when the per-point change of the objective drops below the
    threshold. Raises :class:`FitError` if the objective ever decreases
    beyond round-off, becomes non-finite, or exceeds its upper bound.

    Returns
    -------
    model : KernelDensityModel
    trace : FitTrace
        Iteration 0 is the initial state.
    """
    x = _check_trainable(train)
    n = x.shape[0]
    sq = cdist(x, x, "sqeuclidean")
    bound = loo_upper_bound(x)
    t0 = time.perf_counter()

    model = _make_model(x, config.initial_bandwidth, np.full(n, 1.0 / n), config.fit_weights)
    trace = FitTrace()
    prev = loo_mll(model, sq_dists=sq).value
    trace.append(0, prev, model.bandwidths, t0)

    for it in range(1, config.max_iterations + 1):
        r = e_step(model, sq)
        bw, w = m_step(x, r, config.fit_weights, sq, previous=model.bandwidths)
        bw = np.maximum(bw, config.bandwidth_floor)
        model = _make_model(x, bw, w, config.fit_weights)
        value = loo_mll(model, sq_dists=sq).value
        trace.append(it, value, bw, t0)
        if value < prev - 1e-9 * abs(prev):
            raise FitError(f"objective decreased at iteration {it}: {prev!r} -> {value!r}")
        if value > bound:
            raise FitError(f"objective {value!r} exceeds its upper bound {bound!r}")
        done = abs(value - prev) / n < config.convergence_threshold
        prev = value
        if done:
            trace.status = FitStatus.CONVERGED
            break
    if not model.bandwidths.min() > config.bandwidth_floor:
        raise FitError("a bandwidth reached the safety floor")
    log.debug("fit_em: %s after %d iterations", trace.status.value, trace.n_iterations)
    return model, trace


def _batch_gradient(x, sq, u, idx):
    """Gradient of the objective restricted to outer points ``idx``, w.r.t. log-bandwidths."""
    s = np.exp(u)
    d = x.shape[1]
    f = -d * u - sq[idx] / (2.0 * s * s)
    f[np.arange(len(idx)), idx] = -np.inf
    w = np.exp(f - logsumexp(f, axis=1, keepdims=True))
    g_sigma = (w * sq[idx]).sum(axis=0) / s**3 - d * w.sum(axis=0) / s
    return s * g_sigma


def fit_adam(train: Dataset | np.ndarray, config: AdamConfig = AdamConfig()):
    """Gradient ascent on the A-KDE leave-one-out objective with Adam.

    Optimises ``u_j = log s_j`` so bandwidths stay positive. Mini-batches
    split the outer sum over points; every kernel is updated each step.
    Convergence is tested once per epoch on the full objective.
    """
    x = _check_trainable(train)
    n = x.shape[0]
    sq = cdist(x, x, "sqeuclidean")
    rng = np.random.default_rng(config.seed)
    t0 = time.perf_counter()

    u = np.full(n, math.log(config.initial_bandwidth))
    m = np.zeros(n)
    v = np.zeros(n)
    step = 0
    trace = FitTrace()
    model = KernelDensityModel.a_kde(x, np.exp(u))
    prev = loo_mll(model, sq_dists=sq).value
    trace.append(0, prev, model.bandwidths, t0)
    b1, b2 = config.beta1, config.beta2

    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            # descent on the negated objective, scaled to the full sum
            g = -_batch_gradient(x, sq, u, idx) * (n / len(idx))
            step += 1
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            m_hat = m / (1 - b1**step)
            v_hat = v / (1 - b2**step)
            u = u - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)
        model = KernelDensityModel.a_kde(x, np.exp(u))
        value = loo_mll(model, sq_dists=sq).value
        trace.append(epoch, value, model.bandwidths, t0)
        if value < prev - config.divergence_drop:
            raise FitError(
                f"Adam diverged at epoch {epoch}: objective fell from {prev:.6g} to {value:.6g}; "
                f"lower the learning rate (now {config.learning_rate})"
            )
        done = abs(value - prev) / n < config.convergence_threshold
        prev = value
        if done:
            trace.status = FitStatus.CONVERGED
            break
    return model, trace


def speed_comparison(train, em_config=EmConfig(), batch_sizes=(128, 256, 512, 1024),
                     learning_rates=(0.01, 0.05, 0.10), adam_defaults=AdamConfig()):
    """Wall-clock time to convergence for EM and an Adam hyperparameter grid.

    Returns a list of dict rows with keys ``optimizer``, ``batch_size``,
    ``learning_rate``, ``seconds``, ``epochs``, ``status`` and ``loo_mll``.
    Timings depend on the machine.
    """
    rows = []
    _, tr = fit_em(train, em_config)
    rows.append(dict(optimizer="em", batch_size=None, learning_rate=None, seconds=tr.seconds,
                     epochs=tr.n_iterations, status=tr.status.value, loo_mll=tr.objective[-1]))
    for bs in batch_sizes:
        for lr in learning_rates:
            cfg = AdamConfig(**{**adam_defaults.__dict__, "batch_size": bs, "learning_rate": lr})
            t0 = time.perf_counter()
            try:
                _, tr = fit_adam(train, cfg)
                row = dict(seconds=tr.seconds, epochs=tr.n_iterations, status=tr.status.value,
                           loo_mll=tr.objective[-1])
            except FitError as exc:
                log.warning("adam bs=%d lr=%g failed: %s", bs, lr, exc)
                row = dict(seconds=time.perf_counter() - t0, epochs=None, status="diverged",
                           loo_mll=float("nan"))
            rows.append(dict(optimizer="adam", batch_size=bs, learning_rate=lr, **row))
    return rows

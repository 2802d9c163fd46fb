"""Adaptive Gaussian kernel density models and their likelihood objectives.

Two model families share one type. An A-KDE has fixed uniform weights
``1/N`` and one bandwidth per kernel; a pi-KDE also carries learnable
kernel weights. Kernel centres are always the training points.

All sums over kernels are reduced in log space with a max shift, since the
bandwidth-collapse experiments visit bandwidths where the kernel values
underflow.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .data import Dataset, min_pairwise_distance

LOG_2PI = math.log(2.0 * math.pi)


class DensityError(ValueError):
    pass


def as_matrix(x) -> np.ndarray:
    """Points as an (N, d) float array; a 1-D input is N points in one dimension."""
    x = np.array(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(-1, 1)
    return x


@dataclass(frozen=True)
class KernelDensityModel:
    """Isotropic Gaussian mixture with one kernel per training point.

    Attributes
    ----------
    centers : (N, d) ndarray
        Kernel centres, fixed to the training points.
    bandwidths : (N,) ndarray
        Per-kernel standard deviations, all positive.
    weights : (N,) ndarray
        Kernel weights on the simplex.
    uniform_weights : bool
        True for an A-KDE, where every weight is exactly ``1/N``.
    """

    centers: np.ndarray
    bandwidths: np.ndarray
    weights: np.ndarray
    uniform_weights: bool = True

    def __post_init__(self):
        c = as_matrix(self.centers)
        n = c.shape[0]
        s = np.broadcast_to(np.asarray(self.bandwidths, dtype=float), (n,)).copy()
        if self.uniform_weights:
            w = np.full(n, 1.0 / n)
        else:
            w = np.array(self.weights, dtype=float).reshape(n)
        if not np.all(np.isfinite(c)):
            raise DensityError("centres must be finite")
        if not np.all(np.isfinite(s) & (s > 0)):
            raise DensityError("bandwidths must be finite and positive")
        if np.any(w < 0) or not np.all(np.isfinite(w)) or abs(w.sum() - 1.0) > 1e-12:
            raise DensityError("weights must be non-negative and sum to one")
        for a in (c, s, w):
            a.setflags(write=False)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "bandwidths", s)
        object.__setattr__(self, "weights", w)

    @classmethod
    def a_kde(cls, centers, bandwidths) -> "KernelDensityModel":
        return cls(centers, bandwidths, None, uniform_weights=True)

    @classmethod
    def pi_kde(cls, centers, bandwidths, weights) -> "KernelDensityModel":
        return cls(centers, bandwidths, weights, uniform_weights=False)

    @property
    def n_kernels(self) -> int:
        return self.centers.shape[0]

    @property
    def n_dims(self) -> int:
        return self.centers.shape[1]

    @property
    def kind(self) -> str:
        return "a-kde" if self.uniform_weights else "pi-kde"

    def replace(self, bandwidths=None, weights=None) -> "KernelDensityModel":
        s = self.bandwidths if bandwidths is None else bandwidths
        if self.uniform_weights:
            return KernelDensityModel.a_kde(self.centers, s)
        w = self.weights if weights is None else weights
        return KernelDensityModel.pi_kde(self.centers, s, w)

    def log_density(self, x) -> np.ndarray:
        return log_density(self, x)

    def sample(self, n: int, seed: int) -> np.ndarray:
        return sample(self, n, seed)


class ObjectiveKind(enum.Enum):
    TOTAL_MLL = "total_mll"
    LOO_MLL = "loo_mll"


class ObjectiveValue(NamedTuple):
    value: float
    kind: ObjectiveKind

    def __float__(self):
        return self.value


def log_kernel_matrix(model: KernelDensityModel, sq_dists: np.ndarray, weighted: bool = True) -> np.ndarray:
    """``f[i, j] = log pi_j + log N(x_i; c_j, s_j^2 I)`` from squared distances."""
    d = model.n_dims
    s = model.bandwidths
    f = -0.5 * d * LOG_2PI - d * np.log(s) - sq_dists / (2.0 * s * s)
    if weighted:
        with np.errstate(divide="ignore"):
            f = f + np.log(model.weights)
    return f


def _as_points(model: KernelDensityModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim <= 1:
        x = x.reshape(-1, model.n_dims) if x.size else np.empty((0, model.n_dims))
    if x.shape[1] != model.n_dims:
        raise DensityError(f"dimension mismatch: model has d={model.n_dims}, points have {x.shape[1]}")
    return x


def log_density(model: KernelDensityModel, x) -> float | np.ndarray:
    """Log mixture density at one point (d-vector) or at each row of a matrix."""
    single = np.ndim(x) <= 1 and np.size(x) == model.n_dims
    pts = _as_points(model, x)
    f = log_kernel_matrix(model, cdist(pts, model.centers, "sqeuclidean"))
    out = logsumexp(f, axis=1)
    return float(out[0]) if single else out


def total_mll(model: KernelDensityModel, data: Dataset | np.ndarray) -> ObjectiveValue:
    """Sum over points of the log density, self-terms included.

    The value is not divided by the number of points; divide by ``N`` for
    the average log-likelihood.
    """
    x = data.values if isinstance(data, Dataset) else data
    pts = _as_points(model, x)
    if pts.shape[0] == 0:
        return ObjectiveValue(0.0, ObjectiveKind.TOTAL_MLL)
    return ObjectiveValue(float(np.sum(log_density(model, pts))), ObjectiveKind.TOTAL_MLL)


def _loo_terms(model: KernelDensityModel, sq_dists=None, weighted=True) -> np.ndarray:
    if model.n_kernels < 2:
        raise DensityError("leave-one-out objective needs at least two points")
    if sq_dists is None:
        sq_dists = cdist(model.centers, model.centers, "sqeuclidean")
    f = log_kernel_matrix(model, sq_dists, weighted=weighted)
    np.fill_diagonal(f, -np.inf)
    return f


def loo_mll(model: KernelDensityModel, weighted: bool = True, sq_dists=None) -> ObjectiveValue:
    """Leave-one-out log-likelihood of the model on its own centres.

    ``sum_i log sum_{j != i} pi_j N(x_i; x_j, s_j^2 I)``. The excluded
    self-term is not compensated for: an A-KDE keeps weight ``1/N`` on the
    remaining ``N - 1`` kernels.

    With ``weighted=False`` the weights are dropped and the inner sum is the
    plain kernel sum. For an A-KDE this differs from the weighted value by
    the constant ``N log N``; it is the quantity bounded by
    :func:`loo_upper_bound`.
    """
    f = _loo_terms(model, sq_dists, weighted)
    return ObjectiveValue(float(np.sum(logsumexp(f, axis=1))), ObjectiveKind.LOO_MLL)


def loo_responsibilities(model: KernelDensityModel, sq_dists=None) -> np.ndarray:
    """Row-softmax of the log kernel terms with the diagonal excluded."""
    f = _loo_terms(model, sq_dists, weighted=True)
    w = np.exp(f - logsumexp(f, axis=1, keepdims=True))
    np.fill_diagonal(w, 0.0)
    return w


def loo_gradient(model: KernelDensityModel, sq_dists=None) -> np.ndarray:
    """Gradient of :func:`loo_mll` with respect to each bandwidth.

    ``g_j = sum_{i != j} (D_ij^2 / s_j^3 - d / s_j) w_ij`` where ``w_ij`` is
    the leave-one-out responsibility of kernel ``j`` for point ``i``.
    """
    if sq_dists is None:
        sq_dists = cdist(model.centers, model.centers, "sqeuclidean")
    w = loo_responsibilities(model, sq_dists)
    s = model.bandwidths
    d = model.n_dims
    return (w * sq_dists).sum(axis=0) / s**3 - d * w.sum(axis=0) / s


def max_kernel_value(m: float, d: int) -> float:
    """Largest value of N(x; y, s^2 I) over s > 0 for ``|x - y| = m``.

    Attained at ``s^2 = m^2 / d``, giving ``(d / (2 pi e m^2))^(d/2)``.
    """
    return (d / (2.0 * math.pi * math.e * m * m)) ** (d / 2.0)


def loo_upper_bound(centers) -> float:
    """Upper bound ``N log((N - 1) c)`` on the unweighted leave-one-out objective.

    ``c`` is :func:`max_kernel_value` at the minimum pairwise distance of
    the centres. Raises if any centre is repeated, since the objective is
    then unbounded.
    """
    c = as_matrix(centers)
    n, d = c.shape
    m, repeats = min_pairwise_distance(c)
    if repeats:
        raise DensityError("repeated centres make the bound infinite; deduplicate the data first")
    log_c = 0.5 * d * (math.log(d) - LOG_2PI - 1.0 - 2.0 * math.log(m))
    return n * (math.log(n - 1) + log_c)


def sample(model: KernelDensityModel, n: int, seed: int) -> np.ndarray:
    """Ancestral draws: pick kernel ``j`` with probability ``pi_j``, add ``s_j z``."""
    rng = np.random.default_rng(seed)
    if n == 0:
        return np.empty((0, model.n_dims))
    idx = rng.choice(model.n_kernels, size=n, p=model.weights)
    z = rng.standard_normal((n, model.n_dims))
    return model.centers[idx] + model.bandwidths[idx, None] * z


def collapse_curve(
    model: KernelDensityModel,
    data: Dataset | np.ndarray,
    j: int,
    sigmas: Sequence[float],
) -> list[tuple[float, float]]:
    """Total log-likelihood as kernel ``j``'s bandwidth is driven towards zero.

    Every other bandwidth is held at its current value. On its own training
    points the plain likelihood grows like ``-d log s_j`` without bound.
    """
    x = data.values if isinstance(data, Dataset) else np.asarray(data, float)
    if not 0 <= j < model.n_kernels:
        raise DensityError(f"kernel index {j} out of range")
    sigmas = [float(s) for s in sigmas]
    if any(not (s > 0 and math.isfinite(s)) for s in sigmas):
        raise DensityError("every bandwidth in the grid must be positive")
    out = []
    for s in sigmas:
        bw = model.bandwidths.copy()
        bw[j] = s
        out.append((s, total_mll(model.replace(bandwidths=bw), x).value))
    return out


def override_bandwidth(model: KernelDensityModel, j: int, s: float) -> KernelDensityModel:
    bw = model.bandwidths.copy()
    bw[j] = s
    return model.replace(bandwidths=bw)

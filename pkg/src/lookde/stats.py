"""Two-sample statistics used as model-evaluation scores.

Multivariate sample tests (MMD, energy) compare point clouds. The
one-dimensional model tests (KS, CvM, mean difference) compare the
resulting score distributions. Only raw statistics are returned; no
p-values.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .density import as_matrix


class SampleTest(enum.Enum):
    MMD = "MMD"
    ENERGY = "Energy"


class ModelTest(enum.Enum):
    KS = "KS"
    CVM = "CvM"
    DELTA_MEAN = "DeltaMean"


@dataclass(frozen=True)
class SampleTestKind:
    """A sample test plus, for MMD, its kernel bandwidth (None = median heuristic)."""

    test: SampleTest = SampleTest.MMD
    bandwidth: float | None = None

    def __post_init__(self):
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValueError("fixed MMD bandwidth must be positive")

    @property
    def name(self) -> str:
        return self.test.value

    def __call__(self, x, y) -> float:
        if self.test is SampleTest.MMD:
            return mmd_statistic(x, y, self.bandwidth)
        return energy_statistic(x, y)


MMD = SampleTestKind(SampleTest.MMD)
ENERGY = SampleTestKind(SampleTest.ENERGY)


def _pair(x, y):
    x, y = as_matrix(x), as_matrix(y)
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise ValueError("empty sample")
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    return x, y


def median_heuristic(x, y) -> float:
    """Median of the non-zero pairwise distances in the pooled sample."""
    z = np.vstack(_pair(x, y))
    d = pdist(z)
    d = d[d > 0]
    if d.size == 0:
        raise ValueError("all pooled points coincide; no bandwidth can be chosen")
    return float(np.median(d))


def mmd_statistic(x, y, bandwidth: float | None = None) -> float:
    """Biased (V-statistic) squared MMD with a Gaussian kernel.

    ``k(a, b) = exp(-|a - b|^2 / (2 h^2))`` with ``h`` from
    :func:`median_heuristic` unless given.
    """
    x, y = _pair(x, y)
    h = median_heuristic(x, y) if bandwidth is None else float(bandwidth)
    g = -0.5 / (h * h)
    kxx = np.exp(g * cdist(x, x, "sqeuclidean")).mean()
    kyy = np.exp(g * cdist(y, y, "sqeuclidean")).mean()
    kxy = np.exp(g * cdist(x, y, "sqeuclidean")).mean()
    return max(float(kxx + kyy - 2.0 * kxy), 0.0)


def energy_statistic(x, y) -> float:
    """V-statistic energy distance ``2 E|X-Y| - E|X-X'| - E|Y-Y'|``."""
    x, y = _pair(x, y)
    e = 2.0 * cdist(x, y).mean() - cdist(x, x).mean() - cdist(y, y).mean()
    return max(float(e), 0.0)


def _scores(a, b):
    a = np.asarray(a, float).ravel()
    b = np.asarray(b, float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("empty score list")
    return a, b


def _ecdfs_at_pooled(a, b):
    a, b = np.sort(a), np.sort(b)
    z = np.concatenate([a, b])
    fa = np.searchsorted(a, z, side="right") / a.size
    fb = np.searchsorted(b, z, side="right") / b.size
    return fa, fb


def ks_two_sample(a, b) -> float:
    """Largest absolute gap between the two right-continuous ECDFs."""
    a, b = _scores(a, b)
    fa, fb = _ecdfs_at_pooled(a, b)
    return float(np.abs(fa - fb).max())


def cvm_two_sample(a, b) -> float:
    r"""Two-sample Cramer-von Mises criterion T.

    Computed as ``nm/(n+m)^2 * sum_z (F_a(z) - F_b(z))^2`` over every pooled
    observation ``z``. Without ties this equals Anderson's rank form
    ``U / (nm(n+m)) - (4nm - 1) / (6(n+m))``. With ties it remains
    non-negative and is 0 for identical samples, which the midrank version
    is not.
    """
    a, b = _scores(a, b)
    n, m = a.size, b.size
    fa, fb = _ecdfs_at_pooled(a, b)
    return float(n * m / (n + m) ** 2 * np.sum((fa - fb) ** 2))


def mean_diff(model_scores, base_scores) -> float:
    """Signed ``mean(model) - mean(base)``."""
    a, b = _scores(model_scores, base_scores)
    return float(a.mean() - b.mean())


def model_test(kind: ModelTest, base_scores, model_scores) -> float:
    if kind is ModelTest.KS:
        return ks_two_sample(base_scores, model_scores)
    if kind is ModelTest.CVM:
        return cvm_two_sample(base_scores, model_scores)
    return mean_diff(model_scores, base_scores)

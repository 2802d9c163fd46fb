"""Full-covariance Gaussian mixture baseline fitted by standard EM.

No covariance regularisation is applied unless asked for, so the usual
singular solutions surface as a :class:`GmmFailure` instead of being
smoothed away.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .data import Dataset
from .density import LOG_2PI, as_matrix


class SingularCovariance(ArithmeticError):
    pass


@dataclass(frozen=True)
class GmmModel:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, float).ravel()
        mu = np.atleast_2d(np.array(self.means, float))
        cov = np.array(self.covariances, float).reshape(len(w), mu.shape[1], mu.shape[1])
        if mu.shape[0] != len(w):
            raise ValueError("weights and means disagree on the number of components")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must lie on the simplex")
        if not np.allclose(cov, np.swapaxes(cov, 1, 2), atol=1e-10, rtol=0):
            raise ValueError("covariances must be symmetric")
        chol = _cholesky_all(cov)
        for a in (w, mu, cov, chol):
            a.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covariances", cov)
        object.__setattr__(self, "_chol", chol)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def n_dims(self) -> int:
        return self.means.shape[1]

    def log_density(self, x):
        return gmm_log_density(self, x)

    def sample(self, n: int, seed: int) -> np.ndarray:
        return gmm_sample(self, n, seed)


def _cholesky_all(cov: np.ndarray, min_eig: float = 1e-12) -> np.ndarray:
    out = np.empty_like(cov)
    for k, c in enumerate(cov):
        if not np.all(np.isfinite(c)):
            raise SingularCovariance(f"component {k}: non-finite covariance")
        if np.linalg.eigvalsh(c).min() < min_eig:
            raise SingularCovariance(f"component {k}: covariance eigenvalue below {min_eig}")
        try:
            out[k] = np.linalg.cholesky(c)
        except np.linalg.LinAlgError as exc:
            raise SingularCovariance(f"component {k}: {exc}") from None
    return out


def _component_log_pdf(x, means, chol):
    """(n, K) matrix of log N(x_i; mu_k, Sigma_k)."""
    n, d = x.shape
    out = np.empty((n, means.shape[0]))
    for k in range(means.shape[0]):
        z = solve_triangular(chol[k], (x - means[k]).T, lower=True)
        log_det = 2.0 * np.log(np.diag(chol[k])).sum()
        out[:, k] = -0.5 * (d * LOG_2PI + log_det + (z * z).sum(axis=0))
    return out


def gmm_log_density(model: GmmModel, x):
    single = np.ndim(x) <= 1 and np.size(x) == model.n_dims
    pts = np.asarray(x, float).reshape(-1, model.n_dims) if np.ndim(x) <= 1 else np.asarray(x, float)
    if pts.shape[1] != model.n_dims:
        raise ValueError(f"dimension mismatch: model has d={model.n_dims}, points have {pts.shape[1]}")
    with np.errstate(divide="ignore"):
        lw = np.log(model.weights)
    out = logsumexp(_component_log_pdf(pts, model.means, model._chol) + lw, axis=1)
    return float(out[0]) if single else out


def gmm_sample(model: GmmModel, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if n == 0:
        return np.empty((0, model.n_dims))
    comp = rng.choice(model.n_components, size=n, p=model.weights)
    z = rng.standard_normal((n, model.n_dims))
    return model.means[comp] + np.einsum("nij,nj->ni", model._chol[comp], z)


class GmmFailure(enum.Enum):
    COVARIANCE_SINGULAR = "covariance_singular"
    NOT_CONVERGED = "not_converged"


@dataclass
class GmmFitResult:
    model: GmmModel | None
    failure: GmmFailure | None
    iterations: int
    log_likelihood: float
    history: list[float] = field(default_factory=list)
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.model is not None


def kde_parameter_count(n_train: int, target: str) -> int:
    t = target.lower().replace("-", "").replace("kde", "")
    if t in ("a",):
        return n_train
    if t in ("pi", "π"):
        return 2 * n_train - 1
    raise ValueError(f"unknown KDE target {target!r}; expected 'a' or 'pi'")


def gmm_parameter_count(k: int, d: int) -> int:
    """Free parameters of a K-component full-covariance mixture."""
    return k * (d + d * (d + 1) // 2 + 1) - 1


def matched_component_count(n_train: int, d: int, target: str) -> int:
    """Component count whose parameter total is closest to the KDE's.

    A-KDE has ``N`` free parameters and pi-KDE ``2N - 1``. Ties go to the
    smaller K.
    """
    if n_train < 2 or d < 1:
        raise ValueError("need n_train >= 2 and d >= 1")
    want = kde_parameter_count(n_train, target)
    per = d + d * (d + 1) // 2 + 1
    # the optimum is one of the two integers bracketing (want + 1) / per
    lo = max(1, (want + 1) // per)
    candidates = [k for k in (lo - 1, lo, lo + 1) if k >= 1]
    return min(candidates, key=lambda k: (abs(gmm_parameter_count(k, d) - want), k))


def kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: rows of ``x`` chosen with squared-distance weighting."""
    n = x.shape[0]
    idx = [int(rng.integers(n))]
    d2 = ((x - x[idx[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            j = int(rng.choice(n, p=d2 / total))
        else:
            j = int(rng.integers(n))
        idx.append(j)
        d2 = np.minimum(d2, ((x - x[j]) ** 2).sum(axis=1))
    return x[idx].copy()


def fit_gmm(
    train: Dataset | np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 1000,
    threshold: float = 1e-4,
    reg: float = 0.0,
) -> GmmFitResult:
    """EM for a full-covariance mixture.

    Means are seeded by k-means++, every covariance starts at the global
    maximum-likelihood covariance and weights start uniform. Convergence is
    declared when the per-point log-likelihood changes by less than
    ``threshold``. ``reg`` adds ``reg * I`` to each covariance. Numerical
    failure is reported in the result, never raised.
    """
    x = train.values if isinstance(train, Dataset) else as_matrix(train)
    n, d = x.shape
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={n}")
    rng = np.random.default_rng(seed)
    means = kmeans_pp(x, k, rng)
    cov0 = np.atleast_2d(np.cov(x, rowvar=False, bias=True)) + reg * np.eye(d)
    covs = np.repeat(cov0[None], k, axis=0)
    weights = np.full(k, 1.0 / k)
    history: list[float] = []

    def fail(kind, it, msg):
        ll = history[-1] if history else -math.inf
        return GmmFitResult(None, kind, it, ll, history, msg)

    for it in range(1, max_iter + 1):
        try:
            chol = _cholesky_all(covs)
        except SingularCovariance as exc:
            return fail(GmmFailure.COVARIANCE_SINGULAR, it, str(exc))
        with np.errstate(divide="ignore"):
            lp = _component_log_pdf(x, means, chol) + np.log(weights)
        norm = logsumexp(lp, axis=1, keepdims=True)
        ll = float(norm.sum())
        if not math.isfinite(ll):
            return fail(GmmFailure.COVARIANCE_SINGULAR, it, "non-finite log-likelihood")
        history.append(ll)
        if len(history) > 1 and abs(history[-1] - history[-2]) / n < threshold:
            return GmmFitResult(GmmModel(weights, means, covs), None, it - 1, ll, history)

        resp = np.exp(lp - norm)
        nk = resp.sum(axis=0)
        if np.any(nk <= 0):
            return fail(GmmFailure.COVARIANCE_SINGULAR, it, "component lost all responsibility")
        weights = nk / n
        weights = weights / weights.sum()
        means = (resp.T @ x) / nk[:, None]
        for j in range(k):
            diff = x - means[j]
            c = (resp[:, j, None] * diff).T @ diff / nk[j]
            covs[j] = 0.5 * (c + c.T) + reg * np.eye(d)
    return fail(GmmFailure.NOT_CONVERGED, max_iter, f"no convergence in {max_iter} iterations")

"""Per-frame weight estimation: least squares, Lasso + BIC, and EM.

The regression methods fit an eye-position density map ``y`` with a linear
combination of feature maps (columns of ``X``); EM fits mixture weights of
the feature maps, taken as fixed densities, to the raw eye positions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import nnls

from .errors import DegeneratePosition, NoValidPositions, RankDeficient
from .grid import WeightVector

LS = "LS"
LASSO_BIC = "LASSO_BIC"
EM = "EM"
METHODS = (LS, LASSO_BIC, EM)

CD_TOL = 1e-7
CD_MAX_SWEEPS = 100_000
# columns whose spread is below this fraction of their magnitude are constant
DEGENERATE_RTOL = 1e-9


@dataclass(frozen=True)
class RegressionProblem:
    y: np.ndarray
    X: np.ndarray
    feature_names: tuple

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != y.size:
            raise ValueError("X rows must match y length")
        if X.shape[1] < 1 or X.shape[1] != len(self.feature_names):
            raise ValueError("one feature name per column of X required")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def K(self) -> int:
        return self.X.shape[1]

    @classmethod
    def from_maps(cls, target, maps, names: Sequence[str]) -> "RegressionProblem":
        """Flatten a target grid and a ``(K, H, W)`` map array, pdf-normalizing each."""
        y = np.asarray(target, dtype=np.float64).reshape(-1)
        X = np.asarray(maps, dtype=np.float64).reshape(len(names), -1).T
        ys = y.sum()
        xs = X.sum(axis=0)
        y = y / ys if ys > 0 else y
        X = X / np.where(xs > 0, xs, 1.0)
        return cls(y, X, tuple(names))

    def rss(self, beta, intercept: float = 0.0) -> float:
        r = self.y - intercept - self.X @ np.asarray(beta, dtype=np.float64)
        return float(r @ r)


def _standardize(problem: RegressionProblem):
    """Center every column and the target; flag constant columns.

    Returns ``(Xc, yc, x_mean, y_mean, col_std, live)`` where ``live`` marks
    columns with non-negligible spread.  A constant column (the uniform map,
    or a fallback map) is aliased with the intercept and carries no weight.
    """
    X, y = problem.X, problem.y
    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    Xc = X - x_mean
    yc = y - y_mean
    col_std = np.sqrt((Xc ** 2).mean(axis=0))
    col_max = np.abs(X).max(axis=0)
    live = col_std > DEGENERATE_RTOL * np.where(col_max > 0, col_max, 1.0)
    return Xc, yc, x_mean, y_mean, col_std, live


def _constant_target_beta(problem: RegressionProblem, x_mean, live) -> Optional[np.ndarray]:
    """For a flat target, put all weight on the first constant column, if any.

    The intercept would fit such a target equally well, but attributing it to
    a constant feature (the uniform map) is the interpretable answer.
    """
    y = problem.y
    if np.ptp(y) != 0 or y[0] == 0:
        return None
    for j in np.flatnonzero(~live):
        if x_mean[j] != 0:
            beta = np.zeros(problem.K)
            beta[j] = y[0] / x_mean[j]
            return beta
    return None


def _intercept(problem: RegressionProblem, beta) -> float:
    return float(problem.y.mean() - problem.X.mean(axis=0) @ beta)


def least_squares_fit(problem: RegressionProblem, nonnegative: bool = False) -> WeightVector:
    """Least-squares weights with a free (unpenalized) intercept.

    With ``nonnegative`` the weights are constrained to be >= 0 (active-set
    NNLS on the centered problem, which profiles the intercept out exactly).
    """
    Xc, yc, x_mean, _, col_std, live = _standardize(problem)
    beta = _constant_target_beta(problem, x_mean, live)
    if beta is not None:
        return WeightVector.from_beta(problem.feature_names, beta,
                                      method="NNLS" if nonnegative else LS, intercept=0.0)
    beta = np.zeros(problem.K)
    if np.any(live):
        A = Xc[:, live] / col_std[live]
        if nonnegative:
            b, _ = nnls(A, yc, maxiter=50 * problem.K + 100)
        else:
            if np.linalg.matrix_rank(A) < A.shape[1]:
                raise RankDeficient("feature matrix is rank deficient")
            b, *_ = np.linalg.lstsq(A, yc, rcond=None)
        beta[live] = b / col_std[live]
    return WeightVector.from_beta(problem.feature_names, beta,
                                  method="NNLS" if nonnegative else LS,
                                  intercept=_intercept(problem, beta))


def _kkt_violation(problem: RegressionProblem, beta) -> float:
    """Largest KKT violation of the nonnegative LS problem, in standardized units."""
    Xc, yc, _, _, col_std, live = _standardize(problem)
    A = Xc[:, live] / col_std[live]
    b = np.asarray(beta)[live] * col_std[live]
    grad = A.T @ (A @ b - yc)
    return float(max(np.max(np.where(b > 0, np.abs(grad), np.maximum(-grad, 0.0)), initial=0.0),
                     np.max(np.maximum(-b, 0.0), initial=0.0)))


@dataclass(frozen=True)
class LassoPath:
    lambdas: np.ndarray
    betas: tuple
    bics: np.ndarray

    @property
    def selected_index(self) -> int:
        return int(np.argmin(self.bics))

    @property
    def selected(self) -> WeightVector:
        return self.betas[self.selected_index]

    def n_active(self) -> np.ndarray:
        return np.array([b.n_active() for b in self.betas])


def _soft_threshold(rho: float, lam: float) -> float:
    if rho > lam:
        return rho - lam
    if rho < -lam:
        return rho + lam
    return 0.0


def _coordinate_descent(gram: np.ndarray, corr: np.ndarray, lam: float, b: np.ndarray,
                        tol: float = CD_TOL, max_sweeps: int = CD_MAX_SWEEPS) -> np.ndarray:
    """Minimize 1/2 b'Gb - c'b + lam*|b|_1 by cyclic coordinate descent (in place)."""
    K = b.size
    diag = np.diag(gram)
    # running G @ b, updated per coordinate
    gb = gram @ b
    for _ in range(max_sweeps):
        max_delta = 0.0
        for j in range(K):
            if diag[j] == 0:
                continue
            old = b[j]
            rho = corr[j] - (gb[j] - diag[j] * old)
            new = _soft_threshold(rho, lam) / diag[j]
            if new != old:
                gb += gram[:, j] * (new - old)
                b[j] = new
                max_delta = max(max_delta, abs(new - old))
        if max_delta < tol:
            break
    return b


def bic_score(problem: RegressionProblem, beta) -> float:
    """Gaussian-residual BIC: n ln(RSS/n) + k ln(n), k = nonzero coefficients.

    The residual is taken after the intercept that best fits ``beta``.
    """
    if isinstance(beta, WeightVector):
        beta = beta.beta
    beta = np.asarray(beta, dtype=np.float64)
    rss = problem.rss(beta, _intercept(problem, beta))
    if rss <= 0:
        return -math.inf
    n = problem.n
    k = int(np.count_nonzero(beta))
    return n * math.log(rss / n) + k * math.log(n)


def lasso_path(problem: RegressionProblem, n_lambda: int = 100, min_ratio: float = 1e-4,
               lambdas: Optional[Sequence[float]] = None,
               include_zero: bool = False) -> LassoPath:
    """Warm-started coordinate-descent Lasso over a decreasing penalty grid.

    Columns are centered and scaled to unit standard deviation (the target is
    centered and scaled too, which only rescales the penalty axis), and the
    objective is ``RSS / 2n + lambda * |b|_1`` on that scale with a free
    intercept.  Coefficients are reported in the original column scale and
    penalties in the original target scale.  The default grid runs from
    ``lambda_max``, the smallest penalty with an all-zero solution, down to
    ``lambda_max * min_ratio`` in ``n_lambda`` log-spaced steps.
    """
    Xc, yc, x_mean, _, col_std, live = _standardize(problem)
    n = problem.n
    flat = _constant_target_beta(problem, x_mean, live)
    if flat is not None:
        wv = WeightVector.from_beta(problem.feature_names, flat, method=LASSO_BIC, intercept=0.0)
        return LassoPath(np.zeros(1), (wv,), np.array([-math.inf]))
    y_scale = math.sqrt(float(yc @ yc) / n)
    if y_scale == 0:
        y_scale = 1.0
    A = np.zeros_like(Xc)
    A[:, live] = Xc[:, live] / col_std[live]
    gram = A.T @ A / n
    corr = A.T @ (yc / y_scale) / n

    lam_max = float(np.max(np.abs(corr)))
    if lambdas is None:
        grid = np.geomspace(lam_max, lam_max * min_ratio, n_lambda) if lam_max > 0 else np.zeros(1)
    else:
        grid = np.asarray(lambdas, dtype=np.float64) / y_scale
    if include_zero and grid[-1] != 0:
        grid = np.append(grid, 0.0)

    # RSS from the centered Gram quantities; avoids n-sized residuals per step
    yy = float(yc @ yc)
    x_mean, y_mean = problem.X.mean(axis=0), float(problem.y.mean())
    log_n = math.log(n)
    b = np.zeros(problem.K)
    betas, bics = [], []
    for lam in grid:
        _coordinate_descent(gram, corr, float(lam), b)
        beta = np.zeros(problem.K)
        beta[live] = b[live] * y_scale / col_std[live]
        betas.append(WeightVector.from_beta(problem.feature_names, beta, method=LASSO_BIC,
                                            intercept=y_mean - float(x_mean @ beta)))
        rss = yy - n * y_scale * (2 * float(corr @ b) - float(b @ gram @ b)) * y_scale
        if rss <= yy * 1e-13:
            rss = problem.rss(beta, y_mean - float(x_mean @ beta))
        bics.append(-math.inf if rss <= 0 else
                    n * math.log(rss / n) + np.count_nonzero(beta) * log_n)
    return LassoPath(grid * y_scale, tuple(betas), np.array(bics))


def lasso_fit_bic(problem: RegressionProblem, n_lambda: int = 100) -> tuple[WeightVector, LassoPath]:
    path = lasso_path(problem, n_lambda=n_lambda)
    return path.selected, path


@dataclass(frozen=True)
class EmFit:
    names: tuple
    pi: np.ndarray
    loglik_trace: tuple
    n_iter: int
    converged: bool

    def weights(self, **tags) -> WeightVector:
        return WeightVector.from_beta(self.names, self.pi, method=EM, **tags)


def em_fit_likelihoods(likelihoods, names: Sequence[str], tol: float = 1e-6, max_iter: int = 500) -> EmFit:
    """Mixture weights over fixed component densities.

    ``likelihoods`` is an ``(n_points, K)`` array holding each component's
    density at each eye position.  Weights start uniform; each iteration
    applies one E-step and one M-step and stops once the total
    log-likelihood gains less than ``tol``.
    """
    L = np.asarray(likelihoods, dtype=np.float64)
    if L.ndim != 2 or L.shape[0] == 0:
        raise NoValidPositions("EM needs at least one position")
    n, K = L.shape
    if np.any(L.sum(axis=1) <= 0):
        raise DegeneratePosition("a position has zero density under every map")
    pi = np.full(K, 1.0 / K)
    ll = float(np.log(L @ pi).sum())
    trace = [ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mix = L @ pi
        resp = L * pi / mix[:, None]
        pi = resp.mean(axis=0)
        pi /= pi.sum()
        new_ll = float(np.log(L @ pi).sum())
        trace.append(new_ll)
        gain = new_ll - ll
        ll = new_ll
        if gain < tol:
            converged = True
            break
    return EmFit(tuple(names), pi, tuple(trace), it, converged)


def em_fit(positions, maps, names: Sequence[str], tol: float = 1e-6,
           max_iter: int = 500) -> EmFit:
    """EM on integer pixel positions ``(col, row)`` over a ``(K, H, W)`` map array."""
    maps = np.asarray(maps, dtype=np.float64)
    if len(positions) == 0:
        raise NoValidPositions("EM needs at least one position")
    cols = np.array([p[0] for p in positions], dtype=int)
    rows = np.array([p[1] for p in positions], dtype=int)
    return em_fit_likelihoods(maps[:, rows, cols].T, names, tol, max_iter)

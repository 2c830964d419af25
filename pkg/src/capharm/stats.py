"""Shared numerics: L2 logistic regression, the repeated train/test split
protocol with coefficient intervals, proportion-difference intervals and the
group/synset co-occurrence heuristic."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import DegenerateDataError, DomainError

logger = logging.getLogger(__name__)

Z95 = 1.959963984540054


# -- logistic regression ---------------------------------------------------------------

def _log1pexp(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_objective(w: np.ndarray, X: np.ndarray, y: np.ndarray, lam: float,
                       fit_intercept: bool = True) -> tuple:
    """Penalized negative log-likelihood and its gradient.

    ``w`` holds the feature weights followed by the intercept (when
    ``fit_intercept``); the intercept is not penalized.
    """
    d = X.shape[1]
    coef = w[:d]
    z = X @ coef + (w[d] if fit_intercept else 0.0)
    f = float(np.sum(_log1pexp(z) - y * z) + 0.5 * lam * coef @ coef)
    r = _sigmoid(z) - y
    g = np.empty_like(w)
    g[:d] = X.T @ r + lam * coef
    if fit_intercept:
        g[d] = r.sum()
    return f, g


@dataclass
class SolverInfo:
    n_iter: int
    grad_norm: float
    converged: bool


def _validate(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DomainError(f"design matrix {X.shape} does not match {y.shape[0]} labels")
    if not np.all(np.isfinite(X)):
        raise DomainError("design matrix holds NaN or Inf")
    if not np.all((y == 0) | (y == 1)):
        raise DomainError("labels must be 0/1")
    if y.min() == y.max():
        raise DegenerateDataError("logistic regression needs both classes")
    return X, y


def train_logistic(X, y, lam: float = 1.0, tol: float = 1e-6, max_iter: int = 5000,
                   fit_intercept: bool = True, standardize: bool = False,
                   return_info: bool = False):
    """Fit L2-penalized logistic regression by full-batch gradient descent.

    Each step starts from a Barzilai-Borwein step length and backtracks
    until the Armijo condition holds. Stops when the gradient norm drops
    below ``tol`` or after ``max_iter`` iterations. Returns the weight
    vector (features, then intercept).
    """
    X, y = _validate(X, y)
    if standardize:
        mu, sd = _moments(X)
        X = (X - mu) / sd
    d = X.shape[1]
    w = np.zeros(d + int(fit_intercept))
    f, g = logistic_objective(w, X, y, lam, fit_intercept)
    step = 1.0 / (0.25 * max(1.0, np.sum(X * X)) + lam)
    gnorm = float(np.linalg.norm(g))
    it = 0
    while gnorm > tol and it < max_iter:
        it += 1
        t = step
        while True:
            w_new = w - t * g
            f_new, g_new = logistic_objective(w_new, X, y, lam, fit_intercept)
            if f_new <= f - 1e-4 * t * gnorm * gnorm or t < 1e-14:
                break
            t *= 0.5
        s, r = w_new - w, g_new - g
        sr = float(s @ r)
        step = float(s @ s) / sr if sr > 0 else t * 2.0
        w, f, g = w_new, f_new, g_new
        gnorm = float(np.linalg.norm(g))
        if t < 1e-14:
            break
    info = SolverInfo(it, gnorm, gnorm <= tol)
    if not info.converged:
        logger.debug("logistic fit stopped at gradient norm %.3g after %d iterations", gnorm, it)
    return (w, info) if return_info else w


def _moments(X):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    return mu, sd


class LogisticRegressionGD(BaseEstimator, ClassifierMixin):
    """Estimator wrapper around :func:`train_logistic`."""

    def __init__(self, lam=1.0, tol=1e-6, max_iter=5000, standardize=True):
        self.lam = lam
        self.tol = tol
        self.max_iter = max_iter
        self.standardize = standardize

    def fit(self, X, y):
        X, y = _validate(X, y)
        if self.standardize:
            self.mean_, self.scale_ = _moments(X)
        else:
            self.mean_, self.scale_ = np.zeros(X.shape[1]), np.ones(X.shape[1])
        w, info = train_logistic((X - self.mean_) / self.scale_, y, self.lam, self.tol,
                                 self.max_iter, return_info=True)
        self.coef_ = w[:-1]
        self.intercept_ = float(w[-1])
        self.n_iter_ = info.n_iter
        self.converged_ = info.converged
        self.classes_ = np.array([0, 1])
        return self

    def decision_function(self, X):
        X = np.asarray(X, dtype=float)
        return ((X - self.mean_) / self.scale_) @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        p = _sigmoid(self.decision_function(X))
        return np.column_stack([1 - p, p])

    def predict(self, X):
        return (self.decision_function(X) > 0).astype(int)


# -- split protocol --------------------------------------------------------------------

@dataclass(frozen=True)
class SplitProtocol:
    n_splits: int = 1000
    train_fraction: float = 0.70
    min_valid_splits: int = 900
    seed: int = 0
    ci_method: str = "subsample"

    def __post_init__(self):
        if self.n_splits <= 0:
            raise DomainError("n_splits must be positive")
        if not 0 < self.train_fraction < 1:
            raise DomainError("train_fraction must lie in (0, 1)")
        if not 0 < self.min_valid_splits <= self.n_splits:
            raise DomainError("min_valid_splits must be positive and at most n_splits")
        if self.ci_method not in ("subsample", "percentile"):
            raise DomainError("ci_method is 'subsample' or 'percentile'")


@dataclass(frozen=True)
class CoefficientCI:
    point: float
    lower: float
    upper: float
    mean_test_accuracy: float
    n_valid_splits: int
    status: str = "ok"
    method: str = "subsample"

    @property
    def insufficient(self) -> bool:
        return self.status != "ok"

    @property
    def significant(self) -> bool:
        return not self.insufficient and not (self.lower <= 0.0 <= self.upper)

    def to_dict(self) -> dict:
        return {"point": self.point, "lower": self.lower, "upper": self.upper,
                "mean_test_accuracy": self.mean_test_accuracy, "n_valid_splits": self.n_valid_splits,
                "status": self.status, "method": self.method, "significant": self.significant}


def insufficient(n_valid: int, method: str = "subsample") -> CoefficientCI:
    nan = float("nan")
    return CoefficientCI(nan, nan, nan, nan, n_valid, "insufficient", method)


def split_and_estimate(X, y, group_feature_index: int, protocol: SplitProtocol = SplitProtocol(),
                       lam: float = 1.0, tol: float = 1e-6, max_iter: int = 5000) -> CoefficientCI:
    """Repeated random train/test splits; interval for one coefficient.

    Splits whose training part lacks a class (or whose fit fails) are
    invalid. With fewer than ``protocol.min_valid_splits`` valid splits the
    result is marked insufficient. Features are standardized with training
    statistics in every split.

    ``ci_method="percentile"`` reports the 2.5/97.5 percentiles of the split
    coefficients. ``"subsample"`` (default) widens those percentile distances
    around the mean by ``sqrt(f / (1 - f))`` for training fraction ``f``:
    the spread of estimates fitted on subsamples drawn without replacement
    understates the sampling error of the estimate by that factor.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n = X.shape[0]
    if n < 10:
        return insufficient(0, protocol.ci_method)
    if not np.all(np.isfinite(X)):
        raise DomainError("design matrix holds NaN or Inf")
    n_train = int(round(protocol.train_fraction * n))
    n_train = min(max(n_train, 2), n - 1)
    rng = np.random.default_rng(protocol.seed)
    coefs, accs = [], []
    for _ in range(protocol.n_splits):
        perm = rng.permutation(n)
        tr, te = perm[:n_train], perm[n_train:]
        ytr = y[tr]
        if ytr.min() == ytr.max():
            continue
        mu, sd = _moments(X[tr])
        Xtr = (X[tr] - mu) / sd
        try:
            w = train_logistic(Xtr, ytr, lam, tol, max_iter)
        except (DegenerateDataError, DomainError, FloatingPointError):
            continue
        z = ((X[te] - mu) / sd) @ w[:-1] + w[-1]
        accs.append(float(np.mean((z > 0) == (y[te] == 1))))
        coefs.append(float(w[group_feature_index]))
    if len(coefs) < protocol.min_valid_splits:
        return insufficient(len(coefs), protocol.ci_method)
    c = np.sort(np.asarray(coefs))
    point = float(np.mean(c))
    lo, hi = (float(v) for v in np.percentile(c, [2.5, 97.5]))
    if protocol.ci_method == "subsample":
        k = math.sqrt(protocol.train_fraction / (1.0 - protocol.train_fraction))
        lo, hi = point - k * (point - lo), point + k * (hi - point)
    return CoefficientCI(point, lo, hi, float(np.mean(accs)), len(coefs), "ok", protocol.ci_method)


# -- proportions ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProportionCI:
    diff: float
    halfwidth: float
    n_a: int
    n_b: int

    @property
    def lower(self) -> float:
        return self.diff - self.halfwidth

    @property
    def upper(self) -> float:
        return self.diff + self.halfwidth

    def to_dict(self) -> dict:
        return {"diff": self.diff, "halfwidth": self.halfwidth, "n_a": self.n_a, "n_b": self.n_b}


def proportion_diff_ci(hits_a: int, n_a: int, hits_b: int, n_b: int, z: float = Z95) -> ProportionCI:
    """Normal-approximation interval for ``hits_a/n_a - hits_b/n_b``."""
    for h, n in ((hits_a, n_a), (hits_b, n_b)):
        if n <= 0:
            raise DomainError("sample size must be positive")
        if not 0 <= h <= n:
            raise DomainError(f"hits {h} outside [0, {n}]")
    pa, pb = hits_a / n_a, hits_b / n_b
    hw = z * math.sqrt(pa * (1 - pa) / n_a + pb * (1 - pb) / n_b)
    return ProportionCI(pa - pb, hw, int(n_a), int(n_b))


# -- co-occurrence heuristic ----------------------------------------------------------

@dataclass(frozen=True)
class CorrelationTable:
    synsets: tuple
    groups: tuple
    values: np.ndarray  # (n_groups, n_synsets): P(g, s) - P(g) P(s)
    n_images: int

    def best(self) -> dict:
        """synset -> (max value over groups, group attaining it)."""
        out = {}
        for j, s in enumerate(self.synsets):
            i = int(np.argmax(self.values[:, j]))
            out[s] = (float(self.values[i, j]), self.groups[i])
        return out


def correlation_table(groups: Sequence[Optional[Hashable]], synsets: Sequence[Iterable[Hashable]]
                      ) -> CorrelationTable:
    """Image-level co-occurrence of group labels and synsets.

    ``groups[i]`` is image i's group (None when unlabeled; such images still
    count toward N and P(synset)); ``synsets[i]`` are the synsets present in
    image i. Repeats within an image count once.
    """
    n = len(groups)
    if n == 0 or n != len(synsets):
        raise DomainError("correlation table needs one synset set per image and N > 0")
    sets = [set(s) for s in synsets]
    syn_list = tuple(sorted({s for ss in sets for s in ss}, key=str))
    grp_list = tuple(sorted({g for g in groups if g is not None}, key=str))
    if not syn_list or not grp_list:
        raise DomainError("correlation table is empty (no synsets or no labeled groups)")
    sidx = {s: j for j, s in enumerate(syn_list)}
    gidx = {g: i for i, g in enumerate(grp_list)}
    presence = np.zeros((n, len(syn_list)))
    member = np.zeros((n, len(grp_list)))
    for r, (g, ss) in enumerate(zip(groups, sets)):
        for s in ss:
            presence[r, sidx[s]] = 1.0
        if g is not None:
            member[r, gidx[g]] = 1.0
    joint = member.T @ presence / n
    pg = member.sum(axis=0) / n
    ps = presence.sum(axis=0) / n
    return CorrelationTable(syn_list, grp_list, joint - np.outer(pg, ps), n)


def group_synset_correlation(groups, synsets) -> dict:
    """synset -> max over groups of P(group, synset) - P(group) P(synset)."""
    return {s: v for s, (v, _) in correlation_table(groups, synsets).best().items()}

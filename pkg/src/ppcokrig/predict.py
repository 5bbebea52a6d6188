"""Predictive distributions of the top-level output at new inputs.

The sequential sampler draws ``y_1(x0)``, then ``y_2(x0)`` given the drawn
``y_1(x0)``, and so on, each from a Student-t conditional on the augmented
outputs of its level. Averaging over recycled imputations of the missing
outputs (composition sampling) gives draws from the predictive law of
``y_s(x0)`` given the observed data.

``one_step_predict`` is the closed-form Gaussian predictor for fixed trend,
scale-discrepancy and variance parameters on a nested design. It costs
O(N (sum n_t)^3) and is meant for validation.
"""
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _rng
from .design import add_prediction_point
from .errors import DegreesOfFreedomError, DomainError
from .gls import chol_factor, profile_fit
from .kernels import CorrelationParams, corr_matrix


@dataclass(frozen=True)
class PredictiveSummary:
    mean: np.ndarray
    sd: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    n_draws: int


@dataclass(frozen=True)
class PredictiveDraw:
    values: np.ndarray   # s x N, row t holds y_t(x0)
    k: int               # recycled imputation index
    stream: tuple        # random stream key


def summarize(draws):
    """Mean, sd (ddof=1) and equal-tail 95% interval of each column of ``draws``."""
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 1:
        draws = draws[:, None]
    if draws.shape[0] < 2:
        raise DomainError("at least two draws are needed for a summary")
    lower, upper = np.quantile(draws, [0.025, 0.975], axis=0, method="linear")
    return PredictiveSummary(draws.mean(axis=0), draws.std(axis=0, ddof=1), lower, upper,
                             draws.shape[0])


class _LevelState:
    """Quantities of one level and one imputation that do not depend on x0."""

    def __init__(self, em, t, k):
        aug = em.aug
        X = aug.X_aug[t]
        Y = np.vstack([em.Y_obs[t], em.draws.values[t][k]])
        W = None
        if t > 0:
            lower = np.vstack([em.Y_obs[t - 1], em.draws.values[t - 1][k]])
            W = lower[aug.index_maps[t]]
        self.X = X
        self.Y = Y
        self.fac = _factor(em, t)
        self.fit = profile_fit(self.fac, em.basis(X), W, Y, keep_resid=True)
        self.Ww = None if W is None else self.fac.whiten(W)
        q = self.fit.beta.shape[0] + (0 if W is None else 1)
        self.df = aug.n_obs[t] - q
        if self.df <= 0:
            raise DegreesOfFreedomError(
                f"level {t + 1}: degrees of freedom n_t - q_t = {self.df} must be positive")
        self.scale2 = np.maximum(self.fit.s2, 0.0) / self.df


def _factor(em, t):
    key = ("fac", t)
    fac = em._cache.get(key)
    if fac is None:
        X = em.aug.X_aug[t]
        fac = chol_factor(corr_matrix(X, X, em.params(t)), em.config.jitter, f"level {t + 1}")
        em._cache[key] = fac
    return fac


_lock = threading.Lock()


def _state(em, t, k):
    key = ("state", t, k)
    st = em._cache.get(key)
    if st is None:
        with _lock:
            st = em._cache.get(key)
            if st is None:
                st = _LevelState(em, t, k)
                em._cache[key] = st
    return st


def _conditional(em, st, t, z0, y_lower):
    """Student-t location and squared scale of ``y_t(x0)`` for every coordinate.

    ``y_lower`` is the lower-level value at ``x0``, of shape ``(N,)`` or
    ``(m, N)`` for a batch of draws; the outputs broadcast accordingly.
    """
    r = corr_matrix(st.X, z0, em.params(t))[:, 0]
    rho = st.fac.whiten(r)
    h0 = em.basis(z0)[0]
    fit = st.fit
    mu = h0 @ fit.beta + rho @ fit.resid
    vH = h0 - fit.Hw.T @ rho
    vw = None
    if y_lower is not None:
        mu = mu + fit.gamma * y_lower
        vw = y_lower - rho @ st.Ww
    c = 1.0 - rho @ rho + fit.quad_form(vH, vw)
    return mu, st.scale2 * np.maximum(c, 0.0)


def _random_parts(rng, dfs, rank):
    # normal and chi-square parts of one draw, all levels at once
    dfs = np.asarray(dfs, dtype=float)[:, None]
    N = len(rank)
    z = rng.standard_normal((len(dfs), N))
    w = np.sqrt(dfs / rng.chisquare(dfs, (len(dfs), N)))
    return z[:, rank], w[:, rank]


def sequential_draw(em, x0, k, rng, aug0=None, stream_key=None):
    """One joint draw of ``(y_1(x0), ..., y_s(x0))`` given imputation ``k``.

    Where ``x0`` already belongs to a level's augmented inputs, that level's
    value is the (observed or imputed) output there. The random numbers for
    every level are consumed either way.
    """
    if aug0 is None:
        aug0 = add_prediction_point(em.aug, x0)
    z0 = em.aug.scaler.transform(np.asarray(x0, dtype=float).reshape(1, -1))
    states = [_state(em, t, k) for t in range(em.s)]
    z, w = _random_parts(rng, [st.df for st in states], em.coordinate_rank)
    out = np.empty((em.s, em.N))
    y_lower = None
    for t, st in enumerate(states):
        pos = aug0.x0_index[t]
        if pos < len(st.X):
            out[t] = st.Y[pos]
        else:
            mu, v = _conditional(em, st, t, z0, y_lower)
            out[t] = mu + np.sqrt(v) * z[t] * w[t]
        y_lower = out[t]
    return PredictiveDraw(out, k, stream_key)


def predict(em, x0, M_pred=30, seed=0, point=0, return_draws=False):
    """Composition-sampled predictive summary of ``y_s(x0)`` per coordinate.

    Draw ``i`` recycles imputation ``i mod M`` and uses the random stream
    ``(seed, PREDICT, point, i)``. The result equals calling
    :func:`sequential_draw` once per draw; draws sharing an imputation are
    evaluated together.
    """
    if M_pred < 2:
        raise DomainError("M_pred must be at least 2")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    aug0 = add_prediction_point(em.aug, x0)
    z0 = em.aug.scaler.transform(x0[None, :])
    K = em.draws.M
    s, N = em.s, em.N
    dfs = [_state(em, t, 0).df for t in range(s)]
    Z = np.empty((M_pred, s, N))
    Wt = np.empty((M_pred, s, N))
    for i in range(M_pred):
        Z[i], Wt[i] = _random_parts(_rng.stream(seed, _rng.PREDICT, point, i), dfs,
                                     em.coordinate_rank)
    draws = np.empty((M_pred, N))
    ks = np.arange(M_pred) % K
    for k in range(min(K, M_pred)):
        idx = np.flatnonzero(ks == k)
        y_lower = None
        for t in range(s):
            st = _state(em, t, k)
            pos = aug0.x0_index[t]
            if pos < len(st.X):
                vals = np.broadcast_to(st.Y[pos], (len(idx), N))
            else:
                mu, v = _conditional(em, st, t, z0, y_lower)
                vals = mu + np.sqrt(v) * Z[idx, t] * Wt[idx, t]
            y_lower = vals
        draws[idx] = y_lower
    summary = summarize(draws)
    return (summary, draws) if return_draws else summary


def predict_many(em, X0, M_pred=30, seed=0, threads=1, return_draws=False):
    """Predict at every row of ``X0``; results do not depend on ``threads``."""
    X0 = np.asarray(X0, dtype=float)
    if X0.ndim == 1:
        X0 = X0[:, None] if em.d == 1 else X0[None, :]

    def one(i):
        return predict(em, X0[i], M_pred, seed, i, return_draws=True)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(len(X0))))
    else:
        results = [one(i) for i in range(len(X0))]
    summaries = [r[0] for r in results]
    if return_draws:
        return summaries, np.stack([r[1] for r in results])
    return summaries


def one_step_predict(X_aug, Y_aug, beta, gamma, sigma2, params, x0, basis):
    """Gaussian predictive mean and variance of ``y_s(x0)`` with fixed parameters.

    Parameters
    ----------
    X_aug : list of (n_t, d) arrays
        Nested augmented inputs, lowest level first (normalized units).
    Y_aug : list of (n_t, N) arrays
        Outputs on ``X_aug``.
    beta : list of (N, p) arrays
        Trend coefficients per level.
    gamma : (s - 1, N) array
        Scale discrepancies; ``gamma[t]`` couples level ``t`` to ``t + 1``.
    sigma2 : (s, N) array
    params : list of CorrelationParams
    x0 : (d,) array, normalized units.

    Returns
    -------
    mean, var : (N,) arrays
    """
    s = len(X_aug)
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    N = Y_aug[0].shape[1]
    gamma = np.asarray(gamma, dtype=float).reshape(s - 1, N)
    sigma2 = np.asarray(sigma2, dtype=float).reshape(s, N)
    if np.any(sigma2 <= 0):
        raise DomainError("variances must be positive")
    sizes = [len(X) for X in X_aug]
    offs = np.concatenate([[0], np.cumsum(sizes)])
    # R[k][(i, i2)] = r(X_i, X_i2 | phi_k), needed for k <= min(i, i2)
    R = [{(i, i2): corr_matrix(X_aug[i], X_aug[i2], params[k])
          for i in range(k, s) for i2 in range(i, s)} for k in range(s)]
    r0 = [[corr_matrix(X_aug[i], x0, params[k])[:, 0] if k <= i else None
           for i in range(s)] for k in range(s)]
    Hb = [basis(X) for X in X_aug]
    h0 = basis(x0)[0]
    y = np.vstack(Y_aug)

    def prod(g, a, b):
        # prod_{l=a}^{b-1} g[l]; empty product is 1
        return float(np.prod(g[a:b])) if b > a else 1.0

    mean = np.empty(N)
    var = np.empty(N)
    for j in range(N):
        g = gamma[:, j]
        sg = sigma2[:, j]

        def cov_level(i, i2):
            # cov(y_i(X_i), y_i(X_i2)) accumulated over the discrepancies below level i
            return sum(prod(g, k, i) ** 2 * sg[k] * R[k][(i, i2)] for k in range(i + 1))

        Sigma = np.empty((offs[-1], offs[-1]))
        for i in range(s):
            for i2 in range(i, s):
                blk = prod(g, i, i2) * cov_level(i, i2)
                Sigma[offs[i]:offs[i + 1], offs[i2]:offs[i2 + 1]] = blk
                Sigma[offs[i2]:offs[i2 + 1], offs[i]:offs[i + 1]] = blk.T
        c = []
        for i in range(s):
            ci = prod(g, 0, s - 1) * sg[0] * r0[0][i]
            for k in range(1, i + 1):
                ci = g[k - 1] * ci + prod(g, k, s - 1) * sg[k] * r0[k][i]
            c.append(ci)
        c = np.concatenate(c)
        Fb = np.concatenate([
            sum(prod(g, k, i) * (Hb[i] @ beta[k][j]) for k in range(i + 1)) for i in range(s)])
        f0 = sum(prod(g, k, s - 1) * (h0 @ beta[k][j]) for k in range(s))
        prior_var = sum(prod(g, k, s - 1) ** 2 * sg[k] for k in range(s))
        fac = chol_factor(Sigma, 0.0, f"one-step covariance, coordinate {j}")
        u = fac.whiten(c)
        mean[j] = f0 + u @ fac.whiten(y[:, j] - Fb)
        var[j] = prior_var - u @ u
    return mean, var

"""Monte Carlo EM training of the per-level range parameters.

Each iteration draws the missing outputs of the augmented design from their
Student-t conditionals at the current range parameters, averages the
per-level integrated log posterior over the draws, and maximizes that
average separately for every level.
"""
import logging
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import minimize

from . import _rng
from .design import build_augmentation
from .errors import (DegreesOfFreedomError, DomainError, NumericalError, OptimizationError,
                     ValidationError)
from .gls import chol_factor, profile_fit
from .kernels import CorrelationParams, corr_matrix
from .priors import JrPriorConfig, PolynomialBasis, jr_log_prior, likelihood_terms

log = logging.getLogger(__name__)

LOG_PHI_BOUNDS = (np.log(1e-3), np.log(1e3))


@dataclass
class McemConfig:
    seed: int
    nu: float = 2.5
    basis_degree: int = 0
    jitter: float = 1e-8
    m_start: int = 30
    m_increment: int = 10
    m_max: int = 100
    max_iter: int = 200
    tol: float = 1e-3
    patience: int = 3
    restarts: int = 3
    maxfev: int = 500
    phi_init: float = 0.5
    threads: int = 1

    def m_schedule(self, iteration):
        return min(self.m_start + self.m_increment * (iteration - 1), self.m_max)

    def to_dict(self):
        # threads is a runtime setting that never changes results
        return {k: v for k, v in self.__dict__.items() if k != "threads"}


@dataclass
class MissingDraws:
    """Imputed outputs; ``values[t]`` has shape ``(M, n_mis[t], N)``."""

    values: list

    @property
    def M(self):
        return self.values[0].shape[0]

    def augmented(self, Y_obs, k):
        """Augmented outputs of every level for draw ``k``."""
        return [np.vstack([Y, v[k]]) for Y, v in zip(Y_obs, self.values)]


def _check_df(df, t):
    if df <= 0:
        raise DegreesOfFreedomError(
            f"level {t + 1}: Student-t degrees of freedom n_t - q_t = {df} must be positive")
    if df <= 2:
        warnings.warn(f"level {t + 1}: degrees of freedom {df} <= 2, infinite predictive variance",
                      RuntimeWarning, stacklevel=3)


def _batched_chol(S, label):
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return np.stack([chol_factor(Si, 0.0, f"{label}, coordinate {j}").L
                         for j, Si in enumerate(S)])


def missing_conditional(params, X_obs, X_mis, Y_obs, W_obs, W_mis, basis, jitter, level=0):
    """Student-t location, scale root and df of the missing outputs at one level.

    Returns ``(mu, chol_scale, df)`` with ``mu`` of shape ``(n_mis, N)`` and
    ``chol_scale`` of shape ``(N, n_mis, n_mis)``; ``chol_scale[j]`` is a
    square root of the scale matrix of coordinate ``j``.
    """
    N = Y_obs.shape[1]
    m = len(X_mis)
    H = basis(X_obs)
    Hm = basis(X_mis)
    q = H.shape[1] + (0 if W_obs is None else 1)
    df = len(X_obs) - q
    _check_df(df, level)
    label = f"level {level + 1}"
    fac = chol_factor(corr_matrix(X_obs, X_obs, params), jitter, label)
    fit = profile_fit(fac, H, W_obs, Y_obs, keep_resid=True)
    rho = fac.whiten(corr_matrix(X_obs, X_mis, params))           # n x m
    mu = Hm @ fit.beta + rho.T @ fit.resid
    DH = Hm.T - fit.Hw.T @ rho                                      # p x m
    Z = solve_triangular(fit.A_chol, DH, lower=True) if DH.size else DH
    base = corr_matrix(X_mis, X_mis, params) - rho.T @ rho + Z.T @ Z
    if W_obs is None:
        S = np.broadcast_to(base, (N, m, m))
    else:
        mu = mu + W_mis * fit.gamma
        Ww = fac.whiten(W_obs)
        e = (W_mis - rho.T @ Ww) - DH.T @ fit.a                     # m x N
        S = base[None] + np.einsum("in,jn->nij", e, e) / fit.wqw[:, None, None]
    S = 0.5 * (S + np.swapaxes(S, 1, 2))
    scale = np.sqrt(np.maximum(fit.s2, 0.0) / df)
    Ls = _batched_chol(np.ascontiguousarray(S), label) * scale[:, None, None]
    return mu, Ls, df


def sample_missing(phis, aug, Y_obs, seed, M, basis=PolynomialBasis(), jitter=1e-8, nu=2.5):
    """Draw ``M`` joint imputations of the missing outputs, lowest level first.

    Draw ``k`` at level ``t`` uses the random stream ``(seed, ESTEP, k, t)``,
    so the same stream is reused across EM iterations and threads.
    """
    s = aug.s
    N = Y_obs[0].shape[1]
    rank = _rng.coordinate_ranks(Y_obs)
    values = [np.empty((M, m, N)) for m in aug.n_mis]
    params = [CorrelationParams(p, nu) for p in phis]
    lower_aug = None  # augmented outputs of level t-1, per draw
    for t in range(s):
        m = aug.n_mis[t]
        n = aug.n_obs[t]
        idx = aug.index_maps[t]
        current = []
        if m == 0:
            current = [Y_obs[t]] * M
        elif t == 0:
            mu, Ls, df = missing_conditional(params[t], aug.X_obs[t], aug.X_mis[t], Y_obs[t],
                                             None, None, basis, jitter, t)
            for k in range(M):
                rng = _rng.stream(seed, _rng.ESTEP, k, t)
                values[t][k] = _student_t(mu, Ls, df, rng, rank)
                current.append(np.vstack([Y_obs[t], values[t][k]]))
        else:
            for k in range(M):
                W = lower_aug[k][idx]
                mu, Ls, df = missing_conditional(params[t], aug.X_obs[t], aug.X_mis[t], Y_obs[t],
                                                 W[:n], W[n:], basis, jitter, t)
                rng = _rng.stream(seed, _rng.ESTEP, k, t)
                values[t][k] = _student_t(mu, Ls, df, rng, rank)
                current.append(np.vstack([Y_obs[t], values[t][k]]))
        lower_aug = current
    return MissingDraws(values)


def _student_t(mu, Ls, df, rng, rank):
    N, m, _ = Ls.shape
    z = rng.standard_normal((N, m))[rank]
    w = np.sqrt(df / rng.chisquare(df, N))[rank]
    return mu + (np.einsum("nij,nj->in", Ls, z) * w)


class LevelObjective:
    """Monte Carlo average of the level log posterior over a fixed draw set.

    All draws are stacked column-wise so each evaluation needs a single
    factorization and one whitening solve.
    """

    def __init__(self, t, aug, Y_obs, draws, basis=PolynomialBasis(), jitter=1e-8, nu=2.5,
                 prior=None):
        self.t = t
        self.nu = nu
        self.jitter = jitter
        self.X = aug.X_aug[t]
        self.N = Y_obs[t].shape[1]
        n = len(self.X)
        M = draws.M
        # draws only matter if this level or the one below has imputed rows
        depends = aug.n_mis[t] > 0 or (t > 0 and np.any(aug.index_maps[t] >= aug.n_obs[t - 1]))
        ks = range(M) if depends else range(min(M, 1))
        self.M = len(ks)
        Ys, Ws = [], []
        for k in ks:
            Ys.append(np.vstack([Y_obs[t], draws.values[t][k]]))
            if t > 0:
                lower = np.vstack([Y_obs[t - 1], draws.values[t - 1][k]])
                Ws.append(lower[aug.index_maps[t]])
        self.Y = np.hstack(Ys)
        self.W = np.hstack(Ws) if t > 0 else None
        self.H = basis(self.X)
        self.q = self.H.shape[1] + (0 if t == 0 else 1)
        if n <= self.q:
            raise DegreesOfFreedomError(f"level {t + 1} has {n} augmented inputs, needs > {self.q}")
        self.n = n
        self.prior = prior or JrPriorConfig.default(n, self.X.shape[1])

    def __call__(self, phis):
        params = CorrelationParams(phis, self.nu)
        fac = chol_factor(corr_matrix(self.X, self.X, params), self.jitter, f"level {self.t + 1}")
        sum_logdet, sum_logs2 = likelihood_terms(fac, self.H, self.W, self.Y)
        return (jr_log_prior(params, self.prior) - 0.5 * sum_logdet / self.M
                - 0.5 * self.N * fac.logdet - 0.5 * (self.n - self.q) * sum_logs2 / self.M)


def q_hat(phis, t, draws, aug, Y_obs, basis=PolynomialBasis(), jitter=1e-8, nu=2.5, prior=None):
    """Monte Carlo Q-function of level ``t`` at range parameters ``phis``."""
    return LevelObjective(t, aug, Y_obs, draws, basis, jitter, nu, prior)(phis)


def m_step(q_closure, phi_init, restarts=3, maxfev=500, bounds=LOG_PHI_BOUNDS):
    """Maximize ``q_closure`` over range parameters with Nelder-Mead in log space.

    Restarts from ``phi_init``, ``0.2 * phi_init`` and ``5 * phi_init`` (the
    first ``restarts`` of these). Returns ``(phi, value)``; the value is never
    below the closure at ``phi_init``.
    """
    phi_init = np.asarray(phi_init, dtype=float)

    def value(logphi):
        try:
            v = q_closure(np.exp(logphi))
        except (NumericalError, DomainError):
            return -np.inf
        return v if np.isfinite(v) else -np.inf

    def neg(logphi):
        v = value(logphi)
        return -v if np.isfinite(v) else np.inf

    lo, hi = bounds
    x_init = np.clip(np.log(phi_init), lo, hi)
    best_x, best_v = x_init, value(x_init)
    d = x_init.size
    tried = []
    for factor in (1.0, 0.2, 5.0)[:restarts]:
        x0 = np.clip(x_init + np.log(factor), lo, hi)
        simplex = np.vstack([x0] + [x0 + 0.5 * np.eye(d)[i] * (1 if x0[i] + 0.5 <= hi else -1)
                                    for i in range(d)])
        with np.errstate(invalid="ignore"):  # inf - inf on infeasible simplex vertices
            res = minimize(neg, x0, method="Nelder-Mead", bounds=[bounds] * d,
                           options=dict(maxfev=maxfev, xatol=1e-8, fatol=1e-10,
                                        initial_simplex=simplex))
        v = value(res.x)
        tried.append(v)
        if v > best_v:
            best_x, best_v = res.x, v
    if not np.isfinite(best_v):
        raise OptimizationError(
            f"no finite objective from phi_init={phi_init.tolist()} over {restarts} restarts "
            f"(restart values {tried})")
    return np.exp(best_x), float(best_v)


@dataclass
class FittedEmulator:
    levels: list
    aug: object
    phis: list
    config: McemConfig
    b_hat: list          # per level, N x q_t
    sigma2: list         # per level, length N
    draws: MissingDraws
    converged: bool
    iterations: int
    trace: list = field(default_factory=list)
    jitter_used: list = field(default_factory=list)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def s(self):
        return len(self.levels)

    @property
    def d(self):
        return self.levels[0].d

    @property
    def N(self):
        return self.levels[0].N

    @property
    def basis(self):
        return PolynomialBasis(self.config.basis_degree)

    @property
    def Y_obs(self):
        return [lv.Y for lv in self.levels]

    @property
    def coordinate_rank(self):
        rank = self._cache.get("rank")
        if rank is None:
            rank = self._cache["rank"] = _rng.coordinate_ranks(self.Y_obs)
        return rank

    def params(self, t):
        return CorrelationParams(self.phis[t], self.config.nu)


def _point_estimates(aug, Y_obs, draws, phis, basis, jitter, nu):
    b_hat, sigma2, jit = [], [], []
    for t in range(aug.s):
        X = aug.X_aug[t]
        fac = chol_factor(corr_matrix(X, X, CorrelationParams(phis[t], nu)), jitter,
                          f"level {t + 1}")
        H = basis(X)
        q = H.shape[1] + (0 if t == 0 else 1)
        bs, s2s = [], []
        for k in range(draws.M):
            Y = np.vstack([Y_obs[t], draws.values[t][k]])
            W = None
            if t > 0:
                W = np.vstack([Y_obs[t - 1], draws.values[t - 1][k]])[aug.index_maps[t]]
            fit = profile_fit(fac, H, W, Y)
            bs.append(fit.b_hat)
            s2s.append(fit.s2 / (len(X) - q))
        b_hat.append(np.mean(bs, axis=0))
        sigma2.append(np.mean(s2s, axis=0))
        jit.append(fac.jitter_used)
    return b_hat, sigma2, jit


def run_mcem(levels, config, aug=None):
    """Fit range parameters by Monte Carlo EM and return a fitted emulator."""
    if aug is None:
        aug = build_augmentation(levels)
    Y_obs = [lv.Y for lv in levels]
    basis = PolynomialBasis(config.basis_degree)
    s, d = aug.s, aug.d
    for t in range(s):
        q = basis.size(d) + (0 if t == 0 else 1)
        if aug.n_aug[t] <= q:
            raise ValidationError(f"level {t + 1} has {aug.n_aug[t]} augmented inputs, needs > {q}")
    nested = aug.is_nested
    phis = [np.full(d, float(config.phi_init)) for _ in range(s)]
    trace = []
    streak = 0
    converged = False
    draws = None
    pool = ThreadPoolExecutor(max_workers=config.threads) if config.threads > 1 else None
    try:
        for it in range(1, config.max_iter + 1):
            start = time.perf_counter()
            M = 1 if nested else config.m_schedule(it)
            draws = sample_missing(phis, aug, Y_obs, config.seed, M, basis, config.jitter,
                                   config.nu)

            def step(t):
                obj = LevelObjective(t, aug, Y_obs, draws, basis, config.jitter, config.nu)
                return m_step(obj, phis[t], config.restarts, config.maxfev)

            results = list(pool.map(step, range(s))) if pool else [step(t) for t in range(s)]
            new = [r[0] for r in results]
            change = max(float(np.max(np.abs(np.log(a) - np.log(b)))) for a, b in zip(new, phis))
            phis = new
            trace.append(dict(iteration=it, M=M, phis=[p.copy() for p in phis],
                              q=[r[1] for r in results], change=change,
                              wall_time=time.perf_counter() - start))
            log.info("iteration %d: M=%d change=%.3g phis=%s", it, M, change,
                     [np.round(p, 5).tolist() for p in phis])
            streak = streak + 1 if change < config.tol else 0
            if streak >= config.patience:
                converged = True
                break
    finally:
        if pool:
            pool.shutdown()
    b_hat, sigma2, jit = _point_estimates(aug, Y_obs, draws, phis, basis, config.jitter,
                                          config.nu)
    return FittedEmulator(list(levels), aug, phis, config, b_hat, sigma2, draws, converged,
                          len(trace), trace, jit)

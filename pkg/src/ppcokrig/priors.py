"""Jointly robust range prior and the per-level integrated log posterior.

With Jeffreys priors on the trend, scale-discrepancy and variance parameters
integrated out, the level-``t`` contribution to the log posterior of the
range parameters is::

    g_t = ln pi(phi_t) - sum_j ln|T_j' R^-1 T_j| / 2 - N ln|R| / 2
          - (n_t - q_t) sum_j ln S^2_j / 2

where ``n_t`` counts the augmented inputs, ``T_j = H`` at the lowest level
and ``T_j = [H, w_j]`` above it, with ``w_j`` the level below evaluated on
this level's inputs.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DegreesOfFreedomError, DomainError, NumericalError
from .gls import chol_factor, profile_fit
from .kernels import CorrelationParams, corr_matrix


@dataclass(frozen=True)
class PolynomialBasis:
    """Trend basis ``[1, x, x^2, ..., x^degree]`` per input dimension, no cross terms."""

    degree: int = 0

    def __post_init__(self):
        if self.degree < 0:
            raise DomainError("basis degree must be non-negative")

    def size(self, d):
        return 1 + self.degree * d

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        cols = [np.ones(len(X))]
        for k in range(1, self.degree + 1):
            cols.extend((X ** k).T)
        return np.column_stack(cols)


@dataclass(frozen=True)
class JrPriorConfig:
    a: float
    b: float
    C: np.ndarray

    def __post_init__(self):
        C = np.atleast_1d(np.asarray(self.C, dtype=float))
        if not (self.a > 0 and self.b > 0 and np.all(C > 0)):
            raise DomainError("jointly robust prior needs a > 0, b > 0 and C > 0")
        object.__setattr__(self, "C", C)

    @classmethod
    def default(cls, n, d, a=0.2):
        """Defaults on normalized inputs: ``C_l = n^(-1/d)``, ``b = n^(-1/d) (a + d)``."""
        scale = float(n) ** (-1.0 / d)
        return cls(a, scale * (a + d), np.full(d, scale))


def jr_log_prior(phis, cfg):
    """Log-kernel ``a ln(u) - b u`` of the jointly robust prior, ``u = sum C_l / phi_l``."""
    phis = phis.phis if isinstance(phis, CorrelationParams) else np.asarray(phis, dtype=float)
    if np.any(~(phis > 0)):
        raise DomainError("range parameters must be positive")
    u = float(np.sum(cfg.C / phis))
    return cfg.a * np.log(u) - cfg.b * u


def likelihood_terms(fac, H, W, Y):
    """Column sums ``(sum_j ln|T_j' R^-1 T_j|, sum_j ln S^2_j)`` over all columns of ``Y``."""
    fit = profile_fit(fac, H, W, Y)
    bad = np.flatnonzero(~(fit.s2 > 0))
    if bad.size:
        raise NumericalError(f"non-positive S^2 at coordinate j={int(bad[0])}")
    return float(np.sum(fit.logdet_T)), float(np.sum(np.log(fit.s2)))


def level_log_integrated_posterior(params, X_aug, Y_aug, W_aug=None, basis=PolynomialBasis(),
                                   prior=None, jitter=1e-8):
    """Integrated log posterior ``g_t`` of one level at range parameters ``params``.

    Parameters
    ----------
    params : CorrelationParams
    X_aug : (n, d) array
        Augmented inputs of the level, normalized.
    Y_aug : (n, N) array
        Observed outputs stacked above the imputed ones.
    W_aug : (n, N) array or None
        Lower-level outputs on ``X_aug``; ``None`` for the lowest level.
    prior : JrPriorConfig, optional
        Defaults to :meth:`JrPriorConfig.default` for this level's size.
    """
    X_aug = np.asarray(X_aug, dtype=float)
    Y_aug = np.asarray(Y_aug, dtype=float)
    if Y_aug.ndim == 1:
        Y_aug = Y_aug[:, None]
    n, N = Y_aug.shape
    H = basis(X_aug)
    q = H.shape[1] + (0 if W_aug is None else 1)
    if n <= q:
        raise DegreesOfFreedomError(f"level needs more than {q} inputs, has {n}")
    if not np.all(np.isfinite(Y_aug)):
        raise NumericalError("augmented outputs contain non-finite values")
    if prior is None:
        prior = JrPriorConfig.default(n, params.d)
    fac = chol_factor(corr_matrix(X_aug, X_aug, params), jitter)
    sum_logdet, sum_logs2 = likelihood_terms(fac, H, W_aug, Y_aug)
    return (jr_log_prior(params, prior) - 0.5 * sum_logdet - 0.5 * N * fac.logdet
            - 0.5 * (n - q) * sum_logs2)

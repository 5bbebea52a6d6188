"""Matérn correlation functions with an anisotropic product structure.

Only the closed-form smoothness values 1/2, 3/2 and 5/2 are supported. The
argument convention is ``sqrt(2 nu) * u / phi``, so e.g. for ``nu = 2.5``::

    r(u) = (1 + sqrt(5) u/phi + 5 u^2 / (3 phi^2)) exp(-sqrt(5) u/phi)

Distances are per-dimension absolute differences; the multivariate
correlation is the product of the one-dimensional factors.
"""
from dataclasses import dataclass

import numpy as np

from . import _backend
from ._kernels_py import matern_scaled
from .errors import DomainError

ALLOWED_NU = (0.5, 1.5, 2.5)


def _check_nu(nu):
    if nu not in ALLOWED_NU:
        raise DomainError(f"nu must be one of {ALLOWED_NU}, got {nu!r}")


@dataclass(frozen=True)
class CorrelationParams:
    """Per-dimension range parameters plus a fixed smoothness."""

    phis: np.ndarray
    nu: float = 2.5

    def __post_init__(self):
        phis = np.atleast_1d(np.asarray(self.phis, dtype=float)).copy()
        if phis.ndim != 1 or phis.size == 0:
            raise DomainError("phis must be a non-empty 1-D vector")
        if not np.all(np.isfinite(phis)) or np.any(phis <= 0):
            raise DomainError(f"range parameters must be positive and finite, got {phis}")
        _check_nu(self.nu)
        phis.setflags(write=False)
        object.__setattr__(self, "phis", phis)

    @property
    def d(self):
        return self.phis.size


def matern(u, phi, nu=2.5):
    """Matérn correlation at distance ``u`` (scalar or array)."""
    _check_nu(nu)
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)) or np.any(u < 0):
        raise DomainError("distance must be finite and non-negative")
    if not (np.isfinite(phi) and phi > 0):
        raise DomainError(f"phi must be positive and finite, got {phi!r}")
    out = matern_scaled(u / phi, nu)
    return float(out) if out.ndim == 0 else out


def product_corr(x, x_prime, params):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x_prime = np.atleast_1d(np.asarray(x_prime, dtype=float))
    if x.shape != (params.d,) or x_prime.shape != (params.d,):
        raise DomainError(
            f"inputs must have dimension {params.d}, got {x.shape} and {x_prime.shape}")
    return float(np.prod(matern_scaled(np.abs(x - x_prime) / params.phis, params.nu)))


def _as_design(A, d):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A.reshape(-1, 1) if d == 1 else A.reshape(1, -1)
    if A.ndim != 2 or A.shape[1] != d:
        raise DomainError(f"expected inputs with {d} columns, got shape {A.shape}")
    return np.ascontiguousarray(A)


def corr_matrix(A, B, params):
    """Cross-correlation matrix ``R[i, j] = product_corr(A[i], B[j])``."""
    A = _as_design(A, params.d)
    B = _as_design(B, params.d)
    return _backend.corr_matrix(A, B, np.ascontiguousarray(params.phis), float(params.nu))

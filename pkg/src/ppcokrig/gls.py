"""Cholesky-based generalized least squares shared by training and prediction.

Every solve against a correlation matrix goes through its Cholesky factor;
the only explicit inverses are of the small regression Gram matrices.

The per-coordinate profile terms use the block structure of
``T_j = [H, w_j]``: with ``A = H' R^-1 H`` and ``Q_H`` the projector
complementary to ``H``, ::

    |T_j' R^-1 T_j| = |A| * (w_j' Q_H w_j)
    S^2_j           = y_j' Q_H y_j - (w_j' Q_H y_j)^2 / (w_j' Q_H w_j)

so after one O(n^3 + n^2 p) setup each coordinate costs O(n^2) (the whitening
solve) plus O(n) reductions.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, cholesky, solve_triangular

from . import _backend
from .errors import DegreesOfFreedomError, DomainError, NumericalError, SingularMatrixError

MAX_JITTER = 1e-4
RANK_TOL = 1e-12


@dataclass(frozen=True)
class CholFactor:
    """Lower Cholesky factor of ``R + jitter * I``."""

    L: np.ndarray
    logdet: float
    jitter_used: float

    @property
    def n(self):
        return self.L.shape[0]

    def whiten(self, B):
        """Return ``L^-1 B``."""
        return solve_triangular(self.L, B, lower=True, check_finite=False)

    def solve(self, B):
        """Return ``(R + jitter I)^-1 B``."""
        return cho_solve((self.L, True), B, check_finite=False)


def chol_factor(R, base_jitter=1e-8, label=None):
    """Factor a correlation matrix, escalating the diagonal jitter on failure.

    The jitter starts at ``base_jitter`` and is multiplied by 10 after every
    failed attempt until it would exceed ``1e-4``.
    """
    R = np.asarray(R, dtype=float)
    n = R.shape[0]
    if R.shape != (n, n):
        raise DomainError(f"correlation matrix must be square, got {R.shape}")
    if not np.all(np.isfinite(R)):
        raise NumericalError(f"non-finite correlation matrix{_where(label)} (size {n})")
    jitter = float(base_jitter)
    while True:
        try:
            L = cholesky(R + jitter * np.eye(n), lower=True, check_finite=False)
        except LinAlgError:
            L = None
        if L is not None:
            diag = np.diag(L)
            if np.all(diag > 0) and np.all(np.isfinite(diag)):
                return CholFactor(L, 2.0 * float(np.sum(np.log(diag))), jitter)
        jitter = jitter * 10.0 if jitter > 0 else 1e-12
        if jitter > MAX_JITTER * (1 + 1e-12):
            raise SingularMatrixError(
                f"Cholesky factorization failed at jitter {MAX_JITTER:g}"
                f"{_where(label)} (matrix size {n}x{n})")


def _where(label):
    return f" for {label}" if label else ""


@dataclass(frozen=True)
class GlsFit:
    b_hat: np.ndarray
    s2: float
    logdet_TtRT: float


def gls_fit(fac, T, y):
    """Generalized least squares of ``y`` on the columns of ``T``."""
    T = np.asarray(T, dtype=float)
    if T.ndim == 1:
        T = T[:, None]
    y = np.asarray(y, dtype=float)
    n, q = T.shape
    if n <= q:
        raise DegreesOfFreedomError(f"need n > q for GLS, got n={n}, q={q}")
    Th = fac.whiten(T)
    yh = fac.whiten(y)
    if np.linalg.matrix_rank(Th) < q:
        raise DomainError("regressor matrix is rank deficient")
    G = Th.T @ Th
    cG = cho_factor(G, lower=True, check_finite=False)
    b = cho_solve(cG, Th.T @ yh, check_finite=False)
    e = yh - Th @ b
    return GlsFit(b, float(e @ e), 2.0 * float(np.sum(np.log(np.diag(cG[0])))))


@dataclass
class ProfileFit:
    """Per-coordinate GLS quantities for ``T_j = [H, W[:, j]]`` (or ``T_j = H``).

    Column-indexed arrays have length ``N``; ``beta`` is ``p x N``.
    """

    logdet_A: float
    A_chol: np.ndarray   # lower Cholesky factor of H' R^-1 H
    Hw: np.ndarray       # whitened trend matrix L^-1 H
    wqw: np.ndarray      # w' Q_H w, or None without a scale column
    gamma: np.ndarray    # scale-discrepancy coefficients, or None
    a: np.ndarray        # A^-1 H' R^-1 w  (p x N), or None
    beta: np.ndarray     # trend coefficients (p x N)
    s2: np.ndarray
    logdet_T: np.ndarray
    resid: np.ndarray = None  # whitened residual L^-1 (y - T b), n x N

    @property
    def b_hat(self):
        """Stacked coefficient vectors ``[beta; gamma]`` as an ``N x q`` array."""
        if self.gamma is None:
            return self.beta.T.copy()
        return np.column_stack([self.beta.T, self.gamma])

    def quad_form(self, vH, vw=None):
        """``v_j' (T_j' R^-1 T_j)^-1 v_j`` for every coordinate.

        ``vH`` is ``p x N`` (or ``p`` shared); ``vw`` has length ``N``.
        """
        vH = np.asarray(vH, dtype=float)
        if vH.ndim == 1:
            vH = vH[:, None]
        z = solve_triangular(self.A_chol, vH, lower=True, check_finite=False)
        out = np.einsum("ij,ij->j", z, z)
        if self.gamma is not None:
            out = out + (vw - np.einsum("ij,ij->j", self.a, vH)) ** 2 / self.wqw
        return out


def profile_fit(fac, H, W, Y, keep_resid=False, offset=0):
    """Shared-setup GLS over many coordinates.

    ``offset`` is added to coordinate indices in error messages.
    """
    H = np.asarray(H, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, p = H.shape
    N = Y.shape[1]
    q = p + (0 if W is None else 1)
    if n <= q:
        raise DegreesOfFreedomError(f"need n > q for GLS, got n={n}, q={q}")
    Hw = fac.whiten(H)
    A = Hw.T @ Hw
    try:
        A_chol = cholesky(A, lower=True, check_finite=False)
    except LinAlgError:
        raise DomainError("trend matrix H is rank deficient") from None
    if np.min(np.diag(A_chol)) ** 2 <= RANK_TOL * np.max(np.diag(A)):
        raise DomainError("trend matrix H is rank deficient")
    logdet_A = 2.0 * float(np.sum(np.log(np.diag(A_chol))))

    def project(B):
        # B - Hw A^-1 Hw' B, and the coefficients A^-1 Hw' B
        coef = cho_solve((A_chol, True), Hw.T @ B, check_finite=False)
        return np.ascontiguousarray(B - Hw @ coef), coef

    Yp, beta_y = project(fac.whiten(Y))
    if W is None:
        _, _, s2 = _backend.profile_columns(Yp, None)
        return ProfileFit(logdet_A, A_chol, Hw, None, None, None, beta_y, s2,
                          np.full(N, logdet_A), Yp if keep_resid else None)

    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    Ww = fac.whiten(W)
    Wp, a = project(Ww)
    wqw, gamma, s2 = _backend.profile_columns(Yp, Wp)
    scale = np.einsum("ij,ij->j", Ww, Ww)
    bad = np.flatnonzero(~(wqw > RANK_TOL * np.maximum(scale, 1e-300)))
    if bad.size:
        raise DomainError(
            f"regressor matrix [H, w_j] is rank deficient at coordinate j={int(bad[0]) + offset}")
    beta = beta_y - a * gamma
    resid = (Yp - Wp * gamma) if keep_resid else None
    return ProfileFit(logdet_A, A_chol, Hw, wqw, gamma, a, beta, s2,
                      logdet_A + np.log(wqw), resid)


def fast_profile_terms(fac, H, W, Y):
    """Per-coordinate ``ln|T_j' R^-1 T_j|`` and ``S^2_j`` with shared setup.

    ``W`` holds one scale-discrepancy regressor column per coordinate, or is
    ``None`` when ``T_j = H`` for every coordinate.
    """
    fit = profile_fit(fac, H, W, Y)
    return fit.logdet_T, fit.s2

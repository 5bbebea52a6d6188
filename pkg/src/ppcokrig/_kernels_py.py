"""Pure-numpy implementations of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable, and as the
reference the compiled versions are tested against.
"""
import numpy as np

SQRT3 = np.sqrt(3.0)
SQRT5 = np.sqrt(5.0)


def matern_scaled(u, nu):
    """Matérn correlation of ``u = distance / phi`` for nu in {0.5, 1.5, 2.5}."""
    if nu == 0.5:
        return np.exp(-u)
    if nu == 1.5:
        t = SQRT3 * u
        return (1.0 + t) * np.exp(-t)
    t = SQRT5 * u
    return (1.0 + t + t * t / 3.0) * np.exp(-t)


def corr_matrix(A, B, phis, nu):
    m, d = A.shape
    n = B.shape[0]
    out = np.ones((m, n))
    for i in range(d):
        u = np.abs(A[:, i, None] - B[None, :, i]) / phis[i]
        out *= matern_scaled(u, nu)
    return out


def profile_columns(Yp, Wp):
    """Per-column profile reductions on projected (whitened) columns.

    Returns ``(wqw, coef, s2)`` where, column by column, ``wqw = w.w``,
    ``coef = w.y / w.w`` and ``s2 = |y - coef w|^2``. With ``Wp=None`` only
    ``s2 = |y|^2`` is meaningful and the first two entries are ``None``.
    """
    if Wp is None:
        return None, None, np.einsum("ij,ij->j", Yp, Yp)
    wqw = np.einsum("ij,ij->j", Wp, Wp)
    coef = np.einsum("ij,ij->j", Wp, Yp) / wqw
    resid = Yp - Wp * coef
    return wqw, coef, np.einsum("ij,ij->j", resid, resid)

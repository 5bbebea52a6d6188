"""Experimental-design bookkeeping for multifidelity data.

Levels are ordered lowest fidelity first. For a non-nested design, every
level ``t`` is augmented with the inputs run at higher levels but not at
``t`` itself, so that the augmented input sets are nested::

    X~_t = X_t  U  (X_{t+1} U ... U X_s  minus  X_t)

Inputs are compared after rescaling every dimension to [0, 1] with the
ranges of all training inputs; two inputs are equal when their largest
per-dimension difference is at most ``MATCH_TOL``.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ValidationError

MATCH_TOL = 1e-9


@dataclass(frozen=True)
class FidelityData:
    """Observed design (raw units) and outputs at one fidelity level."""

    level: int
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.ndim != 2 or Y.ndim != 2:
            raise ValidationError(f"level {self.level}: X and Y must be 2-D")
        if X.shape[0] < 1:
            raise ValidationError(f"level {self.level}: at least one run is required")
        if X.shape[0] != Y.shape[0]:
            raise ValidationError(
                f"level {self.level}: {X.shape[0]} design rows but {Y.shape[0]} output rows")
        if not np.all(np.isfinite(X)):
            raise ValidationError(f"level {self.level}: design has non-finite entries")
        if not np.all(np.isfinite(Y)):
            rows = np.flatnonzero(~np.all(np.isfinite(Y), axis=1))
            raise ValidationError(
                f"level {self.level}: non-finite outputs in rows {(rows + 1).tolist()}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    @property
    def N(self):
        return self.Y.shape[1]


@dataclass(frozen=True)
class InputScaler:
    """Per-dimension affine map of raw inputs onto [0, 1]."""

    lo: np.ndarray
    span: np.ndarray

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=float)
        lo = X.min(axis=0)
        span = X.max(axis=0) - lo
        span[span <= 0] = 1.0
        return cls(lo, span)

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1) if X.size == self.lo.size else X[:, None]
        if X.shape[1] != self.lo.size:
            raise DomainError(f"expected {self.lo.size} input columns, got {X.shape[1]}")
        return (X - self.lo) / self.span


def match_rows(A, B, tol=MATCH_TOL):
    """For each row of ``A``, the index of an equal row in ``B`` or -1."""
    out = np.full(len(A), -1, dtype=int)
    if len(A) == 0 or len(B) == 0:
        return out
    for i, a in enumerate(A):
        hit = np.flatnonzero(np.max(np.abs(B - a), axis=1) <= tol)
        if hit.size:
            out[i] = hit[0]
    return out


def _first_duplicate(X, tol=MATCH_TOL):
    for i in range(1, len(X)):
        hit = np.flatnonzero(np.max(np.abs(X[:i] - X[i]), axis=1) <= tol)
        if hit.size:
            return int(hit[0]), i
    return None


@dataclass(frozen=True)
class AugmentedDesign:
    """Observed, missing and augmented inputs per level (normalized units).

    ``index_maps[t]`` (for ``t >= 1``, zero-based) gives the row of
    ``X_aug[t - 1]`` matching each row of ``X_aug[t]``; ``index_maps[0]`` is
    ``None``. ``x0_index`` is filled in by :func:`add_prediction_point`.
    """

    scaler: InputScaler
    X_obs: list
    X_mis: list
    index_maps: list
    x0_index: tuple = field(default=None)

    @property
    def s(self):
        return len(self.X_obs)

    @property
    def d(self):
        return self.scaler.lo.size

    @property
    def X_aug(self):
        return [np.vstack([o, m]) for o, m in zip(self.X_obs, self.X_mis)]

    @property
    def n_obs(self):
        return [len(x) for x in self.X_obs]

    @property
    def n_mis(self):
        return [len(x) for x in self.X_mis]

    @property
    def n_aug(self):
        return [len(o) + len(m) for o, m in zip(self.X_obs, self.X_mis)]

    @property
    def is_nested(self):
        """True when no level needs imputation."""
        return all(m == 0 for m in self.n_mis)


def _index_maps(X_aug, tol=MATCH_TOL):
    maps = [None]
    for t in range(1, len(X_aug)):
        maps.append(match_rows(X_aug[t], X_aug[t - 1], tol))
    return maps


def build_augmentation(levels, tol=MATCH_TOL):
    """Construct the nested augmented design for a list of levels."""
    if not levels:
        raise ValidationError("at least one fidelity level is required")
    d, N = levels[0].d, levels[0].N
    for lv in levels:
        if lv.d != d:
            raise ValidationError(f"level {lv.level} has d={lv.d}, expected {d}")
        if lv.N != N:
            raise ValidationError(f"level {lv.level} has N={lv.N}, expected {N}")
    scaler = InputScaler.fit(np.vstack([lv.X for lv in levels]))
    X_obs = [scaler.transform(lv.X) for lv in levels]
    for lv, X in zip(levels, X_obs):
        dup = _first_duplicate(X, tol)
        if dup is not None:
            raise ValidationError(
                f"level {lv.level}: design rows {dup[0] + 1} and {dup[1] + 1} coincide")
    s = len(levels)
    X_mis = []
    for t in range(s):
        missing = np.empty((0, d))
        for u in range(t + 1, s):
            cand = X_obs[u]
            keep = (match_rows(cand, X_obs[t], tol) < 0) & (match_rows(cand, missing, tol) < 0)
            missing = np.vstack([missing, cand[keep]])
        X_mis.append(missing)
    aug = AugmentedDesign(scaler, X_obs, X_mis, [])
    object.__setattr__(aug, "index_maps", _index_maps(aug.X_aug, tol))
    return aug


@dataclass(frozen=True)
class NestingReport:
    ok: bool
    violations: list  # (level index, row index in X_aug[level]) pairs, zero-based

    def __bool__(self):
        return self.ok


def validate_nested(aug, tol=MATCH_TOL):
    X_aug = aug.X_aug
    violations = []
    for t in range(1, len(X_aug)):
        idx = match_rows(X_aug[t], X_aug[t - 1], tol)
        violations.extend((t, int(i)) for i in np.flatnonzero(idx < 0))
    return NestingReport(not violations, violations)


def add_prediction_point(aug, x0, tol=MATCH_TOL):
    """Return a design with the raw-unit input ``x0`` added to every level.

    Levels whose augmented set already contains ``x0`` are unchanged; the
    returned ``x0_index`` records the row of ``x0`` in each augmented set.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != aug.d or not np.all(np.isfinite(x0)):
        raise DomainError(f"x0 must be a finite {aug.d}-vector")
    z = aug.scaler.transform(x0[None, :])
    X_mis = list(aug.X_mis)
    where = []
    for t, X in enumerate(aug.X_aug):
        hit = match_rows(z, X, tol)[0]
        if hit < 0:
            X_mis[t] = np.vstack([X_mis[t], z])
            hit = len(X)
        where.append(int(hit))
    new = AugmentedDesign(aug.scaler, aug.X_obs, X_mis, [], tuple(where))
    object.__setattr__(new, "index_maps", _index_maps(new.X_aug, tol))
    return new

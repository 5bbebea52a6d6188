"""Synthetic multifidelity data: a two-level toy pair and a model simulator."""
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .design import FidelityData, match_rows
from .errors import DomainError
from .gls import chol_factor
from .kernels import CorrelationParams, corr_matrix


def toy_low(x):
    x = np.asarray(x, dtype=float)
    return 0.5 * (6 * x - 2) ** 2 * np.sin(12 * x - 4) + 10 * (x - 0.5) - 5


def toy_high(x):
    x = np.asarray(x, dtype=float)
    return 2 * toy_low(x) - 20 * x + 20 + np.sin(10 * np.cos(5 * x))


TOY_HIGH_INPUTS = np.array([-1, -0.8, -0.55, -0.4, -0.2, 0, 0.2, 0.4, 0.6, 1.0])


def toy_levels(low_inputs=None, high_inputs=TOY_HIGH_INPUTS):
    """Two-level toy data; the low level defaults to the 21-point grid on [-1, 1]."""
    if low_inputs is None:
        low_inputs = np.round(np.linspace(-1, 1, 21), 12)
    low_inputs = np.asarray(low_inputs, dtype=float)
    high_inputs = np.asarray(high_inputs, dtype=float)
    return [FidelityData(1, low_inputs[:, None], toy_low(low_inputs)[:, None]),
            FidelityData(2, high_inputs[:, None], toy_high(high_inputs)[:, None])]


def toy_test_inputs(n=200):
    return np.linspace(-1, 1, n)


def latin_hypercube(n, d, rng):
    """Random Latin hypercube in [0, 1]^d (one point per stratum per dimension)."""
    u = rng.random((n, d))
    perms = np.column_stack([rng.permutation(n) for _ in range(d)])
    return (perms + u) / n


def _as_range(v):
    v = np.atleast_1d(np.asarray(v, dtype=float))
    return (v[0], v[0]) if v.size == 1 else (v[0], v[1])


@dataclass
class SynthConfig:
    """Generator settings. Parameter entries are a scalar or a ``(low, high)``
    range from which each coordinate draws its own value uniformly."""

    n: list
    phis: list
    d: int = 2
    N: int = 10
    beta: list = None
    gamma: list = None
    sigma2: list = None
    nested_fraction: float = 1.0
    nu: float = 2.5
    seed: int = 0
    jitter: float = 1e-8
    n_test: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        s = len(self.n)
        if s < 1 or len(self.phis) != s:
            raise DomainError("need one n_t and one phi vector per level")
        self.phis = [np.broadcast_to(np.asarray(p, dtype=float), (self.d,)).copy()
                     for p in self.phis]
        self.beta = self.beta if self.beta is not None else [0.0] * s
        self.sigma2 = self.sigma2 if self.sigma2 is not None else [1.0] * s
        self.gamma = self.gamma if self.gamma is not None else [1.0] * (s - 1)
        if len(self.beta) != s or len(self.sigma2) != s or len(self.gamma) != s - 1:
            raise DomainError("beta and sigma2 need s entries, gamma needs s - 1")
        if any(_as_range(v)[0] < 0 for v in self.sigma2):
            raise DomainError("variances must be non-negative")
        if not 0.0 <= self.nested_fraction <= 1.0:
            raise DomainError("nested_fraction must lie in [0, 1]")
        if any(a < b for a, b in zip(self.n, self.n[1:])):
            warnings.warn("run counts usually decrease with fidelity", UserWarning, stacklevel=2)

    @property
    def s(self):
        return len(self.n)


def gen_from_model(cfg):
    """Simulate the autoregressive multi-output model on random designs.

    Returns ``(levels, truth)``; ``truth`` records the per-coordinate
    parameters, the range parameters and the jitter used per level. With
    ``n_test > 0`` it also holds ``test_X`` and ``test_Y``, top-level
    outputs at extra Latin-hypercube inputs from the same realization.
    """
    rng = _rng.stream(cfg.seed, _rng.SYNTH)
    s, d, N = cfg.s, cfg.d, cfg.N
    designs = [latin_hypercube(cfg.n[0], d, rng)]
    for t in range(1, s):
        n_nest = min(int(round(cfg.nested_fraction * cfg.n[t])), len(designs[-1]))
        keep = np.sort(rng.choice(len(designs[-1]), n_nest, replace=False))
        fresh = latin_hypercube(cfg.n[t] - n_nest, d, rng) if cfg.n[t] > n_nest else np.empty((0, d))
        designs.append(np.vstack([designs[-1][keep], fresh]))
    test_X = latin_hypercube(cfg.n_test, d, rng) if cfg.n_test else np.empty((0, d))
    union = designs[0]
    for X in designs[1:] + [test_X]:
        union = np.vstack([union, X[match_rows(X, union) < 0]])

    def draw(v, size):
        lo, hi = _as_range(v)
        return np.full(size, lo) if lo == hi else rng.uniform(lo, hi, size)

    beta = np.array([draw(v, N) for v in cfg.beta])
    sigma2 = np.array([draw(v, N) for v in cfg.sigma2])
    gamma = np.array([draw(v, N) for v in cfg.gamma]).reshape(s - 1, N)
    jitter = []
    y = None
    for t in range(s):
        R = corr_matrix(union, union, CorrelationParams(cfg.phis[t], cfg.nu))
        fac = chol_factor(R, cfg.jitter, f"synthetic level {t + 1}")
        jitter.append(fac.jitter_used)
        field_t = beta[t] + (fac.L @ rng.standard_normal((len(union), N))) * np.sqrt(sigma2[t])
        y = field_t if t == 0 else gamma[t - 1] * y + field_t
        designs[t] = (designs[t], match_rows(designs[t], union), y.copy())
    test_Y = y[match_rows(test_X, union)] if cfg.n_test else None
    levels = [FidelityData(t + 1, X, yt[idx]) for t, (X, idx, yt) in enumerate(designs)]
    truth = {
        "phis": [p.tolist() for p in cfg.phis],
        "beta": beta.tolist(),
        "gamma": gamma.tolist(),
        "sigma2": sigma2.tolist(),
        "jitter_used": jitter,
        "nu": cfg.nu,
        "seed": cfg.seed,
        "n": list(cfg.n),
        "nested_fraction": cfg.nested_fraction,
    }
    if cfg.n_test:
        # held-out top-level runs simulated jointly with the training data
        truth["test_X"] = test_X
        truth["test_Y"] = test_Y
    return levels, truth

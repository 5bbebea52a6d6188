"""Verification metrics for probabilistic predictions on held-out runs.

All functions take arrays of shape (points, coordinates); any shape works as
long as predictions and truth match.
"""
import numpy as np

from .errors import DomainError


def _pair(pred, truth):
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise DomainError(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    if truth.size == 0:
        raise DomainError("empty validation set")
    if not np.all(np.isfinite(truth)):
        raise DomainError("truth contains non-finite values")
    return pred, truth


def rmspe(mean, truth):
    mean, truth = _pair(mean, truth)
    return float(np.sqrt(np.mean((mean - truth) ** 2)))


def coverage95(lower, upper, truth):
    lower, truth = _pair(lower, truth)
    upper, _ = _pair(upper, truth)
    return float(np.mean((lower <= truth) & (truth <= upper)))


def alci95(lower, upper):
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.size == 0:
        raise DomainError("empty validation set")
    return float(np.mean(upper - lower))


def crps_empirical(draws, truth):
    """CRPS of the empirical distribution of ``draws`` at the scalar ``truth``::

        mean_k |X_k - y| - mean_{k,m} |X_k - X_m| / 2
    """
    x = np.sort(np.asarray(draws, dtype=float).ravel())
    M = x.size
    if M == 0:
        raise DomainError("at least one draw is required")
    # sum_{k,m} |X_k - X_m| = 2 sum_i (2i - M + 1) x_(i) over sorted draws
    pair_sum = 2.0 * np.sum((2 * np.arange(M) - M + 1) * x)
    return float(np.mean(np.abs(x - truth)) - pair_sum / (2.0 * M * M))


def mean_crps(draws, truth):
    """Average empirical CRPS; ``draws`` has a leading draw axis over ``truth``'s shape."""
    draws = np.asarray(draws, dtype=float)
    truth = np.asarray(truth, dtype=float)
    flat = draws.reshape(draws.shape[0], -1)
    return float(np.mean([crps_empirical(flat[:, i], y) for i, y in enumerate(truth.ravel())]))


def nsme(mean, truth, train_mean, denominator="printed"):
    """Nash-Sutcliffe efficiency ``1 - sum (m - y)^2 / D``.

    ``train_mean`` holds the per-coordinate mean of the top-level training
    outputs (broadcast over points). ``denominator="printed"`` uses
    ``D = sum (m - ybar)^2``; ``"conventional"`` uses ``D = sum (y - ybar)^2``.
    """
    mean, truth = _pair(mean, truth)
    train_mean = np.asarray(train_mean, dtype=float)
    if denominator == "printed":
        D = np.sum((mean - train_mean) ** 2)
    elif denominator == "conventional":
        D = np.sum((truth - train_mean) ** 2)
    else:
        raise DomainError(f"unknown NSME denominator {denominator!r}")
    if D == 0:
        raise DomainError("NSME denominator is zero")
    return float(1.0 - np.sum((mean - truth) ** 2) / D)


def report(summaries_mean, lower, upper, truth, draws=None, train_mean=None,
           nsme_denominator="printed"):
    """All metrics as an ordered dict; CRPS needs raw draws, NSME the training means."""
    out = {
        "rmspe": rmspe(summaries_mean, truth),
        "cvg95": coverage95(lower, upper, truth),
        "alci95": alci95(lower, upper),
    }
    if draws is not None:
        out["crps"] = mean_crps(draws, truth)
    if train_mean is not None:
        out["nsme"] = nsme(summaries_mean, truth, train_mean, nsme_denominator)
        out["nsme_denominator"] = nsme_denominator
    return out

"""CSV data files, model archives and training traces.

Design files have a header ``x1,...,xd`` and output files ``y1,...,yN``;
rows are aligned one to one. Floats are written with ``repr`` so files
round-trip bit for bit.
"""
import csv
import json
from pathlib import Path

import numpy as np

from .design import FidelityData, build_augmentation
from .errors import ValidationError
from .mcem import FittedEmulator, McemConfig, MissingDraws

FORMAT = "ppcokrig-model"
SCHEMA_VERSION = 1


def _fmt(v):
    return repr(float(v))


def write_matrix(path, M, prefix):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{prefix}{i + 1}" for i in range(M.shape[1])])
        for row in M:
            w.writerow([_fmt(v) for v in row])


def read_matrix(path, prefix):
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"{path}: cannot open ({exc.strerror})") from None
    with fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    expected = [f"{prefix}{i + 1}" for i in range(len(header))]
    if header != expected:
        raise ValidationError(f"{path}:1: expected header {','.join(expected)}, got {','.join(header)}")
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ValidationError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            vals = [float(v) for v in row]
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: non-numeric field") from None
        if not all(np.isfinite(vals)):
            raise ValidationError(f"{path}:{lineno}: non-finite value")
        data.append(vals)
    return np.array(data, dtype=float).reshape(len(data), len(header))


def load_level(design_path, output_path, level=1):
    X = read_matrix(design_path, "x")
    Y = read_matrix(output_path, "y")
    if len(X) != len(Y):
        first = min(len(X), len(Y)) + 1
        raise ValidationError(
            f"{design_path} has {len(X)} rows but {output_path} has {len(Y)}; "
            f"row {first} has no counterpart")
    return FidelityData(level, X, Y)


def save_level(level, design_path, output_path):
    write_matrix(design_path, level.X, "x")
    write_matrix(output_path, level.Y, "y")


def _enc(a):
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "data": a.ravel().tolist()}


def _dec(obj):
    return np.array(obj["data"], dtype=float).reshape(obj["shape"])


def model_to_dict(em):
    return {
        "format": FORMAT,
        "schema_version": SCHEMA_VERSION,
        "s": em.s,
        "d": em.d,
        "N": em.N,
        "config": em.config.to_dict(),
        "levels": [{"X": _enc(lv.X), "Y": _enc(lv.Y)} for lv in em.levels],
        "scaler": {"lo": _enc(em.aug.scaler.lo), "span": _enc(em.aug.scaler.span)},
        "phis": [_enc(p) for p in em.phis],
        "b_hat": [_enc(b) for b in em.b_hat],
        "sigma2": [_enc(v) for v in em.sigma2],
        "draws": [_enc(v) for v in em.draws.values],
        "converged": em.converged,
        "iterations": em.iterations,
        "jitter_used": list(em.jitter_used),
    }


def save_model(em, path):
    text = json.dumps(model_to_dict(em), separators=(",", ":"))
    Path(path).write_text(text + "\n", encoding="utf-8")


def model_from_dict(obj):
    if obj.get("format") != FORMAT:
        raise ValidationError("not a ppcokrig model archive")
    if obj.get("schema_version") != SCHEMA_VERSION:
        raise ValidationError(
            f"model schema version {obj.get('schema_version')} is not supported "
            f"(expected {SCHEMA_VERSION})")
    try:
        levels = [FidelityData(t + 1, _dec(lv["X"]), _dec(lv["Y"]))
                  for t, lv in enumerate(obj["levels"])]
        s, d, N = obj["s"], obj["d"], obj["N"]
        if len(levels) != s or any(lv.d != d or lv.N != N for lv in levels):
            raise ValidationError("declared s, d or N disagrees with the stored data")
        aug = build_augmentation(levels)
        lo, span = _dec(obj["scaler"]["lo"]), _dec(obj["scaler"]["span"])
        if not (np.array_equal(lo, aug.scaler.lo) and np.array_equal(span, aug.scaler.span)):
            raise ValidationError("stored input normalization disagrees with the stored designs")
        phis = [_dec(p) for p in obj["phis"]]
        draws = MissingDraws([_dec(v) for v in obj["draws"]])
        if len(phis) != s or any(p.shape != (d,) for p in phis):
            raise ValidationError("range parameters disagree with declared s and d")
        if len(draws.values) != s or any(v.shape[1:] != (m, N)
                                         for v, m in zip(draws.values, aug.n_mis)):
            raise ValidationError("stored imputations disagree with the design")
        return FittedEmulator(
            levels=levels, aug=aug, phis=phis, config=McemConfig(**obj["config"]),
            b_hat=[_dec(b) for b in obj["b_hat"]], sigma2=[_dec(v) for v in obj["sigma2"]],
            draws=draws, converged=bool(obj["converged"]), iterations=int(obj["iterations"]),
            jitter_used=list(obj["jitter_used"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed model archive ({exc!r})") from None


def load_model(path):
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: model archive is truncated or corrupt ({exc})") from None
    except OSError as exc:
        raise ValidationError(f"{path}: cannot open ({exc.strerror})") from None
    return model_from_dict(obj)


def write_trace(trace, path, timing=False):
    if not trace:
        return
    s = len(trace[0]["phis"])
    d = len(trace[0]["phis"][0])
    header = ["iteration", "M"]
    header += [f"phi_{t + 1}_{l + 1}" for t in range(s) for l in range(d)]
    header += [f"q_{t + 1}" for t in range(s)] + ["max_log_phi_change"]
    if timing:
        header.append("wall_time")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in trace:
            vals = [row["iteration"], row["M"]]
            vals += [_fmt(v) for p in row["phis"] for v in p]
            vals += [_fmt(v) for v in row["q"]] + [_fmt(row["change"])]
            if timing:
                vals.append(_fmt(row["wall_time"]))
            w.writerow(vals)

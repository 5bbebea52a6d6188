"""Command-line interface: ``ppcokrig {gen-toy,gen-synth,train,predict,validate}``.

Exit codes: 0 success, 2 validation error, 3 numerical error, 4 training did
not converge (the model is still written).
"""
import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io, metrics, synth
from .errors import DomainError, NumericalError, ValidationError
from .mcem import McemConfig, run_mcem
from .predict import predict_many

log = logging.getLogger("ppcokrig")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_NOT_CONVERGED = 0, 2, 3, 4


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _per_level(text):
    """``"a,b;c,d"`` -> ``[[a, b], [c, d]]``; a single number per level is allowed."""
    return [_floats(part) for part in text.split(";")]


def _threads(args):
    if args.threads is not None:
        return max(1, args.threads)
    return max(1, int(os.environ.get("PPCOKRIG_THREADS", "1")))


def _write_levels(out, levels):
    for lv in levels:
        io.save_level(lv, out / f"level{lv.level}_design.csv", out / f"level{lv.level}_output.csv")


def cmd_gen_toy(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    low = None if args.layout == 21 else np.round(np.arange(20) * 0.1 - 1.0, 12)
    _write_levels(out, synth.toy_levels(low))
    xt = synth.toy_test_inputs(args.n_test)
    io.write_matrix(out / "test_design.csv", xt[:, None], "x")
    io.write_matrix(out / "test_output.csv", synth.toy_high(xt)[:, None], "y")
    return EXIT_OK


def cmd_gen_synth(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = [int(v) for v in args.n.split(",")]
    cfg = synth.SynthConfig(
        n=n, d=args.d, N=args.N, phis=_per_level(args.phi),
        beta=_per_level(args.beta) if args.beta else None,
        gamma=_per_level(args.gamma) if args.gamma else None,
        sigma2=_per_level(args.sigma2) if args.sigma2 else None,
        nested_fraction=args.nested_fraction, nu=args.nu, seed=args.seed, n_test=args.n_test)
    levels, truth = synth.gen_from_model(cfg)
    _write_levels(out, levels)
    if args.n_test:
        io.write_matrix(out / "test_design.csv", truth.pop("test_X"), "x")
        io.write_matrix(out / "test_output.csv", truth.pop("test_Y"), "y")
    (out / "truth.json").write_text(json.dumps(truth, indent=1) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_train(args):
    levels = [io.load_level(d, o, t + 1) for t, (d, o) in enumerate(args.level)]
    cfg = McemConfig(seed=args.seed, nu=args.nu, basis_degree=args.basis_degree,
                     jitter=args.jitter, m_start=args.m_start, m_increment=args.m_increment,
                     m_max=args.m_max, max_iter=args.max_iter, tol=args.tol,
                     restarts=args.restarts, maxfev=args.maxfev, threads=_threads(args))
    em = run_mcem(levels, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.save_model(em, out / "model.json")
    io.write_trace(em.trace, out / "trace.csv", timing=args.timing)
    total = sum(r["wall_time"] for r in em.trace)
    log.info("trained %d levels in %d iterations (%.2fs), converged=%s",
             em.s, em.iterations, total, em.converged)
    if not em.converged:
        log.warning("MCEM did not converge within %d iterations", cfg.max_iter)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _write_summaries(path, summaries):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["point", "coordinate", "mean", "sd", "lower", "upper", "n_draws"])
        for i, sm in enumerate(summaries):
            for j in range(len(sm.mean)):
                w.writerow([i + 1, j + 1, io._fmt(sm.mean[j]), io._fmt(sm.sd[j]),
                            io._fmt(sm.lower[j]), io._fmt(sm.upper[j]), sm.n_draws])


def _write_draws(path, draws):
    # draws: points x M_pred x N
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["point", "draw"] + [f"y{j + 1}" for j in range(draws.shape[2])])
        for i, block in enumerate(draws):
            for k, row in enumerate(block):
                w.writerow([i + 1, k + 1] + [io._fmt(v) for v in row])


def cmd_predict(args):
    em = io.load_model(args.model)
    X0 = io.read_matrix(args.design, "x")
    if X0.shape[1] != em.d:
        raise ValidationError(f"{args.design}: expected {em.d} input columns, got {X0.shape[1]}")
    summaries, draws = predict_many(em, X0, args.m_pred, args.seed, _threads(args),
                                    return_draws=True)
    _write_summaries(args.out, summaries)
    if args.draws_out:
        _write_draws(args.draws_out, draws)
    return EXIT_OK


def cmd_validate(args):
    em = io.load_model(args.model)
    held = io.load_level(args.design, args.output, em.s)
    if held.d != em.d or held.N != em.N:
        raise ValidationError("held-out data disagree with the model's d or N")
    summaries, draws = predict_many(em, held.X, args.m_pred, args.seed, _threads(args),
                                    return_draws=True)
    mean = np.array([s.mean for s in summaries])
    lower = np.array([s.lower for s in summaries])
    upper = np.array([s.upper for s in summaries])
    rep = metrics.report(mean, lower, upper, held.Y, draws=np.moveaxis(draws, 1, 0),
                         train_mean=em.levels[-1].Y.mean(axis=0),
                         nsme_denominator=args.nsme_denominator)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value"])
        for k, v in rep.items():
            w.writerow([k, v if isinstance(v, str) else io._fmt(v)])
    lines = [f"held-out points: {len(held.X)}, coordinates: {held.N}, draws: {args.m_pred}"]
    lines += [f"{k:>18}: {v if isinstance(v, str) else format(v, '.6g')}" for k, v in rep.items()]
    text = "\n".join(lines) + "\n"
    (out / "metrics.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="ppcokrig", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-toy", help="write the two-level toy datasets")
    g.add_argument("--out", required=True)
    g.add_argument("--layout", type=int, choices=(20, 21), default=21,
                   help="low-fidelity grid: 21 points on [-1, 1] or 20 points on [-1, 0.9]")
    g.add_argument("--n-test", type=int, default=200)
    g.set_defaults(func=cmd_gen_toy)

    g = sub.add_parser("gen-synth", help="simulate data from the cokriging model")
    g.add_argument("--out", required=True)
    g.add_argument("--n", required=True, help="runs per level, e.g. 60,25")
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--N", type=int, default=10)
    g.add_argument("--phi", required=True, help="range parameters per level, e.g. '0.3,0.5;0.2,0.4'")
    g.add_argument("--beta", help="per-level value or low,high range, ';'-separated")
    g.add_argument("--gamma", help="per-transition value or low,high range")
    g.add_argument("--sigma2", help="per-level value or low,high range")
    g.add_argument("--nested-fraction", type=float, default=1.0)
    g.add_argument("--nu", type=float, default=2.5)
    g.add_argument("--n-test", type=int, default=0)
    g.add_argument("--seed", type=int, required=True)
    g.set_defaults(func=cmd_gen_synth)

    g = sub.add_parser("train", help="fit the emulator by Monte Carlo EM")
    g.add_argument("--level", nargs=2, action="append", required=True,
                   metavar=("DESIGN", "OUTPUT"), help="repeat per level, lowest fidelity first")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--nu", type=float, default=2.5)
    g.add_argument("--basis-degree", type=int, default=0)
    g.add_argument("--jitter", type=float, default=1e-8)
    g.add_argument("--m-start", type=int, default=30)
    g.add_argument("--m-increment", type=int, default=10)
    g.add_argument("--m-max", type=int, default=100)
    g.add_argument("--max-iter", type=int, default=200)
    g.add_argument("--tol", type=float, default=1e-3)
    g.add_argument("--restarts", type=int, default=3)
    g.add_argument("--maxfev", type=int, default=500)
    g.add_argument("--threads", type=int)
    g.add_argument("--timing", action="store_true", help="add a wall_time column to the trace")
    g.set_defaults(func=cmd_train)

    g = sub.add_parser("predict", help="predictive summaries at query inputs")
    g.add_argument("--model", required=True)
    g.add_argument("--design", required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--m-pred", type=int, default=30)
    g.add_argument("--draws-out")
    g.add_argument("--threads", type=int)
    g.set_defaults(func=cmd_predict)

    g = sub.add_parser("validate", help="metrics on held-out top-level runs")
    g.add_argument("--model", required=True)
    g.add_argument("--design", required=True)
    g.add_argument("--output", required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out-dir", required=True)
    g.add_argument("--m-pred", type=int, default=30)
    g.add_argument("--nsme-denominator", choices=("printed", "conventional"), default="printed")
    g.add_argument("--threads", type=int)
    g.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ValidationError, DomainError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except NumericalError as exc:
        log.error("%s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

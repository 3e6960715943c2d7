"""Command-line interface: simulate, identify, tune, benchmark, report.

All randomness flows from explicit ``--seed`` flags; nothing is seeded from
the clock. Output files are written atomically (temp file + rename) and every
benchmark run echoes the fully resolved configuration next to its outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiment as exp
from .kernel import DcHyperParams, marginal_log_likelihood, save_hyperparams, tune_hyperparameters
from .lti import (
    Dataset,
    build_toeplitz,
    impulse_response,
    load_dataset,
    load_model,
    sample_white_noise,
    save_dataset,
    simulate,
)

__all__ = ["main"]


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_writer(write_fn, path: Path) -> None:
    """Run ``write_fn(tmp_path)`` then atomically move the result into place."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    os.close(fd)
    try:
        write_fn(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_orders(text: str) -> tuple[int, int, int]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("orders must be 'nb,nf,nk'")
    return tuple(int(p) for p in parts)


def _parse_kernel_init(text: str) -> DcHyperParams:
    parts = [float(p.strip()) for p in text.split(",")]
    if len(parts) == 3:
        parts.append(1.0)
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("kernel-init must be 'c,alpha,rho' or 'c,alpha,rho,lambda'")
    return DcHyperParams(c=parts[0], alpha=parts[1], rho=parts[2], lam=parts[3])


def _cmd_simulate(args) -> int:
    model = load_model(args.system)
    n = args.n
    if args.impulse:
        u = np.zeros(n)
        u[0] = 1.0
    else:
        u = sample_white_noise(n, args.input_variance, np.random.SeedSequence(entropy=args.seed, spawn_key=(0,)))
    noise = sample_white_noise(n, args.noise_variance, np.random.SeedSequence(entropy=args.seed, spawn_key=(1,)))
    g = impulse_response(model, n)
    y = simulate(g, u, noise)
    _atomic_writer(lambda tmp: save_dataset(Dataset(u, y), tmp), Path(args.out))
    print(f"wrote {n} samples to {args.out}")
    return 0


def _cmd_identify(args) -> int:
    dataset = load_dataset(args.data)
    if args.method == "pem" and dataset.u[0] == 0.0:
        print("warning: u(1) = 0, the regressor is singular and no uncertainty band will be reported", file=sys.stderr)
    result = exp.identify_dataset(
        dataset,
        args.orders,
        args.method,
        seed=args.seed,
        kernel_init=args.kernel_init,
        optimizer_restarts=args.restarts,
    )
    payload = {
        "method": args.method,
        "orders": list(args.orders),
        "seed": args.seed,
        "decision": result.decision.to_dict(),
        "posterior": result.posterior.to_dict(),
        "hyperparameters": result.hyperparams.to_dict() if result.hyperparams else None,
    }
    _atomic_write_text(Path(args.out), json.dumps(payload, indent=2) + "\n")
    print(f"objective {result.decision.objective:.6e}; decision written to {args.out}")
    return 0


def _cmd_tune(args) -> int:
    dataset = load_dataset(args.data)
    H = build_toeplitz(dataset.u)
    tuned = tune_hyperparameters(
        H,
        dataset.y,
        args.kernel_init,
        restarts=args.restarts,
        max_iter=args.max_iter,
        seed=args.seed,
    )
    _atomic_writer(lambda tmp: save_hyperparams(tuned, tmp), Path(args.out))
    ll = marginal_log_likelihood(tuned, H, dataset.y)
    print(f"tuned hyperparameters written to {args.out} (log-likelihood {ll:.6f})")
    return 0


def _cmd_benchmark(args) -> int:
    config, kind = exp.load_config(args.config)
    if args.replications is not None:
        config = replace(config, replications=args.replications)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.horizon is not None:
        config = replace(config, metric_horizon=args.horizon)
    out = Path(args.out)
    cells = exp.benchmark_suite(kind, config)

    resolved = exp.config_to_dict(config)
    resolved["kind"] = kind
    _atomic_write_text(out / "config.json", json.dumps(resolved, indent=2) + "\n")
    _atomic_writer(lambda tmp: exp.write_replication_csv(cells, tmp), out / "replications.csv")
    _atomic_writer(lambda tmp: exp.write_boxplot_csv(exp.boxplot_rows(cells), tmp), out / "boxplot.csv")
    summary = exp.summary_dict(cells)
    _atomic_write_text(out / "summary.json", json.dumps(summary, indent=2) + "\n")

    failed = summary["total_failed"]
    for cell in summary["cells"]:
        s = cell["summary"]
        print(
            f"{cell['method']:>4} N={cell['N']:<4d} nf={cell['nf']:<2d} "
            f"median={s['median']:+.3f} iqr={s['q3'] - s['q1']:.3f} failed={cell['failed']}"
        )
    if failed:
        print(f"error: {failed} replication(s) failed", file=sys.stderr)
        return 1
    return 0


def _cmd_report(args) -> int:
    records = exp.read_replication_csv(args.input)
    rows = exp.boxplot_rows_from_records(records)
    _atomic_writer(lambda tmp: exp.write_boxplot_csv(rows, tmp), Path(args.out))
    print(f"wrote {len(rows)} box-plot rows to {args.out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskid",
        description="Decision-theoretic identification of discrete LTI output-error models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a system and write a t,u,y dataset CSV")
    p.add_argument("--system", required=True, help="model JSON file {b, f, nk}")
    p.add_argument("--n", type=int, required=True, help="number of samples")
    p.add_argument("--input-variance", type=float, default=1.0)
    p.add_argument("--noise-variance", type=float, default=0.0)
    p.add_argument("--impulse", action="store_true", help="use a unit impulse input instead of white noise")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("identify", help="identify a rational model from a dataset CSV")
    p.add_argument("--data", required=True, help="dataset CSV with header t,u,y")
    p.add_argument("--orders", type=_parse_orders, required=True, metavar="NB,NF,NK")
    p.add_argument("--method", choices=["pem", "brm"], default="brm")
    p.add_argument("--kernel-init", type=_parse_kernel_init, default=exp.DEFAULT_KERNEL_INIT, metavar="C,ALPHA,RHO[,LAMBDA]")
    p.add_argument("--restarts", type=int, default=10, help="random optimizer restarts")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output JSON path")
    p.set_defaults(func=_cmd_identify)

    p = sub.add_parser("tune", help="tune kernel hyperparameters by marginal likelihood")
    p.add_argument("--data", required=True)
    p.add_argument("--kernel-init", type=_parse_kernel_init, default=exp.DEFAULT_KERNEL_INIT, metavar="C,ALPHA,RHO[,LAMBDA]")
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output hyperparameter JSON path")
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("benchmark", help="run a Monte Carlo benchmark from a config file")
    p.add_argument("--config", required=True, help="experiment config JSON or TOML (with optional 'kind')")
    p.add_argument("--replications", type=int, default=None, help="override config replications")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--horizon", type=int, default=None, help="override metric horizon")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_benchmark)

    p = sub.add_parser("report", help="recompute box-plot statistics from a per-replication CSV")
    p.add_argument("--input", required=True, help="replications.csv produced by benchmark")
    p.add_argument("--out", required=True, help="output box-plot CSV path")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as err:
        print(f"error: file not found: {err.filename}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

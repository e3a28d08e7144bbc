"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
Every command takes a --seed where randomness is involved and is run-to-run
deterministic; each run writes exactly one JSON manifest next to its outputs
recording the command, its full configuration, input file hashes, the tool
version, and the wall-clock duration. Commands never mutate their inputs.

The BRIDGEKIT_THREADS environment variable caps the BLAS worker threads
(default: all cores); set it to 1 for bit-identical results across machines.
"""

from __future__ import annotations

import os

if "BRIDGEKIT_THREADS" in os.environ:  # must precede the first numpy import
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["BRIDGEKIT_THREADS"])

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import (
    AlignedDataset,
    generate_gauss_pairs,
    generate_moon,
    generate_t,
    read_cloud,
    read_pairs,
    write_cloud,
    write_pairs,
)
from .errors import BridgekitError, DataError, NumericsError
from .metrics import mmd, ps_l2, rmsd, sinkhorn_w
from .plotting import write_svg
from .sde import TimeGrid, read_trajectories, simulate_sde, write_trajectories
from .serialize import load_model
from .training import export_drift, read_config, save_train_result, train, write_loss_trace

DATASETS = ("moon", "t", "gauss-pairs")
METRICS = ("mmd", "sinkhorn", "rmsd", "ps_l2")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(anchor_path, command: str, config: dict, seed, inputs: list, started: float):
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "input_hashes": {str(p): _sha256(p) for p in inputs},
        "tool_version": __version__,
        "duration_seconds": time.monotonic() - started,
    }
    path = Path(str(anchor_path) + ".manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    started = time.monotonic()
    rng = np.random.default_rng(args.seed)
    if args.dataset == "moon":
        noise = 0.05 if args.noise_std is None else args.noise_std
        ds = generate_moon(args.n, noise_std=noise, rng=rng)
    elif args.dataset == "t":
        noise = 2.0 if args.noise_std is None else args.noise_std
        ds = generate_t(args.n, noise_std=noise, rng=rng)
    else:
        shift = None
        if args.shift is not None:
            shift = np.array([float(v) for v in args.shift.split(",")])
        ds = generate_gauss_pairs(args.n, d=args.dim, shift=shift, rng=rng)
    write_pairs(args.out, ds)
    _write_manifest(
        args.out, "generate",
        {"dataset": args.dataset, "n": args.n, "noise_std": args.noise_std,
         "dim": args.dim, "shift": args.shift, "out": str(args.out)},
        args.seed, [], started,
    )
    print(f"wrote {len(ds)} pairs (d = {ds.d}) to {args.out}")
    return 0


def cmd_train(args) -> int:
    started = time.monotonic()
    config = read_config(args.config)
    dataset = read_pairs(args.data)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def progress(it, breakdown):
        print(f"iter {it}: total = {breakdown.total:.6g} "
              f"(regression {breakdown.regression:.6g}, "
              f"penalty {breakdown.regularization:.6g})")

    result = train(dataset, config, progress=progress)
    model_path = out_dir / "model.bkt"
    save_train_result(model_path, result)
    write_loss_trace(out_dir / "loss_trace.csv", result.trace)
    _write_manifest(
        model_path, "train", config.to_dict(), config.seed,
        [args.data, args.config], started,
    )
    print(f"trained {config.n_iters} iterations; model at {model_path}")
    return 0


def _load_x0(path) -> np.ndarray:
    """Starting points from either a point-cloud CSV or the x0 side of pairs."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
    if header.startswith("x0_"):
        return read_pairs(path).x0
    return read_cloud(path)


def cmd_sample(args) -> int:
    started = time.monotonic()
    model = load_model(args.model)
    x0 = _load_x0(args.data)
    if x0.shape[1] != model.drift.spec.input_dim:
        raise DataError(
            f"data dimension {x0.shape[1]} does not match model dimension "
            f"{model.drift.spec.input_dim}"
        )
    starts = np.repeat(x0, args.n_poses, axis=0)
    grid = TimeGrid(args.steps)
    batch = simulate_sde(starts, model.drift, model.schedule, grid, seed=args.seed)
    write_trajectories(args.out, batch)
    endpoints_path = args.endpoints_out
    if endpoints_path is None:
        out = Path(args.out)
        endpoints_path = out.with_name(out.stem + "_endpoints.csv")
    write_cloud(endpoints_path, batch.endpoints)
    _write_manifest(
        args.out, "sample",
        {"model": str(args.model), "data": str(args.data), "steps": args.steps,
         "n_poses": args.n_poses, "out": str(args.out),
         "endpoints_out": str(endpoints_path)},
        args.seed, [args.model, args.data], started,
    )
    print(f"simulated {batch.n_traj} trajectories x {args.steps} steps -> {args.out}")
    return 0


def _load_cloud_arg(spec: str, what: str) -> np.ndarray:
    """A cloud argument is 'file.csv', or 'file.csv:x0' / 'file.csv:x1' to
    pick one side of a pair file."""
    path, sep, side = spec.rpartition(":")
    if sep and side in ("x0", "x1") and Path(path).exists():
        ds = read_pairs(path)
        return ds.x0 if side == "x0" else ds.x1
    with open(spec, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
    if header.startswith("x0_"):
        raise DataError(
            f"{what}: {spec} is a pair file; append ':x0' or ':x1' to select a side"
        )
    return read_cloud(spec)


def cmd_evaluate(args) -> int:
    started = time.monotonic()
    pred = _load_cloud_arg(args.pred, "--pred")
    ref = _load_cloud_arg(args.ref, "--ref")
    control = _load_cloud_arg(args.control, "--control") if args.control else None
    names = [m.strip() for m in args.metrics.split(",") if m.strip()]
    for name in names:
        if name not in METRICS:
            raise DataError(f"unknown metric {name!r}; valid metrics: {', '.join(METRICS)}")

    lines = []
    for name in names:
        if name == "mmd":
            value = mmd(pred, ref)
        elif name == "sinkhorn":
            result = sinkhorn_w(pred, ref, eps=args.eps)
            if not result.converged:
                print(
                    f"warning: sinkhorn stopped at {result.n_iters} iterations with "
                    f"marginal violation {result.marginal_violation:g}",
                    file=sys.stderr,
                )
            value = result.value
        elif name == "rmsd":
            if pred.shape != ref.shape:
                raise DataError(
                    f"rmsd needs index-aligned clouds of equal shape; got {pred.shape} vs "
                    f"{ref.shape}. Row i of --pred must correspond to row i of --ref."
                )
            value = rmsd(pred, ref)
        else:
            if pred.shape[1] != ref.shape[1]:
                raise DataError(
                    f"ps_l2 needs equal dimensions; got {pred.shape[1]} vs {ref.shape[1]}"
                )
            value = ps_l2(pred, ref, control)
        lines.append(f"{name} = {value:.17g}")

    report = "\n".join(lines) + "\n"
    print(report, end="")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report)
    if args.csv_out:
        with open(args.csv_out, "w", encoding="utf-8") as fh:
            fh.write(",".join(names) + "\n")
            fh.write(",".join(ln.split(" = ")[1] for ln in lines) + "\n")
    anchor = args.out or args.csv_out
    if anchor:  # stdout-only runs produce no files for a manifest to sit next to
        def strip_side(spec):
            return spec.rsplit(":", 1)[0] if spec.endswith((":x0", ":x1")) else spec

        _write_manifest(
            anchor, "evaluate",
            {"pred": args.pred, "ref": args.ref, "control": args.control,
             "metrics": names, "eps": args.eps, "out": args.out,
             "csv_out": args.csv_out},
            None, [strip_side(args.pred), strip_side(args.ref)],
            started,
        )
    return 0


def cmd_export_drift(args) -> int:
    started = time.monotonic()
    export_drift(args.model, args.out)
    _write_manifest(
        args.out, "export-drift",
        {"model": str(args.model), "out": str(args.out)},
        None, [args.model], started,
    )
    print(f"exported drift-only model to {args.out}")
    return 0


def cmd_plot(args) -> int:
    started = time.monotonic()
    trajectories = None
    if args.traj:
        with open(args.traj, "r", encoding="utf-8") as fh:
            content = fh.read().strip()
        trajectories = read_trajectories(args.traj) if content else None
    pairs = None
    if args.pairs:
        pairs = read_pairs(args.pairs)
    write_svg(args.out, trajectories, pairs)
    _write_manifest(
        args.out, "plot",
        {"traj": args.traj, "pairs": args.pairs, "out": str(args.out)},
        None, [p for p in (args.traj, args.pairs) if p], started,
    )
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# Parser and entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bridgekit",
        description="Learn SDE drifts from aligned pairs, simulate, and evaluate.",
    )
    parser.add_argument("--version", action="version", version=f"bridgekit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate an aligned-pair dataset CSV")
    p.add_argument("--dataset", required=True, choices=DATASETS)
    p.add_argument("--n", type=int, required=True, help="number of pairs")
    p.add_argument("--noise-std", type=float, default=None,
                   help="noise level (defaults: moon 0.05, t 2.0)")
    p.add_argument("--dim", type=int, default=2, help="dimension for gauss-pairs")
    p.add_argument("--shift", type=str, default=None,
                   help="comma-separated shift vector for gauss-pairs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a drift + correction model on pairs")
    p.add_argument("--data", required=True, help="pair CSV")
    p.add_argument("--config", required=True, help="key = value training config")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="simulate trajectories from a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="starting points: cloud CSV or pair CSV (x0 side)")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--n-poses", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="trajectory CSV path")
    p.add_argument("--endpoints-out", default=None,
                   help="endpoints cloud CSV (default: <out>_endpoints.csv)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("evaluate", help="compute metrics between two point clouds")
    p.add_argument("--pred", required=True,
                   help="cloud CSV, or pair CSV with ':x0'/':x1' side selector")
    p.add_argument("--ref", required=True)
    p.add_argument("--control", default=None)
    p.add_argument("--metrics", default="mmd,sinkhorn,rmsd,ps_l2",
                   help=f"comma-separated subset of: {', '.join(METRICS)}")
    p.add_argument("--eps", type=float, default=0.1, help="sinkhorn regularization")
    p.add_argument("--out", default=None, help="write the report to this file")
    p.add_argument("--csv-out", default=None, help="also write a one-row CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export-drift", help="strip a trained model to its drift network")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_drift)

    p = sub.add_parser("plot", help="render trajectories and matchings to SVG")
    p.add_argument("--traj", default=None, help="trajectory CSV")
    p.add_argument("--pairs", default=None, help="pair CSV for matchings")
    p.add_argument("--out", required=True, help="SVG path")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except BridgekitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()

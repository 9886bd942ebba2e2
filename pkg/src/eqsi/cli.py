"""Command-line surface: one subcommand per pipeline stage plus the
orchestrated experiments.

Every subcommand reads the same one-document configuration (preset,
then optional config file, then `--set dotted.path=value` overrides)
and works inside `outdir`.  Stages are resumable: artifacts whose
embedded config hash matches are loaded, everything missing is built,
so any stage command can be run on an empty directory.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric or
training error.
"""

from __future__ import annotations

import argparse
import sys
from datetime import datetime, timezone

import numpy as np

from .config import RunConfig, load_config
from .errors import (
    BudgetError,
    ConfigError,
    DataError,
    EqsiError,
    MetricUndefined,
    ObjectiveError,
    OptimError,
    ParameterError,
    SegmentationError,
    ShapeError,
    SignalError,
    TapeError,
)
from .eye import fold_eye, largest_window
from .io import eye_to_csv, eye_to_svg, latents_to_csv
from .latent import encode_matrix
from .pipeline import (
    BASELINE_METHODS,
    OBJECTIVES,
    ExperimentReport,
    run_baseline,
    run_compare_si,
    run_generalize,
    run_pipeline,
    split_indices,
    stage_a2c,
    stage_ae,
    stage_anchor,
    stage_data,
    stage_optimize,
)

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_CONFIG_ERRORS = (ConfigError, ParameterError, BudgetError)
_DATA_ERRORS = (DataError, SegmentationError, ShapeError, SignalError, MetricUndefined)
_NUMERIC_ERRORS = (OptimError, ObjectiveError, TapeError)


# Spec'd operation names; thin wrappers so library users get the same
# entry points the subcommands use.
def cmd_pipeline(cfg: RunConfig, resume: bool = True) -> ExperimentReport:
    return run_pipeline(cfg, resume=resume)


def cmd_compare_si(cfg: RunConfig, trials: int | None = None, resume: bool = True) -> dict:
    return run_compare_si(cfg, trials=trials, resume=resume)


def cmd_generalize(cfg: RunConfig, resume: bool = True) -> dict:
    return run_generalize(cfg, resume=resume)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config document to merge over the preset")
    sub.add_argument("--preset", default="desk", help="starting config document (desk or full)")
    sub.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="PATH=VALUE",
        help="override one dotted config path, e.g. channel.noise_sigma=10",
    )
    sub.add_argument("--outdir", help="shorthand for --set outdir=...")
    sub.add_argument(
        "--no-resume",
        action="store_true",
        help="recompute every stage even when matching artifacts exist",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eqsi", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)

    for name, text in (
        ("gen-data", "synthesize the channel pair, segment, and label"),
        ("train-ae", "train the latent scorer on the labeled dataset"),
        ("anchor", "pick the anchor latent among the valid segments"),
        ("train-a2c", "train the actor-critic against the latent score"),
        ("optimize", "infer equalizer settings for the held-out segments"),
        ("evaluate", "score eye-window improvement on the held-out segments"),
        ("pipeline", "run every stage end to end"),
        ("generalize", "cross-unit train/test protocol over both equalizer kinds"),
        ("export-latents", "write every segment's latent coordinates to CSV"),
    ):
        _add_common(subs.add_parser(name, help=text))

    compare = subs.add_parser("compare-si", help="latent vs eye objective under repeated swarm runs")
    _add_common(compare)
    compare.add_argument("--trials", type=int, help="override compare.trials")

    baseline = subs.add_parser("baseline", help="run one reference optimizer")
    _add_common(baseline)
    baseline.add_argument("method", choices=BASELINE_METHODS)
    baseline.add_argument("--objective", choices=OBJECTIVES, default="latent")
    baseline.add_argument("--budget", type=int, help="method-specific budget override")

    export_eye = subs.add_parser("export-eye", help="write one segment's eye grid as CSV and SVG")
    _add_common(export_eye)
    export_eye.add_argument("--segment", type=int, default=0, help="segment index to fold")
    export_eye.add_argument(
        "--svg-timestamp",
        action="store_true",
        help="embed the render time in the SVG (off keeps artifacts reproducible)",
    )
    return parser


def _load(args) -> RunConfig:
    overrides = list(args.overrides)
    if args.outdir:
        overrides.append(f"outdir={args.outdir}")
    return load_config(args.config, preset_name=args.preset, overrides=overrides)


def _imp(value) -> str:
    return "undefined" if value is None else f"{value:.2f}%"


def _dispatch(args) -> int:
    cfg = _load(args)
    resume = not args.no_resume
    if args.command == "gen-data":
        ds = stage_data(cfg, resume)
        valid = int(np.sum(ds.labels == 1))
        print(f"{len(ds)} segments ({valid} valid, {len(ds) - valid} invalid) -> {cfg.outdir}")
        return 0
    if args.command == "train-ae":
        ds = stage_data(cfg, resume)
        bundle = stage_ae(cfg, ds, resume)
        print(f"autoencoder trained, final loss {bundle.loss_trace[-1]:.4f} -> {cfg.outdir}/ae.json")
        return 0
    if args.command == "anchor":
        ds = stage_data(cfg, resume)
        bundle = stage_ae(cfg, ds, resume)
        anchor = stage_anchor(cfg, bundle, ds, resume)
        print(f"anchor at valid-latent index {anchor.source_index} -> {cfg.outdir}/anchor.json")
        return 0
    if args.command == "train-a2c":
        ds = stage_data(cfg, resume)
        bundle = stage_ae(cfg, ds, resume)
        anchor = stage_anchor(cfg, bundle, ds, resume)
        _, train_idx = split_indices(cfg, len(ds))
        _, counters = stage_a2c(cfg, bundle, anchor, ds, train_idx, resume)
        print(f"actor-critic trained: {counters['updates']} updates, {counters['env_steps']} env steps")
        return 0
    if args.command == "optimize":
        ds = stage_data(cfg, resume)
        bundle = stage_ae(cfg, ds, resume)
        anchor = stage_anchor(cfg, bundle, ds, resume)
        test_idx, train_idx = split_indices(cfg, len(ds))
        agent, _ = stage_a2c(cfg, bundle, anchor, ds, train_idx, resume)
        actions = stage_optimize(cfg, agent, bundle, ds, test_idx)
        print(f"{actions.shape[0]} held-out actions -> {cfg.outdir}/actions.csv")
        return 0
    if args.command in ("evaluate", "pipeline"):
        report = cmd_pipeline(cfg, resume=resume)
        print(
            f"mean improvement {_imp(report.mean_improvement)} over {report.n_defined} "
            f"segments (positive on {_imp(None if report.positive_fraction is None else 100 * report.positive_fraction)})"
        )
        return 0
    if args.command == "compare-si":
        report = cmd_compare_si(cfg, trials=args.trials, resume=resume)
        for name in ("latent", "eye"):
            sec = report[name]
            std = sec["std_improvement"]
            std_text = "undefined" if std is None else f"{std:.3f}"
            print(f"{name}: mean {_imp(sec['mean_improvement'])} std {std_text}")
        return 0
    if args.command == "generalize":
        report = cmd_generalize(cfg, resume=resume)
        for kind, cell in report["cells"].items():
            print(f"{kind}: train {_imp(cell['train'])} heldout {_imp(cell['heldout'])}")
        return 0
    if args.command == "baseline":
        result = run_baseline(cfg, args.method, objective=args.objective, budget=args.budget, resume=resume)
        print(
            f"{args.method} best score {result['score']:.4f} after {result['evaluations']} evaluations, "
            f"held-out improvement {_imp(result['mean_improvement'])}"
        )
        return 0
    if args.command == "export-eye":
        ds = stage_data(cfg, resume)
        if not 0 <= args.segment < len(ds):
            raise DataError(f"segment index {args.segment} outside dataset of {len(ds)}")
        seg = ds.segments[args.segment]
        eye = fold_eye(seg, swing=cfg.channel.swing)
        window = largest_window(eye)
        note = datetime.now(timezone.utc).isoformat() if args.svg_timestamp else None
        base = f"{cfg.outdir}/eye_{args.segment}"
        eye_to_csv(base + ".csv", eye)
        eye_to_svg(base + ".svg", eye, window=window, mask=ds.mask, note=note)
        print(f"window area {window.area:.0f} mV*ps -> {base}.csv, {base}.svg")
        return 0
    if args.command == "export-latents":
        ds = stage_data(cfg, resume)
        bundle = stage_ae(cfg, ds, resume)
        z = encode_matrix(bundle, ds.matrix)
        origins = [s.origin for s in ds.segments]
        latents_to_csv(f"{cfg.outdir}/latents.csv", origins, ds.labels, z)
        print(f"{z.shape[0]} latents of dimension {z.shape[1]} -> {cfg.outdir}/latents.csv")
        return 0
    raise ConfigError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except _NUMERIC_ERRORS as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except EqsiError as exc:  # anything not classified above
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

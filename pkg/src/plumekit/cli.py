"""Command-line entry point.

One binary, four subcommands:

  synth    generate a synthetic scene (cube + truth mask + signature CSV)
  detect   fit a background mixture and write per-frame detection score maps
  anomaly  fit the multiscale density model on clean frames, flag anomalies
  roc      turn a score map + truth mask into ROC CSV/JSON

Every run writes exactly one ``manifest.json`` into its output directory:
subcommand, resolved config, seed, inputs, outputs, per-stage timings, and
the toolkit version. Feeding a manifest's ``config`` block back through
``--config`` reproduces the data outputs bitwise (the manifest itself holds
wall-clock timings, so it is the one file that may differ).

Flags beat config-file values; config-file values beat built-in defaults.
The PLUMEKIT_SEED environment variable overrides the built-in default seed
(an explicit --seed still wins). Usage errors exit 2 with argparse's
diagnostics; runtime failures exit 1 with a single line on stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .cube_io import (
    HyperCube,
    read_cube,
    read_mask,
    read_score_map,
    read_signatures,
    write_cube,
    write_mask,
    write_score_map,
    write_signatures,
)
from .detectors import DetectorKind
from .enhance import EnhanceConfig
from .evaluation import roc, write_roc_csv
from .gmra import (
    AnomalyConfig,
    build_gmra,
    detect_anomalies,
    fit_density,
    save_density_model,
)
from .pipeline import PipelineConfig, run_pipeline
from .synthgen import (
    gen_gaussian_scene,
    gen_poisson_scene,
    gen_subspace_scene,
    gen_two_plume_scene,
)

_EXPERIMENTS = {
    "gauss": gen_gaussian_scene,
    "subspace": gen_subspace_scene,
    "poisson": gen_poisson_scene,
    "twoplume": gen_two_plume_scene,
}


def _default_seed() -> int:
    raw = os.environ.get("PLUMEKIT_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"plumekit: PLUMEKIT_SEED must be an integer, got {raw!r}")


def _cube_stem(path: str) -> str:
    base = os.path.basename(path)
    for suffix in (".hdr.json", ".f32"):
        if base.endswith(suffix):
            return base[: -len(suffix)]
    return base


def _write_manifest(outdir, subcommand, config, inputs, outputs, timings, seed):
    manifest = {
        "tool": "plumekit",
        "version": __version__,
        "subcommand": subcommand,
        "config": config,
        "seed": seed,
        "inputs": sorted(inputs),
        "outputs": sorted(outputs),
        "timings": {k: round(v, 6) for k, v in timings.items()},
    }
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def _score_outputs(outdir, stem, scores):
    write_score_map(scores, os.path.join(outdir, stem + ".score.json"))
    return [stem + ".score.json", stem + ".score.f32"]


def cmd_synth(args, parser) -> int:
    outdir = args.outdir
    os.makedirs(outdir, exist_ok=True)
    name = args.name or args.experiment
    t0 = time.perf_counter()
    scene = _EXPERIMENTS[args.experiment](seed=args.seed)
    t1 = time.perf_counter()
    write_cube(scene.cube, os.path.join(outdir, name + ".hdr.json"))
    write_mask(scene.mask, os.path.join(outdir, name + ".mask.json"))
    write_signatures(scene.signatures, os.path.join(outdir, name + ".signatures.csv"))
    t2 = time.perf_counter()
    outputs = [name + s for s in (".hdr.json", ".f32", ".mask.json", ".u8", ".signatures.csv")]
    config = {"experiment": args.experiment, "seed": args.seed, "outdir": outdir,
              "name": args.name}
    _write_manifest(outdir, "synth", config, [], outputs,
                    {"generate": t1 - t0, "write": t2 - t1}, args.seed)
    return 0


def cmd_detect(args, parser) -> int:
    if not args.cubes:
        parser.error("at least one input cube is required")
    if args.signatures is None:
        parser.error("--signatures is required")
    try:
        enhance = EnhanceConfig(
            outlier_fraction=args.outlier_frac,
            tau1=args.tau1, tau2=args.tau2, tau3=args.tau3,
            resample_rounds=args.resample_rounds,
            plsr_components=args.plsr_components,
        )
        cfg = PipelineConfig(
            scenario=args.scenario,
            clean_frames=args.clean_frames,
            train_frame_indices=tuple(args.train_frames) if args.train_frames else None,
            detector=DetectorKind(args.detector),
            model=args.model,
            k=args.k, d=args.d, seed=args.seed, max_iter=args.max_iter,
            delta_rule=args.delta_percentile,
            sign=1 if args.sign == "+" else -1,
            enhance=enhance,
            threads=args.threads,
        )
    except ValueError as exc:
        parser.error(str(exc))
    t0 = time.perf_counter()
    frames = [read_cube(path) for path in args.cubes]
    sigs = read_signatures(args.signatures)
    t1 = time.perf_counter()
    score_maps = run_pipeline(frames, sigs, cfg)
    t2 = time.perf_counter()

    outdir = args.outdir
    os.makedirs(outdir, exist_ok=True)
    stems = [_cube_stem(path) for path in args.cubes[: len(score_maps)]]
    if len(set(stems)) != len(stems):
        raise ValueError("input cube basenames collide; rename inputs or split runs")
    outputs = []
    for stem, scores in zip(stems, score_maps):
        outputs += _score_outputs(outdir, stem, scores)
    t3 = time.perf_counter()
    config = {
        "cubes": list(args.cubes), "signatures": args.signatures, "outdir": outdir,
        "detector": args.detector, "model": args.model, "k": args.k, "d": args.d,
        "scenario": args.scenario, "clean_frames": args.clean_frames,
        "train_frames": list(args.train_frames) if args.train_frames else None,
        "tau1": args.tau1, "tau2": args.tau2, "tau3": args.tau3,
        "resample_rounds": args.resample_rounds, "plsr_components": args.plsr_components,
        "outlier_frac": args.outlier_frac, "sign": args.sign, "seed": args.seed,
        "max_iter": args.max_iter, "delta_percentile": args.delta_percentile,
        "threads": args.threads,
    }
    _write_manifest(outdir, "detect", config, list(args.cubes) + [args.signatures],
                    outputs, {"read": t1 - t0, "score": t2 - t1, "write": t3 - t2},
                    args.seed)
    return 0


def cmd_anomaly(args, parser) -> int:
    if not args.train:
        parser.error("at least one --train frame is required")
    if not args.test:
        parser.error("at least one --test frame is required")
    try:
        acfg = AnomalyConfig(
            eta=args.eta, loglik_cutoff=args.loglik_cutoff, radius=args.radius,
            mc_samples=args.mc_samples, prob_threshold=args.prob_threshold,
            seed=args.seed,
        )
    except ValueError as exc:
        parser.error(str(exc))
    t0 = time.perf_counter()
    train_frames = [read_cube(path) for path in args.train]
    test_frames = [read_cube(path) for path in args.test]
    wn = train_frames[0].wavenumbers
    for frame in train_frames[1:] + test_frames:
        if frame.p != train_frames[0].p or not np.allclose(frame.wavenumbers, wn):
            raise ValueError("train/test frames disagree on spectral bands")
    t1 = time.perf_counter()
    train = np.vstack([fr.spectra() for fr in train_frames])
    tree = build_gmra(train, min_leaf=args.min_leaf, dim_rule=args.dim_rule,
                      d_max=args.max_dim, seed=args.seed)
    model = fit_density(tree, train, seed=args.seed)
    t2 = time.perf_counter()

    outdir = args.outdir
    os.makedirs(outdir, exist_ok=True)
    stems = [_cube_stem(path) for path in args.test]
    if len(set(stems)) != len(stems):
        raise ValueError("test cube basenames collide; rename inputs or split runs")
    outputs = []
    for stem, frame in zip(stems, test_frames):
        scores, mask = detect_anomalies(frame, model, acfg)
        outputs += _score_outputs(outdir, stem, scores)
        write_mask(mask, os.path.join(outdir, stem + ".mask.json"))
        outputs += [stem + ".mask.json", stem + ".u8"]
    t3 = time.perf_counter()
    if args.model_out is not None:
        save_density_model(model, args.model_out)
    config = {
        "train": list(args.train), "test": list(args.test), "outdir": outdir,
        "min_leaf": args.min_leaf, "dim_rule": args.dim_rule, "max_dim": args.max_dim,
        "eta": args.eta, "loglik_cutoff": args.loglik_cutoff, "radius": args.radius,
        "mc_samples": args.mc_samples, "prob_threshold": args.prob_threshold,
        "seed": args.seed, "model_out": args.model_out,
    }
    _write_manifest(outdir, "anomaly", config, list(args.train) + list(args.test),
                    outputs, {"read": t1 - t0, "fit": t2 - t1, "score": t3 - t2},
                    args.seed)
    return 0


def cmd_roc(args, parser) -> int:
    if not args.scores:
        parser.error("--scores is required")
    if not args.mask:
        parser.error("--mask is required")
    t0 = time.perf_counter()
    scores = read_score_map(args.scores)
    mask = read_mask(args.mask)
    t1 = time.perf_counter()
    curve = roc(scores, mask)
    t2 = time.perf_counter()
    outdir = args.outdir
    os.makedirs(outdir, exist_ok=True)
    write_roc_csv(curve, os.path.join(outdir, "roc.csv"))
    with open(os.path.join(outdir, "roc.json"), "w", encoding="utf-8") as fh:
        # thresholds[0] is the +inf sentinel; Python's json emits/reads Infinity
        json.dump({
            "auc": curve.auc,
            "thresholds": curve.thresholds.tolist(),
            "fpr": curve.fpr.tolist(),
            "tpr": curve.tpr.tolist(),
        }, fh, sort_keys=True)
        fh.write("\n")
    t3 = time.perf_counter()
    config = {"scores": args.scores, "mask": args.mask, "outdir": outdir}
    _write_manifest(outdir, "roc", config, [args.scores, args.mask],
                    ["roc.csv", "roc.json"],
                    {"read": t1 - t0, "compute": t2 - t1, "write": t3 - t2}, None)
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="plumekit",
        description="Hyperspectral plume detection: synthesis, detection, anomaly "
                    "scoring, and ROC evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"plumekit {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    seed_default = _default_seed()
    subparsers = {}

    def add(name, help_text):
        sp = subs.add_parser(name, help=help_text)
        sp.add_argument("--config", metavar="FILE",
                        help="JSON file of defaults (flags still win)")
        sp.add_argument("-o", "--out", dest="outdir", default=".",
                        help="output directory (default: current)")
        subparsers[name] = sp
        return sp

    sp = add("synth", "generate a synthetic scene")
    sp.add_argument("experiment", choices=sorted(_EXPERIMENTS),
                    help="scene family to generate")
    sp.add_argument("--seed", type=int, default=seed_default)
    sp.add_argument("--name", default=None, help="output basename (default: experiment)")
    sp.set_defaults(run=cmd_synth)

    sp = add("detect", "score frames against gas signatures")
    sp.add_argument("cubes", nargs="*", help="input cube paths (.hdr.json or stem)")
    sp.add_argument("--signatures", default=None, help="signature CSV path")
    sp.add_argument("--detector", choices=["nmf", "nss", "lc"], default="nmf")
    sp.add_argument("--model", choices=["gaussian", "subspace"], default="gaussian")
    sp.add_argument("-K", dest="k", type=int, default=3, help="mixture size (default 3)")
    sp.add_argument("-d", dest="d", type=int, default=2,
                    help="subspace dimension (default 2)")
    sp.add_argument("--scenario", type=int, choices=[1, 2], default=1)
    sp.add_argument("--clean-frames", type=int, default=2,
                    help="scenario 2: leading clean frames to train on")
    sp.add_argument("--train-frames", type=int, nargs="*", default=None,
                    help="scenario 2: explicit training frame indices")
    sp.add_argument("--tau1", type=float, default=0.2)
    sp.add_argument("--tau2", type=float, default=0.15)
    sp.add_argument("--tau3", type=float, default=0.15)
    sp.add_argument("--resample-rounds", type=int, default=0)
    sp.add_argument("--plsr-components", type=int, default=None)
    sp.add_argument("--outlier-frac", type=float, default=0.01)
    sp.add_argument("--sign", choices=["+", "-"], default="+",
                    help="abundance sign the linear detector rectifies toward")
    sp.add_argument("--seed", type=int, default=seed_default)
    sp.add_argument("--max-iter", type=int, default=100)
    sp.add_argument("--delta-percentile", type=float, default=50.0,
                    help="eigenvalue percentile for the covariance offset")
    sp.add_argument("--threads", type=int, default=1)
    sp.set_defaults(run=cmd_detect)

    sp = add("anomaly", "density-based anomaly detection on frame sequences")
    sp.add_argument("--train", nargs="*", default=[], help="clean training frames")
    sp.add_argument("--test", nargs="*", default=[], help="frames to score")
    sp.add_argument("--min-leaf", type=int, default=40)
    sp.add_argument("--dim-rule", type=float, default=0.95,
                    help="explained-variance fraction for node dimensions")
    sp.add_argument("--max-dim", type=int, default=10)
    sp.add_argument("--eta", type=float, default=None,
                    help="training-score quantile used as the cutoff")
    sp.add_argument("--loglik-cutoff", type=float, default=None)
    sp.add_argument("--radius", type=float, default=None,
                    help="ball rule: flag pixels whose radius-ball mass is tiny")
    sp.add_argument("--mc-samples", type=int, default=1000)
    sp.add_argument("--prob-threshold", type=float, default=None,
                    help="ball rule cutoff (default 1/mc_samples)")
    sp.add_argument("--seed", type=int, default=seed_default)
    sp.add_argument("--model-out", default=None,
                    help="also save the fitted density model at this stem")
    sp.set_defaults(run=cmd_anomaly)

    sp = add("roc", "ROC curve and AUC from a score map and a truth mask")
    # checked in cmd_roc so a --config file can supply either path
    sp.add_argument("--scores", default=None, help="score map path (.score.json)")
    sp.add_argument("--mask", default=None, help="truth mask path (.mask.json)")
    sp.set_defaults(run=cmd_roc)

    return parser, subparsers


def _apply_config_file(argv, parser, subparsers):
    """Load --config JSON as subparser defaults; explicit flags still win."""
    if "--config" not in argv:
        return
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        parser.error("--config needs a file argument")
    if not argv or argv[0] not in subparsers:
        parser.error("--config must follow a subcommand")
    sub = subparsers[argv[0]]
    try:
        with open(argv[idx + 1], "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        parser.error(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        parser.error(f"bad config file: {exc}")
    if not isinstance(cfg, dict):
        parser.error("config file must hold a JSON object")
    valid = {a.dest for a in sub._actions}
    unknown = sorted(set(cfg) - valid)
    if unknown:
        parser.error(f"unknown config keys: {', '.join(unknown)}")
    sub.set_defaults(**cfg)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = _build_parser()
    _apply_config_file(argv, parser, subparsers)
    args = parser.parse_args(argv)
    sub = subparsers[args.subcommand]
    try:
        return args.run(args, sub)
    except (ValueError, OSError) as exc:
        print(f"plumekit: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

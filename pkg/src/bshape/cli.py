"""Command-line front-end.

Subcommands: gen-targets (target masks from an annotation file), reconstruct
(filled instance masks from predicted boundary masks), evaluate (AP report),
and loss-check (finite-difference verification of the loss gradients).

Options may also come from a JSON config file (--config) whose keys mirror
the flag names; explicit flags win over the config file, which wins over the
built-in defaults. Exit codes: 0 success, 1 usage error, 2 data error. The
BSHAPE_THREADS environment variable caps worker threads (0 means auto).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .annotations import parse_dataset
from .errors import BshapeError, DomainError
from .evaluation import evaluate, load_detections
from .losses import finite_diff_check
from .maskgen import DEFAULT_SCORE_STEP, MaskSpec, PROFILE_K, generate_target
from .maskio import MASK_FORMATS, _atomic_write_bytes, read_mask, write_mask
from .reconstruct import ReconstructionParams, reconstruct_instance


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags; this tool reserves 2 for data
    # errors, so route usage problems through our own exception instead.
    def error(self, message):
        raise _UsageError(message)


GEN_TARGET_DEFAULTS = {
    "kind": "bshape",
    "variant": "scored",
    "s": DEFAULT_SCORE_STEP,
    "format": "bsmk",
    "profile": "coco",
    "k": None,  # falls back to the profile's half-width
}

RECONSTRUCT_DEFAULTS = {
    "threshold": 0.5,
    "max_bridge": 32.0,
    "format": "bsmk",
}

LOSS_CHECK_DEFAULTS = {
    "seeds": 100,
    "seed": 0,
    "size": 8,
    "step": 1e-5,
}


def max_workers() -> int:
    """Worker-thread cap from BSHAPE_THREADS; 0, unset, or junk means auto."""
    raw = os.environ.get("BSHAPE_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n


def _parallel_map(fn, items):
    items = list(items)
    workers = min(max_workers(), len(items)) or 1
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as err:
        raise BshapeError(f"cannot read config file {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise BshapeError(f"malformed config file {path}: {err.msg}") from err
    if not isinstance(raw, dict):
        raise BshapeError(f"config file {path} must hold a JSON object")
    return {str(key).replace("-", "_"): value for key, value in raw.items()}


def resolve_options(args, defaults: dict) -> dict:
    """Merge explicit flags, the config file, and built-in defaults.

    Flags were parsed with a None default, so None means "not given".
    Unknown config keys are a usage error.
    """
    config = _load_config(args.config) if getattr(args, "config", None) else {}
    unknown = set(config) - set(defaults)
    if unknown:
        raise _UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    resolved = {}
    for key, fallback in defaults.items():
        explicit = getattr(args, key, None)
        if explicit is not None:
            resolved[key] = explicit
        elif key in config:
            resolved[key] = config[key]
        else:
            resolved[key] = fallback
    return resolved


def _build_parser() -> _Parser:
    parser = _Parser(prog="bshape", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-targets", help="generate target masks")
    gen.add_argument("--annotations", required=True, help="annotation file (JSON)")
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument("--kind", choices=("bshape", "bbox"))
    gen.add_argument("--variant", choices=("thick", "scored"))
    gen.add_argument("--k", type=int, help="dilation half-width (default: profile value)")
    gen.add_argument("--s", type=float, help="score decrement per pixel of distance")
    gen.add_argument("--profile", choices=tuple(PROFILE_K), help="dataset profile for k")
    gen.add_argument("--format", choices=MASK_FORMATS, dest="format")
    gen.add_argument("--config", help="JSON config file mirroring the flags")
    gen.set_defaults(func=_cmd_gen_targets)

    rec = sub.add_parser("reconstruct", help="fill instance masks from boundary masks")
    rec.add_argument("--masks", required=True, help="directory of predicted boundary masks")
    rec.add_argument("--out", required=True, help="output directory")
    rec.add_argument("--threshold", type=float, help="binarization threshold")
    rec.add_argument("--max-bridge", type=float, dest="max_bridge",
                     help="longest gap to bridge, in pixels")
    rec.add_argument("--format", choices=MASK_FORMATS, dest="format")
    rec.add_argument("--config", help="JSON config file mirroring the flags")
    rec.set_defaults(func=_cmd_reconstruct)

    ev = sub.add_parser("evaluate", help="COCO-style AP report")
    ev.add_argument("--gt", required=True, help="ground-truth annotation file")
    ev.add_argument("--dets", required=True, help="detections file (JSON array)")
    ev.add_argument("--iou-type", choices=("bbox", "mask"), default="bbox", dest="iou_type")
    ev.add_argument("--report", help="also write the report to this path")
    ev.set_defaults(func=_cmd_evaluate)

    check = sub.add_parser("loss-check", help="finite-difference gradient verification")
    check.add_argument("--seeds", type=int, help="number of seeded instances per loss")
    check.add_argument("--seed", type=int, help="base seed")
    check.add_argument("--size", type=int, help="mask side length")
    check.add_argument("--step", type=float, help="central-difference step")
    check.add_argument("--config", help="JSON config file mirroring the flags")
    check.set_defaults(func=_cmd_loss_check)

    return parser


def _require_paths(*paths) -> None:
    for path in paths:
        if not Path(path).exists():
            raise BshapeError(f"path does not exist: {path}")


def gen_targets_spec(options: dict) -> MaskSpec:
    k = options["k"]
    if k is None:
        k = PROFILE_K[options["profile"]]
    try:
        return MaskSpec(kind=options["kind"], variant=options["variant"], k=k, s=options["s"])
    except DomainError as err:
        raise _UsageError(str(err)) from err


def _cmd_gen_targets(args) -> int:
    options = resolve_options(args, GEN_TARGET_DEFAULTS)
    spec = gen_targets_spec(options)
    _require_paths(args.annotations)
    dataset = parse_dataset(Path(args.annotations).read_text())
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    images = {im.id: im for im in dataset.images}
    fmt = options["format"]

    def one(ann):
        target = generate_target(ann, images[ann.image_id], spec)
        name = f"{ann.image_id}_{ann.id}.{fmt}"
        write_mask(out_dir / name, target, fmt)
        return name

    work = sorted(dataset.annotations, key=lambda a: (a.image_id, a.id))
    names = _parallel_map(one, work)
    print(f"wrote {len(names)} target masks to {out_dir}")
    return 0


def reconstruction_params(options: dict) -> ReconstructionParams:
    try:
        return ReconstructionParams(
            binarize_threshold=options["threshold"],
            max_bridge_distance=options["max_bridge"],
        )
    except DomainError as err:
        raise _UsageError(str(err)) from err


def _cmd_reconstruct(args) -> int:
    options = resolve_options(args, RECONSTRUCT_DEFAULTS)
    params = reconstruction_params(options)
    _require_paths(args.masks)
    in_dir = Path(args.masks)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    fmt = options["format"]
    files = sorted(
        p for p in in_dir.iterdir() if p.suffix.lower() in (".bsmk", ".png") and p.is_file()
    )
    if not files:
        raise BshapeError(f"no mask files found in {in_dir}")

    def one(path):
        filled = reconstruct_instance(read_mask(path), params)
        name = f"{path.stem}.{fmt}"
        write_mask(out_dir / name, filled.astype(np.float32), fmt)
        return name

    names = _parallel_map(one, files)
    print(f"wrote {len(names)} reconstructed masks to {out_dir}")
    return 0


def _cmd_evaluate(args) -> int:
    _require_paths(args.gt, args.dets)
    dataset = parse_dataset(Path(args.gt).read_text())
    detections = load_detections(Path(args.dets).read_text(), args.iou_type)
    result = evaluate(detections, dataset, args.iou_type)
    categories = {c.id: c.name for c in dataset.categories}
    report = {"iou_type": args.iou_type}
    report.update(result.to_dict())
    report["per_category"] = {
        str(cat): {"name": categories[cat], "ap": ap}
        for cat, ap in sorted(result.per_category.items())
    }
    text = json.dumps(report, indent=2)
    print(text)
    if args.report:
        _atomic_write_bytes(args.report, (text + "\n").encode("utf-8"))
    return 0


def loss_check_report(options: dict) -> dict:
    seeds = options["seeds"]
    size = options["size"]
    step = options["step"]
    if seeds < 1 or size < 1 or step <= 0:
        raise _UsageError("loss-check needs seeds >= 1, size >= 1, and a positive step")
    report = {"size": size, "step": step, "base_seed": options["seed"]}
    for kind in ("smask", "tmask"):
        per_seed = []
        for i in range(seeds):
            rng = np.random.default_rng(options["seed"] + i)
            if kind == "smask":
                # Keep residuals away from zero so relative errors stay
                # meaningful against double-precision cancellation.
                target = rng.uniform(0.55, 0.95, size=(size, size))
                pred = rng.uniform(0.05, 0.45, size=(size, size))
            else:
                target = rng.integers(0, 2, size=(size, size)).astype(np.float64)
                pred = rng.uniform(0.1, 0.9, size=(size, size))
            per_seed.append(finite_diff_check(kind, target, pred, step=step))
        report[kind] = {"per_seed": per_seed, "max_rel_error": max(per_seed)}
    return report


def _cmd_loss_check(args) -> int:
    options = resolve_options(args, LOSS_CHECK_DEFAULTS)
    print(json.dumps(loss_check_report(options), indent=2))
    return 0


def run_cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as err:
        print(f"bshape: usage error: {err}", file=sys.stderr)
        return 1
    except SystemExit as err:  # argparse --help
        return int(err.code or 0)
    except (BshapeError, OSError) as err:
        print(f"bshape: error: {err}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()

"""Command-line entry point wiring all modules together.

Every run logs the package version, the effective seed and a digest of the
resolved options, which is enough to replay it. Exit codes: 0 success,
1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .augment import AugKind, apply_record, draw_record
from .binning import bin_of, scheme_from_name
from .corrupt import (
    ALGORITHM_COMPOSITE,
    ALGORITHM_LINES,
    CorruptConfig,
    CorruptionRecord,
    corrupt_random,
    draw_line_events,
    draw_motions,
    apply_composite,
    apply_line_replacement,
    severity_bands,
)
from .dataset import Manifest, PipelineConfig, generate_dataset, image_digest, replay_row
from .evalmetrics import (
    agreement_rate,
    classification_report,
    emit_classification_report,
    emit_regression_report,
    format_report_table,
    join_predictions,
    read_prediction_csv,
    read_subjective_csv,
)
from .imagecore import normalize
from .phantom import make_phantom
from .rng import make_rng
from .ssim import ssim_mean
from .volio import find_volumes, load_slice_png, load_volume, save_slice_png, write_nifti, write_raw_volume

log = logging.getLogger("motionqa")


class CliParser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on bad usage."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def build_parser() -> CliParser:
    parser = CliParser(prog="motionqa", description=__doc__)
    parser.add_argument("--version", action="version", version=f"motionqa {__version__}")
    parser.add_argument("--config", help="key=value defaults file, overridden by flags")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    p = sub.add_parser("phantom", help="emit synthetic layered-ellipsoid test volumes")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--dims", type=int, nargs=3, default=None)
    p.add_argument("--spacing", type=float, nargs=3, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--format", choices=("nifti", "raw"), default=None)

    p = sub.add_parser("gen", help="generate a labelled, replayable dataset")
    p.add_argument("--volumes", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--no-corrupt", action="store_true", help="debug: labels become 1.0")
    p.add_argument("--classes", choices=("3", "5", "10", "clinical"), default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--severity-cap", type=int, default=None)
    p.add_argument("--audit", action="store_true", help="persist float64 clean/corrupted pairs")
    p.add_argument("--resume", action="store_true")

    p = sub.add_parser("corrupt", help="motion-corrupt one slice image")
    p.add_argument("image")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--severity", type=int, default=None,
                   help="exact severity for a forced algorithm; cap for random")
    p.add_argument("--algorithm", choices=("random", ALGORITHM_COMPOSITE, ALGORITHM_LINES), default=None)

    p = sub.add_parser("augment", help="contrast-augment one slice image")
    p.add_argument("image")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--kind", choices=tuple(k.value for k in AugKind if k is not AugKind.NONE), default=None)

    p = sub.add_parser("ssim", help="mean SSIM between two images")
    p.add_argument("image_a")
    p.add_argument("image_b")
    p.add_argument("--map", dest="map_out", default=None, help="write the local-SSIM map as 16-bit PNG")

    p = sub.add_parser("bin", help="class label of SSIM value(s)")
    p.add_argument("values", type=float, nargs="+")
    p.add_argument("--classes", choices=("3", "5", "10", "clinical"), required=True)

    p = sub.add_parser("replay", help="re-emit a manifest row's corrupted slice")
    p.add_argument("--manifest", required=True)
    p.add_argument("--volumes", required=True)
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--out", default=None, help="where to write the replayed PNG")
    p.add_argument("--check", action="store_true", help="verify against the stored image and label")

    p = sub.add_parser("eval-regression", help="residual stats and linear fit of predictions")
    p.add_argument("--pred", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", action="store_true")

    p = sub.add_parser("eval-classification", help="confusion matrix and per-class report")
    p.add_argument("--pred", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--classes", choices=("3", "5", "10", "clinical"), default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("agreement", help="clinical agreement rate against expert classes")
    p.add_argument("--pred", required=True)
    p.add_argument("--subjective", required=True)
    p.add_argument("--out", default=None)
    return parser


# fallbacks used when neither the flag nor the config file sets a value
_DEFAULTS = {
    "count": 3,
    "dims": [240, 240, 150],
    "spacing": [1.0, 1.0, 1.0],
    "format": "nifti",
    "workers": 1,
    "severity_cap": 5,
    "severity": None,
    "algorithm": "random",
    "classes": None,
    "kind": None,
}

_CONFIG_PARSERS = {
    "count": int,
    "seed": int,
    "workers": int,
    "severity_cap": int,
    "severity": int,
    "dims": lambda s: [int(x) for x in s.split()],
    "spacing": lambda s: [float(x) for x in s.split()],
}


def _read_config_file(path: str) -> dict:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected KEY=VALUE, got {line!r}")
        key, _, val = line.partition("=")
        values[key.strip().replace("-", "_")] = val.strip()
    return values


def _resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Layer per-option values: flag, then config file, then built-in."""
    config = _read_config_file(args.config) if args.config else {}
    for key, raw in config.items():
        if getattr(args, key, None) in (None, False) and hasattr(args, key):
            if isinstance(getattr(args, key), bool):
                setattr(args, key, raw.lower() in ("1", "true", "yes", "on"))
            else:
                setattr(args, key, _CONFIG_PARSERS.get(key, str)(raw))
    for key, fallback in _DEFAULTS.items():
        if getattr(args, key, None) is None and hasattr(args, key):
            setattr(args, key, fallback)
    if getattr(args, "seed", "absent") is None:
        args.seed = int.from_bytes(os.urandom(8), "little") >> 1
    return args


def _config_digest(args: argparse.Namespace) -> str:
    payload = {k: v for k, v in sorted(vars(args).items()) if k != "config"}
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()[:12]


def _load_volume_dir(directory: str):
    return [load_volume(p) for p in find_volumes(directory)]


def cmd_phantom(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        vol = make_phantom(dims=tuple(args.dims), spacing=tuple(args.spacing), seed=args.seed + i)
        if args.format == "nifti":
            write_nifti(vol, out / f"{vol.id}.nii.gz")
        else:
            write_raw_volume(vol, out / f"{vol.id}.json")
        log.info("wrote %s (%s)", vol.id, args.format)
    return 0


def cmd_gen(args) -> int:
    volumes = _load_volume_dir(args.volumes)
    config = PipelineConfig(
        augment_enabled=not args.no_augment,
        corrupt=CorruptConfig(enabled=not args.no_corrupt, max_severity=args.severity_cap),
        scheme=scheme_from_name(args.classes) if args.classes else None,
        store_audit_pair=args.audit,
    )
    manifest = generate_dataset(
        volumes, args.n, args.seed, args.out, config, workers=args.workers, resume=args.resume
    )
    log.info("generated %d samples into %s", len(manifest.rows), args.out)
    return 0


def cmd_corrupt(args) -> int:
    s = load_slice_png(args.image)
    rng = make_rng(args.seed)
    if args.algorithm == "random":
        cap = args.severity if args.severity else 5
        out, record = corrupt_random(s, rng, CorruptConfig(max_severity=cap), seed=args.seed)
    else:
        severity = args.severity if args.severity else 3
        max_rot, max_trans, n_motions, line_fraction = severity_bands(severity)
        if args.algorithm == ALGORITHM_COMPOSITE:
            motions = draw_motions(rng, n_motions, max_rot, max_trans)
            out = normalize(apply_composite(s.pixels, motions))
            record = CorruptionRecord(ALGORITHM_COMPOSITE, severity, tuple(motions), seed=args.seed)
        else:
            motions, ranges = draw_line_events(rng, s.height, n_motions, line_fraction, max_rot, max_trans)
            out = normalize(apply_line_replacement(s.pixels, motions, ranges))
            record = CorruptionRecord(ALGORITHM_LINES, severity, tuple(motions), tuple(ranges), seed=args.seed)
    save_slice_png(out, args.out)
    print(json.dumps(record.to_json_dict(), sort_keys=True))
    return 0


def cmd_augment(args) -> int:
    s = load_slice_png(args.image)
    rng = make_rng(args.seed)
    record = draw_record(rng, AugKind(args.kind) if args.kind else None, seed=args.seed)
    save_slice_png(apply_record(s, record), args.out)
    print(json.dumps(record.to_json_dict(), sort_keys=True))
    return 0


def cmd_ssim(args) -> int:
    a = load_slice_png(args.image_a)
    b = load_slice_png(args.image_b)
    result = ssim_mean(a, b, keep_map=bool(args.map_out))
    print(f"{result.mean:.6f}")
    if args.map_out:
        from .imagecore import Slice2D

        save_slice_png(Slice2D(np.clip(result.map, 0.0, 1.0)), args.map_out)
    return 0


def cmd_bin(args) -> int:
    scheme = scheme_from_name(args.classes)
    for v in args.values:
        print(bin_of(v, scheme))
    return 0


def cmd_replay(args) -> int:
    manifest = Manifest.load(args.manifest)
    rows = {int(r.id[1:]): r for r in manifest.rows}
    if args.index not in rows:
        raise ValueError(f"index {args.index} not in manifest (has {len(rows)} rows)")
    row = rows[args.index]
    volumes = {v.id: v for v in _load_volume_dir(args.volumes)}
    replayed = replay_row(volumes, row)
    out_path = Path(args.out) if args.out else Path(args.manifest).parent / f"replay_{row.id}.png"
    save_slice_png(replayed.corrupted, out_path)
    log.info("replayed %s -> %s (label %.6f)", row.id, out_path, replayed.row.ssim_label)
    if args.check:
        stored = Path(args.manifest).parent / row.image_path
        ok_img = image_digest(stored) == image_digest(out_path)
        ok_label = abs(replayed.row.ssim_label - row.ssim_label) <= 1e-9
        print(f"image: {'OK' if ok_img else 'MISMATCH'}  label: {'OK' if ok_label else 'MISMATCH'}")
        if not (ok_img and ok_label):
            return 1
    return 0


def _joined_records(args, need_subjective=False):
    preds = read_prediction_csv(args.pred)
    truths = Manifest.load(args.manifest).labels_by_id()
    subj = read_subjective_csv(args.subjective) if need_subjective else None
    return join_predictions(preds, truths, subj)


def cmd_eval_regression(args) -> int:
    payload = emit_regression_report(_joined_records(args), args.out, svg=args.svg)
    print(
        f"n={payload['n']}  residual mu={payload['residual_mu']:.6f} "
        f"sigma={payload['residual_sigma']:.6f}  fit slope={payload['fit_slope']:.4f} "
        f"intercept={payload['fit_intercept']:.4f}"
    )
    return 0


def cmd_eval_classification(args) -> int:
    scheme = scheme_from_name(args.classes if args.classes else "3")
    report = classification_report(_joined_records(args), scheme)
    emit_classification_report(report, args.out)
    print(format_report_table(report), end="")
    return 0


def cmd_agreement(args) -> int:
    preds = read_prediction_csv(args.pred)
    subj = read_subjective_csv(args.subjective)
    records = join_predictions(preds, subjective_by_id=subj)
    rate = agreement_rate(records)
    print(f"agreement: {rate:.1f}%")
    if args.out:
        Path(args.out).write_text(json.dumps({"agreement_percent": rate, "n": len(records)}) + "\n")
    return 0


_COMMANDS = {
    "phantom": cmd_phantom,
    "gen": cmd_gen,
    "corrupt": cmd_corrupt,
    "augment": cmd_augment,
    "ssim": cmd_ssim,
    "bin": cmd_bin,
    "replay": cmd_replay,
    "eval-regression": cmd_eval_regression,
    "eval-classification": cmd_eval_classification,
    "agreement": cmd_agreement,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _resolve(args)
        log.info(
            "motionqa %s  command=%s  seed=%s  config=%s",
            __version__, args.command, getattr(args, "seed", "-"), _config_digest(args)
        )
        return _COMMANDS[args.command](args)
    except ValueError as exc:
        log.error("error: %s", exc)
        return 1
    except OSError as exc:
        log.error("i/o error: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())

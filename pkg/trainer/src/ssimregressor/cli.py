"""Command line: `train` on a manifest, `predict` to the evaluator's CSV."""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .predict import predict
from .train import TrainConfig, train

log = logging.getLogger("ssimregressor")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssim-regressor", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ssim-regressor {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a regressor on a labelled manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="checkpoint + loss trace directory")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--depth", type=int, choices=(18, 101), default=18)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--device", default="auto")

    p = sub.add_parser("predict", help="predict SSIM for slice images")
    p.add_argument("--ckpt", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--images", help="directory of .png slices; ids are file stems")
    group.add_argument("--manifest", help="predict over a manifest's images")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--device", default="cpu")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            cfg = TrainConfig(
                depth=args.depth,
                lr=args.lr,
                batch=args.batch,
                epochs=args.epochs,
                seed=args.seed,
                val_fraction=args.val_fraction,
                device=args.device,
            )
            result = train(args.manifest, args.out, cfg)
            log.info("final train MSE %.3e -> %s", result.final_train_mse, result.checkpoint_path)
        else:
            written, skipped = predict(
                args.ckpt, args.out,
                images_dir=args.images, manifest_path=args.manifest,
                batch=args.batch, device=args.device,
            )
            log.info("wrote %d prediction(s) to %s (%d skipped)", written, args.out, skipped)
        return 0
    except (ValueError, RuntimeError) as exc:
        log.error("error: %s", exc)
        return 1
    except OSError as exc:
        log.error("i/o error: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())

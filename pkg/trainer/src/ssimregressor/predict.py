"""Batch prediction to the evaluator's CSV interface (`id,ssim_pred`)."""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import torch

from .data import load_image, read_manifest
from .train import load_checkpoint

log = logging.getLogger("ssimregressor")


def _predict_paths(model, paths: list[tuple[str, Path]], device, batch: int):
    preds: dict[str, float] = {}
    skipped: list[str] = []
    buf: list[tuple[str, torch.Tensor]] = []

    def flush():
        if not buf:
            return
        ids = [i for i, _ in buf]
        batch_tensor = torch.stack([t for _, t in buf]).to(device)
        with torch.no_grad():
            out = model(batch_tensor).cpu()
        for sid, value in zip(ids, out.tolist()):
            preds[sid] = float(value)
        buf.clear()

    for sid, path in paths:
        try:
            buf.append((sid, load_image(path)))
        except Exception as exc:  # noqa: BLE001 - unreadable image is a data problem
            skipped.append(sid)
            log.warning("skipping %s (%s)", path, exc)
            continue
        if len(buf) == batch:
            flush()
    flush()
    return preds, skipped


def predict(
    ckpt_path: str | Path,
    out_csv: str | Path,
    images_dir: str | Path | None = None,
    manifest_path: str | Path | None = None,
    batch: int = 16,
    device: str = "cpu",
) -> tuple[int, int]:
    """Write one `id,ssim_pred` row per readable image; returns (written, skipped).

    Image ids come from PNG file stems (`--images`) or manifest rows
    (`--manifest`); both match the ids the evaluator joins on.
    """
    if (images_dir is None) == (manifest_path is None):
        raise ValueError("exactly one of images_dir or manifest_path is required")
    model, _ = load_checkpoint(ckpt_path, device=device)

    if images_dir is not None:
        pngs = sorted(Path(images_dir).glob("*.png"))
        if not pngs:
            raise ValueError(f"no .png images under {images_dir}")
        targets = [(p.stem, p) for p in pngs]
    else:
        _, entries, _ = read_manifest(manifest_path)
        targets = [(e.id, e.image_path) for e in entries]

    preds, skipped = _predict_paths(model, targets, torch.device(device), batch)
    out_csv = Path(out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    with out_csv.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "ssim_pred"])
        for sid in sorted(preds):
            writer.writerow([sid, f"{preds[sid]:.6f}"])
    if skipped:
        log.warning("skipped %d unreadable image(s)", len(skipped))
    return len(preds), len(skipped)

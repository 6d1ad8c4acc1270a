"""Manifest and image loading.

The training data contract is the generator's external interface: a JSONL
manifest (header line, then one sample object per line with `id`,
`ssim_label` and a manifest-relative `image` path) and 16-bit grayscale
PNGs. Malformed rows are skipped and counted, not fatal.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torch.utils.data import Dataset

log = logging.getLogger("ssimregressor")

PNG_MAX = 65535.0


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    image_path: Path
    label: float


def load_image(path: Path) -> torch.Tensor:
    """16-bit grayscale PNG -> float32 tensor (1, H, W) in [0, 1]."""
    img = Image.open(path)
    arr = np.asarray(img, dtype=np.float32)
    scale = PNG_MAX if img.mode in ("I;16", "I") else 255.0
    return torch.from_numpy(arr / scale).clamp_(0.0, 1.0).unsqueeze(0)


def read_manifest(path: str | Path) -> tuple[dict, list[ManifestEntry], int]:
    """Parse a manifest; returns (header, entries, skipped_row_count)."""
    path = Path(path)
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty manifest")
    header = json.loads(lines[0])
    entries = []
    skipped = 0
    for lineno, line in enumerate(lines[1:], 2):
        try:
            row = json.loads(line)
            label = float(row["ssim_label"])
            if not 0.0 <= label <= 1.0:
                raise ValueError(f"label {label} outside [0, 1]")
            image_path = path.parent / str(row["image"])
            if not image_path.exists():
                raise FileNotFoundError(image_path)
            entries.append(ManifestEntry(str(row["id"]), image_path, label))
        except Exception as exc:  # noqa: BLE001 - any bad row is skipped alike
            skipped += 1
            log.warning("%s:%d: skipping row (%s)", path, lineno, exc)
    if not entries:
        raise ValueError(f"{path}: no usable rows")
    if skipped:
        log.warning("%s: skipped %d corrupt row(s)", path, skipped)
    return header, entries, skipped


class SliceDataset(Dataset):
    """Lazily decodes slices; items are (image, label, id)."""

    def __init__(self, entries: list[ManifestEntry]):
        self.entries = entries

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, idx: int):
        e = self.entries[idx]
        return load_image(e.image_path), torch.tensor(e.label, dtype=torch.float32), e.id


def split_entries(
    entries: list[ManifestEntry], val_fraction: float, seed: int
) -> tuple[list[ManifestEntry], list[ManifestEntry]]:
    """Deterministic train/validation split by seeded permutation."""
    if not 0.0 <= val_fraction < 1.0:
        raise ValueError(f"val fraction must be in [0, 1), got {val_fraction}")
    gen = torch.Generator().manual_seed(seed)
    order = torch.randperm(len(entries), generator=gen).tolist()
    n_val = int(round(len(entries) * val_fraction))
    val_idx = set(order[:n_val])
    train = [e for i, e in enumerate(entries) if i not in val_idx]
    val = [e for i, e in enumerate(entries) if i in val_idx]
    return train, val

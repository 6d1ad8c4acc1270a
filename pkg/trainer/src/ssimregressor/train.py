"""Training loop: Adam on mean squared error against the SSIM labels."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
from torch import nn
from torch.utils.data import DataLoader

from . import __version__
from .data import SliceDataset, read_manifest, split_entries
from .model import SsimRegressor

log = logging.getLogger("ssimregressor")

CHECKPOINT_NAME = "checkpoint.pt"
TRACE_NAME = "loss_trace.csv"


@dataclass
class TrainConfig:
    depth: int = 18
    lr: float = 1e-3
    batch: int = 100
    epochs: int = 30
    seed: int = 0
    val_fraction: float = 0.1
    device: str = "auto"

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ValueError(f"learning rate must be > 0, got {self.lr}")
        if self.batch < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")

    def resolve_device(self) -> torch.device:
        if self.device != "auto":
            return torch.device(self.device)
        return torch.device("cuda" if torch.cuda.is_available() else "cpu")


@dataclass
class TrainResult:
    checkpoint_path: Path
    trace: list[dict] = field(repr=False)

    @property
    def final_train_mse(self) -> float:
        return self.trace[-1]["train_mse"]


def _epoch_mse(model, loader, device) -> float:
    model.eval()
    total, n = 0.0, 0
    with torch.no_grad():
        for images, labels, _ in loader:
            pred = model(images.to(device))
            total += float(((pred - labels.to(device)) ** 2).sum())
            n += labels.numel()
    return total / n


def train(manifest_path: str | Path, out_dir: str | Path, cfg: TrainConfig = TrainConfig()) -> TrainResult:
    """Fit a regressor on a manifest and write checkpoint + loss trace."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(cfg.seed)
    device = cfg.resolve_device()

    header, entries, _ = read_manifest(manifest_path)
    train_entries, val_entries = split_entries(entries, cfg.val_fraction, cfg.seed)
    log.info("training on %d samples (val %d) for %d epochs, depth %d, device %s",
             len(train_entries), len(val_entries), cfg.epochs, cfg.depth, device.type)

    loader = DataLoader(
        SliceDataset(train_entries),
        batch_size=min(cfg.batch, len(train_entries)),
        shuffle=True,
        num_workers=0,
        generator=torch.Generator().manual_seed(cfg.seed),
    )
    val_loader = (
        DataLoader(SliceDataset(val_entries), batch_size=min(cfg.batch, len(val_entries)), num_workers=0)
        if val_entries
        else None
    )

    model = SsimRegressor(cfg.depth).to(device)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    loss_fn = nn.MSELoss()

    trace = []
    for epoch in range(1, cfg.epochs + 1):
        model.train()
        total, n = 0.0, 0
        for images, labels, _ in loader:
            optimizer.zero_grad()
            pred = model(images.to(device))
            loss = loss_fn(pred, labels.to(device))
            loss.backward()
            optimizer.step()
            if not math.isfinite(loss.item()):
                raise RuntimeError(f"non-finite training loss at epoch {epoch}")
            total += loss.item() * labels.numel()
            n += labels.numel()
        train_mse = total / n
        val_mse = _epoch_mse(model, val_loader, device) if val_loader else None
        trace.append({"epoch": epoch, "train_mse": train_mse, "val_mse": val_mse})
        if epoch == 1 or epoch % 10 == 0 or epoch == cfg.epochs:
            log.info("epoch %d/%d  train %.3e  val %s", epoch, cfg.epochs, train_mse,
                     f"{val_mse:.3e}" if val_mse is not None else "-")

    with (out_dir / TRACE_NAME).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_mse", "val_mse"])
        for row in trace:
            writer.writerow([row["epoch"], f"{row['train_mse']:.8e}",
                             "" if row["val_mse"] is None else f"{row['val_mse']:.8e}"])

    ckpt_path = out_dir / CHECKPOINT_NAME
    torch.save(
        {
            "format": "ssim-regressor-checkpoint-v1",
            "version": __version__,
            "config": asdict(cfg),
            "manifest_header": header,
            "model_state": model.state_dict(),
            "trace": trace,
        },
        ckpt_path,
    )
    return TrainResult(ckpt_path, trace)


def load_checkpoint(path: str | Path, device: str = "cpu") -> tuple[SsimRegressor, dict]:
    """Restore a model (eval mode) and the checkpoint metadata."""
    blob = torch.load(Path(path), map_location=device, weights_only=False)
    if blob.get("format") != "ssim-regressor-checkpoint-v1":
        raise ValueError(f"{path}: not an ssim-regressor checkpoint")
    model = SsimRegressor(int(blob["config"]["depth"]))
    model.load_state_dict(blob["model_state"])
    model.to(device).eval()
    return model, blob

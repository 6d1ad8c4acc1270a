"""End-to-end labelled sample generation with a replayable manifest.

One sample = pick volume, draw slice, contrast-augment, motion-corrupt,
conform both versions to the network input size, score with SSIM. Every
random decision is recorded, and the per-sample seed is a pure function of
(master_seed, index), so any worker count and any execution order produce
byte-identical outputs.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .augment import AugKind, AugRecord, apply_record, random_augment
from .binning import ClassScheme, bin_of
from .corrupt import CorruptConfig, CorruptionRecord, corrupt_random, replay as replay_corruption
from .imagecore import NETWORK_INPUT_SIZE, Slice2D, SliceRef, Volume3D, conform, normalize, random_slice
from .rng import make_rng, mix_seed
from .ssim import SsimConfig, ssim_mean
from .volio import save_slice_png

MANIFEST_SCHEMA = "motionqa-manifest-v1"
MANIFEST_NAME = "manifest.jsonl"
# phase-encode convention: corruption segments/replaces k-space rows
PHASE_AXIS = "rows"


@dataclass(frozen=True)
class PipelineConfig:
    conform_target: int = NETWORK_INPUT_SIZE
    augment_enabled: bool = True
    corrupt: CorruptConfig = field(default_factory=CorruptConfig)
    ssim: SsimConfig = field(default_factory=SsimConfig)
    scheme: ClassScheme | None = None  # adds a class column when set
    store_audit_pair: bool = False  # persist float64 clean/corrupted pair
    max_degenerate_retries: int = 10

    def header_dict(self) -> dict:
        d = {
            "conform_target": self.conform_target,
            "augment_enabled": self.augment_enabled,
            "corrupt_enabled": self.corrupt.enabled,
            "max_severity": self.corrupt.max_severity,
            "ssim": self.ssim.as_dict(),
            "phase_axis": PHASE_AXIS,
            "normalization": "per-slice-minmax",
        }
        if self.scheme is not None:
            d["scheme"] = {"kind": self.scheme.kind, "edges": list(self.scheme.edges)}
        return d


@dataclass(frozen=True)
class LabeledSample:
    id: str
    slice_ref: SliceRef
    aug: AugRecord
    corruption: CorruptionRecord
    ssim_label: float
    image_path: str
    class_label: int | None = None

    def to_json_dict(self) -> dict:
        d = {
            "id": self.id,
            "slice": {"volume_id": self.slice_ref.volume_id, "axis": self.slice_ref.axis, "index": self.slice_ref.index},
            "aug": self.aug.to_json_dict(),
            "corruption": self.corruption.to_json_dict(),
            "ssim_label": self.ssim_label,
            "image": self.image_path,
        }
        if self.class_label is not None:
            d["class"] = self.class_label
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "LabeledSample":
        return cls(
            id=str(d["id"]),
            slice_ref=SliceRef(str(d["slice"]["volume_id"]), int(d["slice"]["axis"]), int(d["slice"]["index"])),
            aug=AugRecord.from_json_dict(d["aug"]),
            corruption=CorruptionRecord.from_json_dict(d["corruption"]),
            ssim_label=float(d["ssim_label"]),
            image_path=str(d["image"]),
            class_label=int(d["class"]) if "class" in d else None,
        )


@dataclass
class Manifest:
    header: dict
    rows: list[LabeledSample]

    def save(self, path: str | Path) -> None:
        """Atomic write: temp file in place, then rename."""
        path = Path(path)
        tmp = path.with_suffix(".tmp")
        with tmp.open("w", encoding="utf-8") as fh:
            fh.write(json.dumps(self.header, sort_keys=True) + "\n")
            for row in self.rows:
                fh.write(json.dumps(row.to_json_dict(), sort_keys=True) + "\n")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | Path) -> "Manifest":
        path = Path(path)
        with path.open("r", encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
        if not lines:
            raise ValueError(f"{path}: empty manifest")
        header = json.loads(lines[0])
        if header.get("schema") != MANIFEST_SCHEMA:
            raise ValueError(f"{path}: unknown manifest schema {header.get('schema')!r}")
        rows = [LabeledSample.from_json_dict(json.loads(ln)) for ln in lines[1:]]
        ids = [r.id for r in rows]
        if len(set(ids)) != len(ids):
            raise ValueError(f"{path}: duplicate sample ids")
        return cls(header, rows)

    def labels_by_id(self) -> dict[str, float]:
        return {r.id: r.ssim_label for r in self.rows}


def sample_id(index: int) -> str:
    return f"s{index:06d}"


@dataclass
class GeneratedSample:
    row: LabeledSample
    clean: Slice2D  # augmented, conformed
    corrupted: Slice2D  # conformed


def generate_sample(
    volumes: list[Volume3D],
    index: int,
    master_seed: int,
    config: PipelineConfig = PipelineConfig(),
) -> GeneratedSample:
    """Run the full pipeline for one sample index (no file IO)."""
    if not volumes:
        raise ValueError("need at least one source volume")
    seed = mix_seed(master_seed, index)
    rng = make_rng(seed)

    vol = volumes[int(rng.integers(0, len(volumes)))]
    for _ in range(config.max_degenerate_retries + 1):
        sl, ref = random_slice(vol, rng)
        if float(sl.pixels.max()) > 0.0:
            break
    else:
        raise ValueError(
            f"volume {vol.id!r}: still degenerate (constant) after "
            f"{config.max_degenerate_retries} resamples; rejecting volume"
        )

    aug_img, aug_rec = random_augment(sl, rng, enabled=config.augment_enabled, seed=seed)
    cor_img, cor_rec = corrupt_random(aug_img, rng, config.corrupt, seed=seed)

    clean_conf = conform(aug_img, config.conform_target)
    cor_conf = conform(cor_img, config.conform_target)
    label = ssim_mean(clean_conf, cor_conf, config.ssim).mean

    sid = sample_id(index)
    row = LabeledSample(
        id=sid,
        slice_ref=ref,
        aug=aug_rec,
        corruption=cor_rec,
        ssim_label=label,
        image_path=f"images/{sid}.png",
        class_label=bin_of(min(max(label, 0.0), 1.0), config.scheme) if config.scheme else None,
    )
    return GeneratedSample(row, clean_conf, cor_conf)


def _emit_sample(volumes, index, master_seed, config, out_dir: Path) -> LabeledSample:
    try:
        gen = generate_sample(volumes, index, master_seed, config)
        save_slice_png(gen.corrupted, out_dir / gen.row.image_path)
        if config.store_audit_pair:
            np.save(out_dir / "audit" / f"{gen.row.id}_clean.npy", gen.clean.pixels)
            np.save(out_dir / "audit" / f"{gen.row.id}_corrupt.npy", gen.corrupted.pixels)
        return gen.row
    except (ValueError, OSError) as exc:
        # failures carry the sample index so a bad row is findable
        raise type(exc)(f"sample {sample_id(index)}: {exc}") from exc


def build_header(volumes: list[Volume3D], n: int, master_seed: int, config: PipelineConfig) -> dict:
    return {
        "schema": MANIFEST_SCHEMA,
        "generator_version": __version__,
        "master_seed": master_seed,
        "n": n,
        **config.header_dict(),
        "volumes": [
            {"id": v.id, "dims": list(v.dims), "spacing": list(v.spacing)} for v in volumes
        ],
    }


def generate_dataset(
    volumes: list[Volume3D],
    n: int,
    master_seed: int,
    out_dir: str | Path,
    config: PipelineConfig = PipelineConfig(),
    workers: int = 1,
    resume: bool = False,
) -> Manifest:
    """Generate n samples (indices 0..n-1) plus images under out_dir.

    Output is a pure function of (volumes, n, master_seed, config): worker
    count only changes wall time. With resume=True, rows already present in
    a compatible manifest are kept and only missing indices are computed.
    """
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    vol_ids = [v.id for v in volumes]
    if len(set(vol_ids)) != len(vol_ids):
        raise ValueError(f"volume ids must be unique, got {vol_ids}")

    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    if config.store_audit_pair:
        (out_dir / "audit").mkdir(exist_ok=True)
    manifest_path = out_dir / MANIFEST_NAME
    header = build_header(volumes, n, master_seed, config)

    done: dict[int, LabeledSample] = {}
    if resume and manifest_path.exists():
        previous = Manifest.load(manifest_path)
        comparable = {k: v for k, v in previous.header.items() if k != "n"}
        if comparable != {k: v for k, v in header.items() if k != "n"}:
            raise ValueError(f"{manifest_path}: existing manifest was generated under a different configuration")
        for row in previous.rows:
            idx = int(row.id[1:])
            if 0 <= idx < n and (out_dir / row.image_path).exists():
                done[idx] = row

    todo = [i for i in range(n) if i not in done]
    if todo:
        if workers == 1:
            for i in todo:
                done[i] = _emit_sample(volumes, i, master_seed, config, out_dir)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for i, row in zip(todo, pool.map(
                    lambda i: _emit_sample(volumes, i, master_seed, config, out_dir), todo
                )):
                    done[i] = row

    manifest = Manifest(header, [done[i] for i in range(n)])
    manifest.save(manifest_path)
    return manifest


def replay_row(
    volumes_by_id: dict[str, Volume3D],
    row: LabeledSample,
    config: PipelineConfig = PipelineConfig(),
) -> GeneratedSample:
    """Recompute a sample from its provenance records alone."""
    ref = row.slice_ref
    if ref.volume_id not in volumes_by_id:
        raise ValueError(f"{row.id}: source volume {ref.volume_id!r} not provided")
    vol = volumes_by_id[ref.volume_id]
    sl = normalize(vol.get_slice(ref.axis, ref.index))
    aug_img = apply_record(sl, row.aug) if row.aug.kind is not AugKind.NONE else sl
    cor_img = replay_corruption(aug_img, row.corruption)
    clean_conf = conform(aug_img, config.conform_target)
    cor_conf = conform(cor_img, config.conform_target)
    label = ssim_mean(clean_conf, cor_conf, config.ssim).mean
    replayed = LabeledSample(
        id=row.id,
        slice_ref=ref,
        aug=row.aug,
        corruption=row.corruption,
        ssim_label=label,
        image_path=row.image_path,
        class_label=row.class_label,
    )
    return GeneratedSample(replayed, clean_conf, cor_conf)


def image_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()

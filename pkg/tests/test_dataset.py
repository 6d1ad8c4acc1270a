import json

import numpy as np
import pytest

from motionqa.binning import equal_bins
from motionqa.corrupt import CorruptConfig
from motionqa.dataset import (
    Manifest,
    PipelineConfig,
    generate_dataset,
    generate_sample,
    image_digest,
    replay_row,
    sample_id,
)
from motionqa.imagecore import Volume3D
from motionqa.rng import mix_seed
from motionqa.ssim import ssim_mean
from motionqa.volio import load_slice_png


def dir_digests(root):
    return {
        str(p.relative_to(root)): image_digest(p)
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestGenerateSample:
    def test_deterministic(self, phantom_volumes):
        a = generate_sample(phantom_volumes, 5, 123)
        b = generate_sample(phantom_volumes, 5, 123)
        assert a.row == b.row
        assert np.array_equal(a.corrupted.pixels, b.corrupted.pixels)

    def test_different_indices_differ(self, phantom_volumes):
        a = generate_sample(phantom_volumes, 0, 123)
        b = generate_sample(phantom_volumes, 1, 123)
        assert a.row.ssim_label != b.row.ssim_label

    def test_label_matches_conformed_pair(self, phantom_volumes):
        g = generate_sample(phantom_volumes, 2, 9)
        again = ssim_mean(g.clean, g.corrupted).mean
        assert abs(again - g.row.ssim_label) <= 1e-12

    def test_corruption_disabled_gives_label_one(self, phantom_volumes):
        config = PipelineConfig(corrupt=CorruptConfig(enabled=False))
        g = generate_sample(phantom_volumes, 3, 9, config)
        assert abs(g.row.ssim_label - 1.0) <= 1e-9

    def test_augment_disabled_recorded(self, phantom_volumes):
        config = PipelineConfig(augment_enabled=False)
        g = generate_sample(phantom_volumes, 4, 9, config)
        assert g.row.aug.kind.value == "none"

    def test_class_column(self, phantom_volumes):
        config = PipelineConfig(scheme=equal_bins(5))
        g = generate_sample(phantom_volumes, 6, 9, config)
        assert 1 <= g.row.class_label <= 5

    def test_mix_seed_distinct(self):
        seeds = {mix_seed(7, i) for i in range(10_000)}
        assert len(seeds) == 10_000

    def test_degenerate_volume_rejected(self):
        flat = Volume3D(np.zeros((16, 16, 16)), (1, 1, 1), "flat")
        with pytest.raises(ValueError, match="degenerate"):
            generate_sample([flat], 0, 1)

    def test_requires_volumes(self):
        with pytest.raises(ValueError, match="at least one"):
            generate_sample([], 0, 1)


class TestGenerateDataset:
    def test_runs_and_reloads(self, phantom_volumes, tmp_path):
        manifest = generate_dataset(phantom_volumes, 12, 7, tmp_path / "d")
        assert len(manifest.rows) == 12
        assert [r.id for r in manifest.rows] == [sample_id(i) for i in range(12)]
        loaded = Manifest.load(tmp_path / "d" / "manifest.jsonl")
        assert loaded.header == manifest.header
        assert loaded.rows == manifest.rows
        for row in loaded.rows:
            assert (tmp_path / "d" / row.image_path).exists()

    def test_byte_identical_across_runs_and_workers(self, phantom_volumes, tmp_path):
        generate_dataset(phantom_volumes, 30, 7, tmp_path / "a", workers=1)
        generate_dataset(phantom_volumes, 30, 7, tmp_path / "b", workers=1)
        generate_dataset(phantom_volumes, 30, 7, tmp_path / "c", workers=8)
        da, db, dc = (dir_digests(tmp_path / x) for x in "abc")
        assert da == db == dc

    def test_stored_png_close_to_label_source(self, phantom_volumes, tmp_path):
        manifest = generate_dataset(phantom_volumes, 3, 11, tmp_path / "d")
        row = manifest.rows[0]
        g = generate_sample(phantom_volumes, 0, 11)
        png = load_slice_png(tmp_path / "d" / row.image_path)
        assert np.abs(png.pixels - g.corrupted.pixels).max() <= 0.5 / 65535 + 1e-12

    def test_audit_pair_reproduces_label(self, phantom_volumes, tmp_path):
        config = PipelineConfig(store_audit_pair=True)
        manifest = generate_dataset(phantom_volumes, 4, 13, tmp_path / "d", config)
        from motionqa.imagecore import Slice2D

        for row in manifest.rows:
            clean = Slice2D(np.load(tmp_path / "d" / "audit" / f"{row.id}_clean.npy"))
            corrupt = Slice2D(np.load(tmp_path / "d" / "audit" / f"{row.id}_corrupt.npy"))
            assert abs(ssim_mean(clean, corrupt).mean - row.ssim_label) <= 1e-9

    def test_replay_reproduces_images(self, phantom_volumes, tmp_path):
        out = tmp_path / "d"
        manifest = generate_dataset(phantom_volumes, 6, 17, out)
        volumes = {v.id: v for v in phantom_volumes}
        for row in manifest.rows[:3]:
            replayed = replay_row(volumes, row)
            assert abs(replayed.row.ssim_label - row.ssim_label) <= 1e-9
            from motionqa.volio import save_slice_png

            save_slice_png(replayed.corrupted, tmp_path / "replayed.png")
            assert image_digest(tmp_path / "replayed.png") == image_digest(out / row.image_path)

    def test_resume_completes_missing_indices(self, phantom_volumes, tmp_path):
        full = generate_dataset(phantom_volumes, 10, 19, tmp_path / "full")
        partial_dir = tmp_path / "part"
        generate_dataset(phantom_volumes, 6, 19, partial_dir)
        resumed = generate_dataset(phantom_volumes, 10, 19, partial_dir, resume=True)
        assert [r.to_json_dict() for r in resumed.rows] == [r.to_json_dict() for r in full.rows]

    def test_resume_rejects_config_change(self, phantom_volumes, tmp_path):
        generate_dataset(phantom_volumes, 3, 19, tmp_path / "d")
        with pytest.raises(ValueError, match="different configuration"):
            generate_dataset(
                phantom_volumes, 5, 19, tmp_path / "d",
                PipelineConfig(augment_enabled=False), resume=True,
            )

    def test_header_contents(self, phantom_volumes, tmp_path):
        manifest = generate_dataset(phantom_volumes, 2, 23, tmp_path / "d")
        h = manifest.header
        assert h["schema"] == "motionqa-manifest-v1"
        assert h["master_seed"] == 23
        assert h["phase_axis"] == "rows"
        assert h["ssim"]["window_size"] == 11
        assert [v["id"] for v in h["volumes"]] == [v.id for v in phantom_volumes]

    def test_manifest_is_jsonl(self, phantom_volumes, tmp_path):
        generate_dataset(phantom_volumes, 2, 29, tmp_path / "d")
        path = tmp_path / "d" / "manifest.jsonl"
        lines = path.read_text().splitlines()
        assert len(lines) == 3
        for line in lines:
            json.loads(line)
        # parse -> serialize is byte-lossless
        original = path.read_bytes()
        Manifest.load(path).save(path)
        assert path.read_bytes() == original

    def test_failures_carry_sample_index(self, tmp_path):
        flat = Volume3D(np.zeros((16, 16, 16)), (1, 1, 1), "flat")
        with pytest.raises(ValueError, match="sample s000000"):
            generate_dataset([flat], 2, 1, tmp_path / "d")

    def test_rejects_bad_args(self, phantom_volumes, tmp_path):
        with pytest.raises(ValueError, match="count"):
            generate_dataset(phantom_volumes, 0, 1, tmp_path / "d")
        with pytest.raises(ValueError, match="worker"):
            generate_dataset(phantom_volumes, 1, 1, tmp_path / "d", workers=0)
        dup = [phantom_volumes[0], phantom_volumes[0]]
        with pytest.raises(ValueError, match="unique"):
            generate_dataset(dup, 1, 1, tmp_path / "d")


class TestLabelCoverage:
    def test_labels_span_low_and_high(self, acquisition_sized_volumes):
        labels = [generate_sample(acquisition_sized_volumes, i, 31).row.ssim_label for i in range(600)]
        labels = np.array(labels)
        assert (labels < 0.6).mean() > 0.05
        assert (labels > 0.8).mean() > 0.05
        assert labels.min() >= 0.0 and labels.max() <= 1.0

    @pytest.mark.slow
    def test_labels_span_low_and_high_10000(self, acquisition_sized_volumes):
        labels = np.array(
            [generate_sample(acquisition_sized_volumes, i, 31).row.ssim_label for i in range(10_000)]
        )
        assert (labels < 0.6).mean() > 0.05
        assert (labels > 0.8).mean() > 0.05

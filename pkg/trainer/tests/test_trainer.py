import csv
import json

import pytest
import torch

from ssimregressor.data import SliceDataset, load_image, read_manifest, split_entries
from ssimregressor.model import SsimRegressor
from ssimregressor.predict import predict
from ssimregressor.train import TrainConfig, load_checkpoint, train

from conftest import run_primary


class TestData:
    def test_read_manifest(self, small_dataset):
        header, entries, skipped = read_manifest(small_dataset / "manifest.jsonl")
        assert header["n"] == 20
        assert len(entries) == 20
        assert skipped == 0
        assert all(0.0 <= e.label <= 1.0 for e in entries)

    def test_corrupt_rows_skipped_with_count(self, small_dataset, tmp_path):
        lines = (small_dataset / "manifest.jsonl").read_text().splitlines()
        lines[3] = "{not json"
        row = json.loads(lines[5])
        row["image"] = "images/missing.png"
        lines[5] = json.dumps(row)
        bad = tmp_path / "manifest.jsonl"
        bad.write_text("\n".join(lines) + "\n")
        (tmp_path / "images").symlink_to(small_dataset / "images")
        _, entries, skipped = read_manifest(bad)
        assert skipped == 2
        assert len(entries) == 18

    def test_dataset_items(self, small_dataset):
        _, entries, _ = read_manifest(small_dataset / "manifest.jsonl")
        image, label, sid = SliceDataset(entries)[0]
        assert image.shape == (1, 256, 256)
        assert image.min() >= 0.0 and image.max() <= 1.0
        assert image.dtype == torch.float32
        assert sid == entries[0].id
        assert float(label) == pytest.approx(entries[0].label, abs=1e-6)

    def test_split_deterministic(self, small_dataset):
        _, entries, _ = read_manifest(small_dataset / "manifest.jsonl")
        a_train, a_val = split_entries(entries, 0.25, seed=9)
        b_train, b_val = split_entries(entries, 0.25, seed=9)
        assert [e.id for e in a_train] == [e.id for e in b_train]
        assert len(a_val) == 5
        assert {e.id for e in a_train} | {e.id for e in a_val} == {e.id for e in entries}


class TestModel:
    def test_output_shape_and_range(self):
        torch.manual_seed(0)
        model = SsimRegressor(18).eval()
        with torch.no_grad():
            out = model(torch.randn(3, 1, 64, 64) * 5)
        assert out.shape == (3,)
        # sigmoid head: inside [0, 1] even for wild inputs (float32 may
        # saturate to the endpoints exactly)
        assert torch.all(out >= 0) and torch.all(out <= 1)

    def test_depth_101_builds(self):
        model = SsimRegressor(101).eval()
        with torch.no_grad():
            out = model(torch.randn(1, 1, 64, 64))
        assert 0.0 <= float(out) <= 1.0

    def test_rejects_unknown_depth(self):
        with pytest.raises(ValueError, match="depth"):
            SsimRegressor(34)


@pytest.fixture(scope="module")
def short_run(small_dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("short")
    cfg = TrainConfig(epochs=3, seed=4, val_fraction=0.2)
    result = train(small_dataset / "manifest.jsonl", out, cfg)
    return out, result


class TestTraining:
    def test_loss_trace_written_and_finite(self, short_run):
        out, result = short_run
        rows = list(csv.DictReader((out / "loss_trace.csv").open()))
        assert [int(r["epoch"]) for r in rows] == [1, 2, 3]
        for r in rows:
            assert float(r["train_mse"]) >= 0.0
            assert float(r["val_mse"]) >= 0.0
        assert result.trace[-1]["train_mse"] <= result.trace[0]["train_mse"] * 2

    def test_checkpoint_round_trip(self, short_run, small_dataset):
        out, _ = short_run
        model, blob = load_checkpoint(out / "checkpoint.pt")
        assert blob["config"]["epochs"] == 3
        _, entries, _ = read_manifest(small_dataset / "manifest.jsonl")
        x = load_image(entries[0].image_path).unsqueeze(0)
        with torch.no_grad():
            a = model(x)
            b = model(x)
        assert torch.equal(a, b)

    def test_deterministic_given_seed(self, small_dataset, tmp_path):
        cfg = TrainConfig(epochs=2, seed=7, val_fraction=0.0)
        r1 = train(small_dataset / "manifest.jsonl", tmp_path / "a", cfg)
        r2 = train(small_dataset / "manifest.jsonl", tmp_path / "b", cfg)
        assert r1.trace == r2.trace

    def test_config_validation(self):
        with pytest.raises(ValueError, match="learning rate"):
            TrainConfig(lr=0)
        with pytest.raises(ValueError, match="batch"):
            TrainConfig(batch=0)


class TestPredict:
    def test_csv_schema_and_range(self, short_run_module, small_dataset, tmp_path):
        ckpt = short_run_module
        out_csv = tmp_path / "pred.csv"
        written, skipped = predict(ckpt, out_csv, images_dir=small_dataset / "images")
        assert (written, skipped) == (20, 0)
        rows = out_csv.read_text().splitlines()
        assert rows[0] == "id,ssim_pred"
        for line in rows[1:]:
            sid, value = line.split(",")
            assert sid.startswith("s")
            assert 0.0 <= float(value) <= 1.0

    def test_unreadable_image_skipped(self, short_run_module, small_dataset, tmp_path):
        images = tmp_path / "images"
        images.mkdir()
        for p in (small_dataset / "images").glob("*.png"):
            (images / p.name).symlink_to(p)
        (images / "sbroken.png").write_bytes(b"not a png")
        written, skipped = predict(short_run_module, tmp_path / "pred.csv", images_dir=images)
        assert written == 20
        assert skipped == 1

    def test_manifest_input_mode(self, short_run_module, small_dataset, tmp_path):
        written, _ = predict(short_run_module, tmp_path / "pred.csv",
                             manifest_path=small_dataset / "manifest.jsonl")
        assert written == 20

    def test_requires_exactly_one_source(self, short_run_module, small_dataset, tmp_path):
        with pytest.raises(ValueError, match="exactly one"):
            predict(short_run_module, tmp_path / "p.csv")


@pytest.fixture(scope="module")
def short_run_module(small_dataset, tmp_path_factory):
    """One 1-epoch checkpoint shared by the prediction tests."""
    out = tmp_path_factory.mktemp("ckpt")
    train(small_dataset / "manifest.jsonl", out, TrainConfig(epochs=1, seed=1, val_fraction=0.0))
    return out / "checkpoint.pt"


def test_cli_train_and_predict(small_dataset, tmp_path):
    from ssimregressor.cli import main

    out = tmp_path / "run"
    assert main(["train", "--manifest", str(small_dataset / "manifest.jsonl"), "--out", str(out),
                 "--epochs", "1", "--depth", "18", "--val-fraction", "0"]) == 0
    assert (out / "checkpoint.pt").exists() and (out / "loss_trace.csv").exists()
    pred = tmp_path / "pred.csv"
    assert main(["predict", "--ckpt", str(out / "checkpoint.pt"),
                 "--images", str(small_dataset / "images"), "--out", str(pred)]) == 0
    assert pred.read_text().startswith("id,ssim_pred")

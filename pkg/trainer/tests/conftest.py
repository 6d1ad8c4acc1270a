import subprocess
import sys

import pytest

PRIMARY = [sys.executable, "-m", "motionqa.cli"]


def run_primary(*args):
    """Invoke the dataset generator/evaluator CLI (the package boundary)."""
    proc = subprocess.run([*PRIMARY, *map(str, args)], capture_output=True, text=True)
    assert proc.returncode == 0, f"primary CLI failed: {proc.stderr}"
    return proc


@pytest.fixture(scope="session")
def volume_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("volumes")
    run_primary("phantom", "--out", d, "--count", "3", "--dims", "96", "96", "64", "--seed", "3")
    return d


@pytest.fixture(scope="session")
def small_dataset(volume_dir, tmp_path_factory):
    """20 labelled samples; enough for loader/overfit/interface checks."""
    d = tmp_path_factory.mktemp("train20")
    run_primary("gen", "--volumes", volume_dir, "--n", "20", "--seed", "11", "--out", d)
    return d

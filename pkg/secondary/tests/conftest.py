"""Session fixtures shared by the training and acceptance tests.

The network talks to the data-producing toolkit only through files, so
everything here shells out to the installed `horizonbench` executable
rather than importing it. The 16-image fixture and the overfit recipe
are frozen: seed 21 labels every record and yields a balanced two-class
label set with no abstentions.
"""

import shutil
import subprocess

import pytest

from calibnet.config import ModelConfig, TrainConfig
from calibnet.training import train

FIXTURE_SEED = 21
FIXTURE_COUNT = 16
IMAGE_SIZE = 64
PANO_HEIGHT = 256
MAX_LINES = 32


def run_cli(args, **kwargs):
    """Run a console command, failing the test run loudly on error."""
    proc = subprocess.run(
        [str(a) for a in args], capture_output=True, text=True, **kwargs
    )
    if proc.returncode != 0:
        raise RuntimeError(
            f"{args[0]} exited {proc.returncode}:\n{proc.stdout}{proc.stderr}"
        )
    return proc


@pytest.fixture(scope="session")
def toolkit_cli():
    """Path of the data toolkit's executable; hard failure when absent."""
    exe = shutil.which("horizonbench")
    if exe is None:
        pytest.fail("horizonbench executable not on PATH; install the toolkit first")
    return exe


@pytest.fixture(scope="session")
def fixture_manifest(tmp_path_factory, toolkit_cli):
    """Labeled manifest for 16 synthetic 64x64 views (frozen seed)."""
    root = tmp_path_factory.mktemp("trainset")
    run_cli(
        [
            toolkit_cli, "synth", "--out", root / "syn",
            "--count", FIXTURE_COUNT, "--seed", FIXTURE_SEED,
            "--size", IMAGE_SIZE, "--pano-height", PANO_HEIGHT,
        ]
    )
    run_cli(
        [
            toolkit_cli, "label", "--manifest", root / "syn" / "manifest.jsonl",
            "--out", root / "lab", "--max-lines", MAX_LINES,
        ]
    )
    return root / "lab" / "manifest.jsonl"


@pytest.fixture(scope="session")
def overfit_run(tmp_path_factory, fixture_manifest):
    """(model, history, out_dir) for the frozen 200-step overfit recipe."""
    out_dir = tmp_path_factory.mktemp("overfit")
    model, history = train(
        ModelConfig(),
        TrainConfig(
            manifest=str(fixture_manifest),
            steps=200,
            lr=1e-3,
            batch_size=0,
            seed=0,
            out_dir=str(out_dir),
        ),
    )
    return model, history, out_dir

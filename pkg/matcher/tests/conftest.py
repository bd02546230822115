import subprocess
import sys

import pytest


def run_primary(*args):
    """Invoke the corpus toolkit CLI; the matcher only consumes its files."""
    result = subprocess.run(
        [sys.executable, "-m", "privmatch", *map(str, args)],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr + result.stdout
    return result.stdout


@pytest.fixture(scope="session")
def scramble_corpus(tmp_path_factory):
    """Tile-scrambling corpus: 100 originals, clean (p=0) stacked samples."""
    root = tmp_path_factory.mktemp("corpus1")
    run_primary("build-dataset", "--root", root, "--subtask", "1", "--count", "100", "--seed", "555")
    samples = root / "samples"
    run_primary(
        "make-samples", "--root", root, "--subtask", "1", "--out", samples,
        "--approach", "S12", "--p", "0.0", "--seed", "555",
    )
    return root


@pytest.fixture(scope="session")
def encrypted_corpus(tmp_path_factory):
    """Homomorphic-encryption corpus: 300 originals, division-only samples."""
    root = tmp_path_factory.mktemp("corpus3")
    run_primary("build-dataset", "--root", root, "--subtask", "3", "--count", "300", "--seed", "900")
    samples = root / "samples"
    run_primary(
        "make-samples", "--root", root, "--subtask", "3", "--out", samples,
        "--approach", "T2", "--seed", "900",
    )
    return root


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """Minimal encrypted corpus for fast unit tests."""
    root = tmp_path_factory.mktemp("tiny3")
    run_primary("build-dataset", "--root", root, "--subtask", "3", "--count", "12", "--seed", "77")
    samples = root / "samples"
    run_primary(
        "make-samples", "--root", root, "--subtask", "3", "--out", samples,
        "--approach", "T2", "--seed", "77",
    )
    return root

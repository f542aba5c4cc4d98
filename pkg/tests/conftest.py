import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tabuq.artifacts import load_jobs_manifest
from tabuq.synth import generate_corpus


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory) -> Path:
    """The shipped 20-table synthetic corpus with seeded error injection."""
    out = tmp_path_factory.mktemp("corpus")
    generate_corpus(out, n_tables=20, seed=20250407, inject=True, images=True)
    return out


@pytest.fixture(scope="session")
def corpus_jobs(corpus_dir):
    return load_jobs_manifest(corpus_dir / "jobs.json")


@pytest.fixture(scope="session")
def clean_table_dir(tmp_path_factory) -> Path:
    """A single defect-free table (one span per cell)."""
    out = tmp_path_factory.mktemp("clean")
    generate_corpus(out, n_tables=1, seed=11, inject=False, images=False)
    return out

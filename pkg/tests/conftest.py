from __future__ import annotations

from pathlib import Path

import pytest

from gapcheck import corpus

DATA_DIR = Path(__file__).resolve().parent / "data"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def golden_dir() -> Path:
    return GOLDEN_DIR


@pytest.fixture(scope="session")
def fixture_records() -> list[corpus.GenerationRecord]:
    return corpus.load_records(DATA_DIR / "records.jsonl")


@pytest.fixture(scope="session")
def fixture_annotations(fixture_records) -> list[corpus.AnnotatedExample]:
    annotations = corpus.load_annotations(DATA_DIR / "fixture_annotations.jsonl")
    return corpus.attach_records(annotations, fixture_records)


@pytest.fixture(scope="session")
def records_by_id(fixture_records) -> dict[str, corpus.GenerationRecord]:
    return {r.record_id: r for r in fixture_records}


@pytest.fixture(scope="session")
def e2e_records() -> list[corpus.GenerationRecord]:
    return corpus.load_records(DATA_DIR / "e2e_records.jsonl")


@pytest.fixture(scope="session")
def train_annotations(e2e_records) -> list[corpus.AnnotatedExample]:
    annotations = corpus.load_annotations(DATA_DIR / "train_annotations.jsonl")
    return corpus.attach_records(annotations, e2e_records)


@pytest.fixture(scope="session")
def eval_annotations(e2e_records) -> list[corpus.AnnotatedExample]:
    annotations = corpus.load_annotations(DATA_DIR / "eval_annotations.jsonl")
    return corpus.attach_records(annotations, e2e_records)

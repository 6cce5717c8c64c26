"""Shared fixture builders for the test suite."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from dualsum.corpus import Corpus, Document
from dualsum.embedspace import EmbeddingMatrix, save_embeddings


def synthetic_documents(count: int, seed: int, prefix: str = "d") -> list[Document]:
    """Docs whose references are extractive-ish subsets of their sources."""
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(count):
        words = [f"tok{rng.integers(0, 60)}" for _ in range(14)]
        taken = sorted(rng.choice(14, size=7, replace=False))
        reference = " ".join(words[j] for j in taken)
        docs.append(
            Document(id=f"{prefix}{i:04d}", source=" ".join(words), reference=reference)
        )
    return docs


def write_split(path: Path, docs: list[Document]) -> Path:
    with path.open("w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(
                json.dumps({"id": doc.id, "source": doc.source, "summary": doc.reference})
                + "\n"
            )
    return path


def write_corpus(tmp_path: Path, n_train: int, n_test: int, seed: int = 0) -> tuple[Path, Path]:
    train = write_split(tmp_path / "train.jsonl", synthetic_documents(n_train, seed, "t"))
    test = write_split(tmp_path / "test.jsonl", synthetic_documents(n_test, seed + 1, "e"))
    return train, test


def cluster_embeddings(
    ids: list[str],
    sizes: tuple[int, ...],
    d: int = 8,
    seed: int = 0,
    spread: float = 0.05,
    outliers: int = 0,
    radius: float = 5.0,
) -> tuple[EmbeddingMatrix, dict[str, int]]:
    """Clustered vectors along orthogonal axes, plus optional far outliers.

    Returns the matrix and a cluster label per id (outliers get label -1).
    Cluster sizes plus ``outliers`` must sum to ``len(ids)``.
    """
    assert sum(sizes) + outliers == len(ids)
    rng = np.random.default_rng(seed)
    rows = np.empty((len(ids), d))
    labels: dict[str, int] = {}
    pos = 0
    for cluster, size in enumerate(sizes):
        center = np.zeros(d)
        center[cluster] = radius
        for _ in range(size):
            rows[pos] = center + rng.normal(0.0, spread, size=d)
            labels[ids[pos]] = cluster
            pos += 1
    for _ in range(outliers):
        direction = rng.normal(size=d)
        direction /= np.linalg.norm(direction)
        rows[pos] = direction * rng.uniform(4.0 * radius, 6.0 * radius)
        labels[ids[pos]] = -1
        pos += 1
    return EmbeddingMatrix(ids, rows), labels


def write_embeddings(path: Path, matrix: EmbeddingMatrix, binary: bool = True) -> Path:
    save_embeddings(matrix, path, binary=binary)
    return path


@pytest.fixture
def tiny_corpus(tmp_path: Path) -> Corpus:
    train, test = write_corpus(tmp_path, n_train=30, n_test=6, seed=3)
    return Corpus.load(train, test)

"""Backend conformance checks.

Exercises only the :class:`SummarizationBackend` protocol, so the same
suite validates the mock and any remote server without knowing which it
is talking to. Each check is independent; ``run_conformance`` executes
them in order and raises :class:`ConformanceFailure` naming the first
check that fails.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..corpus import Document
from . import SummarizationBackend


class ConformanceFailure(AssertionError):
    def __init__(self, check: str, detail: str) -> None:
        super().__init__(f"backend conformance check {check!r} failed: {detail}")
        self.check = check


def _fail(check: str, detail: str) -> None:
    raise ConformanceFailure(check, detail)


def _check_health(backend: SummarizationBackend, docs: Sequence[Document], n: int) -> None:
    status = backend.health()
    if status.get("ok") is not True:
        _fail("health", f"ok is not true: {status!r}")
    if not isinstance(status.get("model"), str) or not status["model"]:
        _fail("health", f"missing model name: {status!r}")
    if not isinstance(status.get("dim"), int) or status["dim"] < 1:
        _fail("health", f"missing embedding dim: {status!r}")


def _check_embed_shape(backend: SummarizationBackend, docs: Sequence[Document], n: int) -> None:
    texts = [d.source for d in docs[:3]]
    matrix = backend.embed(texts, ids=[d.id for d in docs[:3]])
    if len(matrix) != len(texts):
        _fail("embed-shape", f"{len(texts)} texts but {len(matrix)} rows")
    if matrix.dimension != backend.health()["dim"]:
        _fail("embed-shape", f"row dim {matrix.dimension} != advertised {backend.health()['dim']}")
    if not np.all(np.isfinite(matrix.vectors)):
        _fail("embed-shape", "non-finite embedding entries")


def _check_embed_determinism(backend: SummarizationBackend, docs: Sequence[Document], n: int) -> None:
    texts = [d.source for d in docs[:2]]
    first = backend.embed(texts)
    second = backend.embed(texts)
    if not np.allclose(first.vectors, second.vectors, atol=1e-6):
        _fail("embed-determinism", "same texts embedded twice disagree")


def _check_generate_count(backend: SummarizationBackend, docs: Sequence[Document], n: int) -> None:
    batch = backend.generate_stochastic(docs[0], n, noise_seed=1234)
    if len(batch.summaries) != n:
        _fail("generate-count", f"asked for {n} summaries, got {len(batch.summaries)}")
    if not all(isinstance(s, str) for s in batch.summaries):
        _fail("generate-count", "non-string summary")
    if batch.doc_id != docs[0].id:
        _fail("generate-count", f"batch doc_id {batch.doc_id!r} != {docs[0].id!r}")


def _check_summarize_deterministic(backend: SummarizationBackend, docs: Sequence[Document], n: int) -> None:
    texts = [d.source for d in docs[:3]]
    first = backend.summarize(texts)
    second = backend.summarize(texts)
    if len(first) != len(texts):
        _fail("summarize-deterministic", f"{len(texts)} texts but {len(first)} summaries")
    if first != second:
        _fail("summarize-deterministic", "same call twice returned different summaries")
    if backend.summarize([]) != []:
        _fail("summarize-deterministic", "empty input did not produce empty output")
    reversed_out = backend.summarize(list(reversed(texts)))
    if reversed_out != list(reversed(first)):
        _fail("summarize-deterministic", "output order does not follow input order")


def _check_finetune_semantics(backend: SummarizationBackend, docs: Sequence[Document], n: int) -> None:
    pairs = [(d.source, d.reference) for d in docs[:3]]
    fp_first = backend.reset_and_finetune(pairs)
    fp_repeat = backend.reset_and_finetune(pairs)
    if fp_first != fp_repeat:
        _fail("finetune-semantics", "same pairs trained twice gave different fingerprints")
    fp_permuted = backend.reset_and_finetune(list(reversed(pairs)))
    if fp_permuted != fp_first:
        _fail("finetune-semantics", "pair order changed the fingerprint (multiset semantics)")
    extra = docs[3] if len(docs) > 3 else docs[0]
    fp_grown = backend.reset_and_finetune(pairs + [(extra.source + " extra", extra.reference)])
    if fp_grown == fp_first:
        _fail("finetune-semantics", "adding a pair left the fingerprint unchanged")
    texts = [d.source for d in docs[:2]]
    if backend.summarize(texts) != backend.summarize(texts):
        _fail("finetune-semantics", "summaries not deterministic after finetune")


CHECKS = (
    ("health", _check_health),
    ("embed-shape", _check_embed_shape),
    ("embed-determinism", _check_embed_determinism),
    ("generate-count", _check_generate_count),
    ("summarize-deterministic", _check_summarize_deterministic),
    ("finetune-semantics", _check_finetune_semantics),
)


def run_conformance(
    backend: SummarizationBackend,
    docs: Sequence[Document],
    n: int = 3,
) -> list[str]:
    """Run every check against ``backend``; returns the passed check names.

    ``docs`` must hold at least four documents with non-empty sources and
    references. Mutates backend state (finetunes are issued).
    """
    if len(docs) < 4:
        raise ValueError(f"conformance needs at least 4 documents, got {len(docs)}")
    passed = []
    for name, check in CHECKS:
        check(backend, docs, n)
        passed.append(name)
    return passed

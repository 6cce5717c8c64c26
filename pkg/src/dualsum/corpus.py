"""Dataset loading and the train/test document pools.

Dataset files are newline-delimited UTF-8 JSON records with exactly the
fields ``id``, ``source`` and ``summary``; extra fields are ignored.
Reference summaries of the train pool stay hidden behind
:meth:`Corpus.reveal_reference`, which is the simulated annotation step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import DatasetError, UnknownDocumentError

_REQUIRED_FIELDS = ("id", "source", "summary")
_SPLITS = ("train", "test")


@dataclass(frozen=True)
class Document:
    id: str
    source: str
    reference: str


def _parse_record(path: Path, lineno: int, line: str) -> Document:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}:{lineno}: invalid record ({exc.msg})") from None
    if not isinstance(raw, dict):
        raise DatasetError(f"{path}:{lineno}: record is not an object")
    for field in _REQUIRED_FIELDS:
        if field not in raw:
            raise DatasetError(f"{path}:{lineno}: missing field {field!r}")
        if not isinstance(raw[field], str):
            raise DatasetError(f"{path}:{lineno}: field {field!r} must be a string")
    if not raw["id"]:
        raise DatasetError(f"{path}:{lineno}: empty doc id")
    if not raw["source"].strip():
        raise DatasetError(f"{path}:{lineno}: empty source for doc {raw['id']!r}")
    return Document(id=raw["id"], source=raw["source"], reference=raw["summary"])


def load_dataset(path: str | Path, split: str) -> tuple[Document, ...]:
    """Load one split file, validating every record.

    ``split`` must be "train" or "test"; it only scopes error messages,
    the file format is identical for both.
    """
    if split not in _SPLITS:
        raise DatasetError(f"unknown split {split!r}, expected one of {_SPLITS}")
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"{split} file not found: {path}")
    docs: list[Document] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            doc = _parse_record(path, lineno, line)
            if doc.id in seen:
                raise DatasetError(f"{path}:{lineno}: duplicate doc id {doc.id!r}")
            seen.add(doc.id)
            docs.append(doc)
    return tuple(docs)


class Corpus:
    """Train pool plus held-out test set with disjoint doc ids."""

    def __init__(self, train_pool: Iterable[Document], test_set: Iterable[Document]) -> None:
        self.train_pool = tuple(train_pool)
        self.test_set = tuple(test_set)
        self._train_by_id = {d.id: d for d in self.train_pool}
        self._test_by_id = {d.id: d for d in self.test_set}
        if len(self._train_by_id) != len(self.train_pool):
            raise DatasetError("duplicate doc ids in train pool")
        if len(self._test_by_id) != len(self.test_set):
            raise DatasetError("duplicate doc ids in test set")
        overlap = self._train_by_id.keys() & self._test_by_id.keys()
        if overlap:
            raise DatasetError(f"doc ids present in both splits: {sorted(overlap)[:5]}")

    @classmethod
    def load(cls, train_path: str | Path, test_path: str | Path) -> "Corpus":
        return cls(load_dataset(train_path, "train"), load_dataset(test_path, "test"))

    @property
    def train_ids(self) -> tuple[str, ...]:
        return tuple(d.id for d in self.train_pool)

    def train_doc(self, doc_id: str) -> Document:
        try:
            return self._train_by_id[doc_id]
        except KeyError:
            raise UnknownDocumentError(f"doc {doc_id!r} is not in the train pool") from None

    def reveal_reference(self, doc_id: str) -> tuple[str, str]:
        """Annotation step: (source, reference) for a train-pool doc.

        Test-set ids raise, annotation only ever draws from the train pool.
        """
        doc = self.train_doc(doc_id)
        return doc.source, doc.reference

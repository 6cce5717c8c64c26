"""Embedding-space geometry: id-keyed vector storage with two file
formats, cosine/IDDS scoring, labeled-set spread diagnostics, and a 2-D
PCA projection for visualization exports.

The IDDS score of an unlabeled document x is

    lam * mean_j cos(x, u_j)  -  (1 - lam) * mean_i cos(x, p_i)

where u_j ranges over the whole unlabeled pool (x included) and p_i over
a penalty set (the labeled set, optionally plus an excluded set). High
scores mark documents that are representative of what is still unlabeled
yet far from what has already been picked. Because the mean of cosines
against a set equals the cosine-free dot product with the mean of the
set's unit vectors, both terms reduce to one matrix-vector product, and
an incremental scorer can maintain them as running sums.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DatasetError, DegenerateInputError, UnknownDocumentError

EMBEDDING_FILE_MAGIC = "EMB1"


class EmbeddingMatrix:
    """Immutable id-keyed matrix of embedding row vectors."""

    __slots__ = ("doc_ids", "vectors", "_index")

    def __init__(self, doc_ids: Sequence[str], vectors: np.ndarray) -> None:
        ids = tuple(str(d) for d in doc_ids)
        arr = np.asarray(vectors, dtype=np.float64)
        if arr.ndim != 2:
            raise DatasetError(f"embedding matrix must be 2-D, got shape {arr.shape}")
        if len(ids) != arr.shape[0]:
            raise DatasetError(
                f"{len(ids)} doc ids but {arr.shape[0]} embedding rows"
            )
        if arr.shape[0] > 0 and arr.shape[1] == 0:
            raise DatasetError("embedding rows must have at least one dimension")
        if not np.all(np.isfinite(arr)):
            raise DatasetError("embedding matrix contains non-finite entries")
        index: dict[str, int] = {}
        for pos, doc_id in enumerate(ids):
            if doc_id in index:
                raise DatasetError(f"duplicate doc id in embedding matrix: {doc_id!r}")
            index[doc_id] = pos
        self.doc_ids = ids
        self.vectors = arr
        self._index = index

    def __len__(self) -> int:
        return len(self.doc_ids)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._index

    @property
    def dimension(self) -> int:
        return int(self.vectors.shape[1]) if len(self.doc_ids) else 0

    def row(self, doc_id: str) -> np.ndarray:
        try:
            return self.vectors[self._index[doc_id]]
        except KeyError:
            raise UnknownDocumentError(f"no embedding for doc {doc_id!r}") from None

    def subset(self, doc_ids: Iterable[str]) -> "EmbeddingMatrix":
        """New matrix holding the given ids, in the given order."""
        ids = [str(d) for d in doc_ids]
        rows = [self.row(d) for d in ids]
        data = np.vstack(rows) if rows else np.zeros((0, self.dimension or 1))
        return EmbeddingMatrix(ids, data)


def save_embeddings(matrix: EmbeddingMatrix, path: str | Path, binary: bool = True) -> None:
    """Write a matrix to ``path`` in the binary (EMB1) or text format."""
    path = Path(path)
    if binary:
        with path.open("wb") as fh:
            fh.write(f"{EMBEDDING_FILE_MAGIC} {matrix.dimension} {len(matrix)}\n".encode("utf-8"))
            for doc_id, row in zip(matrix.doc_ids, matrix.vectors):
                fh.write(doc_id.encode("utf-8") + b"\n")
                fh.write(row.astype("<f4").tobytes())
    else:
        with path.open("w", encoding="utf-8") as fh:
            for doc_id, row in zip(matrix.doc_ids, matrix.vectors):
                fh.write(doc_id + " " + " ".join(repr(float(v)) for v in row) + "\n")


def _load_binary_embeddings(path: Path) -> EmbeddingMatrix:
    with path.open("rb") as fh:
        header = fh.readline().decode("utf-8", errors="replace").split()
        if len(header) != 3 or header[0] != EMBEDDING_FILE_MAGIC:
            raise DatasetError(f"{path}: malformed embedding header {header!r}")
        try:
            dim, count = int(header[1]), int(header[2])
        except ValueError:
            raise DatasetError(f"{path}: non-integer dimension/count in header") from None
        if dim <= 0 or count < 0:
            raise DatasetError(f"{path}: invalid dimension {dim} or count {count}")
        ids: list[str] = []
        rows = np.empty((count, dim), dtype=np.float64)
        record_size = 4 * dim
        for i in range(count):
            raw_id = fh.readline()
            if not raw_id.endswith(b"\n"):
                raise DatasetError(f"{path}: truncated id for record {i}")
            ids.append(raw_id[:-1].decode("utf-8"))
            blob = fh.read(record_size)
            if len(blob) != record_size:
                raise DatasetError(f"{path}: truncated vector for record {i}")
            rows[i] = np.frombuffer(blob, dtype="<f4")
    return EmbeddingMatrix(ids, rows)


def _load_text_embeddings(path: Path) -> EmbeddingMatrix:
    ids: list[str] = []
    rows: list[list[float]] = []
    dim: int | None = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) < 2:
                raise DatasetError(f"{path}:{lineno}: expected 'id v1 v2 ...'")
            try:
                values = [float(v) for v in parts[1:]]
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: non-numeric embedding value") from None
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise DatasetError(
                    f"{path}:{lineno}: dimension {len(values)} differs from {dim}"
                )
            ids.append(parts[0])
            rows.append(values)
    if not ids:
        raise DatasetError(f"{path}: empty embedding file")
    return EmbeddingMatrix(ids, np.asarray(rows))


def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    """Load a matrix from either format, sniffing the binary magic."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            magic = fh.read(len(EMBEDDING_FILE_MAGIC))
    except OSError as exc:
        raise DatasetError(f"cannot read embeddings file {path}: {exc}") from exc
    if magic == EMBEDDING_FILE_MAGIC.encode("utf-8"):
        return _load_binary_embeddings(path)
    return _load_text_embeddings(path)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors of equal dimension."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DegenerateInputError(f"cosine needs equal-shape 1-D vectors, got {a.shape} and {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise DegenerateInputError("cosine similarity undefined for zero-norm vector")
    return float(np.dot(a, b) / (norm_a * norm_b))


@dataclass(frozen=True)
class IddsParams:
    """Weighting for the IDDS score; ``lam`` is the unlabeled-term weight."""

    lam: float = 0.67

    def __post_init__(self) -> None:
        if not 0.0 <= self.lam <= 1.0:
            raise DegenerateInputError(f"lambda must be in [0, 1], got {self.lam}")


def _unit_rows(matrix: EmbeddingMatrix) -> np.ndarray:
    norms = np.linalg.norm(matrix.vectors, axis=1)
    zero = np.nonzero(norms == 0.0)[0]
    if zero.size:
        raise DegenerateInputError(
            f"zero-norm embedding for doc {matrix.doc_ids[int(zero[0])]!r}"
        )
    return matrix.vectors / norms[:, None]


def idds_scores(
    unlabeled: EmbeddingMatrix,
    labeled_and_excluded: EmbeddingMatrix | None,
    params: IddsParams = IddsParams(),
) -> dict[str, float]:
    """IDDS score for every unlabeled doc in one vectorized pass.

    The unlabeled term averages similarity over the full pool including
    the doc itself; the penalty term is zero when the penalty set is
    empty or ``None``.
    """
    if len(unlabeled) == 0:
        return {}
    units = _unit_rows(unlabeled)
    pool_term = units @ units.mean(axis=0)
    if labeled_and_excluded is None or len(labeled_and_excluded) == 0:
        penalty_term = np.zeros(len(unlabeled))
    else:
        penalty_units = _unit_rows(labeled_and_excluded)
        penalty_term = units @ penalty_units.mean(axis=0)
    scores = params.lam * pool_term - (1.0 - params.lam) * penalty_term
    return {doc_id: float(s) for doc_id, s in zip(unlabeled.doc_ids, scores)}


def select_top_k_idds(scores: Mapping[str, float], k: int) -> list[str]:
    """Ids of the ``k`` highest-scoring docs; ties broken by ascending id.

    Returns fewer than ``k`` when the mapping is smaller. Invariant under
    the iteration order of ``scores``.
    """
    if k < 1:
        raise DegenerateInputError(f"k must be >= 1, got {k}")
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return [doc_id for doc_id, _ in ranked[:k]]


class IddsScorer:
    """Incrementally updatable IDDS scores over a shrinking pool.

    Maintains the unlabeled-pool and penalty-set unit-vector running sums
    so that retiring a doc (moving it from the pool into the penalty set)
    costs O(d) instead of a full recomputation. Score values stay equal
    to a fresh :func:`idds_scores` call up to float addition order.
    """

    def __init__(
        self,
        embeddings: EmbeddingMatrix,
        unlabeled_ids: Sequence[str],
        penalty_ids: Sequence[str] = (),
        params: IddsParams = IddsParams(),
    ) -> None:
        self._params = params
        self._unit: dict[str, np.ndarray] = {}
        for doc_id in list(unlabeled_ids) + list(penalty_ids):
            row = embeddings.row(doc_id)
            norm = float(np.linalg.norm(row))
            if norm == 0.0:
                raise DegenerateInputError(f"zero-norm embedding for doc {doc_id!r}")
            self._unit[doc_id] = row / norm
        self._pool: list[str] = list(unlabeled_ids)
        self._pool_set = set(self._pool)
        if len(self._pool_set) != len(self._pool):
            raise DegenerateInputError("duplicate ids in unlabeled pool")
        dim = embeddings.dimension
        self._pool_sum = np.zeros(dim)
        for doc_id in self._pool:
            self._pool_sum += self._unit[doc_id]
        self._penalty_sum = np.zeros(dim)
        self._penalty_count = 0
        for doc_id in penalty_ids:
            self._penalty_sum += self._unit[doc_id]
            self._penalty_count += 1

    @property
    def pool_ids(self) -> tuple[str, ...]:
        return tuple(self._pool)

    def scores(self) -> dict[str, float]:
        """Current scores for every doc still in the pool."""
        if not self._pool:
            return {}
        units = np.vstack([self._unit[d] for d in self._pool])
        pool_term = units @ (self._pool_sum / len(self._pool))
        if self._penalty_count:
            penalty_term = units @ (self._penalty_sum / self._penalty_count)
        else:
            penalty_term = np.zeros(len(self._pool))
        lam = self._params.lam
        values = lam * pool_term - (1.0 - lam) * penalty_term
        return {doc_id: float(v) for doc_id, v in zip(self._pool, values)}

    def retire(self, doc_id: str) -> None:
        """Move ``doc_id`` out of the pool and into the penalty set."""
        if doc_id not in self._pool_set:
            raise UnknownDocumentError(f"doc {doc_id!r} is not in the scoring pool")
        self._pool_set.remove(doc_id)
        self._pool.remove(doc_id)
        unit = self._unit[doc_id]
        self._pool_sum -= unit
        self._penalty_sum += unit
        self._penalty_count += 1


def diversity_score(matrix: EmbeddingMatrix) -> float:
    """Mean Euclidean distance of the rows from their centroid."""
    if len(matrix) == 0:
        raise DegenerateInputError("diversity_score needs at least one row")
    centroid = matrix.vectors.mean(axis=0)
    return float(np.linalg.norm(matrix.vectors - centroid, axis=1).mean())


def knn_density(
    x: np.ndarray,
    pool: EmbeddingMatrix,
    k: int = 10,
    exclude_id: str | None = None,
) -> float:
    """Mean Euclidean distance from ``x`` to its nearest pool neighbors.

    Uses the ``min(k, available)`` closest rows. When ``exclude_id`` names
    a pool row, that row is left out so a doc scored against a pool it
    belongs to never counts itself as a neighbor.
    """
    if k < 1:
        raise DegenerateInputError(f"k must be >= 1, got {k}")
    x = np.asarray(x, dtype=np.float64)
    vectors = pool.vectors
    if exclude_id is not None and exclude_id in pool:
        keep = [i for i, doc_id in enumerate(pool.doc_ids) if doc_id != exclude_id]
        vectors = vectors[keep]
    if vectors.shape[0] == 0:
        raise DegenerateInputError("knn_density needs at least one neighbor candidate")
    distances = np.linalg.norm(vectors - x, axis=1)
    kk = min(k, distances.shape[0])
    nearest = np.partition(distances, kk - 1)[:kk]
    return float(nearest.mean())


def outlier_score(
    labeled_ids: Sequence[str],
    all_embeddings: EmbeddingMatrix,
    unlabeled_pool: EmbeddingMatrix,
    k: int = 10,
) -> float:
    """Mean KNN density of the labeled docs measured against the pool.

    High values mean the labeled set sits in sparse regions (outlier-like
    picks); low values mean it hugs dense regions.
    """
    ids = list(labeled_ids)
    if not ids:
        raise DegenerateInputError("outlier_score needs a non-empty labeled set")
    if len(unlabeled_pool) == 0:
        raise DegenerateInputError("outlier_score needs a non-empty unlabeled pool")
    return float(
        np.mean([knn_density(all_embeddings.row(d), unlabeled_pool, k, exclude_id=d) for d in ids])
    )


def pca_project(matrix: EmbeddingMatrix, target_dim: int = 2) -> EmbeddingMatrix:
    """Project rows onto their top principal components.

    Rows are mean-centered; component signs follow a deterministic
    convention (the entry of largest magnitude in each component is made
    positive) so repeated runs produce identical coordinates.

    Raises:
        DegenerateInputError: with the component index when the data has
            fewer than ``target_dim`` directions of variance, or when
            there are fewer rows than ``target_dim``.
    """
    if target_dim < 1:
        raise DegenerateInputError(f"target_dim must be >= 1, got {target_dim}")
    if len(matrix) < target_dim:
        raise DegenerateInputError(
            f"need at least {target_dim} rows to extract {target_dim} components, got {len(matrix)}"
        )
    centered = matrix.vectors - matrix.vectors.mean(axis=0)
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    tol = max(centered.shape) * np.finfo(np.float64).eps * (singular[0] if singular.size else 0.0)
    components = []
    for c in range(target_dim):
        if c >= singular.size or singular[c] <= tol:
            raise DegenerateInputError(f"principal component {c + 1} has zero variance")
        comp = vt[c]
        pivot = int(np.argmax(np.abs(comp)))
        if comp[pivot] < 0:
            comp = -comp
        components.append(comp)
    coords = centered @ np.vstack(components).T
    return EmbeddingMatrix(matrix.doc_ids, coords)

"""Active-learning selection strategies over a labeled/unlabeled/excluded
pool split.

The combined strategy interleaves two kinds of picks per iteration:

* **targeted**: score the unlabeled pool with IDDS against the union of
  labeled and excluded docs, take the top-k candidates, measure each
  candidate's generation disagreement (BLEU variance over n stochastic
  passes), drop candidates whose disagreement exceeds ``tau`` (left in
  the pool), pick the argmax of the survivors, and retire the remaining
  survivors into the excluded set so later scoring ignores them;
* **random**: uniform draws from what is left of the pool.

Per iteration, ``s1 = ceil(p * s)`` picks are targeted and ``s2 = s - s1``
random; after the picks, the model is reset to its initial state and
fine-tuned on the full labeled set. Baselines reuse the same pieces:
pure random, pure IDDS (penalty = labeled set only, no exclusions), and
uncertainty-only (BLEU variance over a random subset).
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from random import Random
from typing import Sequence

from .backend import SummarizationBackend
from .corpus import Corpus
from .embedspace import EmbeddingMatrix, IddsParams, IddsScorer, select_top_k_idds
from .errors import ConfigError, PoolExhaustedError, UnknownDocumentError
from .seeding import stable_seed
from .textmetrics import bleuvar, tokenize

logger = logging.getLogger(__name__)

PROVENANCES = ("warmup", "targeted", "random", "baseline")

# Absorbs binary-float artifacts in p*s (0.1*30 = 3.0000000000000004 must
# still mean s1 = 3, not 4).
_CEIL_EPSILON = 1e-9


def split_iteration(p: float, per_iter: int) -> tuple[int, int]:
    """(targeted, random) pick counts for one iteration of size ``per_iter``."""
    s1 = math.ceil(p * per_iter - _CEIL_EPSILON)
    s1 = min(max(s1, 0), per_iter)
    return s1, per_iter - s1


@dataclass(frozen=True)
class DualConfig:
    """Knobs of the combined strategy and its budget arithmetic.

    ``p`` is the targeted fraction of each iteration's picks; ``warmup``
    docs are randomly labeled before the first iteration and count toward
    ``budget``.
    """

    budget: int = 150
    per_iter: int = 10
    warmup: int = 0
    p: float = 0.5
    k: int = 10
    tau: float = 1.0
    n: int = 10
    lam: float = 0.67
    seed: int = 0

    def __post_init__(self) -> None:
        if self.budget < 1:
            raise ConfigError(f"budget must be >= 1, got {self.budget}")
        if self.per_iter < 1:
            raise ConfigError(f"per_iter must be >= 1, got {self.per_iter}")
        if self.warmup < 0:
            raise ConfigError(f"warmup must be >= 0, got {self.warmup}")
        if self.warmup + self.per_iter > self.budget:
            raise ConfigError(
                f"warmup {self.warmup} + per_iter {self.per_iter} exceeds budget {self.budget}"
            )
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"p must be in [0, 1], got {self.p}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.tau <= 0.0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")
        if self.n < 2:
            raise ConfigError(f"n must be >= 2 stochastic passes, got {self.n}")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must be in [0, 1], got {self.lam}")

    @property
    def s1(self) -> int:
        return split_iteration(self.p, self.per_iter)[0]

    @property
    def s2(self) -> int:
        return split_iteration(self.p, self.per_iter)[1]

    @property
    def idds_params(self) -> IddsParams:
        return IddsParams(lam=self.lam)


@dataclass(frozen=True)
class Selection:
    """One labeled document and how it was chosen."""

    doc_id: str
    provenance: str
    iteration: int
    bleuvar: float | None = None
    idds_score: float | None = None

    def __post_init__(self) -> None:
        if self.provenance not in PROVENANCES:
            raise ConfigError(f"unknown provenance {self.provenance!r}")
        if self.provenance == "targeted" and self.bleuvar is None:
            raise ConfigError("targeted selections must carry a bleuvar score")


@dataclass
class PoolState:
    """Disjoint labeled / unlabeled / excluded id lists, in move order."""

    labeled: list[str] = field(default_factory=list)
    unlabeled: list[str] = field(default_factory=list)
    excluded: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._labeled_set = set(self.labeled)
        self._unlabeled_set = set(self.unlabeled)
        self._excluded_set = set(self.excluded)
        total = len(self.labeled) + len(self.unlabeled) + len(self.excluded)
        distinct = len(self._labeled_set | self._unlabeled_set | self._excluded_set)
        if total != distinct or len(self._labeled_set) != len(self.labeled) \
                or len(self._unlabeled_set) != len(self.unlabeled) \
                or len(self._excluded_set) != len(self.excluded):
            raise ConfigError("pool id lists overlap or contain duplicates")

    @classmethod
    def from_unlabeled(cls, ids: Sequence[str]) -> "PoolState":
        return cls(unlabeled=list(ids))

    def _take_from_unlabeled(self, doc_id: str) -> None:
        if doc_id not in self._unlabeled_set:
            raise UnknownDocumentError(f"doc {doc_id!r} is not unlabeled")
        self._unlabeled_set.remove(doc_id)
        self.unlabeled.remove(doc_id)

    def move_to_labeled(self, doc_id: str) -> None:
        self._take_from_unlabeled(doc_id)
        self.labeled.append(doc_id)
        self._labeled_set.add(doc_id)

    def move_to_excluded(self, doc_id: str) -> None:
        self._take_from_unlabeled(doc_id)
        self.excluded.append(doc_id)
        self._excluded_set.add(doc_id)

    def is_unlabeled(self, doc_id: str) -> bool:
        return doc_id in self._unlabeled_set

    def penalty_ids(self) -> list[str]:
        """Labeled plus excluded, the targeted step's IDDS penalty set."""
        return self.labeled + self.excluded


def select_random(pool: PoolState, count: int, rng: Random) -> list[str]:
    """Uniform sample of ``count`` unlabeled ids; does not mutate the pool."""
    if count < 0:
        raise ConfigError(f"count must be >= 0, got {count}")
    if count > len(pool.unlabeled):
        raise PoolExhaustedError(
            f"asked for {count} random docs but only {len(pool.unlabeled)} are unlabeled"
        )
    return rng.sample(pool.unlabeled, count)


def mc_noise_seed(root_seed: int, doc_id: str) -> int:
    """Stochastic-generation seed for one candidate, keyed off the run seed."""
    return stable_seed(root_seed, "mc", doc_id)


def _bleuvar_of_candidates(
    candidates: Sequence[str],
    pool: PoolState,
    config: DualConfig,
    corpus: Corpus,
    backend: SummarizationBackend,
    max_workers: int = 1,
) -> dict[str, float]:
    """BLEU variance per candidate via n stochastic passes each."""

    def score_one(doc_id: str) -> float:
        if not pool.is_unlabeled(doc_id):
            raise UnknownDocumentError(
                f"refusing to generate for doc {doc_id!r}: not in the unlabeled pool"
            )
        doc = corpus.train_doc(doc_id)
        batch = backend.generate_stochastic(doc, config.n, mc_noise_seed(config.seed, doc_id))
        if len(batch.summaries) != config.n:
            raise ConfigError(
                f"backend returned {len(batch.summaries)} summaries, expected {config.n}"
            )
        return bleuvar([tokenize(s) for s in batch.summaries]).value

    if max_workers > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool_exec:
            values = list(pool_exec.map(score_one, candidates))
    else:
        values = [score_one(doc_id) for doc_id in candidates]
    return dict(zip(candidates, values))


def dual_targeted_pick(
    pool: PoolState,
    config: DualConfig,
    corpus: Corpus,
    embeddings: EmbeddingMatrix,
    backend: SummarizationBackend,
    scorer: IddsScorer | None = None,
    iteration: int = 0,
    max_workers: int = 1,
) -> Selection | None:
    """One targeted pick; returns None when no candidate qualifies.

    Candidates whose disagreement exceeds ``tau`` are dropped but stay in
    the unlabeled pool; when every candidate is dropped (or the pool is
    empty) the pick is exhausted and nothing moves. Otherwise the
    highest-disagreement survivor is labeled and the other survivors are
    retired to the excluded set.
    """
    if not pool.unlabeled:
        return None
    if scorer is None:
        scorer = IddsScorer(embeddings, pool.unlabeled, pool.penalty_ids(), config.idds_params)
    scores = scorer.scores()
    candidates = select_top_k_idds(scores, config.k)
    disagreement = _bleuvar_of_candidates(candidates, pool, config, corpus, backend, max_workers)
    survivors = [doc_id for doc_id in candidates if disagreement[doc_id] <= config.tau]
    if not survivors:
        return None
    chosen = sorted(survivors, key=lambda d: (-disagreement[d], d))[0]
    pool.move_to_labeled(chosen)
    scorer.retire(chosen)
    for doc_id in survivors:
        if doc_id != chosen:
            pool.move_to_excluded(doc_id)
            scorer.retire(doc_id)
    return Selection(
        doc_id=chosen,
        provenance="targeted",
        iteration=iteration,
        bleuvar=disagreement[chosen],
        idds_score=scores[chosen],
    )


@dataclass(frozen=True)
class IterationOutcome:
    """What one strategy iteration produced."""

    selections: tuple[Selection, ...]
    exhausted: bool
    state_version: str | None
    selection_time_s: float = 0.0
    train_time_s: float = 0.0


def _reveal_and_finetune(pool: PoolState, corpus: Corpus, backend: SummarizationBackend) -> str:
    pairs = [corpus.reveal_reference(doc_id) for doc_id in pool.labeled]
    return backend.reset_and_finetune(pairs)


def dual_iteration(
    pool: PoolState,
    config: DualConfig,
    corpus: Corpus,
    embeddings: EmbeddingMatrix,
    backend: SummarizationBackend,
    rng: Random,
    iteration: int = 0,
    count: int | None = None,
    max_workers: int = 1,
) -> IterationOutcome:
    """One combined-strategy iteration: s1 targeted picks, s2 random picks,
    then a reset-and-finetune on the full labeled set.

    ``count`` overrides ``config.per_iter`` for a final short iteration;
    the p-split applies to the effective count. Stops early (exhausted)
    when targeted picks dry up or the pool runs out of random picks; the
    partial selections are still returned and trained on.
    """
    s_eff = config.per_iter if count is None else count
    if s_eff < 1:
        raise ConfigError(f"iteration size must be >= 1, got {s_eff}")
    s1, s2 = split_iteration(config.p, s_eff)
    selections: list[Selection] = []
    exhausted = False

    t0 = time.perf_counter()
    scorer = IddsScorer(embeddings, pool.unlabeled, pool.penalty_ids(), config.idds_params)
    for _ in range(s1):
        pick = dual_targeted_pick(
            pool, config, corpus, embeddings, backend,
            scorer=scorer, iteration=iteration, max_workers=max_workers,
        )
        if pick is None:
            exhausted = True
            logger.info(
                "iteration %d: targeted step exhausted after %d of %d picks",
                iteration, len(selections), s1,
            )
            break
        selections.append(pick)

    random_count = min(s2, len(pool.unlabeled))
    if random_count < s2:
        exhausted = True
        logger.info(
            "iteration %d: only %d of %d random picks available",
            iteration, random_count, s2,
        )
    for doc_id in select_random(pool, random_count, rng):
        pool.move_to_labeled(doc_id)
        selections.append(Selection(doc_id=doc_id, provenance="random", iteration=iteration))
    selection_time = time.perf_counter() - t0

    state_version = None
    train_time = 0.0
    if selections:
        t1 = time.perf_counter()
        state_version = _reveal_and_finetune(pool, corpus, backend)
        train_time = time.perf_counter() - t1
    return IterationOutcome(
        selections=tuple(selections),
        exhausted=exhausted,
        state_version=state_version,
        selection_time_s=selection_time,
        train_time_s=train_time,
    )


def run_random_baseline(
    pool: PoolState,
    count: int,
    rng: Random,
    iteration: int = 0,
) -> list[Selection]:
    """Label ``count`` uniform random docs (errors if the pool is smaller)."""
    chosen = select_random(pool, count, rng)
    out = []
    for doc_id in chosen:
        pool.move_to_labeled(doc_id)
        out.append(Selection(doc_id=doc_id, provenance="baseline", iteration=iteration))
    return out


def run_idds_baseline(
    pool: PoolState,
    embeddings: EmbeddingMatrix,
    params: IddsParams,
    count: int,
    iteration: int = 0,
) -> list[Selection]:
    """Greedy IDDS selection of ``count`` docs.

    The penalty set is the labeled set only: the baseline never consults
    or touches the excluded set, unlike the combined strategy.
    """
    if count > len(pool.unlabeled):
        raise PoolExhaustedError(
            f"asked for {count} IDDS picks but only {len(pool.unlabeled)} are unlabeled"
        )
    scorer = IddsScorer(embeddings, pool.unlabeled, pool.labeled, params)
    out = []
    for _ in range(count):
        scores = scorer.scores()
        chosen = select_top_k_idds(scores, 1)[0]
        pool.move_to_labeled(chosen)
        scorer.retire(chosen)
        out.append(
            Selection(
                doc_id=chosen,
                provenance="baseline",
                iteration=iteration,
                idds_score=scores[chosen],
            )
        )
    return out


def run_bas_baseline(
    pool: PoolState,
    config: DualConfig,
    corpus: Corpus,
    backend: SummarizationBackend,
    rng: Random,
    count: int | None = None,
    subset_size: int = 100,
    apply_tau: bool = True,
    iteration: int = 0,
    max_workers: int = 1,
) -> list[Selection]:
    """Uncertainty-only baseline: BLEU variance over a random subset.

    Draws ``min(subset_size, |U|)`` docs, scores each, optionally drops
    those above ``tau``, and labels the top ``count`` survivors by
    descending disagreement (ties by ascending id). May label fewer than
    ``count`` docs when the filter leaves too few survivors.
    """
    if not pool.unlabeled:
        raise PoolExhaustedError("unlabeled pool is empty")
    if subset_size < 1:
        raise ConfigError(f"subset_size must be >= 1, got {subset_size}")
    s_eff = config.per_iter if count is None else count
    subset = rng.sample(pool.unlabeled, min(subset_size, len(pool.unlabeled)))
    disagreement = _bleuvar_of_candidates(subset, pool, config, corpus, backend, max_workers)
    survivors = [d for d in subset if disagreement[d] <= config.tau] if apply_tau else list(subset)
    ranked = sorted(survivors, key=lambda d: (-disagreement[d], d))[:s_eff]
    out = []
    for doc_id in ranked:
        pool.move_to_labeled(doc_id)
        out.append(
            Selection(
                doc_id=doc_id,
                provenance="baseline",
                iteration=iteration,
                bleuvar=disagreement[doc_id],
            )
        )
    return out

"""Experiment harness: multi-repeat active-learning runs, per-iteration
evaluation, and file exports.

A run executes ``repeats`` independent repetitions of the same strategy,
each with a seed derived from the root seed. One repetition labels docs
iteration by iteration until the budget is reached, resetting and
fine-tuning the backend on the full labeled set after every iteration,
then scoring the test set (ROUGE-1/2/L means) and the labeled set's
embedding-space spread (diversity, outlier score).

Exports: ``records.jsonl`` (one iteration record per line),
``summary.csv`` (per-iteration mean/std across repeats),
``selections.csv`` (flat pick log), ``viz.csv`` (2-D PCA coordinates
tagged by selection provenance), ``config.resolved`` (the fully resolved
configuration) and ``run_status.json`` (per-repeat completion markers).
Wall times are measured around selection and training only; evaluation
is untimed.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__
from .backend import BackendDescriptor, SummarizationBackend, make_backend
from .corpus import Corpus, Document
from .embedspace import (
    EmbeddingMatrix,
    diversity_score,
    load_embeddings,
    outlier_score,
    pca_project,
)
from .errors import BackendError, ConfigError, ProtocolError
from .seeding import derive_rng, stable_seed
from .strategies import (
    DualConfig,
    PoolState,
    Selection,
    dual_iteration,
    run_bas_baseline,
    run_idds_baseline,
    run_random_baseline,
    select_random,
)
from .textmetrics import BLEU_SMOOTHING_EPSILON, MAX_BLEU_ORDER, rouge_scores

logger = logging.getLogger(__name__)

STRATEGIES = ("dual", "random", "idds", "bas")
KNN_K = 10

# Iterations that select nothing leave the model state unchanged, so
# deterministic strategies cannot recover; the subset-resampling baseline
# gets a few retries before the run is declared stuck.
_MAX_EMPTY_ITERATIONS = {"bas": 10}


@dataclass(frozen=True)
class ExperimentConfig:
    train_path: str
    test_path: str
    out_dir: str
    embeddings_path: str | None = None
    strategy: str = "dual"
    dual: DualConfig = field(default_factory=DualConfig)
    repeats: int = 6
    backend: BackendDescriptor = field(default_factory=BackendDescriptor)
    bas_subset_size: int = 100
    bas_apply_tau: bool = True
    warmup_strategy: str = "random"
    eval_every: int = 1
    max_workers: int = 1
    parallel_repeats: bool = False

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")
        if self.bas_subset_size < 1:
            raise ConfigError(f"bas_subset_size must be >= 1, got {self.bas_subset_size}")
        if self.warmup_strategy not in ("random", "idds"):
            raise ConfigError(f"warmup_strategy must be 'random' or 'idds', got {self.warmup_strategy!r}")
        if self.eval_every < 1:
            raise ConfigError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.max_workers < 1:
            raise ConfigError(f"max_workers must be >= 1, got {self.max_workers}")


@dataclass(frozen=True)
class IterationRecord:
    """State of one repeat after one iteration (iteration 0 = warm-up)."""

    repeat: int
    seed: int
    iteration: int
    selections: tuple[Selection, ...]
    rouge1: float | None
    rouge2: float | None
    rougeL: float | None
    diversity_score: float | None
    outlier_score: float | None
    selection_time_s: float
    train_time_s: float
    labeled_count: int
    unlabeled_count: int
    excluded_count: int
    state_version: str | None

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["selections"] = [dataclasses.asdict(s) for s in self.selections]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "IterationRecord":
        selections = tuple(Selection(**s) for s in data["selections"])
        return cls(**{**data, "selections": selections})


@dataclass(frozen=True)
class RepeatResult:
    repeat: int
    seed: int
    records: tuple[IterationRecord, ...]
    status: str  # completed | exhausted | error
    error: str | None = None

    @property
    def selections(self) -> list[Selection]:
        return [s for record in self.records for s in record.selections]


def evaluate_test_set(
    backend: SummarizationBackend, test_docs: Sequence[Document]
) -> tuple[float, float, float]:
    """Mean ROUGE-1/2/L F1 of backend summaries against the references."""
    if not test_docs:
        raise ConfigError("cannot evaluate an empty test set")
    summaries = backend.summarize([d.source for d in test_docs])
    if len(summaries) != len(test_docs):
        raise ProtocolError(
            f"backend returned {len(summaries)} summaries for {len(test_docs)} test docs"
        )
    totals = [0.0, 0.0, 0.0]
    for summary, doc in zip(summaries, test_docs):
        scores = rouge_scores(summary, doc.reference)
        for i in range(3):
            totals[i] += scores[i]
    n = len(test_docs)
    return totals[0] / n, totals[1] / n, totals[2] / n


def _spread_metrics(
    pool: PoolState, embeddings: EmbeddingMatrix
) -> tuple[float | None, float | None]:
    diversity = diversity_score(embeddings.subset(pool.labeled)) if pool.labeled else None
    outlier = None
    if pool.labeled and pool.unlabeled:
        outlier = outlier_score(
            pool.labeled, embeddings, embeddings.subset(pool.unlabeled), k=KNN_K
        )
    return diversity, outlier


def _select_for_iteration(
    strategy: str,
    pool: PoolState,
    config: ExperimentConfig,
    dual_cfg: DualConfig,
    corpus: Corpus,
    embeddings: EmbeddingMatrix,
    backend: SummarizationBackend,
    iteration: int,
    count: int,
) -> tuple[list[Selection], float, float, str | None]:
    """Dispatch one iteration; returns (selections, select_s, train_s, state)."""
    rng = derive_rng(dual_cfg.seed, "select", iteration)
    if strategy == "dual":
        outcome = dual_iteration(
            pool, dual_cfg, corpus, embeddings, backend, rng,
            iteration=iteration, count=count, max_workers=config.max_workers,
        )
        return (
            list(outcome.selections),
            outcome.selection_time_s,
            outcome.train_time_s,
            outcome.state_version,
        )

    t0 = time.perf_counter()
    if strategy == "random":
        selections = run_random_baseline(pool, min(count, len(pool.unlabeled)), rng, iteration)
    elif strategy == "idds":
        selections = run_idds_baseline(
            pool, embeddings, dual_cfg.idds_params, min(count, len(pool.unlabeled)), iteration
        )
    else:  # bas
        selections = run_bas_baseline(
            pool, dual_cfg, corpus, backend, rng,
            count=count, subset_size=config.bas_subset_size,
            apply_tau=config.bas_apply_tau, iteration=iteration,
            max_workers=config.max_workers,
        )
    selection_time = time.perf_counter() - t0

    state_version = None
    train_time = 0.0
    if selections:
        pairs = [corpus.reveal_reference(d) for d in pool.labeled]
        t1 = time.perf_counter()
        state_version = backend.reset_and_finetune(pairs)
        train_time = time.perf_counter() - t1
    return selections, selection_time, train_time, state_version


def _warmup(
    pool: PoolState,
    config: ExperimentConfig,
    dual_cfg: DualConfig,
    corpus: Corpus,
    embeddings: EmbeddingMatrix,
    backend: SummarizationBackend,
) -> tuple[list[Selection], float, float, str | None]:
    rng = derive_rng(dual_cfg.seed, "warmup")
    t0 = time.perf_counter()
    if config.warmup_strategy == "random":
        ids = select_random(pool, dual_cfg.warmup, rng)
        selections = []
        for doc_id in ids:
            pool.move_to_labeled(doc_id)
            selections.append(Selection(doc_id=doc_id, provenance="warmup", iteration=0))
    else:
        picks = run_idds_baseline(pool, embeddings, dual_cfg.idds_params, dual_cfg.warmup, 0)
        selections = [dataclasses.replace(s, provenance="warmup") for s in picks]
    selection_time = time.perf_counter() - t0
    pairs = [corpus.reveal_reference(d) for d in pool.labeled]
    t1 = time.perf_counter()
    state_version = backend.reset_and_finetune(pairs)
    train_time = time.perf_counter() - t1
    return selections, selection_time, train_time, state_version


def _make_record(
    repeat_idx: int,
    seed: int,
    iteration: int,
    selections: Sequence[Selection],
    pool: PoolState,
    embeddings: EmbeddingMatrix,
    backend: SummarizationBackend,
    corpus: Corpus,
    evaluate: bool,
    selection_time: float,
    train_time: float,
    state_version: str | None,
) -> IterationRecord:
    rouge1 = rouge2 = rouge_l = None
    if evaluate:
        rouge1, rouge2, rouge_l = evaluate_test_set(backend, corpus.test_set)
    diversity, outlier = _spread_metrics(pool, embeddings)
    return IterationRecord(
        repeat=repeat_idx,
        seed=seed,
        iteration=iteration,
        selections=tuple(selections),
        rouge1=rouge1,
        rouge2=rouge2,
        rougeL=rouge_l,
        diversity_score=diversity,
        outlier_score=outlier,
        selection_time_s=selection_time,
        train_time_s=train_time,
        labeled_count=len(pool.labeled),
        unlabeled_count=len(pool.unlabeled),
        excluded_count=len(pool.excluded),
        state_version=state_version,
    )


def _run_repeat(
    corpus: Corpus,
    embeddings: EmbeddingMatrix,
    config: ExperimentConfig,
    repeat_idx: int,
) -> RepeatResult:
    seed = stable_seed(config.dual.seed, "repeat", repeat_idx)
    dual_cfg = dataclasses.replace(config.dual, seed=seed)
    backend = make_backend(config.backend, seed=seed)
    pool = PoolState.from_unlabeled(corpus.train_ids)
    records: list[IterationRecord] = []
    budget = dual_cfg.budget
    try:
        if dual_cfg.warmup > 0:
            selections, sel_s, train_s, state = _warmup(
                pool, config, dual_cfg, corpus, embeddings, backend
            )
            records.append(
                _make_record(
                    repeat_idx, seed, 0, selections, pool, embeddings, backend,
                    corpus, True, sel_s, train_s, state,
                )
            )
        iteration = 0
        consecutive_empty = 0
        empty_allowance = _MAX_EMPTY_ITERATIONS.get(config.strategy, 1)
        while len(pool.labeled) < budget and pool.unlabeled:
            iteration += 1
            count = min(dual_cfg.per_iter, budget - len(pool.labeled))
            selections, sel_s, train_s, state = _select_for_iteration(
                config.strategy, pool, config, dual_cfg, corpus, embeddings,
                backend, iteration, count,
            )
            if not selections:
                consecutive_empty += 1
                logger.info("repeat %d iteration %d selected nothing", repeat_idx, iteration)
                if consecutive_empty >= empty_allowance:
                    break
                continue
            consecutive_empty = 0
            final = len(pool.labeled) >= budget or not pool.unlabeled
            evaluate = (iteration % config.eval_every == 0) or final
            records.append(
                _make_record(
                    repeat_idx, seed, iteration, selections, pool, embeddings,
                    backend, corpus, evaluate, sel_s, train_s, state,
                )
            )
        status = "completed" if len(pool.labeled) >= budget else "exhausted"
        return RepeatResult(repeat_idx, seed, tuple(records), status)
    except BackendError as exc:
        logger.warning("repeat %d aborted: %s", repeat_idx, exc)
        return RepeatResult(repeat_idx, seed, tuple(records), "error", str(exc))


def resolve_embeddings(
    config: ExperimentConfig, corpus: Corpus
) -> EmbeddingMatrix:
    """Load the embedding file, or embed the train pool via the backend.

    Either way the result must cover every train doc id.
    """
    if config.embeddings_path:
        matrix = load_embeddings(config.embeddings_path)
    else:
        backend = make_backend(config.backend, seed=config.dual.seed)
        matrix = backend.embed(
            [d.source for d in corpus.train_pool], ids=list(corpus.train_ids)
        )
    missing = [d for d in corpus.train_ids if d not in matrix]
    if missing:
        raise ConfigError(f"no embedding for doc {missing[0]!r} ({len(missing)} missing)")
    return matrix


def run_experiment(
    config: ExperimentConfig,
    corpus: Corpus | None = None,
    embeddings: EmbeddingMatrix | None = None,
) -> list[RepeatResult]:
    """Execute all repeats; failed repeats are marked, not fatal."""
    if corpus is None:
        corpus = Corpus.load(config.train_path, config.test_path)
    if not corpus.test_set:
        raise ConfigError("test set is empty")
    if config.dual.budget > len(corpus.train_pool):
        raise ConfigError(
            f"budget {config.dual.budget} exceeds train pool size {len(corpus.train_pool)}"
        )
    if embeddings is None:
        embeddings = resolve_embeddings(config, corpus)
    if config.parallel_repeats and config.repeats > 1:
        with ThreadPoolExecutor(max_workers=config.repeats) as pool_exec:
            futures = [
                pool_exec.submit(_run_repeat, corpus, embeddings, config, r)
                for r in range(config.repeats)
            ]
            return [f.result() for f in futures]
    return [_run_repeat(corpus, embeddings, config, r) for r in range(config.repeats)]


# -- exports ------------------------------------------------------------


def _fmt(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def sample_mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Mean and sample standard deviation (n-1); one value gives std 0.0."""
    n = len(values)
    if n == 0:
        raise ValueError("sample_mean_std needs at least one value")
    mean = sum(values) / n
    if n == 1:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


_SUMMARY_METRICS = (
    ("rouge1", "rouge1"),
    ("rouge2", "rouge2"),
    ("rougeL", "rougeL"),
    ("diversity", "diversity_score"),
    ("outlier", "outlier_score"),
)


def export_results(results: Sequence[RepeatResult], out_dir: str | Path) -> None:
    """Write records.jsonl, summary.csv, selections.csv and run_status.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with (out / "records.jsonl").open("w", encoding="utf-8") as fh:
        for result in results:
            for record in result.records:
                fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")

    with (out / "selections.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["repeat", "iteration", "doc_id", "provenance", "idds_score", "bleuvar"])
        for result in results:
            for record in result.records:
                for sel in record.selections:
                    writer.writerow(
                        [
                            result.repeat,
                            record.iteration,
                            sel.doc_id,
                            sel.provenance,
                            _fmt(sel.idds_score),
                            _fmt(sel.bleuvar),
                        ]
                    )

    by_iteration: dict[int, list[IterationRecord]] = {}
    for result in results:
        for record in result.records:
            by_iteration.setdefault(record.iteration, []).append(record)
    with (out / "summary.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = ["iteration", "n_repeats", "labeled_mean"]
        for name, _ in _SUMMARY_METRICS:
            header += [f"{name}_mean", f"{name}_std"]
        header += ["selection_time_s_mean", "train_time_s_mean"]
        writer.writerow(header)
        for iteration in sorted(by_iteration):
            records = by_iteration[iteration]
            row: list[str] = [str(iteration), str(len(records))]
            labeled_mean, _ = sample_mean_std([r.labeled_count for r in records])
            row.append(_fmt(labeled_mean))
            for _, attr in _SUMMARY_METRICS:
                values = [getattr(r, attr) for r in records if getattr(r, attr) is not None]
                if values:
                    mean, std = sample_mean_std(values)
                    row += [_fmt(mean), _fmt(std)]
                else:
                    row += ["", ""]
            row.append(_fmt(sample_mean_std([r.selection_time_s for r in records])[0]))
            row.append(_fmt(sample_mean_std([r.train_time_s for r in records])[0]))
            writer.writerow(row)

    status = {
        "repeats": [
            {
                "repeat": r.repeat,
                "seed": r.seed,
                "status": r.status,
                "error": r.error,
                "iterations": len(r.records),
                "labeled": r.records[-1].labeled_count if r.records else 0,
            }
            for r in results
        ]
    }
    with (out / "run_status.json").open("w", encoding="utf-8") as fh:
        json.dump(status, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_records(path: str | Path) -> list[IterationRecord]:
    """Re-parse a records.jsonl file into IterationRecord objects."""
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(IterationRecord.from_dict(json.loads(line)))
    return records


def export_viz(
    selections: Sequence[Selection],
    embeddings: EmbeddingMatrix,
    out_path: str | Path,
) -> None:
    """Write id,x,y,tag rows: 2-D PCA of all embedded docs, each tagged
    'unselected' or with its selection provenance."""
    tags = {}
    for sel in selections:
        if sel.doc_id not in embeddings:
            raise ConfigError(f"no embedding for selected doc {sel.doc_id!r}")
        tags[sel.doc_id] = sel.provenance
    projected = pca_project(embeddings, target_dim=2)
    with Path(out_path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "x", "y", "tag"])
        for doc_id, row in zip(projected.doc_ids, projected.vectors):
            writer.writerow([doc_id, repr(float(row[0])), repr(float(row[1])), tags.get(doc_id, "unselected")])


def metric_metadata() -> dict:
    """Scoring configuration recorded alongside results for provenance."""
    return {
        "bleu": {
            "max_order": MAX_BLEU_ORDER,
            "weights": "uniform over effective orders",
            "smoothing_epsilon": BLEU_SMOOTHING_EPSILON,
            "no_overlap_score": 0.0,
            "brevity_penalty": "exp(1 - ref_len/cand_len) when candidate shorter",
        },
        "rouge": {"variants": ["rouge1", "rouge2", "rougeL"], "measure": "f1"},
        "tokenizer": "lowercase, unicode whitespace split, punctuation detached",
        "knn_k": KNN_K,
        "tie_breaks": "ascending doc id",
    }


def write_resolved_config(config: ExperimentConfig, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = dataclasses.asdict(config)
    payload["metadata"] = {"package_version": __version__, "metrics": metric_metadata()}
    with (out / "config.resolved").open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def exit_hint(results: Sequence[RepeatResult]) -> int:
    """CLI exit code implied by repeat statuses (0 ok, 2 backend, 3 exhausted)."""
    if any(r.status == "error" for r in results):
        return 2
    if any(r.status == "exhausted" for r in results):
        return 3
    return 0

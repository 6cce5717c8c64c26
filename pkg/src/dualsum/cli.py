"""Command-line interface.

Subcommands: ``run`` (full experiment), ``score`` (one-off IDDS or
disagreement scoring of a pool), ``metrics`` (diversity/outlier of a
labeled-id file), ``export-viz`` (projection coordinates from a finished
run) and ``report`` (figures from exported files).

``run`` accepts a JSON config file mirroring the experiment config;
flags given on the command line override file values, and the fully
resolved config is written into the output directory.

Exit codes: 0 success, 1 config error, 2 backend error, 3 pool
exhausted before reaching the budget.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .backend import BackendDescriptor, make_backend
from .corpus import Corpus, load_dataset
from .embedspace import (
    IddsParams,
    diversity_score,
    idds_scores,
    load_embeddings,
    outlier_score,
    select_top_k_idds,
)
from .errors import (
    BackendError,
    ConfigError,
    DatasetError,
    DegenerateInputError,
    DualSumError,
    PoolExhaustedError,
    UnknownDocumentError,
)
from .harness import (
    ExperimentConfig,
    exit_hint,
    export_results,
    export_viz,
    resolve_embeddings,
    run_experiment,
    write_resolved_config,
)
from .strategies import DualConfig, Selection
from .textmetrics import bleuvar, tokenize


class _Parser(argparse.ArgumentParser):
    # Usage problems are config errors (exit 1), not argparse's default 2.
    def error(self, message: str):  # noqa: D102
        raise ConfigError(message)


def _read_id_file(path: str) -> list[str]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"id file not found: {p}")
    with p.open("r", encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def _load_config_file(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        with p.open("r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc.msg})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: config root must be an object")
    return data


_DUAL_FIELDS = ("budget", "per_iter", "warmup", "p", "k", "tau", "n", "lam", "seed")
_TOP_FIELDS = (
    "train_path", "test_path", "out_dir", "embeddings_path", "strategy",
    "repeats", "bas_subset_size", "bas_apply_tau", "warmup_strategy",
    "eval_every", "max_workers", "parallel_repeats",
)
_BACKEND_FIELDS = ("kind", "endpoint", "embedding_dim", "max_summary_tokens", "mc_passes_default", "timeout_s")


def _resolve_run_config(args: argparse.Namespace) -> ExperimentConfig:
    file_cfg = _load_config_file(args.config) if args.config else {}
    unknown = set(file_cfg) - set(_TOP_FIELDS) - {"dual", "backend"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    dual_cfg = dict(file_cfg.get("dual", {}))
    backend_cfg = dict(file_cfg.get("backend", {}))
    top_cfg = {k: v for k, v in file_cfg.items() if k in _TOP_FIELDS}

    overrides = {
        "train_path": args.train,
        "test_path": args.test,
        "embeddings_path": args.embeddings,
        "out_dir": args.out,
        "strategy": args.strategy,
        "repeats": args.repeats,
        "warmup_strategy": args.warmup_strategy,
        "eval_every": args.eval_every,
        "max_workers": args.max_workers,
        "bas_subset_size": args.bas_subset,
    }
    for key, value in overrides.items():
        if value is not None:
            top_cfg[key] = value
    if args.parallel_repeats:
        top_cfg["parallel_repeats"] = True
    if args.bas_no_tau_filter:
        top_cfg["bas_apply_tau"] = False

    dual_overrides = {
        "budget": args.budget,
        "per_iter": args.per_iter,
        "warmup": args.warmup,
        "p": args.p,
        "k": args.k,
        "tau": args.tau,
        "n": args.n,
        "lam": getattr(args, "lambda"),
        "seed": args.seed,
    }
    for key, value in dual_overrides.items():
        if value is not None:
            dual_cfg[key] = value
    if args.backend is not None:
        backend_cfg["kind"] = args.backend
    if args.endpoint is not None:
        backend_cfg["endpoint"] = args.endpoint

    for field in ("train_path", "test_path", "out_dir"):
        if field not in top_cfg:
            raise ConfigError(f"missing required setting {field!r} (flag or config file)")
    try:
        dual = DualConfig(**dual_cfg)
        backend = BackendDescriptor(**backend_cfg)
        return ExperimentConfig(dual=dual, backend=backend, **top_cfg)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _cmd_run(args: argparse.Namespace) -> int:
    config = _resolve_run_config(args)
    corpus = Corpus.load(config.train_path, config.test_path)
    embeddings = resolve_embeddings(config, corpus)
    out = Path(config.out_dir)
    write_resolved_config(config, out)
    results = run_experiment(config, corpus, embeddings)
    export_results(results, out)
    for result in results:
        labeled = result.records[-1].labeled_count if result.records else 0
        print(
            f"[run] repeat {result.repeat}: {result.status}, "
            f"{len(result.records)} iterations, {labeled} labeled"
            + (f" ({result.error})" if result.error else "")
        )
    viz_source = next((r for r in results if r.repeat == args.viz_repeat), None)
    if viz_source is None:
        raise ConfigError(f"--viz-repeat {args.viz_repeat} is out of range")
    export_viz(viz_source.selections, embeddings, out / "viz.csv")
    if args.figures:
        from .reports import render_report

        for path in render_report(out):
            print(f"[run] figure {path}")
    print(f"[run] results in {out}")
    return exit_hint(results)


def _cmd_score(args: argparse.Namespace) -> int:
    docs = load_dataset(args.train, "train")
    embeddings = load_embeddings(args.embeddings)
    labeled_ids = _read_id_file(args.labeled) if args.labeled else []
    labeled_set = set(labeled_ids)
    unlabeled_ids = [d.id for d in docs if d.id not in labeled_set]
    if not unlabeled_ids:
        raise ConfigError("no unlabeled docs to score")
    for doc_id in list(labeled_set) + unlabeled_ids:
        if doc_id not in embeddings:
            raise ConfigError(f"no embedding for doc {doc_id!r}")
    params = IddsParams(lam=getattr(args, "lambda"))
    scores = idds_scores(
        embeddings.subset(unlabeled_ids),
        embeddings.subset(labeled_ids) if labeled_ids else None,
        params,
    )

    disagreement: dict[str, float] = {}
    if args.bleuvar:
        descriptor = BackendDescriptor(
            kind=args.backend or "mock", endpoint=args.endpoint or ""
        )
        backend = make_backend(descriptor, seed=args.seed)
        by_id = {d.id: d for d in docs}
        for doc_id in select_top_k_idds(scores, args.k):
            batch = backend.generate_stochastic(by_id[doc_id], args.n, args.seed)
            disagreement[doc_id] = bleuvar([tokenize(s) for s in batch.summaries]).value

    target = Path(args.out) if args.out else None
    fh = target.open("w", encoding="utf-8", newline="") if target else sys.stdout
    try:
        writer = csv.writer(fh)
        header = ["id", "idds_score"] + (["bleuvar"] if args.bleuvar else [])
        writer.writerow(header)
        for doc_id in sorted(scores, key=lambda d: (-scores[d], d)):
            row = [doc_id, repr(scores[doc_id])]
            if args.bleuvar:
                row.append(repr(disagreement[doc_id]) if doc_id in disagreement else "")
            writer.writerow(row)
    finally:
        if target:
            fh.close()
    return 0


def _cmd_metrics(args: argparse.Namespace) -> int:
    embeddings = load_embeddings(args.embeddings)
    labeled_ids = _read_id_file(args.labeled)
    if not labeled_ids:
        raise ConfigError(f"no ids in {args.labeled}")
    labeled_set = set(labeled_ids)
    pool_ids = [d for d in embeddings.doc_ids if d not in labeled_set]
    if not pool_ids:
        raise ConfigError("every embedded doc is labeled; no pool to measure against")
    diversity = diversity_score(embeddings.subset(labeled_ids))
    outlier = outlier_score(labeled_ids, embeddings, embeddings.subset(pool_ids), k=args.knn_k)
    print(f"diversity_score {diversity!r}")
    print(f"outlier_score {outlier!r}")
    if args.out:
        with Path(args.out).open("w", encoding="utf-8") as fh:
            json.dump(
                {"diversity_score": diversity, "outlier_score": outlier, "knn_k": args.knn_k},
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")
    return 0


def _cmd_export_viz(args: argparse.Namespace) -> int:
    embeddings = load_embeddings(args.embeddings)
    path = Path(args.selections)
    if not path.is_file():
        raise ConfigError(f"selections file not found: {path}")
    selections = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            if int(row["repeat"]) != args.repeat:
                continue
            selections.append(
                Selection(
                    doc_id=row["doc_id"],
                    provenance=row["provenance"],
                    iteration=int(row["iteration"]),
                    idds_score=float(row["idds_score"]) if row.get("idds_score") else None,
                    bleuvar=float(row["bleuvar"]) if row.get("bleuvar") else None,
                )
            )
    export_viz(selections, embeddings, args.out)
    print(f"[export-viz] wrote {args.out} ({len(selections)} tagged selections)")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    from .reports import render_report

    for path in render_report(args.dir, args.compare):
        print(f"[report] wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dualsum", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a multi-repeat experiment")
    run.add_argument("--config", help="JSON config file; flags override its values")
    run.add_argument("--train", help="train split file")
    run.add_argument("--test", help="test split file")
    run.add_argument("--embeddings", help="embedding matrix file (default: embed via backend)")
    run.add_argument("--out", help="output directory")
    run.add_argument("--strategy", choices=["dual", "random", "idds", "bas"])
    run.add_argument("--backend", choices=["mock", "remote"])
    run.add_argument("--endpoint", help="remote backend base URL")
    run.add_argument("--budget", type=int, help="total labeling budget B")
    run.add_argument("--per-iter", type=int, help="docs labeled per iteration s")
    run.add_argument("--warmup", type=int, help="warm-start size s0 (counts toward B)")
    run.add_argument("--p", type=float, help="targeted fraction per iteration")
    run.add_argument("--k", type=int, help="IDDS candidate pool size per targeted pick")
    run.add_argument("--tau", type=float, help="disagreement filter threshold")
    run.add_argument("--n", type=int, help="stochastic passes per candidate")
    run.add_argument("--lambda", type=float, help="IDDS unlabeled-term weight")
    run.add_argument("--seed", type=int, help="root seed")
    run.add_argument("--repeats", type=int, help="seeded repetitions")
    run.add_argument("--warmup-strategy", choices=["random", "idds"])
    run.add_argument("--eval-every", type=int, help="evaluate every N iterations")
    run.add_argument("--max-workers", type=int, help="parallel candidate scoring bound")
    run.add_argument("--parallel-repeats", action="store_true", help="run repeats concurrently")
    run.add_argument("--bas-subset", type=int, help="subset size m for the bas strategy")
    run.add_argument("--bas-no-tau-filter", action="store_true", help="rank all subset docs, skip the tau filter")
    run.add_argument("--viz-repeat", type=int, default=0, help="repeat whose selections tag viz.csv")
    run.add_argument("--figures", action="store_true", help="also render report figures")
    run.set_defaults(func=_cmd_run)

    score = sub.add_parser("score", help="score a pool once with IDDS (and optionally disagreement)")
    score.add_argument("--train", required=True)
    score.add_argument("--embeddings", required=True)
    score.add_argument("--labeled", help="file of already-labeled ids, one per line")
    score.add_argument("--lambda", type=float, default=0.67)
    score.add_argument("--bleuvar", action="store_true", help="also score the top-k by disagreement")
    score.add_argument("--backend", choices=["mock", "remote"])
    score.add_argument("--endpoint")
    score.add_argument("--k", type=int, default=10)
    score.add_argument("--n", type=int, default=10)
    score.add_argument("--seed", type=int, default=0)
    score.add_argument("--out", help="CSV target (default: stdout)")
    score.set_defaults(func=_cmd_score)

    metrics = sub.add_parser("metrics", help="diversity/outlier scores of a labeled-id file")
    metrics.add_argument("--embeddings", required=True)
    metrics.add_argument("--labeled", required=True, help="file of labeled ids, one per line")
    metrics.add_argument("--knn-k", type=int, default=10)
    metrics.add_argument("--out", help="optional JSON target")
    metrics.set_defaults(func=_cmd_metrics)

    export = sub.add_parser("export-viz", help="2-D projection of a finished run's pool")
    export.add_argument("--embeddings", required=True)
    export.add_argument("--selections", required=True, help="selections.csv from a run")
    export.add_argument("--repeat", type=int, default=0, help="repeat whose picks are tagged")
    export.add_argument("--out", required=True)
    export.set_defaults(func=_cmd_export_viz)

    report = sub.add_parser("report", help="render figures for an experiment directory")
    report.add_argument("--dir", required=True, help="experiment output directory")
    report.add_argument("--compare", nargs="*", help="other run directories for the curve figure")
    report.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ConfigError, DatasetError, DegenerateInputError, UnknownDocumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PoolExhaustedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except BackendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DualSumError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

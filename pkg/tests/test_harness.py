"""Experiment loop, result exports and the command line entry point."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from dualsum.backend import BackendDescriptor
from dualsum.backend.mock import MockBackend
from dualsum.cli import main
from dualsum.corpus import Corpus, Document
from dualsum.errors import ConfigError
from dualsum.harness import (
    ExperimentConfig,
    evaluate_test_set,
    exit_hint,
    export_results,
    export_viz,
    load_records,
    resolve_embeddings,
    run_experiment,
    sample_mean_std,
)
from dualsum.strategies import DualConfig, Selection

from conftest import synthetic_documents, write_corpus, write_embeddings


def experiment_config(tmp_path, **overrides) -> ExperimentConfig:
    train, test = write_corpus(tmp_path, n_train=30, n_test=4, seed=3)
    dual = overrides.pop("dual", DualConfig(budget=8, per_iter=4, k=2, n=4, seed=5))
    defaults = dict(
        train_path=str(train),
        test_path=str(test),
        out_dir=str(tmp_path / "out"),
        dual=dual,
        repeats=2,
        backend=BackendDescriptor(kind="mock", embedding_dim=8),
    )
    defaults.update(overrides)
    return ExperimentConfig(**defaults)


class TestExperimentConfig:
    def test_validation(self, tmp_path):
        with pytest.raises(ConfigError):
            experiment_config(tmp_path, strategy="psychic")
        with pytest.raises(ConfigError):
            experiment_config(tmp_path, repeats=0)
        with pytest.raises(ConfigError):
            experiment_config(tmp_path, eval_every=0)
        with pytest.raises(ConfigError):
            experiment_config(tmp_path, warmup_strategy="alphabetical")


class TestSampleStats:
    def test_two_values(self):
        mean, std = sample_mean_std([0.2, 0.4])
        assert mean == pytest.approx(0.3, abs=1e-12)
        assert std == pytest.approx(math.sqrt(0.02), abs=1e-12)
        assert std == pytest.approx(0.1414213562373095, abs=1e-12)

    def test_single_value_has_zero_std(self):
        assert sample_mean_std([0.7]) == (0.7, 0.0)


class TestEvaluateTestSet:
    def test_identity_backend_scores_one(self):
        class IdentityBackend:
            def summarize(self, texts):
                return list(texts)

        docs = [Document(id=f"t{i}", source=f"same text {i}", reference=f"same text {i}") for i in range(3)]
        assert evaluate_test_set(IdentityBackend(), docs) == (1.0, 1.0, 1.0)

    def test_empty_test_set_rejected(self):
        with pytest.raises(ConfigError):
            evaluate_test_set(MockBackend(seed=0), [])


class TestRunExperiment:
    def test_budget_reached_across_iterations(self, tmp_path):
        config = experiment_config(tmp_path)
        results = run_experiment(config)
        assert len(results) == 2
        for result in results:
            assert result.status == "completed"
            assert result.records[-1].labeled_count == 8
            assert [r.iteration for r in result.records] == [1, 2]
            for record in result.records:
                assert len(record.selections) == 4
                assert record.labeled_count + record.unlabeled_count + record.excluded_count == 30
                assert record.rouge1 is not None and 0.0 <= record.rouge1 <= 1.0
                assert record.state_version is not None

    def test_repeats_use_distinct_seeds_and_differ(self, tmp_path):
        config = experiment_config(tmp_path, strategy="random")
        results = run_experiment(config)
        assert results[0].seed != results[1].seed
        picks = [tuple(s.doc_id for s in r.selections) for r in results]
        assert picks[0] != picks[1]

    def test_deterministic_modulo_timing(self, tmp_path):
        def normalized(records):
            out = []
            for record in records:
                data = record.to_dict()
                data["selection_time_s"] = 0.0
                data["train_time_s"] = 0.0
                out.append(data)
            return out

        runs = []
        for _ in range(2):
            results = run_experiment(experiment_config(tmp_path))
            runs.append([normalized(r.records) for r in results])
        assert runs[0] == runs[1]

    def test_warmup_record_is_iteration_zero(self, tmp_path):
        dual = DualConfig(budget=8, per_iter=4, warmup=4, k=2, n=4, seed=5)
        config = experiment_config(tmp_path, dual=dual)
        results = run_experiment(config)
        for result in results:
            warm = result.records[0]
            assert warm.iteration == 0
            assert len(warm.selections) == 4
            assert all(s.provenance == "warmup" for s in warm.selections)
            assert warm.labeled_count == 4
            # Warm-up counts toward the budget: one more iteration finishes.
            assert result.records[-1].labeled_count == 8

    def test_idds_warmup_is_deterministic(self, tmp_path):
        dual = DualConfig(budget=8, per_iter=4, warmup=4, k=2, n=4, seed=5)
        picks = []
        for _ in range(2):
            config = experiment_config(tmp_path, dual=dual, warmup_strategy="idds")
            results = run_experiment(config)
            picks.append([s.doc_id for s in results[0].records[0].selections])
        assert picks[0] == picks[1]

    def test_eval_every_skips_intermediate_iterations(self, tmp_path):
        dual = DualConfig(budget=8, per_iter=2, k=2, n=4, seed=5)
        config = experiment_config(tmp_path, dual=dual, eval_every=2)
        results = run_experiment(config)
        for result in results:
            by_iter = {r.iteration: r for r in result.records}
            assert by_iter[1].rouge1 is None
            assert by_iter[2].rouge1 is not None
            assert by_iter[3].rouge1 is None
            assert by_iter[4].rouge1 is not None  # final is always evaluated

    def test_final_partial_iteration_clamps_count(self, tmp_path):
        dual = DualConfig(budget=7, per_iter=4, k=2, n=4, seed=5)
        config = experiment_config(tmp_path, dual=dual)
        results = run_experiment(config)
        for result in results:
            assert result.records[-1].labeled_count == 7
            assert len(result.records[-1].selections) == 3

    def test_exhaustion_is_reported_not_fatal(self, tmp_path):
        # k=4 with p=1 retires 4 docs per pick, so a 12-doc pool cannot
        # reach a budget of 12.
        train, test = write_corpus(tmp_path, n_train=12, n_test=3, seed=7)
        dual = DualConfig(budget=12, per_iter=4, p=1.0, k=4, n=4, seed=5)
        config = ExperimentConfig(
            train_path=str(train),
            test_path=str(test),
            out_dir=str(tmp_path / "out"),
            dual=dual,
            repeats=1,
            backend=BackendDescriptor(kind="mock", embedding_dim=8),
        )
        results = run_experiment(config)
        assert results[0].status == "exhausted"
        assert exit_hint(results) == 3

    def test_backend_failure_marks_repeat_as_error(self, tmp_path):
        config = experiment_config(
            tmp_path,
            backend=BackendDescriptor(kind="remote", endpoint="http://127.0.0.1:9", timeout_s=2.0),
        )
        corpus = Corpus.load(config.train_path, config.test_path)
        emb = MockBackend(seed=0, embedding_dim=8).embed(
            [d.source for d in corpus.train_pool], ids=list(corpus.train_ids)
        )
        results = run_experiment(config, corpus, emb)
        assert all(r.status == "error" for r in results)
        assert all(r.error for r in results)
        assert exit_hint(results) == 2

    def test_parallel_repeats_match_sequential(self, tmp_path):
        picks = []
        for parallel in (False, True):
            config = experiment_config(tmp_path, parallel_repeats=parallel)
            results = run_experiment(config)
            picks.append([[s.doc_id for s in r.selections] for r in results])
        assert picks[0] == picks[1]

    def test_budget_larger_than_pool_rejected(self, tmp_path):
        dual = DualConfig(budget=500, per_iter=4, k=2, n=4)
        with pytest.raises(ConfigError):
            run_experiment(experiment_config(tmp_path, dual=dual))

    def test_strategy_dispatch(self, tmp_path):
        for strategy, provenances in [
            ("random", {"baseline"}),
            ("idds", {"baseline"}),
            ("bas", {"baseline"}),
            ("dual", {"targeted", "random"}),
        ]:
            config = experiment_config(tmp_path, strategy=strategy, repeats=1)
            results = run_experiment(config)
            seen = {s.provenance for r in results for s in r.selections}
            assert seen <= provenances, strategy
            assert results[0].status == "completed", strategy


class TestResolveEmbeddings:
    def test_from_file(self, tmp_path):
        config = experiment_config(tmp_path)
        corpus = Corpus.load(config.train_path, config.test_path)
        matrix = MockBackend(seed=1, embedding_dim=4).embed(
            [d.source for d in corpus.train_pool], ids=list(corpus.train_ids)
        )
        path = write_embeddings(tmp_path / "emb.bin", matrix)
        config = experiment_config(tmp_path, embeddings_path=str(path))
        loaded = resolve_embeddings(config, corpus)
        assert set(loaded.doc_ids) >= set(corpus.train_ids)

    def test_missing_coverage_rejected(self, tmp_path):
        config = experiment_config(tmp_path)
        corpus = Corpus.load(config.train_path, config.test_path)
        matrix = MockBackend(seed=1, embedding_dim=4).embed(
            [corpus.train_pool[0].source], ids=[corpus.train_ids[0]]
        )
        path = write_embeddings(tmp_path / "emb.bin", matrix)
        config = experiment_config(tmp_path, embeddings_path=str(path))
        with pytest.raises(ConfigError, match="no embedding"):
            resolve_embeddings(config, corpus)

    def test_backend_fallback_covers_pool(self, tmp_path):
        config = experiment_config(tmp_path)
        corpus = Corpus.load(config.train_path, config.test_path)
        matrix = resolve_embeddings(config, corpus)
        assert matrix.doc_ids == corpus.train_ids
        assert matrix.dimension == 8


class TestExports:
    def run_small(self, tmp_path):
        config = experiment_config(tmp_path)
        results = run_experiment(config)
        export_results(results, config.out_dir)
        return config, results

    def test_records_roundtrip(self, tmp_path):
        config, results = self.run_small(tmp_path)
        loaded = load_records(Path(config.out_dir) / "records.jsonl")
        original = [r for result in results for r in result.records]
        assert loaded == original

    def test_selections_csv_shape(self, tmp_path):
        config, results = self.run_small(tmp_path)
        with (Path(config.out_dir) / "selections.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == sum(len(r.selections) for r in results)
        first = rows[0]
        assert set(first) == {"repeat", "iteration", "doc_id", "provenance", "idds_score", "bleuvar"}
        targeted = [r for r in rows if r["provenance"] == "targeted"]
        assert targeted and all(r["bleuvar"] for r in targeted)
        random_rows = [r for r in rows if r["provenance"] == "random"]
        assert random_rows and all(r["bleuvar"] == "" for r in random_rows)

    def test_summary_csv_aggregates_by_iteration(self, tmp_path):
        config, results = self.run_small(tmp_path)
        with (Path(config.out_dir) / "summary.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert [r["iteration"] for r in rows] == ["1", "2"]
        assert all(r["n_repeats"] == "2" for r in rows)
        assert float(rows[-1]["labeled_mean"]) == 8.0
        for column in (
            "rouge1_mean", "rouge1_std", "rouge2_mean", "rougeL_mean",
            "diversity_mean", "outlier_mean", "selection_time_s_mean", "train_time_s_mean",
        ):
            assert column in rows[0], column
            assert rows[-1][column] != ""

    def test_summary_stats_match_records(self, tmp_path):
        config, results = self.run_small(tmp_path)
        with (Path(config.out_dir) / "summary.csv").open() as fh:
            rows = {r["iteration"]: r for r in csv.DictReader(fh)}
        finals = [r.records[-1] for r in results]
        mean, std = sample_mean_std([r.rouge1 for r in finals])
        assert float(rows["2"]["rouge1_mean"]) == pytest.approx(mean, abs=1e-12)
        assert float(rows["2"]["rouge1_std"]) == pytest.approx(std, abs=1e-12)

    def test_run_status_file(self, tmp_path):
        config, results = self.run_small(tmp_path)
        status = json.loads((Path(config.out_dir) / "run_status.json").read_text())
        assert [r["status"] for r in status["repeats"]] == ["completed", "completed"]
        assert [r["labeled"] for r in status["repeats"]] == [8, 8]


class TestExportViz:
    def test_tags_follow_selections(self, tmp_path):
        ids = tuple(f"d{i}" for i in range(6))
        rng = np.random.default_rng(1)
        from dualsum.embedspace import EmbeddingMatrix

        emb = EmbeddingMatrix(ids, rng.normal(size=(6, 4)))
        selections = [
            Selection(doc_id="d1", provenance="targeted", iteration=1, bleuvar=0.2),
            Selection(doc_id="d3", provenance="random", iteration=1),
        ]
        out = tmp_path / "viz.csv"
        export_viz(selections, emb, out)
        with out.open() as fh:
            rows = {r["id"]: r for r in csv.DictReader(fh)}
        assert len(rows) == 6
        assert rows["d1"]["tag"] == "targeted"
        assert rows["d3"]["tag"] == "random"
        assert sum(1 for r in rows.values() if r["tag"] == "unselected") == 4
        float(rows["d0"]["x"]), float(rows["d0"]["y"])

    def test_unknown_selection_id_rejected(self, tmp_path):
        from dualsum.embedspace import EmbeddingMatrix

        emb = EmbeddingMatrix(("a", "b", "c"), np.random.default_rng(0).normal(size=(3, 3)))
        with pytest.raises(ConfigError):
            export_viz(
                [Selection(doc_id="zzz", provenance="random", iteration=1)],
                emb,
                tmp_path / "viz.csv",
            )


class TestCli:
    def run_args(self, tmp_path, *extra):
        train, test = write_corpus(tmp_path, n_train=30, n_test=4, seed=3)
        out = tmp_path / "out"
        return [
            "run", "--train", str(train), "--test", str(test), "--out", str(out),
            "--budget", "8", "--per-iter", "4", "--k", "2", "--n", "4",
            "--repeats", "2", "--seed", "5", *extra,
        ], out

    def test_run_writes_all_outputs(self, tmp_path, capsys):
        args, out = self.run_args(tmp_path)
        assert main(args) == 0
        for name in ("config.resolved", "records.jsonl", "summary.csv",
                     "selections.csv", "viz.csv", "run_status.json"):
            assert (out / name).is_file(), name
        printed = capsys.readouterr().out
        assert "repeat 0: completed" in printed
        assert "repeat 1: completed" in printed

    def test_run_resolved_config_reflects_flags(self, tmp_path):
        args, out = self.run_args(tmp_path, "--strategy", "idds", "--lambda", "0.4")
        assert main(args) == 0
        resolved = json.loads((out / "config.resolved").read_text())
        assert resolved["strategy"] == "idds"
        assert resolved["dual"]["lam"] == 0.4
        assert resolved["dual"]["budget"] == 8
        assert "metadata" in resolved

    def test_config_file_with_flag_override(self, tmp_path):
        train, test = write_corpus(tmp_path, n_train=30, n_test=4, seed=3)
        out = tmp_path / "out"
        config_path = tmp_path / "exp.json"
        config_path.write_text(json.dumps({
            "train_path": str(train), "test_path": str(test), "out_dir": str(out),
            "repeats": 1,
            "dual": {"budget": 8, "per_iter": 4, "k": 2, "n": 4, "seed": 5},
        }))
        assert main(["run", "--config", str(config_path), "--budget", "4"]) == 0
        resolved = json.loads((out / "config.resolved").read_text())
        assert resolved["dual"]["budget"] == 4

    def test_unknown_config_key_exits_one(self, tmp_path):
        config_path = tmp_path / "exp.json"
        config_path.write_text(json.dumps({"trian": "typo.jsonl"}))
        assert main(["run", "--config", str(config_path)]) == 1

    def test_missing_required_paths_exit_one(self, tmp_path):
        assert main(["run", "--budget", "8"]) == 1

    def test_invalid_choice_exits_one(self, tmp_path):
        args, _ = self.run_args(tmp_path, "--strategy", "bogus")
        assert main(args) == 1

    def test_budget_beyond_pool_exits_one(self, tmp_path):
        args, _ = self.run_args(tmp_path)
        args[args.index("--budget") + 1] = "500"
        assert main(args) == 1

    def test_dead_remote_backend_exits_two(self, tmp_path):
        args, _ = self.run_args(
            tmp_path, "--backend", "remote", "--endpoint", "http://127.0.0.1:9"
        )
        assert main(args) == 2

    def test_exhausted_pool_exits_three(self, tmp_path):
        train, test = write_corpus(tmp_path, n_train=12, n_test=3, seed=7)
        out = tmp_path / "out"
        assert main([
            "run", "--train", str(train), "--test", str(test), "--out", str(out),
            "--budget", "12", "--per-iter", "4", "--p", "1.0", "--k", "4",
            "--n", "4", "--repeats", "1",
        ]) == 3

    def test_determinism_of_repeated_cli_runs(self, tmp_path):
        outputs = []
        for name in ("out-a", "out-b"):
            base = tmp_path / name
            base.mkdir()
            train, test = write_corpus(base, n_train=30, n_test=4, seed=3)
            out = base / "results"
            assert main([
                "run", "--train", str(train), "--test", str(test), "--out", str(out),
                "--budget", "8", "--per-iter", "4", "--k", "2", "--n", "4",
                "--repeats", "2", "--seed", "5",
            ]) == 0
            outputs.append(out)
        a = (outputs[0] / "selections.csv").read_bytes()
        b = (outputs[1] / "selections.csv").read_bytes()
        assert a == b

    def test_score_subcommand(self, tmp_path, capsys):
        train, _ = write_corpus(tmp_path, n_train=10, n_test=2, seed=9)
        corpus_docs = synthetic_documents(10, seed=9, prefix="t")
        matrix = MockBackend(seed=1, embedding_dim=4).embed(
            [d.source for d in corpus_docs], ids=[d.id for d in corpus_docs]
        )
        emb_path = write_embeddings(tmp_path / "emb.bin", matrix)
        labeled_path = tmp_path / "labeled.txt"
        labeled_path.write_text(corpus_docs[0].id + "\n")
        out_path = tmp_path / "scores.csv"
        assert main([
            "score", "--train", str(train), "--embeddings", str(emb_path),
            "--labeled", str(labeled_path), "--out", str(out_path),
        ]) == 0
        with out_path.open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 9
        values = [float(r["idds_score"]) for r in rows]
        assert values == sorted(values, reverse=True)

    def test_score_with_disagreement_column(self, tmp_path):
        train, _ = write_corpus(tmp_path, n_train=8, n_test=2, seed=11)
        corpus_docs = synthetic_documents(8, seed=11, prefix="t")
        matrix = MockBackend(seed=1, embedding_dim=4).embed(
            [d.source for d in corpus_docs], ids=[d.id for d in corpus_docs]
        )
        emb_path = write_embeddings(tmp_path / "emb.bin", matrix)
        out_path = tmp_path / "scores.csv"
        assert main([
            "score", "--train", str(train), "--embeddings", str(emb_path),
            "--bleuvar", "--k", "3", "--n", "4", "--out", str(out_path),
        ]) == 0
        with out_path.open() as fh:
            rows = list(csv.DictReader(fh))
        assert sum(1 for r in rows if r["bleuvar"]) == 3

    def test_metrics_subcommand(self, tmp_path, capsys):
        corpus_docs = synthetic_documents(10, seed=13)
        matrix = MockBackend(seed=1, embedding_dim=4).embed(
            [d.source for d in corpus_docs], ids=[d.id for d in corpus_docs]
        )
        emb_path = write_embeddings(tmp_path / "emb.bin", matrix)
        labeled_path = tmp_path / "labeled.txt"
        labeled_path.write_text("\n".join(d.id for d in corpus_docs[:3]) + "\n")
        json_path = tmp_path / "metrics.json"
        assert main([
            "metrics", "--embeddings", str(emb_path),
            "--labeled", str(labeled_path), "--out", str(json_path),
        ]) == 0
        printed = capsys.readouterr().out
        assert "diversity_score" in printed and "outlier_score" in printed
        payload = json.loads(json_path.read_text())
        assert set(payload) == {"diversity_score", "outlier_score", "knn_k"}

    def test_export_viz_subcommand(self, tmp_path):
        args, out = self.run_args(tmp_path)
        assert main(args) == 0
        corpus_docs = synthetic_documents(30, seed=3, prefix="t")
        matrix = MockBackend(seed=5, embedding_dim=8).embed(
            [d.source for d in corpus_docs], ids=[d.id for d in corpus_docs]
        )
        emb_path = write_embeddings(tmp_path / "emb.bin", matrix)
        viz_path = tmp_path / "viz2.csv"
        assert main([
            "export-viz", "--embeddings", str(emb_path),
            "--selections", str(out / "selections.csv"),
            "--repeat", "1", "--out", str(viz_path),
        ]) == 0
        with viz_path.open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 30
        assert {r["tag"] for r in rows} > {"unselected"}

    def test_report_subcommand_renders_figures(self, tmp_path, capsys):
        args, out = self.run_args(tmp_path)
        assert main(args) == 0
        assert main(["report", "--dir", str(out)]) == 0
        for name in ("learning_curves.png", "embedding_map.png",
                     "spread_curves.png", "timings.png"):
            assert (out / name).is_file(), name

    def test_run_with_figures_flag(self, tmp_path):
        args, out = self.run_args(tmp_path, "--figures")
        assert main(args) == 0
        assert (out / "learning_curves.png").is_file()

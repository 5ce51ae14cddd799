from __future__ import annotations

import json
from pathlib import Path

import pytest

from gapcheck import corpus, detector
from gapcheck.cli import EXIT_CONFIG, EXIT_OK, EXIT_TRANSPORT, EXIT_VALIDATION, main

DATA = Path(__file__).resolve().parent / "data"


def write_oracle(tmp_path, e2e_records, train_annotations, eval_annotations, ks):
    mock_path = tmp_path / "oracle_mock.jsonl"
    detector.write_oracle_mock(mock_path, eval_annotations, train_annotations, ks=ks)
    return mock_path


class TestValidate:
    def test_valid_corpus_exits_zero(self, capsys):
        code = main(
            [
                "validate",
                "--records",
                str(DATA / "e2e_records.jsonl"),
                "--annotations",
                str(DATA / "train_annotations.jsonl"),
            ]
        )
        assert code == EXIT_OK
        assert "OK" in capsys.readouterr().out

    def test_exclusivity_violation_named(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text(
            json.dumps(
                {
                    "record_id": "train-01",
                    "label": [0, 2],
                    "explanation": "x",
                    "annotator_id": "a",
                    "annotated_at": "2025-03-01T10:00:00+00:00",
                }
            )
            + "\n"
        )
        code = main(
            ["validate", "--records", str(DATA / "e2e_records.jsonl"), "--annotations", str(bad)]
        )
        assert code == EXIT_VALIDATION
        out = capsys.readouterr().out
        assert "exclusivity" in out and "line 1" in out

    def test_missing_reference_named(self, tmp_path, capsys):
        record = {
            "record_id": "r1",
            "model_name": "m",
            "previous_text": "p",
            "generation": "g",
            "target": "t",
            "required_citations": ["1 F.2d 2"],
            "references": [],
        }
        path = tmp_path / "records.jsonl"
        path.write_text(json.dumps(record) + "\n")
        code = main(["validate", "--records", str(path)])
        assert code == EXIT_VALIDATION
        assert "missing-reference" in capsys.readouterr().out


class TestStats:
    def run_stats(self, path, capsys):
        code = main(["stats", "--annotations", str(path)])
        assert code == EXIT_OK
        return json.loads(capsys.readouterr().out)

    def test_train_fixture_balance(self, capsys):
        doc = self.run_stats(DATA / "train_annotations.jsonl", capsys)
        assert doc["balance"] == pytest.approx(0.94, abs=0.005)
        assert doc["label_counts"] == {"0": 5, "1": 4, "2": 11, "3": 9}

    def test_test_fixture_balance(self, capsys):
        doc = self.run_stats(DATA / "stats_test_annotations.jsonl", capsys)
        assert doc["balance"] == pytest.approx(0.75, abs=0.005)

    def test_uniform_synthetic(self, tmp_path, capsys):
        rows = []
        for i, label in enumerate(([0], [1], [2], [3])):
            rows.append(
                json.dumps(
                    {
                        "record_id": f"r{i}",
                        "label": label,
                        "explanation": "e" if label != [0] else "",
                        "annotator_id": "a",
                        "annotated_at": "2025-03-01T10:00:00+00:00",
                    }
                )
            )
        path = tmp_path / "uniform.jsonl"
        path.write_text("\n".join(rows) + "\n")
        doc = self.run_stats(path, capsys)
        assert doc["balance"] == pytest.approx(1.0, abs=1e-9)

    def test_out_file_written_with_manifest(self, tmp_path, capsys):
        out = tmp_path / "stats.json"
        code = main(["stats", "--annotations", str(DATA / "train_annotations.jsonl"), "--out", str(out)])
        assert code == EXIT_OK
        doc = json.loads(out.read_text())
        manifest = json.loads((tmp_path / "stats.json.manifest.json").read_text())
        assert doc["manifest_id"] == manifest["manifest_id"]
        assert manifest["command"] == "stats"
        assert manifest["inputs"]


class TestScreen:
    def test_jsonl_per_record(self, capsys):
        code = main(["screen", "--records", str(DATA / "records.jsonl")])
        assert code == EXIT_OK
        lines = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
        assert len(lines) == 5
        by_id = {doc["record_id"]: doc for doc in lines}
        repeats = by_id["rule25-rende"]["repeated_sentences"]
        assert any(r["count"] == 2 for r in repeats)
        assert {"word_count", "word_count_in_bounds", "structural_markers"} <= set(by_id["bankr-torres"])


class TestDetect:
    def test_missing_api_key_without_mock_is_config_error(self, monkeypatch, capsys):
        monkeypatch.delenv("GAPCHECK_API_KEY", raising=False)
        code = main(
            [
                "detect",
                "--records",
                str(DATA / "e2e_records.jsonl"),
                "--annotations",
                str(DATA / "train_annotations.jsonl"),
                "--endpoint",
                "http://localhost:1/v1/chat/completions",
            ]
        )
        assert code == EXIT_CONFIG

    def test_no_backend_at_all_is_config_error(self):
        code = main(
            [
                "detect",
                "--records",
                str(DATA / "e2e_records.jsonl"),
                "--annotations",
                str(DATA / "train_annotations.jsonl"),
            ]
        )
        assert code == EXIT_CONFIG

    def test_oracle_mock_detects_all(
        self, tmp_path, capsys, e2e_records, train_annotations, eval_annotations
    ):
        mock = write_oracle(tmp_path, e2e_records, train_annotations, eval_annotations, ks=[20])
        out = tmp_path / "results.jsonl"
        code = main(
            [
                "detect",
                "--records",
                str(DATA / "e2e_records.jsonl"),
                "--annotations",
                str(DATA / "train_annotations.jsonl"),
                "--mock",
                str(mock),
                "--out",
                str(out),
            ]
        )
        assert code == EXIT_OK
        results = detector.load_results(out)
        assert len(results) == 20
        assert all(r.parse_status == "ok" for r in results)
        gold = {ex.record_id: ex.gold for ex in eval_annotations}
        assert all(r.labels == gold[r.record_id] for r in results)

    def test_unmatched_mock_is_transport_exhaustion(self, tmp_path):
        empty_mock = tmp_path / "empty.jsonl"
        empty_mock.write_text("")
        out = tmp_path / "results.jsonl"
        code = main(
            [
                "detect",
                "--records",
                str(DATA / "e2e_records.jsonl"),
                "--annotations",
                str(DATA / "train_annotations.jsonl"),
                "--mock",
                str(empty_mock),
                "--out",
                str(out),
            ]
        )
        assert code == EXIT_TRANSPORT
        results = detector.load_results(out)
        assert all(r.parse_status == "failed" for r in results)

    def test_k_beyond_train_is_config_error(self, tmp_path):
        mock = tmp_path / "m.jsonl"
        mock.write_text("")
        code = main(
            [
                "detect",
                "--records",
                str(DATA / "e2e_records.jsonl"),
                "--annotations",
                str(DATA / "train_annotations.jsonl"),
                "--mock",
                str(mock),
                "--k",
                "25",
            ]
        )
        assert code == EXIT_CONFIG


@pytest.fixture()
def oracle_results(tmp_path, e2e_records, train_annotations, eval_annotations):
    mock = write_oracle(tmp_path, e2e_records, train_annotations, eval_annotations, ks=[20])
    out = tmp_path / "results.jsonl"
    code = main(
        [
            "detect",
            "--records",
            str(DATA / "e2e_records.jsonl"),
            "--annotations",
            str(DATA / "train_annotations.jsonl"),
            "--mock",
            str(mock),
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_OK
    return out


class TestEvaluate:
    def test_results_equal_gold(self, oracle_results, capsys):
        code = main(
            [
                "evaluate",
                "--results",
                str(oracle_results),
                "--annotations",
                str(DATA / "eval_annotations.jsonl"),
            ]
        )
        assert code == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["mgem"] == doc["mgp"] == doc["mgr"] == doc["mgf1"] == 1.0
        assert doc["gap_halu"] <= doc["gap_score"]

    def test_labels_only_mode_field_presence(self, oracle_results, capsys):
        code = main(["evaluate", "--results", str(oracle_results)])
        assert code == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert {"gap_score", "gap_halu", "category_rates"} <= set(doc)
        assert not {"mgem", "mgp", "mgr", "mgf1"} & set(doc)

    def test_csv_one_row_per_metric(self, oracle_results, tmp_path, capsys):
        csv_path = tmp_path / "report.csv"
        code = main(
            [
                "evaluate",
                "--results",
                str(oracle_results),
                "--annotations",
                str(DATA / "eval_annotations.jsonl"),
                "--csv",
                str(csv_path),
            ]
        )
        assert code == EXIT_OK
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "metric,value"
        assert any(line.startswith("mgem,") for line in lines)

    def test_empty_results_is_validation_error(self, tmp_path):
        empty = tmp_path / "none.jsonl"
        empty.write_text("")
        code = main(["evaluate", "--results", str(empty)])
        assert code == EXIT_VALIDATION


class TestAblate:
    def run_ablate(self, tmp_path, mock, out):
        return main(
            [
                "ablate",
                "--records",
                str(DATA / "e2e_records.jsonl"),
                "--annotations",
                str(DATA / "train_annotations.jsonl"),
                "--gold",
                str(DATA / "eval_annotations.jsonl"),
                "--ks",
                "4,8,16,20",
                "--mock",
                str(mock),
                "--out",
                str(out),
            ]
        )

    def test_four_rows_flat_curves_and_byte_stability(
        self, tmp_path, e2e_records, train_annotations, eval_annotations
    ):
        mock = write_oracle(
            tmp_path, e2e_records, train_annotations, eval_annotations, ks=[4, 8, 16, 20]
        )
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert self.run_ablate(tmp_path, mock, out1) == EXIT_OK
        assert self.run_ablate(tmp_path, mock, out2) == EXIT_OK
        assert out1.read_bytes() == out2.read_bytes()
        lines = out1.read_text().splitlines()
        assert len(lines) == 5  # header + one row per k
        header = lines[0].split(",")
        for row in lines[1:]:
            cells = dict(zip(header, row.split(",")))
            assert cells["mgem"] == "1.000000"
            assert cells["mgf1"] == "1.000000"

    def test_k_out_of_range_is_config_error(self, tmp_path):
        mock = tmp_path / "m.jsonl"
        mock.write_text("")
        code = main(
            [
                "ablate",
                "--records",
                str(DATA / "e2e_records.jsonl"),
                "--annotations",
                str(DATA / "train_annotations.jsonl"),
                "--ks",
                "21",
                "--mock",
                str(mock),
            ]
        )
        assert code == EXIT_CONFIG

    def test_bad_ks_string_is_config_error(self, tmp_path):
        mock = tmp_path / "m.jsonl"
        mock.write_text("")
        code = main(
            [
                "ablate",
                "--records",
                str(DATA / "e2e_records.jsonl"),
                "--annotations",
                str(DATA / "train_annotations.jsonl"),
                "--ks",
                "four",
                "--mock",
                str(mock),
            ]
        )
        assert code == EXIT_CONFIG


class TestErrors:
    def test_perfect_results_all_zero(self, oracle_results, capsys):
        code = main(
            [
                "errors",
                "--results",
                str(oracle_results),
                "--annotations",
                str(DATA / "eval_annotations.jsonl"),
            ]
        )
        assert code == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        for cell in doc["error_table"].values():
            assert cell == {"over": 0.0, "under": 0.0}

    def test_one_swapped_label_two_nonzero_cells(self, oracle_results, tmp_path, capsys):
        results = detector.load_results(oracle_results)
        # Swap one record's labels from its gold value to a disjoint set.
        gold = corpus.load_annotations(DATA / "eval_annotations.jsonl")
        by_id = {ex.record_id: ex.gold for ex in gold}
        target = results[0]
        swapped_label = [2] if by_id[target.record_id].to_list() != [2] else [3]
        lines = detector.results_to_jsonl(results).splitlines()
        doc = json.loads(lines[0])
        original = set(doc["labels"])
        doc["labels"] = swapped_label
        lines[0] = json.dumps(doc)
        swapped_path = tmp_path / "swapped.jsonl"
        swapped_path.write_text("\n".join(lines) + "\n")
        code = main(
            [
                "errors",
                "--results",
                str(swapped_path),
                "--annotations",
                str(DATA / "eval_annotations.jsonl"),
                "--out",
                str(tmp_path / "errors.csv"),
            ]
        )
        assert code == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        nonzero = [
            v
            for cell in out["error_table"].values()
            for v in (cell["over"], cell["under"])
            if v > 0
        ]
        assert len(nonzero) == len(original - set(swapped_label)) + len(set(swapped_label) - original)
        csv_lines = (tmp_path / "errors.csv").read_text().splitlines()
        assert csv_lines[0] == "category,over_rate,under_rate"
        assert len(csv_lines) == 4

    def test_empty_results_error(self, tmp_path):
        empty = tmp_path / "none.jsonl"
        empty.write_text("")
        code = main(
            [
                "errors",
                "--results",
                str(empty),
                "--annotations",
                str(DATA / "eval_annotations.jsonl"),
            ]
        )
        assert code == EXIT_VALIDATION

    def test_instance_denominator_flag(self, oracle_results, capsys):
        code = main(
            [
                "errors",
                "--results",
                str(oracle_results),
                "--annotations",
                str(DATA / "eval_annotations.jsonl"),
                "--error-denominator",
                "instance",
            ]
        )
        assert code == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["error_denominator"] == "instance"

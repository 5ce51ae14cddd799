"""Command-line surface for the gap detection pipeline.

Subcommands: ``validate`` (schema/label checks), ``stats`` (label
distribution and balance), ``screen`` (per-record screening signals),
``detect`` (run the detector), ``evaluate`` (score results), ``ablate``
(demonstration-count sweep), and ``errors`` (over/under-prediction table).

Every command is deterministic given identical inputs and the mock backend.
File outputs get a sibling ``<name>.manifest.json`` recording the command,
configuration, input digests, and timestamps; data outputs embed only the
time-independent ``manifest_id`` so reruns stay byte-stable.

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 transport exhaustion.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

import gapcheck
from gapcheck import citescreen, corpus, detector, metrics

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_TRANSPORT = 3


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# Run manifests
# ---------------------------------------------------------------------------

def _digest_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManifest:
    """Provenance for one command invocation.

    ``manifest_id`` hashes the command, configuration, input digests, and
    tool version -- not the timestamps -- so identical runs share an id and
    outputs that embed it stay byte-identical.
    """

    def __init__(self, command: str, config: Mapping[str, object], inputs: Mapping[str, str]):
        self.command = command
        self.config = dict(config)
        self.inputs = {name: _digest_file(path) for name, path in inputs.items() if path}
        self.tool_version = gapcheck.__version__
        self.started_at = datetime.now(timezone.utc).isoformat()
        self.finished_at: str | None = None
        stable = json.dumps(
            {
                "command": self.command,
                "config": self.config,
                "inputs": self.inputs,
                "tool_version": self.tool_version,
            },
            sort_keys=True,
        )
        self.manifest_id = hashlib.sha256(stable.encode("utf-8")).hexdigest()

    def write_for(self, out_path: str | Path) -> None:
        self.finished_at = datetime.now(timezone.utc).isoformat()
        manifest_path = Path(str(out_path) + ".manifest.json")
        doc = {
            "manifest_id": self.manifest_id,
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "tool_version": self.tool_version,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "output": str(out_path),
        }
        manifest_path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _write_text(path: str | Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# Shared loading helpers
# ---------------------------------------------------------------------------

def _require(path: str | None, flag: str) -> str:
    if not path:
        raise CliError(EXIT_CONFIG, f"{flag} is required for this command")
    if not os.path.exists(path):
        raise CliError(EXIT_CONFIG, f"{flag} path does not exist: {path}")
    return path


def _load_records(path: str) -> list[corpus.GenerationRecord]:
    try:
        return corpus.load_records(path)
    except corpus.CorpusError as exc:
        raise CliError(EXIT_VALIDATION, f"{path}: {exc}") from exc


def _load_annotations(path: str) -> list[corpus.AnnotatedExample]:
    try:
        return corpus.load_annotations(path)
    except corpus.CorpusError as exc:
        raise CliError(EXIT_VALIDATION, f"{path}: {exc}") from exc


def _build_config(args: argparse.Namespace, k: int | None = None) -> detector.DetectorConfig:
    try:
        return detector.DetectorConfig(
            endpoint_url=args.endpoint or "",
            model_name=args.model or "",
            api_key_ref=args.api_key_env,
            k_demonstrations=k if k is not None else args.k,
            temperature=args.temperature,
            parallelism=args.parallelism,
        )
    except detector.ConfigError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from exc


def _build_backend(args: argparse.Namespace, config: detector.DetectorConfig) -> detector.ChatBackend:
    if args.mock:
        return detector.MockChatBackend.from_path(_require(args.mock, "--mock"))
    if not config.endpoint_url:
        raise CliError(EXIT_CONFIG, "either --mock or --endpoint is required")
    if not os.environ.get(config.api_key_ref):
        raise CliError(
            EXIT_CONFIG,
            f"API key environment variable {config.api_key_ref} is not set "
            "(use --mock for the deterministic backend)",
        )
    return detector.HttpChatBackend(config)


def _split_corpus(
    records: Sequence[corpus.GenerationRecord],
    annotations: Sequence[corpus.AnnotatedExample],
) -> tuple[list[corpus.AnnotatedExample], list[corpus.GenerationRecord]]:
    """Join annotations to records; unannotated records are the detection
    targets."""
    try:
        train = corpus.attach_records(annotations, records)
    except corpus.CorpusError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from exc
    annotated_ids = {ex.record_id for ex in train}
    targets = [r for r in records if r.record_id not in annotated_ids]
    return train, targets


def _format_float(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_validate(args: argparse.Namespace) -> int:
    records_path = _require(args.records, "--records")
    records, problems = corpus.validate_records(records_path)
    diagnostics = [f"records:{d}" for d in problems]
    if args.annotations:
        annotations_path = _require(args.annotations, "--annotations")
        annotations, ann_problems = corpus.validate_annotations(annotations_path)
        diagnostics += [f"annotations:{d}" for d in ann_problems]
        known = {r.record_id for r in records}
        for ann in annotations:
            if ann.record_id not in known:
                diagnostics.append(
                    f"annotations:unknown-record: annotation references "
                    f"record_id {ann.record_id!r} absent from the records file"
                )
    for line in diagnostics:
        print(line)
    if diagnostics:
        print(f"FAIL: {len(diagnostics)} problem(s) found")
        return EXIT_VALIDATION
    print(f"OK: {len(records)} record(s) valid")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    path = _require(args.annotations, "--annotations")
    annotations = _load_annotations(path)
    if not annotations:
        raise CliError(EXIT_VALIDATION, f"{path}: no annotations found")
    stats = corpus.label_distribution(annotations)
    manifest = RunManifest("stats", {"annotations": path}, {"annotations": path})
    doc = stats.to_dict()
    doc["manifest_id"] = manifest.manifest_id
    text = json.dumps(doc, indent=2) + "\n"
    print(text, end="")
    if args.out:
        _write_text(args.out, text)
        manifest.write_for(args.out)
    return EXIT_OK


def cmd_screen(args: argparse.Namespace) -> int:
    path = _require(args.records, "--records")
    records = _load_records(path)
    lines = []
    for record in records:
        signals = citescreen.screen(record)
        doc = {"record_id": record.record_id}
        doc.update(signals.to_dict())
        lines.append(json.dumps(doc, ensure_ascii=False))
    text = "".join(line + "\n" for line in lines)
    if args.out:
        _write_text(args.out, text)
        RunManifest("screen", {"records": path}, {"records": path}).write_for(args.out)
    else:
        print(text, end="")
    return EXIT_OK


def cmd_detect(args: argparse.Namespace) -> int:
    records_path = _require(args.records, "--records")
    annotations_path = _require(args.annotations, "--annotations")
    records = _load_records(records_path)
    annotations = _load_annotations(annotations_path)
    train, targets = _split_corpus(records, annotations)
    if args.k > len(train):
        raise CliError(EXIT_CONFIG, f"--k {args.k} exceeds the {len(train)} training examples")
    config = _build_config(args)
    backend = _build_backend(args, config)
    demos = corpus.select_demonstrations(train, args.k) if args.k else []
    results = detector.detect_batch(targets, config, demos, backend)
    text = detector.results_to_jsonl(results)
    if args.out:
        _write_text(args.out, text)
        RunManifest(
            "detect",
            {
                "records": records_path,
                "annotations": annotations_path,
                "k": args.k,
                "model": config.model_name,
                "temperature": config.temperature,
                "parallelism": config.parallelism,
                "mock": bool(args.mock),
            },
            {"records": records_path, "annotations": annotations_path},
        ).write_for(args.out)
    else:
        print(text, end="")
    transport_failures = [r for r in results if r.parse_status == detector.PARSE_FAILED and not r.raw_response]
    if transport_failures:
        print(
            f"transport exhausted for {len(transport_failures)} record(s)",
            file=sys.stderr,
        )
        return EXIT_TRANSPORT
    return EXIT_OK


def _gold_map(path: str) -> dict[str, object]:
    return {ex.record_id: ex.gold for ex in _load_annotations(path)}


def _report_for_results(
    results: Sequence[detector.DetectionResult],
    gold: Mapping[str, object] | None,
    denominator: str,
) -> metrics.MetricsReport:
    scored = [r for r in results if r.labels is not None]
    if not scored:
        raise CliError(EXIT_VALIDATION, "no parseable detection results to evaluate")
    predicted = [r.labels for r in scored]
    gold_labels = None
    if gold is not None:
        missing = [r.record_id for r in scored if r.record_id not in gold]
        if missing:
            raise CliError(
                EXIT_CONFIG, f"gold annotations missing for record(s): {', '.join(missing)}"
            )
        gold_labels = [gold[r.record_id] for r in scored]
    return metrics.evaluate_predictions(
        predicted,  # type: ignore[arg-type]
        gold=gold_labels,  # type: ignore[arg-type]
        record_ids=[r.record_id for r in scored],
        n_failed=len(results) - len(scored),
        denominator=denominator,
    )


def cmd_evaluate(args: argparse.Namespace) -> int:
    results_path = _require(args.results, "--results")
    results = detector.load_results(results_path)
    gold = _gold_map(args.annotations) if args.annotations else None
    report = _report_for_results(results, gold, args.error_denominator)
    manifest = RunManifest(
        "evaluate",
        {
            "results": results_path,
            "annotations": args.annotations or "",
            "error_denominator": args.error_denominator,
        },
        {"results": results_path, "annotations": args.annotations or ""},
    )
    doc = report.to_dict()
    doc["manifest_id"] = manifest.manifest_id
    text = json.dumps(doc, indent=2) + "\n"
    print(text, end="")
    if args.out:
        _write_text(args.out, text)
        manifest.write_for(args.out)
    if args.csv:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["metric", "value"])
        for name, value in report.metric_rows():
            writer.writerow([name, _format_float(value)])
        _write_text(args.csv, buf.getvalue())
        manifest.write_for(args.csv)
    return EXIT_OK


ABLATION_COLUMNS = (
    "k",
    "n",
    "n_failed",
    "mgem",
    "mgp",
    "mgr",
    "mgf1",
    "gap_score",
    "gap_halu",
    "rate_1",
    "rate_2",
    "rate_3",
)


def cmd_ablate(args: argparse.Namespace) -> int:
    records_path = _require(args.records, "--records")
    annotations_path = _require(args.annotations, "--annotations")
    records = _load_records(records_path)
    annotations = _load_annotations(annotations_path)
    train, targets = _split_corpus(records, annotations)
    try:
        ks = [int(part) for part in args.ks.split(",") if part.strip()]
    except ValueError:
        raise CliError(EXIT_CONFIG, f"--ks must be comma-separated integers, got {args.ks!r}")
    if not ks:
        raise CliError(EXIT_CONFIG, "--ks is empty")
    for k in ks:
        if not 0 <= k <= len(train):
            raise CliError(EXIT_CONFIG, f"--ks value {k} outside [0, {len(train)}]")
    config = _build_config(args, k=min(ks))
    backend = _build_backend(args, config)
    gold = _gold_map(args.gold) if args.gold else None
    reports = detector.run_ablation(
        train,
        targets,
        config,
        backend,
        ks=ks,
        gold=gold,  # type: ignore[arg-type]
        denominator=args.error_denominator,
    )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ABLATION_COLUMNS)
    for k in sorted(reports):
        r = reports[k]
        writer.writerow(
            [
                k,
                r.n,
                r.n_failed,
                _format_float(r.mgem),
                _format_float(r.mgp),
                _format_float(r.mgr),
                _format_float(r.mgf1),
                _format_float(r.gap_score),
                _format_float(r.gap_halu),
                _format_float(r.category_rates.get(1)),
                _format_float(r.category_rates.get(2)),
                _format_float(r.category_rates.get(3)),
            ]
        )
    text = buf.getvalue()
    if args.out:
        _write_text(args.out, text)
        RunManifest(
            "ablate",
            {
                "records": records_path,
                "annotations": annotations_path,
                "gold": args.gold or "",
                "ks": ks,
                "mock": bool(args.mock),
            },
            {
                "records": records_path,
                "annotations": annotations_path,
                "gold": args.gold or "",
            },
        ).write_for(args.out)
    else:
        print(text, end="")
    return EXIT_OK


def cmd_errors(args: argparse.Namespace) -> int:
    results_path = _require(args.results, "--results")
    annotations_path = _require(args.annotations, "--annotations")
    results = detector.load_results(results_path)
    if not results:
        raise CliError(EXIT_VALIDATION, f"{results_path}: no detection results found")
    gold = _gold_map(annotations_path)
    report = _report_for_results(results, gold, args.error_denominator)
    assert report.error_table is not None
    manifest = RunManifest(
        "errors",
        {
            "results": results_path,
            "annotations": annotations_path,
            "error_denominator": args.error_denominator,
        },
        {"results": results_path, "annotations": annotations_path},
    )
    doc = {
        "n": report.n,
        "n_failed": report.n_failed,
        "error_denominator": args.error_denominator,
        "error_table": {
            str(k): {"over": over, "under": under}
            for k, (over, under) in report.error_table.items()
        },
        "manifest_id": manifest.manifest_id,
    }
    print(json.dumps(doc, indent=2))
    if args.out:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["category", "over_rate", "under_rate"])
        for k, (over, under) in sorted(report.error_table.items()):
            writer.writerow([k, _format_float(over), _format_float(under)])
        _write_text(args.out, buf.getvalue())
        json_path = str(args.out) + ".json"
        _write_text(json_path, json.dumps(doc, indent=2) + "\n")
        manifest.write_for(args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_detector_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--endpoint", help="chat-completions endpoint URL")
    parser.add_argument("--model", help="model name sent to the endpoint")
    parser.add_argument(
        "--mock", help="JSONL script mapping prompt digests to canned responses"
    )
    parser.add_argument("--parallelism", type=int, default=4)
    parser.add_argument("--temperature", type=float, default=0.0)
    parser.add_argument(
        "--api-key-env",
        default="GAPCHECK_API_KEY",
        help="environment variable holding the API key",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gapcheck",
        description="Detect and score gaps in machine-generated legal analysis.",
    )
    parser.add_argument("--version", action="version", version=gapcheck.__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate records and annotations files")
    p.add_argument("--records", required=True)
    p.add_argument("--annotations")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", help="label distribution and dataset balance")
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", help="write the JSON report here as well")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("screen", help="screening signals per record (JSONL)")
    p.add_argument("--records", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("detect", help="run the detector on unannotated records")
    p.add_argument("--records", required=True)
    p.add_argument("--annotations", required=True, help="training annotations (demonstrations)")
    p.add_argument("--out", help="results JSONL path")
    p.add_argument("--k", type=int, default=detector.MAX_DEMONSTRATIONS)
    _add_detector_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", help="score detection results")
    p.add_argument("--results", required=True)
    p.add_argument("--annotations", help="gold annotations; omit for label-only ratios")
    p.add_argument("--out", help="JSON report path")
    p.add_argument("--csv", help="CSV report path (one row per metric)")
    p.add_argument("--error-denominator", choices=metrics.ERROR_DENOMINATORS, default="example")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="sweep the demonstration count")
    p.add_argument("--records", required=True)
    p.add_argument("--annotations", required=True, help="training annotations")
    p.add_argument("--gold", help="gold annotations for the predicted records")
    p.add_argument("--ks", default="4,8,16,20")
    p.add_argument("--out", help="CSV path")
    p.add_argument("--error-denominator", choices=metrics.ERROR_DENOMINATORS, default="example")
    _add_detector_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("errors", help="over/under-prediction table")
    p.add_argument("--results", required=True)
    p.add_argument("--annotations", required=True, help="gold annotations")
    p.add_argument("--out", help="CSV path (JSON written alongside)")
    p.add_argument("--error-denominator", choices=metrics.ERROR_DENOMINATORS, default="example")
    p.set_defaults(func=cmd_errors)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except detector.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except corpus.CorpusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()

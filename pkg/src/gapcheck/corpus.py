"""Data model and ingestion for generation records and expert annotations.

Both inputs are line-delimited JSON. A record carries one retrieval-augmented
next-paragraph generation instance: the previous text, the generation, the
human-written target, the citations the paragraph was required to make, and
the cited reference chunks. An annotation attaches a validated gap label set
and explanation to a record by id.

Loading is strict: the first malformed line raises a :class:`CorpusError`
that names the line and the violated rule, while the ``validate_*`` variants
collect every diagnostic for reporting.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence, Union

from gapcheck.taxonomy import GapLabelSet, LabelError, parse_label_list

Source = Union[str, Path, IO[str], IO[bytes]]

RECORD_FIELDS = (
    "record_id",
    "model_name",
    "previous_text",
    "generation",
    "target",
    "required_citations",
    "references",
)
ANNOTATION_FIELDS = ("record_id", "label", "explanation", "annotator_id", "annotated_at")

N_CATEGORIES = 4


@dataclass(frozen=True)
class Diagnostic:
    """One validation finding, tied to a source line when applicable."""

    line: int | None
    code: str
    message: str

    def __str__(self) -> str:
        where = f"line {self.line}: " if self.line is not None else ""
        return f"{where}{self.code}: {self.message}"


class CorpusError(ValueError):
    """Raised on the first invalid input line in strict loading."""

    def __init__(self, diagnostic: Diagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic


@dataclass(frozen=True)
class GenerationRecord:
    """One generation instance with its required citations and references."""

    record_id: str
    model_name: str
    previous_text: str
    generation: str
    target: str
    required_citations: tuple[str, ...]
    references: tuple[tuple[str, str], ...]  # ordered (cite_key, text)

    def reference_keys(self) -> list[str]:
        return [key for key, _ in self.references]

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "model_name": self.model_name,
            "previous_text": self.previous_text,
            "generation": self.generation,
            "target": self.target,
            "required_citations": list(self.required_citations),
            "references": [{"cite_key": k, "text": t} for k, t in self.references],
        }


@dataclass(frozen=True)
class AnnotatedExample:
    """A gold-labeled example. ``record`` is attached by :func:`attach_records`
    when the full text is needed (e.g. to render demonstrations)."""

    record_id: str
    gold: GapLabelSet
    explanation: str
    annotator_id: str
    annotated_at: str
    record: GenerationRecord | None = None

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "label": self.gold.to_list(),
            "explanation": self.explanation,
            "annotator_id": self.annotator_id,
            "annotated_at": self.annotated_at,
        }


@dataclass(frozen=True)
class DatasetStats:
    """Label statistics over a list of annotated examples.

    ``label_distribution`` is over label instances, not examples: a
    multi-label example contributes once per label to the denominator.
    """

    n_examples: int
    label_counts: dict[int, int]
    label_distribution: dict[int, float]
    balance: float

    def to_dict(self) -> dict:
        return {
            "n_examples": self.n_examples,
            "label_counts": {str(k): v for k, v in sorted(self.label_counts.items())},
            "label_distribution": {
                str(k): v for k, v in sorted(self.label_distribution.items())
            },
            "balance": self.balance,
        }


def _iter_lines(source: Source) -> Iterator[tuple[int, str]]:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            yield from enumerate(fh, 1)
        return
    stream = source
    if isinstance(stream.read(0), bytes):
        stream = io.TextIOWrapper(stream, encoding="utf-8")  # type: ignore[arg-type]
    yield from enumerate(stream, 1)  # type: ignore[arg-type]


def _parse_record(obj: dict, line: int) -> GenerationRecord:
    for name in RECORD_FIELDS:
        if name not in obj:
            raise CorpusError(Diagnostic(line, "schema-violation", f"missing field {name!r}"))
    for name in ("record_id", "model_name", "previous_text", "generation", "target"):
        if not isinstance(obj[name], str):
            raise CorpusError(Diagnostic(line, "schema-violation", f"field {name!r} must be a string"))
    req = obj["required_citations"]
    if not isinstance(req, list) or not all(isinstance(x, str) for x in req):
        raise CorpusError(
            Diagnostic(line, "schema-violation", "required_citations must be an array of strings")
        )
    refs = obj["references"]
    if not isinstance(refs, list):
        raise CorpusError(Diagnostic(line, "schema-violation", "references must be an array"))
    pairs: list[tuple[str, str]] = []
    for ref in refs:
        if (
            not isinstance(ref, dict)
            or not isinstance(ref.get("cite_key"), str)
            or not isinstance(ref.get("text"), str)
        ):
            raise CorpusError(
                Diagnostic(line, "schema-violation", "each reference needs string cite_key and text")
            )
        pairs.append((ref["cite_key"], ref["text"]))
    record = GenerationRecord(
        record_id=obj["record_id"],
        model_name=obj["model_name"],
        previous_text=obj["previous_text"],
        generation=obj["generation"],
        target=obj["target"],
        required_citations=tuple(req),
        references=tuple(pairs),
    )
    ref_keys = set(record.reference_keys())
    for needed in record.required_citations:
        if needed not in ref_keys:
            raise CorpusError(
                Diagnostic(
                    line,
                    "missing-reference",
                    f"record {record.record_id!r}: required citation {needed!r} "
                    "has no entry in references",
                )
            )
    return record


def _scan_records(source: Source) -> Iterator[tuple[int, GenerationRecord | Diagnostic]]:
    seen_ids: set[str] = set()
    for line_no, raw in _iter_lines(source):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            yield line_no, Diagnostic(line_no, "malformed-json", str(exc))
            continue
        if not isinstance(obj, dict):
            yield line_no, Diagnostic(line_no, "schema-violation", "line is not a JSON object")
            continue
        try:
            record = _parse_record(obj, line_no)
        except CorpusError as exc:
            yield line_no, exc.diagnostic
            continue
        if record.record_id in seen_ids:
            yield line_no, Diagnostic(
                line_no, "duplicate-record-id", f"record_id {record.record_id!r} repeats"
            )
            continue
        seen_ids.add(record.record_id)
        yield line_no, record


def load_records(source: Source) -> list[GenerationRecord]:
    """Parse a records stream strictly; raises CorpusError at the first
    invalid line."""
    records: list[GenerationRecord] = []
    for _, item in _scan_records(source):
        if isinstance(item, Diagnostic):
            raise CorpusError(item)
        records.append(item)
    return records


def validate_records(source: Source) -> tuple[list[GenerationRecord], list[Diagnostic]]:
    """Parse a records stream leniently, collecting every diagnostic."""
    records: list[GenerationRecord] = []
    problems: list[Diagnostic] = []
    for _, item in _scan_records(source):
        if isinstance(item, Diagnostic):
            problems.append(item)
        else:
            records.append(item)
    return records, problems


def _parse_annotation(obj: dict, line: int) -> AnnotatedExample:
    for name in ANNOTATION_FIELDS:
        if name not in obj:
            raise CorpusError(Diagnostic(line, "schema-violation", f"missing field {name!r}"))
    for name in ("record_id", "explanation", "annotator_id", "annotated_at"):
        if not isinstance(obj[name], str):
            raise CorpusError(Diagnostic(line, "schema-violation", f"field {name!r} must be a string"))
    try:
        gold = parse_label_list(obj["label"])
    except LabelError as exc:
        raise CorpusError(Diagnostic(line, "label-invalid", str(exc))) from exc
    stamp = obj["annotated_at"]
    try:
        datetime.fromisoformat(stamp.replace("Z", "+00:00"))
    except ValueError:
        raise CorpusError(
            Diagnostic(line, "schema-violation", f"annotated_at {stamp!r} is not a valid timestamp")
        ) from None
    return AnnotatedExample(
        record_id=obj["record_id"],
        gold=gold,
        explanation=obj["explanation"],
        annotator_id=obj["annotator_id"],
        annotated_at=stamp,
    )


def _scan_annotations(source: Source) -> Iterator[tuple[int, AnnotatedExample | Diagnostic]]:
    for line_no, raw in _iter_lines(source):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            yield line_no, Diagnostic(line_no, "malformed-json", str(exc))
            continue
        if not isinstance(obj, dict):
            yield line_no, Diagnostic(line_no, "schema-violation", "line is not a JSON object")
            continue
        try:
            yield line_no, _parse_annotation(obj, line_no)
        except CorpusError as exc:
            yield line_no, exc.diagnostic


def load_annotations(source: Source) -> list[AnnotatedExample]:
    """Parse an annotations stream strictly; raises CorpusError at the first
    invalid line."""
    examples: list[AnnotatedExample] = []
    for _, item in _scan_annotations(source):
        if isinstance(item, Diagnostic):
            raise CorpusError(item)
        examples.append(item)
    return examples


def validate_annotations(source: Source) -> tuple[list[AnnotatedExample], list[Diagnostic]]:
    examples: list[AnnotatedExample] = []
    problems: list[Diagnostic] = []
    for _, item in _scan_annotations(source):
        if isinstance(item, Diagnostic):
            problems.append(item)
        else:
            examples.append(item)
    return examples, problems


def attach_records(
    annotations: Iterable[AnnotatedExample], records: Iterable[GenerationRecord]
) -> list[AnnotatedExample]:
    """Join annotations to their records by id; unknown ids are an error."""
    by_id = {r.record_id: r for r in records}
    joined: list[AnnotatedExample] = []
    for ann in annotations:
        record = by_id.get(ann.record_id)
        if record is None:
            raise CorpusError(
                Diagnostic(None, "unknown-record", f"annotation for unknown record {ann.record_id!r}")
            )
        joined.append(replace(ann, record=record))
    return joined


def write_annotations(examples: Iterable[AnnotatedExample]) -> str:
    """Serialize annotations to the canonical JSONL form (LF-terminated lines)."""
    lines = [json.dumps(ex.to_dict(), ensure_ascii=False) for ex in examples]
    return "".join(line + "\n" for line in lines)


def label_distribution(examples: Sequence[AnnotatedExample]) -> DatasetStats:
    """Per-category counts and proportions over all label instances."""
    if not examples:
        raise ValueError("cannot compute statistics for an empty example list")
    counts = {k: 0 for k in range(N_CATEGORIES)}
    for ex in examples:
        for label in ex.gold:
            counts[label] += 1
    total = sum(counts.values())
    distribution = {k: counts[k] / total for k in counts}
    return DatasetStats(
        n_examples=len(examples),
        label_counts=counts,
        label_distribution=distribution,
        balance=entropy_balance(distribution.values()),
    )


def entropy_balance(proportions: Iterable[float]) -> float:
    """Entropy of the distribution over the entropy of a uniform one.

    Zero-probability categories contribute nothing but still count toward the
    uniform denominator, so the ratio lives in [0, 1] regardless of base.
    """
    p = list(proportions)
    if not p or len(p) < 2:
        return 0.0
    # `or 0.0` folds the -0.0 a degenerate distribution would produce.
    entropy = -math.fsum(x * math.log(x) for x in p if x > 0) or 0.0
    return entropy / math.log(len(p))


def dataset_balance(stats: DatasetStats) -> float:
    """Balance ratio of a computed DatasetStats (all 4 categories included)."""
    return entropy_balance(stats.label_distribution[k] for k in range(N_CATEGORIES))


def select_demonstrations(
    train: Sequence[AnnotatedExample], k: int
) -> list[AnnotatedExample]:
    """The first k training examples in file order.

    A stable prefix keeps shot-count sweeps reproducible: the 4-shot set is
    always a subset of the 8-shot set, and so on.
    """
    if not 1 <= k <= len(train):
        raise ValueError(f"k must be between 1 and {len(train)}, got {k}")
    return list(train[:k])

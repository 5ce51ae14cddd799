"""Evaluation metrics for gap detection and generation quality.

Per-example detector scores treat label sets as 4-dim binary vectors:
exact match, precision (overlap over predicted size), recall (overlap over
gold size), and their harmonic mean. Corpus-level ratios summarize label
lists alone: ``gap_score`` is the fraction of examples with any gap,
``gap_halu`` the fraction with a hallucination-class gap (intrinsic or
citation content mismatch). ROUGE-1/2/L are included as reference-based
baselines for comparison.

Because "no gaps" is an explicit vector dimension, every valid label set has
norm >= 1 and the precision/recall denominators can never be zero.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from gapcheck.taxonomy import GapLabelSet

GAP_IDS = (1, 2, 3)
HALLUCINATION_IDS = (1, 3)

#: Error-table normalizations: per example (divide by N) or per opportunity
#: (divide by the number of examples where the mistake was possible).
ERROR_DENOMINATORS = ("example", "instance")


@dataclass(frozen=True)
class DetectionOutcome:
    """One gold/predicted label-set pair for a record."""

    record_id: str
    gold: GapLabelSet
    predicted: GapLabelSet


def gem(gold: GapLabelSet, pred: GapLabelSet) -> int:
    """Exact-match indicator: 1 iff the label sets are identical."""
    return int(gold.bits == pred.bits)


def _overlap(gold: GapLabelSet, pred: GapLabelSet) -> int:
    return sum(g & p for g, p in zip(gold.bits, pred.bits))


def gap_precision(gold: GapLabelSet, pred: GapLabelSet) -> float:
    """Label overlap divided by the number of predicted labels."""
    return _overlap(gold, pred) / sum(pred.bits)


def gap_recall(gold: GapLabelSet, pred: GapLabelSet) -> float:
    """Label overlap divided by the number of gold labels."""
    return _overlap(gold, pred) / sum(gold.bits)


def gap_f1(gold: GapLabelSet, pred: GapLabelSet) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    p = gap_precision(gold, pred)
    r = gap_recall(gold, pred)
    if p + r == 0:
        return 0.0
    return 2 * p * r / (p + r)


@dataclass(frozen=True)
class MeanScores:
    mgem: float
    mgp: float
    mgr: float
    mgf1: float


def aggregate(outcomes: Sequence[DetectionOutcome]) -> MeanScores:
    """Arithmetic means of the per-example scores over all outcomes."""
    if not outcomes:
        raise ValueError("cannot aggregate zero outcomes")
    n = len(outcomes)
    return MeanScores(
        mgem=math.fsum(gem(o.gold, o.predicted) for o in outcomes) / n,
        mgp=math.fsum(gap_precision(o.gold, o.predicted) for o in outcomes) / n,
        mgr=math.fsum(gap_recall(o.gold, o.predicted) for o in outcomes) / n,
        mgf1=math.fsum(gap_f1(o.gold, o.predicted) for o in outcomes) / n,
    )


def gap_score(predictions: Sequence[GapLabelSet]) -> float:
    """Fraction of examples carrying any gap label, each example capped at 1."""
    if not predictions:
        raise ValueError("cannot score an empty prediction list")
    return math.fsum(min(sum(p.bits[k] for k in GAP_IDS), 1) for p in predictions) / len(predictions)


def gap_halu(predictions: Sequence[GapLabelSet]) -> float:
    """Fraction of examples carrying a hallucination-class gap, capped at 1.

    Target mismatch alone contributes 0: it does not indicate hallucination.
    """
    if not predictions:
        raise ValueError("cannot score an empty prediction list")
    return math.fsum(
        min(sum(p.bits[k] for k in HALLUCINATION_IDS), 1) for p in predictions
    ) / len(predictions)


def category_rates(predictions: Sequence[GapLabelSet]) -> dict[int, float]:
    """Fraction of examples containing each gap category (1, 2, 3)."""
    if not predictions:
        raise ValueError("cannot compute rates for an empty prediction list")
    n = len(predictions)
    return {k: math.fsum(p.bits[k] for p in predictions) / n for k in GAP_IDS}


def error_analysis(
    outcomes: Sequence[DetectionOutcome], denominator: str = "example"
) -> dict[int, tuple[float, float]]:
    """Per-category (over_rate, under_rate) table.

    Over-prediction of k: predicted has k, gold lacks it. Under-prediction:
    gold has k, predicted lacks it. With ``denominator="example"`` both counts
    divide by N; with ``"instance"`` each divides by its opportunity count
    (examples where gold lacks k for over, has k for under), 0/0 taken as 0.
    """
    if not outcomes:
        raise ValueError("cannot analyze zero outcomes")
    if denominator not in ERROR_DENOMINATORS:
        raise ValueError(f"denominator must be one of {ERROR_DENOMINATORS}, got {denominator!r}")
    n = len(outcomes)
    table: dict[int, tuple[float, float]] = {}
    for k in GAP_IDS:
        over = sum(1 for o in outcomes if o.predicted.bits[k] and not o.gold.bits[k])
        under = sum(1 for o in outcomes if o.gold.bits[k] and not o.predicted.bits[k])
        if denominator == "example":
            table[k] = (over / n, under / n)
        else:
            gold_without = sum(1 for o in outcomes if not o.gold.bits[k])
            gold_with = n - gold_without
            table[k] = (
                over / gold_without if gold_without else 0.0,
                under / gold_with if gold_with else 0.0,
            )
    return table


# ---------------------------------------------------------------------------
# ROUGE baselines
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


def _tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0]
        for j, y in enumerate(b, 1):
            curr.append(prev[j - 1] + 1 if x == y else max(prev[j], curr[j - 1]))
        prev = curr
    return prev[-1]


@dataclass(frozen=True)
class RougeScores:
    precision: float
    recall: float
    f: float


def _prf(match: int, cand_total: int, ref_total: int) -> RougeScores:
    p = match / cand_total if cand_total else 0.0
    r = match / ref_total if ref_total else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return RougeScores(p, r, f)


def rouge(candidate: str, reference: str, variant: int | str) -> RougeScores:
    """ROUGE-1, ROUGE-2, or ROUGE-L precision/recall/F.

    Tokenization lowercases and splits on non-alphanumerics, no stemming.
    An empty reference scores all zeros.
    """
    cand = _tokenize(candidate)
    ref = _tokenize(reference)
    if not ref:
        return RougeScores(0.0, 0.0, 0.0)
    key = str(variant).upper()
    if key in ("1", "2"):
        n = int(key)
        cg, rg = _ngrams(cand, n), _ngrams(ref, n)
        match = sum(min(c, rg[g]) for g, c in cg.items())
        return _prf(match, sum(cg.values()), sum(rg.values()))
    if key == "L":
        return _prf(_lcs_length(cand, ref), len(cand), len(ref))
    raise ValueError(f"unknown ROUGE variant {variant!r}; expected 1, 2, or 'L'")


# ---------------------------------------------------------------------------
# Report assembly
# ---------------------------------------------------------------------------

_BOUND_EPS = 1e-9


@dataclass
class MetricsReport:
    """Aggregate evaluation of one prediction run.

    Accuracy means (``mgem`` .. ``mgf1``) and the error table are present only
    when gold labels were available. ``n`` counts scored examples; responses
    that never parsed are excluded from every statistic and tallied in
    ``n_failed``.
    """

    n: int
    n_failed: int = 0
    gap_score: float | None = None
    gap_halu: float | None = None
    category_rates: dict[int, float] = field(default_factory=dict)
    mgem: float | None = None
    mgp: float | None = None
    mgr: float | None = None
    mgf1: float | None = None
    error_table: dict[int, tuple[float, float]] | None = None
    error_denominator: str = "example"

    def validate(self) -> None:
        """Check range and consistency invariants; raises ValueError on breach."""
        values = [self.gap_score, self.gap_halu, self.mgem, self.mgp, self.mgr, self.mgf1]
        values += list(self.category_rates.values())
        if self.error_table:
            for over, under in self.error_table.values():
                values += [over, under]
        for v in values:
            if v is not None and not -_BOUND_EPS <= v <= 1 + _BOUND_EPS:
                raise ValueError(f"metric value {v} outside [0, 1]")
        if self.gap_score is not None and self.gap_halu is not None:
            if self.gap_halu > self.gap_score + _BOUND_EPS:
                raise ValueError("gap_halu exceeds gap_score")
        rates = self.category_rates
        if rates and self.gap_halu is not None:
            lo = max(rates[1], rates[3])
            hi = min(1.0, rates[1] + rates[3])
            if not lo - _BOUND_EPS <= self.gap_halu <= hi + _BOUND_EPS:
                raise ValueError(f"gap_halu {self.gap_halu} outside [{lo}, {hi}]")
        if rates and self.gap_score is not None:
            lo = max(rates[1], rates[2], rates[3])
            hi = min(1.0, rates[1] + rates[2] + rates[3])
            if not lo - _BOUND_EPS <= self.gap_score <= hi + _BOUND_EPS:
                raise ValueError(f"gap_score {self.gap_score} outside [{lo}, {hi}]")

    def to_dict(self) -> dict:
        out: dict = {"n": self.n, "n_failed": self.n_failed}
        for name in ("gap_score", "gap_halu", "mgem", "mgp", "mgr", "mgf1"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        if self.category_rates:
            out["category_rates"] = {str(k): v for k, v in self.category_rates.items()}
        if self.error_table is not None:
            out["error_table"] = {
                str(k): {"over": over, "under": under}
                for k, (over, under) in self.error_table.items()
            }
            out["error_denominator"] = self.error_denominator
        return out

    def metric_rows(self) -> list[tuple[str, float]]:
        """Flat (metric, value) rows for CSV emission, in a fixed order."""
        rows: list[tuple[str, float]] = []
        for name in ("mgem", "mgp", "mgr", "mgf1", "gap_score", "gap_halu"):
            value = getattr(self, name)
            if value is not None:
                rows.append((name, value))
        for k in GAP_IDS:
            if k in self.category_rates:
                rows.append((f"rate_{k}", self.category_rates[k]))
        if self.error_table is not None:
            for k in GAP_IDS:
                over, under = self.error_table[k]
                rows.append((f"over_{k}", over))
                rows.append((f"under_{k}", under))
        return rows


def evaluate_predictions(
    predicted: Sequence[GapLabelSet],
    gold: Sequence[GapLabelSet] | None = None,
    record_ids: Sequence[str] | None = None,
    n_failed: int = 0,
    denominator: str = "example",
) -> MetricsReport:
    """Build a MetricsReport from aligned prediction (and optional gold) lists."""
    if not predicted:
        return MetricsReport(n=0, n_failed=n_failed)
    report = MetricsReport(
        n=len(predicted),
        n_failed=n_failed,
        gap_score=gap_score(predicted),
        gap_halu=gap_halu(predicted),
        category_rates=category_rates(predicted),
        error_denominator=denominator,
    )
    if gold is not None:
        if len(gold) != len(predicted):
            raise ValueError("gold and predicted lists differ in length")
        ids = record_ids if record_ids is not None else [str(i) for i in range(len(predicted))]
        outcomes = [
            DetectionOutcome(rid, g, p) for rid, g, p in zip(ids, gold, predicted)
        ]
        means = aggregate(outcomes)
        report.mgem, report.mgp, report.mgr, report.mgf1 = (
            means.mgem,
            means.mgp,
            means.mgr,
            means.mgf1,
        )
        report.error_table = error_analysis(outcomes, denominator)
    return report


def report_from_rates(
    n: int,
    gap_score_value: float,
    gap_halu_value: float,
    rates: Mapping[int, float],
) -> MetricsReport:
    """Load externally produced corpus-level rates as a report (for bound checks)."""
    return MetricsReport(
        n=n,
        gap_score=gap_score_value,
        gap_halu=gap_halu_value,
        category_rates=dict(rates),
    )

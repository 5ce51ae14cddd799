"""Legal citation extraction plus rule-based screening signals.

The citation grammar targets reporter cites of the form
``volume reporter page[, pincite][ (court/year)]`` -- e.g.
``440 U.S. 48, 55`` or ``359 F.2d 292, 294 (C.A. 4, 1966)``. Reporters come
from a configurable whitelist; a dotted abbreviation sequence that is not on
the whitelist still yields a citation, flagged low-confidence, rather than
being dropped.

Screening signals (repeated sentences/n-grams, structural markers, word-count
bounds) are advisory triage for human reviewers. They never assert a gap
label; labeling belongs to the detector and the annotator.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Iterable, Sequence

if TYPE_CHECKING:
    from gapcheck.corpus import GenerationRecord

#: Reporter abbreviations recognized with full confidence.
DEFAULT_REPORTERS: tuple[str, ...] = (
    "U.S.",
    "F.2d",
    "F.3d",
    "B.R.",
    "M.J.",
    "S.Ct.",
    "L.Ed.2d",
    "U.S.App.D.C.",
)

#: Markers that typically open or close a full case document; seeing one in a
#: next-paragraph generation suggests a structural mismatch.
DEFAULT_STRUCTURAL_MARKERS: tuple[str, ...] = (
    "OPINION AND ORDER",
    "CONCLUSIONS OF LAW",
    "ORDER",
    "Reversed.",
    "Affirmed.",
)

#: Word-count bounds the generation prompt asks for.
DEFAULT_WORD_BOUNDS: tuple[int, int] = (100, 400)


@dataclass(frozen=True)
class Citation:
    """A parsed reporter citation. ``raw_span`` is the (start, end) character
    range of the matched text in the source string."""

    volume: int
    reporter: str
    first_page: int
    pincite: int | None = None
    court_year: str | None = None
    raw_span: tuple[int, int] = (0, 0)
    low_confidence: bool = False

    def to_dict(self) -> dict:
        return {
            "volume": self.volume,
            "reporter": self.reporter,
            "first_page": self.first_page,
            "pincite": self.pincite,
            "court_year": self.court_year,
            "start": self.raw_span[0],
            "end": self.raw_span[1],
            "low_confidence": self.low_confidence,
            "key": citation_key(self),
        }


# A dotted abbreviation sequence ("Harv. L. Rev.", "U.S.C.") used when no
# whitelisted reporter matches; each token starts uppercase and ends with a
# period. Spaces are bracketed so the pattern survives re.VERBOSE.
_UNKNOWN_REPORTER = r"[A-Z][-A-Za-z0-9.'’]*\.(?:[ ][A-Z][-A-Za-z0-9.'’]*\.)*"


@lru_cache(maxsize=8)
def _citation_re(reporters: tuple[str, ...]) -> re.Pattern[str]:
    known = "|".join(re.escape(r) for r in sorted(reporters, key=len, reverse=True))
    any_reporter = f"(?:{known}|{_UNKNOWN_REPORTER})"
    # (?!\d) pins each number to its full digit run: a rejected pincite must
    # fail outright instead of backtracking into a shorter number and eating
    # the volume of the next parallel citation.
    return re.compile(
        rf"""
        (?<![\w.])
        (?P<vol>[1-9]\d{{0,3}})(?!\d)
        \s+
        (?:(?P<krep>{known})|(?P<urep>{_UNKNOWN_REPORTER}))
        \s+
        (?P<page>[1-9]\d{{0,4}})(?!\d)
        (?:
            ,\s*
            (?P<pin>[1-9]\d{{0,4}})(?!\d)
            (?:\s?[-–]\s?\d{{1,5}}(?!\d))?
            (?!\s+{any_reporter}[ ]+[1-9])   # not the volume of a parallel cite
        )?
        (?:\s*\((?P<cy>[^()]*\d{{4}}[^()]*)\))?
        """,
        re.VERBOSE,
    )


def extract_citations(
    text: str, reporters: Sequence[str] = DEFAULT_REPORTERS
) -> list[Citation]:
    """Extract reporter citations left to right, non-overlapping.

    Unmatched text is skipped silently; extraction never fails.
    """
    pattern = _citation_re(tuple(reporters))
    out: list[Citation] = []
    for m in pattern.finditer(text):
        reporter = m.group("krep") or m.group("urep")
        out.append(
            Citation(
                volume=int(m.group("vol")),
                reporter=" ".join(reporter.split()),
                first_page=int(m.group("page")),
                pincite=int(m.group("pin")) if m.group("pin") else None,
                court_year=m.group("cy"),
                raw_span=(m.start(), m.end()),
                low_confidence=m.group("urep") is not None,
            )
        )
    return out


def citation_key(c: Citation) -> str:
    """Normalized lookup key: ``volume reporter first_page``, single-spaced.

    Pincites and parentheticals are stripped, so every form of the same cite
    maps to one key; the normalization is idempotent.
    """
    return f"{c.volume} {c.reporter} {c.first_page}"


def normalize_citation_key(raw: str, reporters: Sequence[str] = DEFAULT_REPORTERS) -> str:
    """Normalize a citation string to its key; non-parsing strings collapse
    to single-spaced text so exact matches still work."""
    found = extract_citations(raw, reporters)
    if found:
        return citation_key(found[0])
    return " ".join(raw.split())


@dataclass(frozen=True)
class CoverageReport:
    """Which required citations the generation actually made.

    ``extra`` excludes keys already present in the previous text: re-citing
    something from the visible context is not treated as inventing a cite.
    """

    cited: frozenset[str]
    missing: frozenset[str]
    extra: frozenset[str]

    def to_dict(self) -> dict:
        return {
            "cited": sorted(self.cited),
            "missing": sorted(self.missing),
            "extra": sorted(self.extra),
        }


def coverage(
    record: "GenerationRecord", reporters: Sequence[str] = DEFAULT_REPORTERS
) -> CoverageReport:
    """Compare normalized citation keys in the generation against the
    record's required citations."""
    cited = {citation_key(c) for c in extract_citations(record.generation, reporters)}
    previous = {citation_key(c) for c in extract_citations(record.previous_text, reporters)}
    required = {normalize_citation_key(r, reporters) for r in record.required_citations}
    return CoverageReport(
        cited=frozenset(cited),
        missing=frozenset(required - cited),
        extra=frozenset(cited - required - previous),
    )


# ---------------------------------------------------------------------------
# Screening signals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScreenConfig:
    ngram_size: int = 8
    structural_markers: tuple[str, ...] = DEFAULT_STRUCTURAL_MARKERS
    word_bounds: tuple[int, int] = DEFAULT_WORD_BOUNDS
    reporters: tuple[str, ...] = DEFAULT_REPORTERS


@dataclass(frozen=True)
class ScreeningSignals:
    """Advisory triage signals over one generation. Every reported repeat has
    count >= 2."""

    repeated_sentences: tuple[tuple[str, int], ...]
    repeated_ngrams: tuple[tuple[str, int], ...]
    structural_markers: tuple[tuple[str, int, int], ...]  # (marker, start, end)
    word_count: int
    word_count_in_bounds: bool

    def to_dict(self) -> dict:
        return {
            "repeated_sentences": [
                {"sentence": s, "count": c} for s, c in self.repeated_sentences
            ],
            "repeated_ngrams": [
                {"ngram": g, "count": c} for g, c in self.repeated_ngrams
            ],
            "structural_markers": [
                {"marker": m, "start": s, "end": e}
                for m, s, e in self.structural_markers
            ],
            "word_count": self.word_count,
            "word_count_in_bounds": self.word_count_in_bounds,
        }


_COMMON_ABBREVS = {
    "v.", "vs.", "Mr.", "Mrs.", "Ms.", "Dr.", "Jr.", "Sr.", "No.", "Nos.",
    "Inc.", "Co.", "Corp.", "Ltd.", "St.", "Art.", "Sec.", "Stat.", "Ann.",
    "ed.", "Cir.", "Ct.", "Bankr.", "Fed.", "Rev.", "Id.", "id.", "supra.",
}

_SENTENCE_BOUNDARY = re.compile(r"[.!?](?=\s+[\"'(\[“‘]?[A-Z0-9])")


def split_sentences(text: str, reporters: Sequence[str] = DEFAULT_REPORTERS) -> list[str]:
    """Split on terminal punctuation followed by whitespace and a capital
    (or digit), skipping boundaries that end in an abbreviation.

    A token counts as an abbreviation when it is on the common list, carries
    an internal period (so reporter cites like "U.S." never split), or is a
    single initial.
    """
    abbrevs = set(_COMMON_ABBREVS) | set(reporters)
    sentences: list[str] = []
    start = 0
    for m in _SENTENCE_BOUNDARY.finditer(text):
        end = m.end()
        chunk = text[start:end].split()
        token = chunk[-1] if chunk else ""
        token = token.lstrip("\"'([“‘")
        if text[end - 1] == ".":
            if token in abbrevs or "." in token[:-1]:
                continue
            if len(token) == 2 and token[0].isalpha() and token[0].isupper():
                continue
        piece = text[start:end].strip()
        if piece:
            sentences.append(piece)
        start = end
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def _first_occurrence_repeats(items: Iterable[str]) -> list[tuple[str, int]]:
    counts: dict[str, int] = {}
    for item in items:
        counts[item] = counts.get(item, 0) + 1
    return [(item, n) for item, n in counts.items() if n >= 2]


def _find_markers(text: str, markers: Sequence[str]) -> list[tuple[str, int, int]]:
    hits: list[tuple[str, int, int]] = []
    claimed: list[tuple[int, int]] = []
    for marker in sorted(markers, key=len, reverse=True):
        pos = text.find(marker)
        while pos != -1:
            span = (pos, pos + len(marker))
            if not any(span[0] >= a and span[1] <= b for a, b in claimed):
                hits.append((marker, span[0], span[1]))
                claimed.append(span)
            pos = text.find(marker, pos + 1)
    hits.sort(key=lambda h: (h[1], h[2]))
    return hits


def screen(record: "GenerationRecord", config: ScreenConfig | None = None) -> ScreeningSignals:
    """Compute screening signals for one record's generation.

    Pure function of (record, config): same inputs, same signals.
    """
    cfg = config or ScreenConfig()
    text = record.generation
    normalized = [" ".join(s.split()) for s in split_sentences(text, cfg.reporters)]
    tokens = text.split()
    grams = (
        " ".join(tokens[i : i + cfg.ngram_size])
        for i in range(len(tokens) - cfg.ngram_size + 1)
    )
    lo, hi = cfg.word_bounds
    return ScreeningSignals(
        repeated_sentences=tuple(_first_occurrence_repeats(normalized)),
        repeated_ngrams=tuple(_first_occurrence_repeats(grams)),
        structural_markers=tuple(_find_markers(text, cfg.structural_markers)),
        word_count=len(tokens),
        word_count_in_bounds=lo <= len(tokens) <= hi,
    )

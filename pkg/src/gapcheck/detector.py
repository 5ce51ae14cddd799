"""Few-shot gap detector: prompt assembly, response parsing, and batch runs.

The detector prompts a chat-completion model with a fixed system prompt
(annotator persona, the generation task description, the gap category
instructions, and k labeled demonstrations) and one user prompt per record.
Prompt construction is byte-deterministic: identical inputs always produce
identical bytes, with LF newlines, so prompts can be golden-file tested and
mocked by digest.

Responses must be a JSON object with ``label`` and ``explanation`` fields.
Parsing is strict-first with a short, ordered repair pipeline; anything the
pipeline cannot fix is a parse failure, never a guessed label.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import requests

from gapcheck.corpus import AnnotatedExample, GenerationRecord, select_demonstrations
from gapcheck.metrics import MetricsReport, evaluate_predictions
from gapcheck.taxonomy import GapLabelSet, LabelError, parse_label_list

MAX_DEMONSTRATIONS = 20

PARSE_OK = "ok"
PARSE_REPAIRED = "repaired"
PARSE_FAILED = "failed"


class ConfigError(ValueError):
    """Detector configuration violates its constraints."""


class TransportError(RuntimeError):
    """The completion backend failed to produce any response."""


@dataclass(frozen=True)
class DetectorConfig:
    endpoint_url: str = ""
    model_name: str = ""
    api_key_ref: str = "GAPCHECK_API_KEY"
    k_demonstrations: int = MAX_DEMONSTRATIONS
    temperature: float = 0.0
    max_retries: int = 2
    request_timeout: float = 120.0
    parallelism: int = 4

    def __post_init__(self) -> None:
        if not 0 <= self.k_demonstrations <= MAX_DEMONSTRATIONS:
            raise ConfigError(
                f"k_demonstrations must be in [0, {MAX_DEMONSTRATIONS}], got {self.k_demonstrations}"
            )
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str


@dataclass(frozen=True)
class DetectionResult:
    """Detector output for one record. ``labels`` is present exactly when
    parsing did not fail; ``raw_response`` keeps the last model output (empty
    when the transport never delivered one)."""

    record_id: str
    labels: GapLabelSet | None
    explanation: str
    parse_status: str
    raw_response: str
    attempts: int
    error: str = ""

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "labels": self.labels.to_list() if self.labels is not None else None,
            "explanation": self.explanation,
            "parse_status": self.parse_status,
            "attempts": self.attempts,
            "raw_response": self.raw_response,
        }


# ---------------------------------------------------------------------------
# Prompt templates
# ---------------------------------------------------------------------------

SYSTEM_PREAMBLE = """You are a trained lawyer from Silicon Valley with a computer science background. Now, you are asked to annotate legal analysis generated by large language models and classify the errors and mismatch made by these models. To produce these legal analysis, a language model will receive the following prompt:

Here are some reference articles for legal cases:
# Reference case {case_key_1}
{text of cited case 1}
# Reference case {case_key_2}
{text of cited case 2}
...
# Reference case {case_key_N}
{text of cited case N}

Here is the text I've written so far:
# Paragraph
{previous_text}

Continue to write it following the style of my writeup. Your answer contains 100 to 400 words. You must explicitly use the reference cases and mention their reference ids, i.e. {case_key_1}, {case_key_2} ... {case_key_N}. Wrap your answer with <answer></answer>. Make your answer concise and avoid redundant languages.

Receiving the prompt above, a language model will generate a paragraph of legal analysis, but often times they make different kinds of errors and mismatches.

The instructions for you to classify these errors and mismatches are as follows:

You should classify the LLM-generated legal analysis to these categories:
"""

DEMONSTRATION_HEADER = "Here are some examples for demonstration:"

DEMONSTRATION_FOOTER = "-" * 95 + "\n\n--End Demonstration--"

SYSTEM_CLOSING = (
    "Now, we will give you more instances and have you annotate 1, 2, 3, or 0. "
    "Output a json object containing the label and explanation for each example. "
    "If you label a 3, please elaborate the explanation for it a bit more."
)

USER_CLOSING = (
    'Output a valid JSON object with the fields of {"label": [(one or more integers '
    'from 0-3 indicating the gap categories, expressed in a list)], "explanation": a '
    "short explanation justifying the label.}. Do not output anything else such as "
    "'json' or newline characters or redundant spaces. Answer after output: "
    "\n\noutput: "
)


def default_instruction_summary() -> str:
    """The checked-in gap category instructions embedded in the system prompt."""
    return (
        resources.files("gapcheck")
        .joinpath("assets/gap_category_summary.txt")
        .read_text(encoding="utf-8")
    )


def _render_record_fields(record: GenerationRecord) -> str:
    parts = [
        f"Generation:\n{record.generation}",
        f"citations needed to make: {list(record.required_citations)!r}",
        f"Target:\n{record.target}",
    ]
    for i, (key, text) in enumerate(record.references, 1):
        parts.append(f"reference_case_{i}: {key}\n{text}")
    parts.append(f"previous_text:\n{record.previous_text}")
    return "\n\n".join(parts)


def render_demonstration(example: AnnotatedExample) -> str:
    """One demonstration block: the record's fields followed by its label and
    explanation."""
    if example.record is None:
        raise ValueError(
            f"demonstration {example.record_id!r} has no record attached; "
            "join annotations to records first"
        )
    return (
        _render_record_fields(example.record)
        + f"\n\nLabel: {json.dumps(example.gold.to_list())}"
        + f"\n\nExplanation: {example.explanation}"
    )


def build_system_prompt(
    instruction_summary: str | None, demos: Sequence[AnnotatedExample]
) -> str:
    """Assemble the detector system prompt with the given demonstrations.

    Byte-deterministic; with zero demonstrations the demonstration section is
    omitted entirely.
    """
    summary = instruction_summary if instruction_summary is not None else default_instruction_summary()
    parts = [SYSTEM_PREAMBLE.rstrip("\n"), summary.strip("\n")]
    if demos:
        parts.append(DEMONSTRATION_HEADER)
        parts.extend(render_demonstration(d) for d in demos)
        parts.append(DEMONSTRATION_FOOTER)
    parts.append(SYSTEM_CLOSING)
    return "\n\n".join(parts) + "\n"


def build_user_prompt(record: GenerationRecord) -> str:
    """Assemble the per-record user prompt, ending with the literal JSON
    output instruction and the ``output:`` cue."""
    return _render_record_fields(record) + "\n\n" + USER_CLOSING


def build_prompts(
    record: GenerationRecord,
    demos: Sequence[AnnotatedExample],
    instruction_summary: str | None = None,
) -> PromptBundle:
    return PromptBundle(
        system_text=build_system_prompt(instruction_summary, demos),
        user_text=build_user_prompt(record),
    )


def prompt_digest(system_text: str, user_text: str) -> str:
    """Stable digest of a prompt pair, the key used by the mock backend."""
    h = hashlib.sha256()
    h.update(system_text.encode("utf-8"))
    h.update(b"\x00")
    h.update(user_text.encode("utf-8"))
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Response parsing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParsedResponse:
    labels: GapLabelSet | None
    explanation: str
    parse_status: str
    error: str = ""


_FENCE_RE = re.compile(r"```(?:json)?\s*\n?(.*?)\n?```", re.DOTALL)


def _strip_code_fences(text: str) -> str:
    m = _FENCE_RE.search(text)
    return m.group(1) if m else text


def _trim_to_braces(text: str) -> str:
    start, end = text.find("{"), text.rfind("}")
    if start != -1 and end > start:
        return text[start : end + 1]
    return text


def _normalize_quotes(text: str) -> str:
    # Only safe when the payload uses single quotes exclusively.
    if '"' not in text and "'" in text:
        return text.replace("'", '"')
    return text


_REPAIRS: tuple[Callable[[str], str], ...] = (
    _strip_code_fences,
    _trim_to_braces,
    _normalize_quotes,
)


def _try_json(text: str) -> dict | None:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        return None
    return obj if isinstance(obj, dict) else None


def parse_response(raw: str) -> ParsedResponse:
    """Parse a detector response into labels and explanation.

    Strict JSON is tried first; on failure the repairs run cumulatively in a
    fixed order (strip code fences, trim to the outermost braces, normalize
    single quotes). A response whose JSON parses but whose label list is
    invalid -- out-of-range integers, or 0 mixed with gap labels -- fails
    rather than being repaired.
    """
    obj = _try_json(raw)
    status = PARSE_OK
    if obj is None:
        status = PARSE_FAILED
        text = raw
        for repair in _REPAIRS:
            repaired = repair(text)
            if repaired != text:
                text = repaired
                obj = _try_json(text)
                if obj is not None:
                    status = PARSE_REPAIRED
                    break
        if obj is None:
            return ParsedResponse(None, "", PARSE_FAILED, "no JSON object found in response")
    if "label" not in obj:
        return ParsedResponse(None, "", PARSE_FAILED, "response JSON has no 'label' field")
    try:
        labels = parse_label_list(obj["label"])
    except LabelError as exc:
        return ParsedResponse(None, "", PARSE_FAILED, str(exc))
    explanation = obj.get("explanation", "")
    if not isinstance(explanation, str):
        explanation = json.dumps(explanation, ensure_ascii=False)
    return ParsedResponse(labels, explanation, status)


def render_response(labels: GapLabelSet, explanation: str) -> str:
    """The canonical response form; parse_response round-trips it as ``ok``."""
    return json.dumps(
        {"label": labels.to_list(), "explanation": explanation}, ensure_ascii=False
    )


# ---------------------------------------------------------------------------
# Completion backends
# ---------------------------------------------------------------------------

class ChatBackend(Protocol):
    def complete(self, system_text: str, user_text: str) -> str:
        """Return the assistant message for a [system, user] exchange."""
        ...


class HttpChatBackend:
    """Chat-completions client over HTTP (OpenAI-style wire schema)."""

    def __init__(self, config: DetectorConfig):
        if not config.endpoint_url:
            raise ConfigError("endpoint_url is required for the HTTP backend")
        self.config = config
        self.api_key = os.environ.get(config.api_key_ref, "")

    def complete(self, system_text: str, user_text: str) -> str:
        payload = {
            "model": self.config.model_name,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": system_text},
                {"role": "user", "content": user_text},
            ],
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = requests.post(
                self.config.endpoint_url,
                json=payload,
                headers=headers,
                timeout=self.config.request_timeout,
            )
            resp.raise_for_status()
            body = resp.json()
            return body["choices"][0]["message"]["content"]
        except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
            raise TransportError(f"chat completion request failed: {exc}") from exc


class MockChatBackend:
    """Deterministic backend: a mapping from prompt digest to canned response."""

    def __init__(self, responses: Mapping[str, str]):
        self.responses = dict(responses)

    @classmethod
    def from_path(cls, path: str | Path) -> "MockChatBackend":
        responses: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                responses[obj["digest"]] = obj["response"]
        return cls(responses)

    def complete(self, system_text: str, user_text: str) -> str:
        digest = prompt_digest(system_text, user_text)
        try:
            return self.responses[digest]
        except KeyError:
            raise TransportError(f"mock backend has no response for digest {digest}") from None


def write_oracle_mock(
    path: str | Path,
    targets: Sequence[AnnotatedExample],
    demo_pool: Sequence[AnnotatedExample],
    ks: Iterable[int],
    instruction_summary: str | None = None,
) -> None:
    """Write a mock script that echoes each target's gold label for every
    demonstration count in ``ks``. Targets and demos need records attached."""
    entries: dict[str, str] = {}
    for k in ks:
        demos = demo_pool[:k]
        system_text = build_system_prompt(instruction_summary, demos)
        for ex in targets:
            if ex.record is None:
                raise ValueError(f"target {ex.record_id!r} has no record attached")
            digest = prompt_digest(system_text, build_user_prompt(ex.record))
            entries[digest] = render_response(ex.gold, ex.explanation)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for digest, response in entries.items():
            fh.write(json.dumps({"digest": digest, "response": response}) + "\n")


# ---------------------------------------------------------------------------
# Detection driver
# ---------------------------------------------------------------------------

def detect(
    record: GenerationRecord,
    config: DetectorConfig,
    demos: Sequence[AnnotatedExample],
    backend: ChatBackend,
    instruction_summary: str | None = None,
) -> DetectionResult:
    """Run the detector on one record, retrying on transport errors and
    failed parses up to ``max_retries`` extra attempts."""
    if len(demos) != config.k_demonstrations:
        raise ConfigError(
            f"expected {config.k_demonstrations} demonstrations, got {len(demos)}"
        )
    bundle = build_prompts(record, demos, instruction_summary)
    raw = ""
    error = ""
    attempts = 0
    for attempt in range(1, config.max_retries + 2):
        attempts = attempt
        try:
            raw = backend.complete(bundle.system_text, bundle.user_text)
        except TransportError as exc:
            error = str(exc)
            continue
        parsed = parse_response(raw)
        error = parsed.error
        if parsed.parse_status != PARSE_FAILED:
            return DetectionResult(
                record_id=record.record_id,
                labels=parsed.labels,
                explanation=parsed.explanation,
                parse_status=parsed.parse_status,
                raw_response=raw,
                attempts=attempts,
            )
    return DetectionResult(
        record_id=record.record_id,
        labels=None,
        explanation="",
        parse_status=PARSE_FAILED,
        raw_response=raw,
        attempts=attempts,
        error=error,
    )


def detect_batch(
    records: Sequence[GenerationRecord],
    config: DetectorConfig,
    demos: Sequence[AnnotatedExample],
    backend: ChatBackend,
    instruction_summary: str | None = None,
) -> list[DetectionResult]:
    """Detect every record with at most ``config.parallelism`` requests in
    flight; results come back in input order, failures recorded inline."""
    if not records:
        return []
    runner = lambda r: detect(r, config, demos, backend, instruction_summary)
    if config.parallelism == 1 or len(records) == 1:
        return [runner(r) for r in records]
    with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
        return list(pool.map(runner, records))


def results_to_jsonl(results: Iterable[DetectionResult]) -> str:
    return "".join(
        json.dumps(r.to_dict(), ensure_ascii=False) + "\n" for r in results
    )


def load_results(source: str | Path) -> list[DetectionResult]:
    results: list[DetectionResult] = []
    with open(source, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            labels = obj.get("labels")
            results.append(
                DetectionResult(
                    record_id=obj["record_id"],
                    labels=parse_label_list(labels) if labels is not None else None,
                    explanation=obj.get("explanation", ""),
                    parse_status=obj["parse_status"],
                    raw_response=obj.get("raw_response", ""),
                    attempts=obj.get("attempts", 1),
                )
            )
    return results


def run_ablation(
    train: Sequence[AnnotatedExample],
    records: Sequence[GenerationRecord],
    config: DetectorConfig,
    backend: ChatBackend,
    ks: Sequence[int] = (4, 8, 16, 20),
    gold: Mapping[str, GapLabelSet] | None = None,
    instruction_summary: str | None = None,
    denominator: str = "example",
) -> dict[int, MetricsReport]:
    """Sweep the demonstration count: for each k, detect every record with
    the first k training examples as demonstrations and aggregate metrics.

    When ``gold`` maps record ids to labels, accuracy means are included;
    otherwise each report carries the label-only ratios. A k whose responses
    all fail to parse yields an empty report (n=0) rather than an error.
    """
    for k in ks:
        if not 0 <= k <= len(train):
            raise ConfigError(f"k={k} outside [0, {len(train)}]")
    reports: dict[int, MetricsReport] = {}
    for k in ks:
        demos = select_demonstrations(train, k) if k > 0 else []
        k_config = replace(config, k_demonstrations=k)
        results = detect_batch(records, k_config, demos, backend, instruction_summary)
        scored = [r for r in results if r.labels is not None]
        predicted = [r.labels for r in scored if r.labels is not None]
        gold_labels = None
        if gold is not None:
            gold_labels = [gold[r.record_id] for r in scored]
        reports[k] = evaluate_predictions(
            predicted,
            gold=gold_labels,
            record_ids=[r.record_id for r in scored],
            n_failed=len(results) - len(scored),
            denominator=denominator,
        )
    return reports

"""Quality curation: rubric scoring, length scoring, fusion, selection.

Each record is scored twice. A chat model grades it against a 100-point
rubric (clarity 15, difficulty 25, explanations 25, accuracy 35) with
three few-shot anchor examples spanning poor/average/high quality; only
the total on the response's first line is machine-parsed, the rest is
kept as free text. A lengthwise score rewards information-rich records
through a log-saturating map of total character count. The final score
is a weighted fusion of the two, and curation keeps the top N.

Scoring never throws per item: unparseable or failed responses become a
total of 0 with ``parse_ok=False``, which is why real-run score
histograms show a small bump at zero. Those records stay eligible for
selection (last, by tie-break) rather than being silently dropped.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

from .gateway import LlmGateway, PromptPair, ProviderError
from .records import Dataset, DatasetError, InstructionRecord

SCORE_SYSTEM = (
    "We would like to request your feedback on the performance of an AI assistant. "
    "The assistant provides outputs for instruction and input (if any)."
)

SCORE_RUBRIC = """\
Please score the response to the instruction and input according to the following criteria.
The maximum score is 100 points, and it consists of 4 parts:
1. Clarity (15 points): Assign a score based on how effectively the instruction conveys the problem. High-quality, clear questions score higher.
2. Difficulty (25 points): Rate the complexity of the instruction's problem. Higher difficulty should receive a higher score.
3. Explanations (25 points): Assess if the response includes detailed explanations alongside any code provided. The more comprehensive the explanation, the higher the score.
4. Accuracy (35 points): Score the response based on the accuracy and correctness of the solution to the instruction's problem. Higher accuracy should receive a higher score.
Here's some examples and socres you can follow:"""

SCORE_DIRECTIVE = """\
Please score the upcoming Instruction, Input and Response based on these examples across four dimensions, and then add the four scores together to get the total score. Try to avoid getting a full score as much as possible.
Please first output a single line containing the total score number only.
In the subsequent line, please provide a comprehensive explanation of your evaluation, avoiding any potential bias."""


@dataclass(frozen=True)
class FewShotExample:
    """A manually scored anchor example shown to the grader."""

    instruction: str
    input: str
    output: str
    score: int
    rationale: str = ""

    def __post_init__(self) -> None:
        if not self.instruction:
            raise ValueError("few-shot example instruction must be non-empty")
        if not (0 <= self.score <= 100):
            raise ValueError(f"few-shot score {self.score} outside [0, 100]")


@dataclass(frozen=True)
class GptScore:
    """Parsed grader response: total in [0, 100] plus failure flags."""

    total: int
    raw_response: str
    parse_ok: bool
    out_of_range: bool = False

    def __post_init__(self) -> None:
        if not (0 <= self.total <= 100):
            raise ValueError(f"total {self.total} outside [0, 100]")
        if not self.parse_ok and self.total != 0:
            raise ValueError("a failed parse must carry total 0")


@dataclass(frozen=True)
class QualityAssessment:
    record_id: str
    gpt: GptScore
    length_score: float
    final_score: float


@dataclass(frozen=True)
class QualityConfig:
    """Few-shot anchors, fusion weights, length mapping, and keep size.

    Exactly one of ``keep_count``/``keep_fraction`` drives curation.
    Weights must be nonnegative and sum to 1; the defaults treat the
    rubric score as primary (0.8) and length as auxiliary (0.2).
    """

    few_shot: tuple[FewShotExample, ...]
    weight_gpt: float = 0.8
    weight_len: float = 0.2
    length_ref: int = 2048
    length_score_max: float = 100.0
    keep_count: int | None = None
    keep_fraction: float | None = None

    def __post_init__(self) -> None:
        if len(self.few_shot) != 3:
            raise ValueError(
                f"exactly 3 few-shot examples required, got {len(self.few_shot)}"
            )
        if self.weight_gpt < 0 or self.weight_len < 0:
            raise ValueError("fusion weights must be nonnegative")
        if abs(self.weight_gpt + self.weight_len - 1.0) > 1e-9:
            raise ValueError("fusion weights must sum to 1")
        if self.length_ref < 1:
            raise ValueError("length_ref must be >= 1")
        if self.length_score_max <= 0:
            raise ValueError("length_score_max must be positive")
        if self.keep_fraction is not None and not (0.0 < self.keep_fraction <= 1.0):
            raise ValueError("keep_fraction must be in (0, 1]")
        if self.keep_count is not None and self.keep_count < 0:
            raise ValueError("keep_count must be >= 0")

    def resolve_keep_count(self, n: int) -> int:
        if (self.keep_count is None) == (self.keep_fraction is None):
            raise ValueError("set exactly one of keep_count / keep_fraction")
        if self.keep_count is not None:
            if self.keep_count > n:
                raise ValueError(f"keep_count {self.keep_count} exceeds dataset size {n}")
            return self.keep_count
        return math.ceil(self.keep_fraction * n)


def load_few_shot(path: str | Path) -> tuple[FewShotExample, ...]:
    """Read a few-shot fixture file: JSONL with exactly 3 objects."""
    path = Path(path)
    examples: list[FewShotExample] = []
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                examples.append(
                    FewShotExample(
                        instruction=obj["instruction"],
                        input=obj.get("input", ""),
                        output=obj["output"],
                        score=int(obj["score"]),
                        rationale=obj.get("rationale", ""),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: line {line_no}: {exc}") from exc
    if len(examples) != 3:
        raise ValueError(f"{path}: expected exactly 3 few-shot examples, got {len(examples)}")
    return tuple(examples)


def default_few_shot(task_profile: str) -> tuple[FewShotExample, ...]:
    """The editable fixtures shipped with the package (poor/average/high)."""
    resource = resources.files("instrefine") / "fixtures" / f"few_shot_{task_profile}.jsonl"
    with resources.as_file(resource) as path:
        return load_few_shot(path)


def build_score_prompt(record: InstructionRecord, config: QualityConfig) -> PromptPair:
    """The grading prompt for one record.

    The three anchor examples are rendered with their scores (an input
    line appears only when the example has one); the record under
    evaluation always keeps its ``### Input:`` slot, even when empty.
    """
    blocks: list[str] = [SCORE_RUBRIC]
    for i, example in enumerate(config.few_shot, start=1):
        lines = [f"### Example {i}:", f"### Instruction: {example.instruction}"]
        if example.input:
            lines.append(f"### Input: {example.input}")
        lines.append(f"### Response: {example.output}")
        lines.append(f"### Score for Example {i}: {example.score}")
        blocks.append("\n".join(lines))
    body = "\n".join(blocks)
    target = (
        f"### Instruction:\n{record.instruction}\n"
        f"### Input:\n{record.input}\n"
        f"### Response:\n{record.output}"
    )
    user = f"{body}\n\n{SCORE_DIRECTIVE}\n{target}"
    return PromptPair(system=SCORE_SYSTEM, user=user)


def parse_score_response(text: str) -> GptScore:
    """Parse a grader response; never raises.

    The first non-blank line must be the integer total. Anything else
    (prose, empty response) yields total 0 with ``parse_ok=False``;
    integers outside [0, 100] are clamped and flagged ``out_of_range``.
    """
    raw = text if isinstance(text, str) else ""
    first = next((line.strip() for line in raw.splitlines() if line.strip()), None)
    if first is None:
        return GptScore(total=0, raw_response=raw, parse_ok=False)
    try:
        value = int(first)
    except ValueError:
        return GptScore(total=0, raw_response=raw, parse_ok=False)
    clamped = min(100, max(0, value))
    return GptScore(
        total=clamped,
        raw_response=raw,
        parse_ok=True,
        out_of_range=(clamped != value),
    )


def length_to_score(length: int, config: QualityConfig) -> float:
    """Log-saturating map from character count to [0, length_score_max]."""
    if length < 0:
        raise ValueError("length must be >= 0")
    ratio = math.log1p(length) / math.log1p(config.length_ref)
    return config.length_score_max * min(1.0, ratio)


def length_score(record: InstructionRecord, config: QualityConfig) -> float:
    """Lengthwise score of a record's total instruction+input+output length."""
    total = len(record.instruction) + len(record.input) + len(record.output)
    return length_to_score(total, config)


def fuse_scores(gpt: GptScore, length: float, config: QualityConfig) -> float:
    return config.weight_gpt * gpt.total + config.weight_len * length


def score_dataset(
    dataset: Dataset, gateway: LlmGateway, config: QualityConfig
) -> list[QualityAssessment]:
    """One assessment per record, in dataset order.

    Provider failures are recorded as total-0 scores with the error text
    retained, never dropped; downstream selection sees every record.
    """
    results = gateway.chat_complete_many(
        [build_score_prompt(r, config) for r in dataset]
    )
    assessments: list[QualityAssessment] = []
    for record, result in zip(dataset, results):
        if isinstance(result, ProviderError):
            gpt = GptScore(total=0, raw_response=str(result), parse_ok=False)
        else:
            gpt = parse_score_response(result)
        length = length_score(record, config)
        assessments.append(
            QualityAssessment(
                record_id=record.id,
                gpt=gpt,
                length_score=length,
                final_score=fuse_scores(gpt, length, config),
            )
        )
    return assessments


def quality_curate(
    dataset: Dataset,
    assessments: Sequence[QualityAssessment],
    config: QualityConfig,
) -> Dataset:
    """Keep the records with the highest final scores.

    Ties break by ascending id; the survivors keep their original
    dataset order. Assessments must cover every record.
    """
    by_id = {a.record_id: a for a in assessments}
    missing = [r.id for r in dataset if r.id not in by_id]
    if missing:
        raise ValueError(f"assessments missing for records {missing[:5]}")
    keep = config.resolve_keep_count(len(dataset))
    ranked = sorted(dataset.ids(), key=lambda rid: (-by_id[rid].final_score, rid))
    selected = set(ranked[:keep])
    return Dataset.from_records(
        (r for r in dataset if r.id in selected), dataset.task_profile
    )


# -- scored-dataset files ---------------------------------------------------

_SCORE_KEYS = {"gpt_score", "parse_ok", "length_score", "final_score"}


def save_scored_dataset(
    dataset: Dataset,
    assessments: Sequence[QualityAssessment],
    path: str | Path,
) -> None:
    """Dataset JSONL extended with per-record score fields."""
    by_id = {a.record_id: a for a in assessments}
    missing = [r.id for r in dataset if r.id not in by_id]
    if missing:
        raise ValueError(f"assessments missing for records {missing[:5]}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for record in dataset:
            assessment = by_id[record.id]
            obj = record.to_dict()
            obj["gpt_score"] = assessment.gpt.total
            obj["parse_ok"] = assessment.gpt.parse_ok
            obj["length_score"] = assessment.length_score
            obj["final_score"] = assessment.final_score
            handle.write(json.dumps(obj, ensure_ascii=False) + "\n")


def load_scored_dataset(
    path: str | Path, profile: str
) -> tuple[Dataset, list[QualityAssessment]]:
    """Read a scored-dataset file back into records plus assessments.

    The raw grader response is not persisted, so reloaded ``GptScore``
    values carry an empty ``raw_response``.
    """
    from .records import _record_from_line

    path = Path(path)
    records: list[InstructionRecord] = []
    assessments: list[QualityAssessment] = []
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}: line {line_no}: invalid JSON: {exc}") from exc
            missing = _SCORE_KEYS - set(obj)
            if missing:
                raise DatasetError(
                    f"{path}: line {line_no}: missing score keys {sorted(missing)}"
                )
            scores = {key: obj.pop(key) for key in _SCORE_KEYS}
            record = _record_from_line(obj, line_no, profile, position=len(records))
            records.append(record)
            try:
                gpt = GptScore(
                    total=int(scores["gpt_score"]),
                    raw_response="",
                    parse_ok=bool(scores["parse_ok"]),
                )
            except ValueError as exc:
                raise DatasetError(f"{path}: line {line_no}: {exc}") from exc
            assessments.append(
                QualityAssessment(
                    record_id=record.id,
                    gpt=gpt,
                    length_score=float(scores["length_score"]),
                    final_score=float(scores["final_score"]),
                )
            )
    return Dataset.from_records(records, profile), assessments


__all__ = [
    "SCORE_SYSTEM",
    "SCORE_RUBRIC",
    "SCORE_DIRECTIVE",
    "FewShotExample",
    "GptScore",
    "QualityAssessment",
    "QualityConfig",
    "load_few_shot",
    "default_few_shot",
    "build_score_prompt",
    "parse_score_response",
    "length_to_score",
    "length_score",
    "fuse_scores",
    "score_dataset",
    "quality_curate",
    "save_scored_dataset",
    "load_scored_dataset",
]

"""Dataset distribution expansion: iterative instruction rewriting.

Each round sends every current record through a rewriter prompt that
asks the chat model for a harder variant of the instruction, then
obtains an output for the new instruction (either by a second chat call
or by copying the parent's output). Round i rewrites the records
produced by round i-1, and the final result merges the original dataset
with every round, deduplicating exact triples.

The rewrite prompt templates are fixed text per task profile; tests pin
them golden-file style, so edit with care.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

from .gateway import LlmGateway, PromptPair, ProviderError
from .records import Dataset, DatasetError, InstructionRecord, merge

logger = logging.getLogger("instrefine.expansion")

NLU_REWRITE_SYSTEM = "I want you act as a professional prompt re-writer."

NLU_REWRITE_RULES = """\
Your objective is to rewrite a given prompt into a more complex version using data format to make those famous AI systems more difficult to handle. But the rewritten prompt must be reasonable and must be understood and responded by humans.
You can increase the difficulty using, but not limited to, the following methods:
(1) The depth and breadth of the inquiry can be increased.
(2) Replace general concepts with more specific concepts.
(3) If original problem can be solved with just a few simple thinking processes, you can rewrite it to explicitly request multiple-step reasoning."""

CODE_REWRITE_SYSTEM = "I want you act as a professional Prompt Rewriter."

CODE_REWRITE_RULES = """\
Please increase the difficulty of the given programming test question a bit. You can increase the difficulty using, but not limited to, the following methods:
(1) Add new constraints and requirements to the original problem, adding approximately 10 additional words.
(2) Replace a commonly used requirement in the programming task with a less common and more specific one.
(3) If the original problem can be solved with only a few logical steps, please add more reasoning steps.
(4) Provide a piece of erroneous code as a reference to increase misdirection.
(5) Propose higher time or space complexity requirements, but please refrain from doing so frequently."""

_TEMPLATES = {
    "nlu": (NLU_REWRITE_SYSTEM, NLU_REWRITE_RULES),
    "code": (CODE_REWRITE_SYSTEM, CODE_REWRITE_RULES),
}


@dataclass(frozen=True)
class ExpansionConfig:
    """Knobs for the expansion stage.

    ``rounds`` is the number of rewrite passes (0 leaves the dataset
    untouched). ``answer_generation`` picks where the new record's
    output comes from: ``regenerate`` issues a second chat call with the
    rewritten instruction, ``copy_parent`` reuses the parent's output.
    """

    rounds: int = 2
    task_profile: str = "code"
    answer_generation: str = "regenerate"
    skip_on_error: bool = True

    def __post_init__(self) -> None:
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if self.task_profile not in _TEMPLATES:
            raise ValueError(f"unknown task_profile {self.task_profile!r}")
        if self.answer_generation not in ("regenerate", "copy_parent"):
            raise ValueError(
                f"unknown answer_generation {self.answer_generation!r}"
            )


@dataclass(frozen=True)
class SkipEvent:
    """One record dropped during a round, with the stage that failed."""

    record_id: str
    stage: str  # "rewrite" or "answer"
    reason: str


@dataclass(frozen=True)
class ExpandReport:
    """Merged result plus per-round datasets and skip events."""

    merged: Dataset
    rounds: tuple[Dataset, ...]
    skips: tuple[SkipEvent, ...]


class ExpansionError(RuntimeError):
    """A round aborted (skip_on_error=False and a provider call failed)."""


def build_rewrite_prompt(record: InstructionRecord) -> PromptPair:
    """The rewriter prompt for one record.

    Substitutes the record's instruction (and input, when non-empty)
    into the fixed template for its task profile; an empty input omits
    the ``#Input#`` block entirely.
    """
    system, rules = _TEMPLATES[record.task_profile]
    user = f"{rules}\n\n#Instruction#\n{record.instruction}"
    if record.input:
        user += f"\n#Input#\n{record.input}"
    return PromptPair(system=system, user=user)


def _child_record(parent: InstructionRecord, instruction: str, output: str) -> InstructionRecord:
    round_index = parent.source_round + 1
    return InstructionRecord(
        id=f"{parent.id}.r{round_index}",
        instruction=instruction,
        input="",  # the rewritten instruction absorbs the parent's input
        output=output,
        source_round=round_index,
        parent_id=parent.id,
        task_profile=parent.task_profile,
    )


def _expand_round(
    dataset: Dataset, gateway: LlmGateway, config: ExpansionConfig
) -> tuple[Dataset, list[SkipEvent]]:
    if len(dataset) == 0:
        raise DatasetError("expand_round requires a non-empty dataset")

    skips: list[SkipEvent] = []

    def skip(record: InstructionRecord, stage: str, reason: str) -> None:
        if not config.skip_on_error:
            raise ExpansionError(
                f"{stage} failed for record {record.id!r}: {reason}"
            )
        skips.append(SkipEvent(record_id=record.id, stage=stage, reason=reason))
        logger.warning("skipping %s (%s): %s", record.id, stage, reason)

    rewrite_results = gateway.chat_complete_many(
        [build_rewrite_prompt(r) for r in dataset]
    )
    survivors: list[tuple[InstructionRecord, str]] = []
    for record, result in zip(dataset, rewrite_results):
        if isinstance(result, ProviderError):
            skip(record, "rewrite", str(result))
            continue
        instruction = result.strip()
        if not instruction:
            skip(record, "rewrite", "provider returned empty rewrite")
            continue
        survivors.append((record, instruction))

    children: list[InstructionRecord] = []
    if config.answer_generation == "copy_parent":
        children = [
            _child_record(parent, instruction, parent.output)
            for parent, instruction in survivors
        ]
    else:
        answer_results = gateway.chat_complete_many(
            [PromptPair(system="", user=instr) for _, instr in survivors]
        )
        for (parent, instruction), answer in zip(survivors, answer_results):
            if isinstance(answer, ProviderError):
                skip(parent, "answer", str(answer))
                continue
            output = answer.strip()
            if not output:
                skip(parent, "answer", "provider returned empty answer")
                continue
            children.append(_child_record(parent, instruction, output))

    return Dataset.from_records(children, dataset.task_profile), skips


def expand_round(
    dataset: Dataset, gateway: LlmGateway, config: ExpansionConfig
) -> Dataset:
    """One rewrite pass: a dataset of newly created records only.

    Every child carries ``source_round = parent.source_round + 1`` and a
    ``parent_id`` back-link. With ``skip_on_error``, failed items are
    omitted and logged; otherwise the first failure aborts the round.
    """
    result, _ = _expand_round(dataset, gateway, config)
    return result


def expand_detailed(
    dataset: Dataset,
    gateway: LlmGateway,
    config: ExpansionConfig,
    round_hook: Callable[[int, Dataset], None] | None = None,
) -> ExpandReport:
    """Run all rounds and keep per-round telemetry.

    ``round_hook(i, round_dataset)`` fires after each round completes,
    which is how the pipeline persists per-round artifact files.
    """
    rounds: list[Dataset] = []
    skips: list[SkipEvent] = []
    current = dataset
    for i in range(1, config.rounds + 1):
        if len(current) == 0:
            break  # nothing left to rewrite
        current, round_skips = _expand_round(current, gateway, config)
        skips.extend(round_skips)
        rounds.append(current)
        if round_hook is not None:
            round_hook(i, current)
    if not rounds:
        return ExpandReport(merged=dataset, rounds=(), skips=tuple(skips))
    merged = merge([dataset, *rounds])
    return ExpandReport(merged=merged, rounds=tuple(rounds), skips=tuple(skips))


def expand(dataset: Dataset, gateway: LlmGateway, config: ExpansionConfig) -> Dataset:
    """k rounds of rewriting merged with the original dataset.

    Size is at most (rounds + 1) * len(dataset), with equality exactly
    when nothing failed and no duplicate triples appeared.
    """
    return expand_detailed(dataset, gateway, config).merged


__all__ = [
    "NLU_REWRITE_SYSTEM",
    "NLU_REWRITE_RULES",
    "CODE_REWRITE_SYSTEM",
    "CODE_REWRITE_RULES",
    "ExpansionConfig",
    "SkipEvent",
    "ExpandReport",
    "ExpansionError",
    "build_rewrite_prompt",
    "expand_round",
    "expand_detailed",
    "expand",
]

"""Canonical data model for instruction datasets.

An instruction dataset is an ordered collection of (instruction, input,
output) triples with provenance: which expansion round produced a record
and which record it was rewritten from. Datasets are stored as UTF-8
JSONL, one record per line, with a fixed key set (unknown keys are
rejected so schema drift fails loudly instead of silently).

All types here are immutable value objects; sharing them across worker
threads is safe, and every transformation builds a new Dataset.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

TASK_PROFILES = ("nlu", "code")

# The only keys a dataset file line may carry.
_RECORD_KEYS = {
    "id",
    "instruction",
    "input",
    "output",
    "source_round",
    "parent_id",
    "task_profile",
}


class DatasetError(ValueError):
    """Schema or invariant violation in a dataset or record."""


@dataclass(frozen=True)
class InstructionRecord:
    """One instruction/input/output triple with provenance.

    ``source_round`` 0 marks an original record; rewritten records carry
    the round that produced them and a ``parent_id`` back-link. The two
    fields are coupled: exactly the original records have no parent.
    """

    id: str
    instruction: str
    output: str
    input: str = ""
    source_round: int = 0
    parent_id: str | None = None
    task_profile: str = "nlu"

    def __post_init__(self) -> None:
        if not self.id:
            raise DatasetError("record id must be a non-empty string")
        if not self.instruction:
            raise DatasetError(f"record {self.id!r}: instruction must be non-empty")
        if self.source_round < 0:
            raise DatasetError(f"record {self.id!r}: source_round must be >= 0")
        if (self.source_round == 0) != (self.parent_id is None):
            raise DatasetError(
                f"record {self.id!r}: source_round 0 and a missing parent_id imply "
                f"each other (got round {self.source_round}, parent {self.parent_id!r})"
            )
        if self.task_profile not in TASK_PROFILES:
            raise DatasetError(
                f"record {self.id!r}: unknown task_profile {self.task_profile!r}"
            )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "instruction": self.instruction,
            "input": self.input,
            "output": self.output,
            "source_round": self.source_round,
            "parent_id": self.parent_id,
            "task_profile": self.task_profile,
        }


@dataclass(frozen=True)
class Dataset:
    """An ordered, homogeneous collection of records with unique ids."""

    records: tuple[InstructionRecord, ...]
    task_profile: str

    def __post_init__(self) -> None:
        if self.task_profile not in TASK_PROFILES:
            raise DatasetError(f"unknown task_profile {self.task_profile!r}")
        seen: set[str] = set()
        for r in self.records:
            if r.task_profile != self.task_profile:
                raise DatasetError(
                    f"record {r.id!r} has task_profile {r.task_profile!r}, "
                    f"dataset is {self.task_profile!r}"
                )
            if r.id in seen:
                raise DatasetError(f"duplicate record id {r.id!r}")
            seen.add(r.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[InstructionRecord]:
        return iter(self.records)

    def ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.records)

    def by_id(self) -> dict[str, InstructionRecord]:
        return {r.id: r for r in self.records}

    @staticmethod
    def from_records(
        records: Iterable[InstructionRecord], task_profile: str
    ) -> "Dataset":
        return Dataset(records=tuple(records), task_profile=task_profile)


def content_hash(record: InstructionRecord) -> str:
    """Fixed-width digest of the (instruction, input, output) triple.

    Provenance fields (id, round, parent) are deliberately excluded so
    the same content produced twice hashes identically.
    """
    payload = json.dumps(
        [record.instruction, record.input, record.output], ensure_ascii=False
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _record_from_line(obj: dict, line_no: int, profile: str, position: int) -> InstructionRecord:
    unknown = set(obj) - _RECORD_KEYS
    if unknown:
        raise DatasetError(
            f"line {line_no}: unknown keys {sorted(unknown)}"
        )
    if "instruction" not in obj:
        raise DatasetError(f'line {line_no}: missing "instruction"')
    if "output" not in obj:
        raise DatasetError(f'line {line_no}: missing "output"')
    line_profile = obj.get("task_profile", profile)
    if line_profile != profile:
        raise DatasetError(
            f"line {line_no}: task_profile {line_profile!r} does not match "
            f"requested profile {profile!r}"
        )
    try:
        return InstructionRecord(
            id=str(obj.get("id", position)),
            instruction=obj["instruction"],
            input=obj.get("input", ""),
            output=obj["output"],
            source_round=int(obj.get("source_round", 0)),
            parent_id=obj.get("parent_id"),
            task_profile=line_profile,
        )
    except DatasetError as exc:
        raise DatasetError(f"line {line_no}: {exc}") from exc


def load_dataset(path: str | Path, profile: str) -> Dataset:
    """Load a JSONL dataset file, validating schema and invariants.

    Records keep file order. Missing optional fields are defaulted
    (``input`` to "", ``source_round`` to 0, ``id`` to the record's
    position in the file). Malformed lines and duplicate ids raise
    :class:`DatasetError` naming the offending line or id.
    """
    if profile not in TASK_PROFILES:
        raise DatasetError(f"unknown task_profile {profile!r}")
    path = Path(path)
    records: list[InstructionRecord] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}: line {line_no}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise DatasetError(f"{path}: line {line_no}: expected a JSON object")
            record = _record_from_line(obj, line_no, profile, position=len(records))
            if record.id in seen:
                raise DatasetError(f"{path}: duplicate record id {record.id!r}")
            seen.add(record.id)
            records.append(record)
    return Dataset(records=tuple(records), task_profile=profile)


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset as JSONL; ``load_dataset`` reproduces it field-for-field."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for record in dataset.records:
            handle.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")


def merge(parts: Sequence[Dataset]) -> Dataset:
    """Concatenate datasets in order, dropping exact-duplicate triples.

    Duplicates are defined by :func:`content_hash`; the first occurrence
    wins and keeps its id and provenance. All parts must share one
    task_profile.
    """
    if not parts:
        raise DatasetError("merge requires at least one dataset")
    profile = parts[0].task_profile
    for part in parts[1:]:
        if part.task_profile != profile:
            raise DatasetError(
                f"cannot merge task_profile {part.task_profile!r} into {profile!r}"
            )
    merged: list[InstructionRecord] = []
    seen_hashes: set[str] = set()
    for part in parts:
        for record in part.records:
            digest = content_hash(record)
            if digest in seen_hashes:
                continue
            seen_hashes.add(digest)
            merged.append(record)
    return Dataset(records=tuple(merged), task_profile=profile)


__all__ = [
    "TASK_PROFILES",
    "DatasetError",
    "InstructionRecord",
    "Dataset",
    "content_hash",
    "load_dataset",
    "save_dataset",
    "merge",
]

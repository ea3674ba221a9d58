"""Shared fixtures: record builders and offline gateways."""

from __future__ import annotations

import pytest

from instrefine.gateway import LlmGateway, ProviderConfig
from instrefine.providers import mock_provider
from instrefine.records import Dataset, InstructionRecord


def make_record(i: int, profile: str = "code", **overrides) -> InstructionRecord:
    fields = {
        "id": str(i),
        "instruction": f"Write a function that solves task {i}.",
        "input": "",
        "output": f"def solve_{i}():\n    return {i}",
        "task_profile": profile,
    }
    fields.update(overrides)
    return InstructionRecord(**fields)


def make_dataset(n: int, profile: str = "code") -> Dataset:
    return Dataset.from_records(
        (make_record(i, profile=profile) for i in range(n)), profile
    )


@pytest.fixture
def fast_config() -> ProviderConfig:
    """Retries without sleeping; tight in-flight bound for determinism."""
    return ProviderConfig(max_retries=2, backoff_base=0.0, max_in_flight=4)


@pytest.fixture
def mock_gateway(fast_config) -> LlmGateway:
    return LlmGateway(mock_provider(seed=11, embed_dim=12), fast_config)

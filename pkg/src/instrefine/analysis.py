"""Reporting utilities: score histograms, composition, cost, pass@k.

These are pure functions over in-memory results. The pipeline writes
their outputs both as JSON objects and as plain-text tables; plotting is
left to external tools.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .quality import QualityAssessment
from .records import Dataset


@dataclass(frozen=True)
class Histogram:
    """Counts of final scores over contiguous bins covering [0, 100].

    The last bin is closed on the right so a score of exactly 100 is
    counted; bin counts always sum to the number of scored records.
    """

    bin_width: float
    bins: tuple[tuple[float, int], ...]  # (lower_edge, count)

    def total(self) -> int:
        return sum(count for _, count in self.bins)

    def to_dict(self) -> dict:
        return {
            "bin_width": self.bin_width,
            "bins": [[lower, count] for lower, count in self.bins],
            "total": self.total(),
        }

    def to_text(self) -> str:
        """Two-column export: bin_lower count."""
        return "\n".join(f"{lower:g} {count}" for lower, count in self.bins) + "\n"


def score_histogram(
    assessments: Sequence[QualityAssessment] | Sequence[float], bin_width: float
) -> Histogram:
    """Histogram of final scores; zero-score failures land in the first bin."""
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    scores = [
        a.final_score if isinstance(a, QualityAssessment) else float(a)
        for a in assessments
    ]
    n_bins = max(1, math.ceil(100.0 / bin_width))
    counts = [0] * n_bins
    for score in scores:
        index = int(score // bin_width)
        counts[min(max(index, 0), n_bins - 1)] += 1
    bins = tuple((i * bin_width, counts[i]) for i in range(n_bins))
    return Histogram(bin_width=bin_width, bins=bins)


@dataclass(frozen=True)
class CompositionReport:
    """How much of a curated dataset came from each expansion round."""

    total: int
    rounds: tuple[tuple[int, int, float], ...]  # (source_round, count, proportion)

    def proportions(self) -> dict[int, float]:
        return {r: p for r, _, p in self.rounds}

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "rounds": [
                {"source_round": r, "count": c, "proportion": p}
                for r, c, p in self.rounds
            ],
        }

    def to_text(self) -> str:
        lines = [f"{'round':>6} {'count':>8} {'share':>8}"]
        for r, c, p in self.rounds:
            lines.append(f"{r:>6} {c:>8} {p:>8.4f}")
        lines.append(f"{'total':>6} {self.total:>8}")
        return "\n".join(lines) + "\n"


def composition_report(final: Dataset) -> CompositionReport:
    """Group a dataset by source_round and report counts and proportions."""
    counts: dict[int, int] = {}
    for record in final:
        counts[record.source_round] = counts.get(record.source_round, 0) + 1
    total = len(final)
    if total == 0:
        return CompositionReport(total=0, rounds=())
    rounds = tuple(
        (r, counts[r], counts[r] / total) for r in sorted(counts)
    )
    return CompositionReport(total=total, rounds=rounds)


@dataclass(frozen=True)
class CostReport:
    """GPU-hour and CO2 estimate for fine-tuning on a dataset of a given size."""

    dataset_size: int
    gpu_hours: float
    co2_kg: float
    hours_per_kitem: float
    emission_rate: float

    def to_dict(self) -> dict:
        return {
            "dataset_size": self.dataset_size,
            "gpu_hours": self.gpu_hours,
            "co2_kg": self.co2_kg,
            "hours_per_kitem": self.hours_per_kitem,
            "emission_rate": self.emission_rate,
        }


def co2_for_hours(gpu_hours: float, emission_rate: float) -> float:
    """kg CO2-eq for a GPU-hour total at a kg-per-GPU-hour rate."""
    if emission_rate <= 0:
        raise ValueError("emission_rate must be positive")
    if gpu_hours < 0:
        raise ValueError("gpu_hours must be >= 0")
    return emission_rate * gpu_hours


def estimate_cost(
    n_items: int, hours_per_kitem: float, emission_rate: float
) -> CostReport:
    """Cost projection: hours scale linearly with item count.

    ``hours_per_kitem`` is configuration, not a claimed constant;
    measured GPU-hour rates differ between training runs.
    """
    if hours_per_kitem <= 0:
        raise ValueError("hours_per_kitem must be positive")
    if n_items < 0:
        raise ValueError("n_items must be >= 0")
    gpu_hours = n_items / 1000.0 * hours_per_kitem
    return CostReport(
        dataset_size=n_items,
        gpu_hours=gpu_hours,
        co2_kg=co2_for_hours(gpu_hours, emission_rate),
        hours_per_kitem=hours_per_kitem,
        emission_rate=emission_rate,
    )


def pass_at_k(n: int, c: int, k: int) -> float:
    """Probability that at least one of k drawn samples is correct.

    Given n generated answers of which c are correct, this is
    ``1 - C(n-c, k) / C(n, k)``, evaluated as a running product of
    ratios so no large binomials are ever formed.
    """
    if not (0 <= c <= n):
        raise ValueError(f"need 0 <= c <= n, got c={c}, n={n}")
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if c == 0:
        return 0.0
    if n - c < k:
        return 1.0
    product = 1.0
    for i in range(k):
        product *= (n - c - i) / (n - i)
    return 1.0 - product


def pass_at_k_mean(counts: Sequence[tuple[int, int]], k: int) -> float:
    """Average pass@k over problems given per-problem (n, c) pairs."""
    if not counts:
        raise ValueError("counts must be non-empty")
    return sum(pass_at_k(n, c, k) for n, c in counts) / len(counts)


__all__ = [
    "Histogram",
    "score_histogram",
    "CompositionReport",
    "composition_report",
    "CostReport",
    "co2_for_hours",
    "estimate_cost",
    "pass_at_k",
    "pass_at_k_mean",
]

"""analysis: histograms, composition, cost estimates, pass@k."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_record
from instrefine.analysis import (
    co2_for_hours,
    composition_report,
    estimate_cost,
    pass_at_k,
    pass_at_k_mean,
    score_histogram,
)
from instrefine.records import Dataset
from oracles import binomial_pass_at_k


def dataset_with_rounds(counts: dict[int, int]) -> Dataset:
    records = []
    i = 0
    for source_round, n in counts.items():
        for _ in range(n):
            records.append(
                make_record(
                    i,
                    source_round=source_round,
                    parent_id=None if source_round == 0 else f"p{i}",
                )
            )
            i += 1
    return Dataset.from_records(records, "code")


class TestHistogram:
    def test_counting_example(self):
        h = score_histogram([85.0, 85.0, 0.0], 10.0)
        counts = dict(h.bins)
        assert counts[0.0] == 1
        assert counts[80.0] == 2

    def test_empty_input(self):
        h = score_histogram([], 10.0)
        assert h.total() == 0
        assert all(count == 0 for _, count in h.bins)

    def test_conservation_random_scores(self):
        rng = np.random.default_rng(7)
        for width in (1.0, 2.5, 7.0, 50.0):
            scores = (rng.random(size=137) * 100).tolist()
            assert score_histogram(scores, width).total() == 137

    def test_score_100_lands_in_last_bin(self):
        h = score_histogram([100.0], 10.0)
        assert h.bins[-1] == (90.0, 1)

    def test_bins_contiguous_cover_range(self):
        h = score_histogram([50.0], 7.0)
        lowers = [lower for lower, _ in h.bins]
        assert lowers[0] == 0.0
        assert all(b - a == pytest.approx(7.0) for a, b in zip(lowers, lowers[1:]))
        assert lowers[-1] + 7.0 >= 100.0

    def test_invalid_width(self):
        with pytest.raises(ValueError):
            score_histogram([1.0], 0.0)

    def test_two_column_text_export(self):
        text = score_histogram([5.0, 95.0], 50.0).to_text()
        assert text == "0 1\n50 1\n"


class TestComposition:
    def test_single_source(self):
        report = composition_report(dataset_with_rounds({0: 7}))
        assert report.proportions() == {0: 1.0}

    def test_two_round_arithmetic(self):
        report = composition_report(dataset_with_rounds({0: 2, 1: 8}))
        assert report.proportions() == {0: 0.2, 1: 0.8}

    def test_proportions_sum_to_one(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            counts = {r: int(rng.integers(1, 9)) for r in range(int(rng.integers(1, 5)))}
            report = composition_report(dataset_with_rounds(counts))
            assert abs(sum(report.proportions().values()) - 1.0) <= 1e-9

    def test_reordering_invariant(self):
        d = dataset_with_rounds({0: 3, 2: 4})
        reordered = Dataset.from_records(tuple(reversed(d.records)), "code")
        assert composition_report(d).rounds == composition_report(reordered).rounds

    def test_empty_dataset(self):
        report = composition_report(Dataset.from_records([], "code"))
        assert report.total == 0 and report.rounds == ()


class TestCost:
    def test_known_hours_to_co2(self):
        assert co2_for_hours(50.82, 0.09) == pytest.approx(4.5738)
        assert co2_for_hours(185.6, 0.09) == pytest.approx(16.704)

    def test_items_to_hours_to_co2(self):
        report = estimate_cost(20000, 2.541, 0.09)
        assert report.gpu_hours == pytest.approx(50.82)
        assert report.co2_kg == pytest.approx(4.5738)

    def test_zero_items(self):
        report = estimate_cost(0, 2.5, 0.09)
        assert report.gpu_hours == 0.0 and report.co2_kg == 0.0

    def test_linearity(self):
        one = estimate_cost(4000, 2.5, 0.09)
        two = estimate_cost(8000, 2.5, 0.09)
        assert two.gpu_hours == pytest.approx(2 * one.gpu_hours)
        assert two.co2_kg == pytest.approx(2 * one.co2_kg)

    def test_nonpositive_rates_rejected(self):
        with pytest.raises(ValueError):
            estimate_cost(10, 0.0, 0.09)
        with pytest.raises(ValueError):
            estimate_cost(10, 2.5, -1.0)


class TestPassAtK:
    def test_all_correct(self):
        assert pass_at_k(5, 5, 3) == 1.0

    def test_none_correct(self):
        assert pass_at_k(5, 0, 3) == 0.0

    def test_hand_value(self):
        assert pass_at_k(5, 2, 1) == pytest.approx(0.4)

    def test_matches_binomial_oracle_small(self):
        for n in range(1, 13):
            for c in range(n + 1):
                for k in range(1, n + 1):
                    expected = float(binomial_pass_at_k(n, c, k))
                    assert pass_at_k(n, c, k) == pytest.approx(expected, abs=1e-12)

    def test_preconditions(self):
        with pytest.raises(ValueError):
            pass_at_k(5, 6, 1)
        with pytest.raises(ValueError):
            pass_at_k(5, 2, 0)
        with pytest.raises(ValueError):
            pass_at_k(5, 2, 6)

    @given(
        n=st.integers(min_value=2, max_value=60),
        data=st.data(),
    )
    @settings(max_examples=120, deadline=None)
    def test_monotone_in_c_and_k(self, n, data):
        c = data.draw(st.integers(min_value=0, max_value=n - 1))
        k = data.draw(st.integers(min_value=1, max_value=n - 1))
        assert pass_at_k(n, c, k) <= pass_at_k(n, c + 1, k)
        assert pass_at_k(n, c, k) <= pass_at_k(n, c, k + 1)

    def test_batched_variant_averages(self):
        pairs = [(10, 0), (10, 10), (10, 5)]
        expected = (
            pass_at_k(10, 0, 3) + pass_at_k(10, 10, 3) + pass_at_k(10, 5, 3)
        ) / 3
        assert pass_at_k_mean(pairs, 3) == pytest.approx(expected)

    def test_no_large_factorials(self):
        # Would overflow float factorials; the product form handles it directly.
        value = pass_at_k(10_000, 17, 100)
        assert 0.0 < value < 1.0

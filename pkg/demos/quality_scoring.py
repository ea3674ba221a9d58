"""Rubric scoring, response parsing, and score fusion, offline.

Shows the grading prompt assembled from the packaged few-shot anchors,
how first-line parsing treats well-formed and broken responses, and how
the length score folds into the final quality score.
"""

from instrefine.analysis import score_histogram
from instrefine.gateway import LlmGateway, ProviderConfig
from instrefine.providers import mock_provider
from instrefine.quality import (
    QualityConfig,
    build_score_prompt,
    default_few_shot,
    length_to_score,
    parse_score_response,
    score_dataset,
)
from instrefine.records import Dataset, InstructionRecord

config = QualityConfig(few_shot=default_few_shot("code"), keep_count=2)

record = InstructionRecord(
    id="0",
    instruction="Implement binary search and explain its invariant.",
    output="def bsearch(xs, t): ...  # loop keeps lo <= answer < hi",
    task_profile="code",
)
prompt = build_score_prompt(record, config)
print("=== scoring prompt (first 25 lines) ===")
print("\n".join(prompt.user.splitlines()[:25]))

print("\n=== response parsing ===")
for text in ["88\nSolid reasoning throughout.", "Score: 88", "120\nway too generous", ""]:
    score = parse_score_response(text)
    print(
        f"{text[:28]!r:32} -> total={score.total:3d} "
        f"parse_ok={score.parse_ok} out_of_range={score.out_of_range}"
    )

print("\n=== length score (log-saturating, ref=2048 chars) ===")
for length in [0, 64, 256, 1024, 2048, 8192]:
    print(f"  {length:5d} chars -> {length_to_score(length, config):6.2f}")

# Score a small synthetic dataset end to end with the offline provider.
records = [
    InstructionRecord(
        id=str(i),
        instruction=f"Task {i}: transform the input structure.",
        output="explanation " * (i + 1),
        task_profile="code",
    )
    for i in range(8)
]
dataset = Dataset.from_records(records, "code")
gateway = LlmGateway(mock_provider(seed=3), ProviderConfig(backoff_base=0.0))
assessments = score_dataset(dataset, gateway, config)

print("\n=== fused scores ===")
for a in assessments:
    print(
        f"  id={a.record_id}  gpt={a.gpt.total:3d}  "
        f"length={a.length_score:6.2f}  final={a.final_score:6.2f}"
    )

print("\n=== histogram (width 10) ===")
print(score_histogram(assessments, 10.0).to_text())

"""End-to-end offline run: expand, embed, curate twice, report.

Writes everything under ./demo_run/ and prints the stage arithmetic.
Running it a second time is near-instant: every provider call replays
from the on-disk response cache.
"""

import json
import time
from pathlib import Path

from instrefine.pipeline import PipelineConfig, run_all
from instrefine.records import Dataset, InstructionRecord, save_dataset

workdir = Path("demo_run")
workdir.mkdir(exist_ok=True)

seed_path = workdir / "seed.jsonl"
records = [
    InstructionRecord(
        id=str(i),
        instruction=f"Write a function solving variant {i} of the interval problem.",
        output=f"def variant_{i}(intervals):\n    return sorted(intervals)[{i % 3}:]",
        task_profile="code",
    )
    for i in range(50)
]
save_dataset(Dataset.from_records(records, "code"), seed_path)

config = PipelineConfig.from_dict(
    {
        "input_path": str(seed_path),
        "output_dir": str(workdir / "out"),
        "task_profile": "code",
        "expansion": {"rounds": 2},
        "variety": {"reduced_dim": 16, "keep_fraction": 0.2},
        "quality": {"keep_count": 20},
        "mock": {"enabled": True, "seed": 99, "embed_dim": 64},
    }
)

started = time.perf_counter()
manifest = run_all(config)
first = time.perf_counter() - started

print("stage counts:")
for name, stage_manifest in manifest["stages"].items():
    print(f"  {name:8s} {json.dumps(stage_manifest['counts'])}")

composition = json.loads((config.out() / "reports" / "composition.json").read_text())
print("\nfinal dataset composition by source round:")
for entry in composition["rounds"]:
    print(
        f"  round {entry['source_round']}: {entry['count']:3d} records "
        f"({entry['proportion']:.0%})"
    )

print("\ncost projection:")
print((config.out() / "reports" / "cost.txt").read_text())

started = time.perf_counter()
run_all(config)
second = time.perf_counter() - started
print(f"first run {first:.2f} s, rerun from cache {second:.2f} s")

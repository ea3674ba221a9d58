"""Show the rewrite prompts and two offline expansion rounds.

The mock provider is deterministic, so this script prints the same
output every time; swap in a real provider config to see actual
model-written rewrites.
"""

from instrefine.expansion import ExpansionConfig, build_rewrite_prompt, expand_detailed
from instrefine.gateway import LlmGateway, ProviderConfig
from instrefine.providers import mock_provider
from instrefine.records import Dataset, InstructionRecord

seed = Dataset.from_records(
    [
        InstructionRecord(
            id="0",
            instruction="Write a function that checks whether a string is a palindrome.",
            output="def is_pal(s):\n    return s == s[::-1]",
            task_profile="code",
        ),
        InstructionRecord(
            id="1",
            instruction="Given a list of prices, compute the best buy/sell profit.",
            input="[7, 1, 5, 3, 6, 4]",
            output="Track the running minimum and the best spread: answer 5.",
            task_profile="code",
        ),
    ],
    "code",
)

prompt = build_rewrite_prompt(seed.records[1])
print("=== rewrite prompt (system) ===")
print(prompt.system)
print("\n=== rewrite prompt (user) ===")
print(prompt.user)

gateway = LlmGateway(mock_provider(seed=7), ProviderConfig(backoff_base=0.0))
report = expand_detailed(seed, gateway, ExpansionConfig(rounds=2, task_profile="code"))

print("\n=== expansion result ===")
print(f"{len(seed)} seeds -> {len(report.merged)} merged records")
for record in report.merged:
    marker = "  " * record.source_round
    print(f"{marker}round {record.source_round}  id={record.id}")
    print(f"{marker}  {record.instruction[:96]}")

"""Build a small benchmark, replay its gold emissions, then corrupt them.

Shows the closed loop (replaying gold answers scores 1.0 on every metric)
and how the metrics separate failure modes: flipping the action name on a
quarter of the records moves SR_act and SR but leaves SR_t at 1.0.
"""

import json

from toolchat.backends import ScriptedBackend, ScriptRule
from toolchat.benchmark import replay_rules, run_benchmark
from toolchat.invocation import ToolInvocation
from toolchat.metrics import render_gold
from toolchat.registry import default_catalog
from toolchat.retrieval import DeterministicEmbedder, build_index


def scripted(rules):
    return ScriptedBackend([ScriptRule(match=r["match"], completion=r["completion"]) for r in rules])


catalog = default_catalog()
index = build_index(DeterministicEmbedder(dim=256), list(catalog.documents.values()))

records = []
from toolchat.benchmark import BenchmarkRecord

for i, (name, doc) in enumerate(list(catalog.documents.items())[:12]):
    pair = doc.qa_pairs[0]
    records.append(
        BenchmarkRecord(
            id=f"demo-{i}",
            instruction=pair.query,
            caption="one person in the scene",
            images=("example.jpg",),
            split="seen" if catalog.cards[name].seen else "unseen",
            gold=pair.gold,
        )
    )

print("=== replaying gold emissions ===")
run = run_benchmark(records, catalog, scripted(replay_rules(records)), index=index)
print(json.dumps(run.report.as_dict(), indent=2, sort_keys=True))

print("\n=== flipping the action on 3 of 12 records ===")
rules = replay_rules(records)
names = catalog.names()
for rule in rules[:3]:
    record = next(r for r in records if r.id == rule["match"]["record_id"])
    wrong = names[(names.index(record.gold.action) + 1) % len(names)]
    flipped = ToolInvocation(
        use_tool=True, action=wrong, args=dict(record.gold.args), raw_input=record.gold.raw_input
    )
    rule["completion"] = render_gold(flipped)
run = run_benchmark(records, catalog, scripted(rules), index=index)
print(json.dumps(run.report.as_dict(), indent=2, sort_keys=True))

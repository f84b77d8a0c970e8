"""Builders for deterministic benchmark fixtures used across test modules."""

from __future__ import annotations

from toolchat.benchmark import BenchmarkRecord, replay_rules
from toolchat.graphs import GraphStep, Binding, ToolGraph
from toolchat.invocation import ToolInvocation
from toolchat.metrics import render_gold
from toolchat.registry import ToolCatalog


def make_benchmark(catalog: ToolCatalog, n: int = 50) -> list[BenchmarkRecord]:
    """n records cycling over the catalog's documented tools; every tenth
    record carries a two-step chain gold instead of a single call."""
    names = [name for name in catalog.names() if name in catalog.documents]
    records = []
    for i in range(n):
        name = names[i % len(names)]
        doc = catalog.documents[name]
        pair = doc.qa_pairs[i % len(doc.qa_pairs)]
        card = catalog.cards[name]
        if i % 10 == 9:
            chain = ToolGraph(
                steps=(
                    GraphStep(
                        id=0,
                        tool="Human Segmentation",
                        bindings=(("arg0", Binding.user_image(0)),),
                    ),
                    GraphStep(
                        id=1,
                        tool="Body Pose Estimation",
                        bindings=(("arg0", Binding.step_output(0)),),
                    ),
                )
            )
            records.append(
                BenchmarkRecord(
                    id=f"r{i:03d}",
                    instruction="Segment the person and then estimate the pose.",
                    caption=f"scene {i}: one person outdoors",
                    images=("example.jpg",),
                    split="seen",
                    gold=chain,
                )
            )
        else:
            records.append(
                BenchmarkRecord(
                    id=f"r{i:03d}",
                    instruction=pair.query,
                    caption=f"scene {i}: one person outdoors",
                    images=("example.jpg",),
                    split="seen" if card.seen else "unseen",
                    gold=pair.gold,
                )
            )
    return records


def corrupt_rules(
    records: list[BenchmarkRecord],
    catalog: ToolCatalog,
    flip_action_ids: set[str] = frozenset(),
    flip_thought_ids: set[str] = frozenset(),
) -> list[dict]:
    """Replay rules with controlled corruption on selected record ids."""
    names = catalog.names()
    rules = []
    for record in records:
        gold = record.gold
        if record.id in flip_thought_ids:
            completion = "Thought: Do I need to use a tool? No\nI can answer that directly."
        elif record.id in flip_action_ids:
            assert isinstance(gold, ToolInvocation) and gold.use_tool
            wrong = names[(names.index(gold.action) + 1) % len(names)]
            flipped = ToolInvocation(
                use_tool=True, action=wrong, args=dict(gold.args), raw_input=gold.raw_input
            )
            completion = render_gold(flipped)
        else:
            completion = render_gold(gold)
        rules.append({"match": {"record_id": record.id}, "completion": completion})
    return rules


__all__ = ["make_benchmark", "corrupt_rules", "replay_rules"]

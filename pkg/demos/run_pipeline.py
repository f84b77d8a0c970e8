"""Walk one chat turn through the whole pipeline, printing every event.

The scripted backend stands in for the LLM: its first completion is a
two-step tool graph (segment the described person, then estimate the pose),
its second is the final answer. Tools are the deterministic mocks, so this
runs offline and prints the same thing every time.
"""

import json

from toolchat.backends import ScriptedBackend, ScriptRule
from toolchat.mocks import build_mock_adapters
from toolchat.pipeline import ChatPipeline
from toolchat.registry import default_catalog
from toolchat.retrieval import DeterministicEmbedder, build_index

catalog = default_catalog()
index = build_index(DeterministicEmbedder(dim=256), list(catalog.documents.values()))

plan = (
    "[[Described Person Segmentation, {{image_0}}; the person riding the bike], "
    "[Body Pose Estimation, {{step_0.output}}]]"
)
backend = ScriptedBackend(
    [
        ScriptRule(match={"turn_index": 0}, completion=plan),
        ScriptRule(
            match={"turn_index": 1},
            completion="The cyclist leans forward over the handlebars with bent knees.",
        ),
    ]
)

pipeline = ChatPipeline(catalog, backend, build_mock_adapters(catalog, seed=0), index=index)

query = "Estimate the pose of the person riding the bike"
print(f"user: {query}\n")
for event in pipeline.run_turn(query, images=("example.jpg",)):
    payload = json.dumps(event.payload, ensure_ascii=False)
    if len(payload) > 120:
        payload = payload[:117] + "..."
    print(f"[{event.seq}] {event.kind}: {payload}")

"""Prompt composition and planning.

``compose_plan_prompt`` lays the planning prompt out deterministically:
versioned preamble, tool-definition block, the retrieved in-context example,
conversation history, uploaded images, and finally the current query.  Equal
inputs produce byte-identical prompts, which the scripted backend and the
golden-file tests rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .invocation import ToolInvocation, parse_invocation, render_invocation
from .graphs import ToolGraph, parse_tool_graph
from .retrieval import IndexedExample

PLANNER_PREAMBLE_V1 = """\
You are an assistant that uses external tools to answer requests about people in images.
Decide whether a tool is needed, then reply in exactly one of these forms.
Single tool call:
Thought: Do I need to use a tool? Yes
Action: <tool name>
Action Input: <value, or name=value pairs separated by ';'>
No tool needed:
Thought: Do I need to use a tool? No
<your answer>
Multiple tools:
[[tool name, arguments], [tool name, arguments], ...]
Arguments are separated by ';'. Write {{image_j}} for the j-th uploaded image and {{step_k.output}} for the output of step k."""


@dataclass(frozen=True)
class PromptContext:
    """Everything the planner sees for one turn."""

    query: str
    tool_block: str
    image_refs: tuple[str, ...] = ()
    history: tuple[tuple[str, str], ...] = ()  # (role, text), chronological
    retrieved: IndexedExample | None = None

    def __post_init__(self):
        if not self.tool_block:
            raise ValueError("tool_block must be non-empty when planning")


def compose_plan_prompt(ctx: PromptContext) -> str:
    """Pure prompt layout; sections are joined by blank lines."""
    parts = [PLANNER_PREAMBLE_V1, f"Tools:\n{ctx.tool_block}"]
    if ctx.retrieved is not None:
        parts.append(
            "Example:\nQuery: "
            + ctx.retrieved.query
            + "\n"
            + render_invocation(ctx.retrieved.gold)
        )
    if ctx.history:
        turns = "\n".join(f"{role.capitalize()}: {text}" for role, text in ctx.history)
        parts.append(f"History:\n{turns}")
    if ctx.image_refs:
        refs = ", ".join(
            f"{{{{image_{j}}}}}={ref}" for j, ref in enumerate(ctx.image_refs)
        )
        parts.append(f"Images: {refs}")
    parts.append(f"Query: {ctx.query}")
    return "\n\n".join(parts)


def plan(llm_backend, ctx: PromptContext, meta: Mapping | None = None) -> str:
    """Run the backend on the composed prompt; returns the completion verbatim."""
    return llm_backend.complete(compose_plan_prompt(ctx), meta)


def parse_emission(text: str) -> ToolInvocation | ToolGraph:
    """Auto-detect the emission form: a leading '[' means a tool graph."""
    if text.lstrip().startswith("["):
        return parse_tool_graph(text)
    return parse_invocation(text)

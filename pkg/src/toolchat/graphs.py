"""Tool-graph grammar: bracketed step lists with dependency placeholders.

A planned multi-step invocation is written as::

    [[tool name1, arg; arg], [tool name2, arg], ...]

Arguments are ';'-separated.  ``{{image_j}}`` references the j-th user image
and ``{{step_k.output}}`` the output of an earlier step; either may also be
embedded inside literal text, in which case the executor substitutes the
upstream artifact's textual rendering.  Step-output references must point
strictly backwards, so parsed graphs are acyclic by construction.
"""

from __future__ import annotations

import heapq
import re
from dataclasses import dataclass

from .errors import (
    BadPlaceholder,
    CycleDetected,
    ForwardReference,
    MalformedGraph,
    MissingRequiredArg,
    UnknownToolName,
)
from .registry import ToolCatalog

_PLACEHOLDER = re.compile(r"\{\{([^{}]*)\}\}")
_STEP_REF = re.compile(r"^step_(\d+)\.output$")
_IMAGE_REF = re.compile(r"^image_(\d+)$")


@dataclass(frozen=True)
class Binding:
    """One argument source: a literal, a user image, or an upstream output."""

    kind: str  # "literal" | "user_image" | "step_output"
    text: str = ""
    index: int = -1

    @staticmethod
    def literal(text: str) -> "Binding":
        return Binding(kind="literal", text=text)

    @staticmethod
    def user_image(index: int) -> "Binding":
        return Binding(kind="user_image", index=index)

    @staticmethod
    def step_output(step_id: int) -> "Binding":
        return Binding(kind="step_output", index=step_id)

    def step_refs(self) -> list[int]:
        """Step ids this binding depends on (direct or embedded)."""
        if self.kind == "step_output":
            return [self.index]
        if self.kind == "literal":
            refs = []
            for m in _PLACEHOLDER.finditer(self.text):
                sm = _STEP_REF.match(m.group(1))
                if sm:
                    refs.append(int(sm.group(1)))
            return refs
        return []

    def image_refs(self) -> list[int]:
        if self.kind == "user_image":
            return [self.index]
        if self.kind == "literal":
            return [
                int(im.group(1))
                for m in _PLACEHOLDER.finditer(self.text)
                if (im := _IMAGE_REF.match(m.group(1)))
            ]
        return []


@dataclass(frozen=True)
class GraphStep:
    id: int
    tool: str
    bindings: tuple[tuple[str, Binding], ...]

    def binding_values(self) -> list[Binding]:
        return [b for _, b in self.bindings]


@dataclass(frozen=True)
class ToolGraph:
    steps: tuple[GraphStep, ...]

    def edges(self) -> list[tuple[int, int]]:
        """Dependency edges (source step, dependent step), deduplicated."""
        out = set()
        for step in self.steps:
            for binding in step.binding_values():
                for src in binding.step_refs():
                    out.add((src, step.id))
        return sorted(out)


@dataclass(frozen=True)
class ValidatedGraph:
    """A ToolGraph checked against a catalog, with one topological order."""

    graph: ToolGraph
    order: tuple[int, ...]

    @property
    def steps(self) -> tuple[GraphStep, ...]:
        return self.graph.steps

    def edges(self) -> list[tuple[int, int]]:
        return self.graph.edges()


@dataclass(frozen=True)
class GraphShape:
    value: str  # "node" | "chain" | "dag"


def _parse_binding(raw: str, step_index: int) -> Binding:
    text = raw.strip()
    m = _PLACEHOLDER.fullmatch(text)
    if m:
        inner = m.group(1)
        sm = _STEP_REF.match(inner)
        if sm:
            ref = int(sm.group(1))
            if ref >= step_index:
                raise ForwardReference(
                    f"step {step_index} references step {ref} which is not earlier"
                )
            return Binding.step_output(ref)
        im = _IMAGE_REF.match(inner)
        if im:
            return Binding.user_image(int(im.group(1)))
        raise BadPlaceholder(f"{{{{{inner}}}}}")
    # Literals may embed placeholders; each must still be well-formed and backward.
    for m in _PLACEHOLDER.finditer(text):
        inner = m.group(1)
        sm = _STEP_REF.match(inner)
        if sm:
            if int(sm.group(1)) >= step_index:
                raise ForwardReference(
                    f"step {step_index} embeds a reference to step {sm.group(1)}"
                )
        elif not _IMAGE_REF.match(inner):
            raise BadPlaceholder(f"{{{{{inner}}}}}")
    return Binding.literal(text)


def _split_top_level(content: str, sep: str) -> list[str]:
    """Split on ``sep`` at bracket depth zero."""
    parts = []
    depth = 0
    current = []
    for ch in content:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth < 0:
                raise MalformedGraph("unbalanced ']'")
        if ch == sep and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    if depth != 0:
        raise MalformedGraph("unbalanced '['")
    parts.append("".join(current))
    return parts


def parse_tool_graph(text: str) -> ToolGraph:
    """Parse step-list text into a ToolGraph.

    Total over arbitrary text: failures raise MalformedGraph, ForwardReference,
    or BadPlaceholder, never anything else.
    """
    stripped = text.strip()
    if not stripped.startswith("[") or not stripped.endswith("]"):
        raise MalformedGraph("graph text must be wrapped in '[' and ']'")
    body = stripped[1:-1]
    if not body.strip():
        raise MalformedGraph("graph has no steps")
    steps = []
    for i, chunk in enumerate(_split_top_level(body, ",")):
        chunk = chunk.strip()
        if not (chunk.startswith("[") and chunk.endswith("]")):
            raise MalformedGraph(f"step {i} is not bracketed: {chunk!r}")
        inner = chunk[1:-1]
        fields = _split_top_level(inner, ",")
        tool = fields[0].strip()
        if not tool:
            raise MalformedGraph(f"step {i} has an empty tool name")
        bindings: list[tuple[str, Binding]] = []
        if len(fields) > 1:
            args_text = ",".join(fields[1:])
            if args_text.strip():
                for j, raw in enumerate(args_text.split(";")):
                    bindings.append((f"arg{j}", _parse_binding(raw, i)))
        steps.append(GraphStep(id=i, tool=tool, bindings=tuple(bindings)))
    return ToolGraph(steps=tuple(steps))


def _render_binding(binding: Binding) -> str:
    if binding.kind == "literal":
        text = binding.text
        if not text or text != text.strip():
            raise ValueError(f"literal not renderable: {text!r}")
        if any(ch in text for ch in ";[]"):
            raise ValueError(f"literal contains a grammar character: {text!r}")
        if _PLACEHOLDER.fullmatch(text):
            raise ValueError(f"literal would re-parse as a placeholder: {text!r}")
        for m in _PLACEHOLDER.finditer(text):
            inner = m.group(1)
            if not (_STEP_REF.match(inner) or _IMAGE_REF.match(inner)):
                raise ValueError(f"literal embeds a malformed placeholder: {text!r}")
        return text
    if binding.kind == "user_image":
        return f"{{{{image_{binding.index}}}}}"
    if binding.kind == "step_output":
        return f"{{{{step_{binding.index}.output}}}}"
    raise ValueError(f"unknown binding kind {binding.kind!r}")


def render_tool_graph(graph: ToolGraph) -> str:
    """Render a graph back to step-list text (inverse of parse_tool_graph).

    Literals must be non-empty, stripped, and free of ';' and brackets, or the
    rendered text would not parse back to the same graph.
    """
    rendered_steps = []
    for step in graph.steps:
        args = "; ".join(_render_binding(b) for b in step.binding_values())
        if args:
            rendered_steps.append(f"[{step.tool}, {args}]")
        else:
            rendered_steps.append(f"[{step.tool}]")
    return "[" + ", ".join(rendered_steps) + "]"


def _topological_order(step_ids: list[int], edges: list[tuple[int, int]]) -> tuple[int, ...]:
    """Kahn's algorithm with a min-heap frontier for a deterministic order."""
    indegree = {sid: 0 for sid in step_ids}
    children: dict[int, list[int]] = {sid: [] for sid in step_ids}
    for src, dst in edges:
        indegree[dst] += 1
        children[src].append(dst)
    frontier = [sid for sid in step_ids if indegree[sid] == 0]
    heapq.heapify(frontier)
    order = []
    while frontier:
        sid = heapq.heappop(frontier)
        order.append(sid)
        for child in children[sid]:
            indegree[child] -= 1
            if indegree[child] == 0:
                heapq.heappush(frontier, child)
    if len(order) != len(step_ids):
        raise CycleDetected("graph dependencies contain a cycle")
    return tuple(order)


def validate_graph(graph: ToolGraph, catalog: ToolCatalog) -> ValidatedGraph:
    """Check tools, required arguments, and acyclicity; bind argument names.

    Positional arguments are matched to each card's ArgSpec order.  Returns
    the graph annotated with one valid topological order.
    """
    renamed_steps = []
    for step in graph.steps:
        if step.tool not in catalog.cards:
            raise UnknownToolName(step.tool)
        card = catalog.cards[step.tool]
        values = step.binding_values()
        for pos, spec in enumerate(card.args):
            if spec.required and pos >= len(values):
                raise MissingRequiredArg(f"{step.tool}: {spec.name}")
        names = [spec.name for spec in card.args]
        bindings = tuple(
            (names[pos] if pos < len(names) else f"arg{pos}", b)
            for pos, b in enumerate(values)
        )
        renamed_steps.append(GraphStep(id=step.id, tool=step.tool, bindings=bindings))
    renamed = ToolGraph(steps=tuple(renamed_steps))
    order = _topological_order([s.id for s in renamed.steps], renamed.edges())
    return ValidatedGraph(graph=renamed, order=order)


def classify_shape(graph: ToolGraph | ValidatedGraph) -> GraphShape:
    """node = one step; chain = edges form a single path over all steps; else dag."""
    steps = graph.steps
    if len(steps) == 1:
        return GraphShape("node")
    path_edges = {(i, i + 1) for i in range(len(steps) - 1)}
    if set(graph.edges()) == path_edges:
        return GraphShape("chain")
    return GraphShape("dag")


def invocation_to_graph(action: str, bindings: list[Binding]) -> ToolGraph:
    """Wrap a single tool call as a one-step graph."""
    step = GraphStep(
        id=0,
        tool=action,
        bindings=tuple((f"arg{i}", b) for i, b in enumerate(bindings)),
    )
    return ToolGraph(steps=(step,))

"""The full chat turn: retrieve, plan, execute, integrate, respond.

A turn is a stream of TurnEvent values with dense sequence numbers: ``plan``
first, then ``step_started``/``step_finished`` per executed step,
``transform`` per applied result conversion, optional ``choice_*`` events
when several results compete, and exactly one final ``answer``.  Failures
surface as ``pipeline_error`` events (stage + cause) and the turn still ends
with a fallback answer.

Steps run sequentially here so the event stream is deterministic under the
scripted backend and mock adapters; the concurrent executor remains available
through ``use_concurrency`` (step events are then emitted from the finished
trace in step order).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping

from .artifacts import ArtifactValue, render_inline, to_wire
from .errors import AdapterMissing, ToolchatError, UnparseableRevision, UnparseableSelection
from .executor import StepResult, _poison, _dependents, _run_step, execute_graph
from .graphs import (
    Binding,
    GraphStep,
    ToolGraph,
    ValidatedGraph,
    _parse_binding,
    classify_shape,
    render_tool_graph,
    validate_graph,
)
from .integration import (
    ShapeMeasurementModel,
    VertexPartMap,
    default_shape_model,
    default_vertex_part_map,
    discriminate_modify,
    discriminate_select,
    format_choices,
    render_measurement_sentence,
    render_pose_placeholder,
    synthesize_response,
    transform_contact,
    transform_shape,
)
from .invocation import ToolInvocation
from .planner import PromptContext, compose_plan_prompt, parse_emission
from .registry import ToolCatalog, render_tool_definitions
from .retrieval import RetrievalIndex, retrieve

FALLBACK_ANSWER = "Sorry, I could not complete that request."

EVENT_KINDS = (
    "plan",
    "step_started",
    "step_finished",
    "transform",
    "choice_presented",
    "choice_resolved",
    "pipeline_error",
    "answer",
)


@dataclass(frozen=True)
class TurnEvent:
    seq: int
    kind: str
    payload: dict

    def as_dict(self) -> dict:
        return {"seq": self.seq, "kind": self.kind, "payload": self.payload}


class _Emitter:
    """Hands out densely numbered events for one turn."""

    def __init__(self):
        self.seq = 0

    def __call__(self, kind: str, payload: dict) -> TurnEvent:
        event = TurnEvent(seq=self.seq, kind=kind, payload=payload)
        self.seq += 1
        return event


def _invocation_bindings(inv: ToolInvocation) -> list[Binding]:
    values = [inv.raw_input] if inv.raw_input is not None else list(inv.args.values())
    return [_parse_binding(v, 0) for v in values]


def invocation_as_graph(inv: ToolInvocation) -> ToolGraph:
    """Wrap a single tool call as a one-step graph for uniform execution."""
    step = GraphStep(
        id=0,
        tool=inv.action,
        bindings=tuple((f"arg{i}", b) for i, b in enumerate(_invocation_bindings(inv))),
    )
    return ToolGraph(steps=(step,))


def _sink_ids(graph: ValidatedGraph) -> list[int]:
    sources = {src for src, _ in graph.edges()}
    return [s.id for s in graph.steps if s.id not in sources]


def _step_finished_payload(result: StepResult, tool: str) -> dict:
    payload = {
        "step": result.step_id,
        "tool": tool,
        "status": result.status,
        "duration_ms": result.duration_ms,
    }
    if result.status == "ok":
        payload["artifact"] = to_wire(result.output)
        payload["source_tool"] = result.output.source_tool
    else:
        payload["error"] = result.error
    return payload


class ChatPipeline:
    def __init__(
        self,
        catalog: ToolCatalog,
        backend,
        adapters: Mapping[str, object],
        index: RetrievalIndex | None = None,
        vertex_map: VertexPartMap | None = None,
        shape_model: ShapeMeasurementModel | None = None,
        use_concurrency: bool = False,
        reveal_choice_sources: bool = False,
        retry_on_malformed: bool = False,
        tool_subset: list[str] | None = None,
    ):
        self.catalog = catalog
        self.backend = backend
        self.adapters = dict(adapters)
        self.index = index
        self.vertex_map = vertex_map or default_vertex_part_map()
        self.shape_model = shape_model or default_shape_model()
        self.use_concurrency = use_concurrency
        self.reveal_choice_sources = reveal_choice_sources
        self.retry_on_malformed = retry_on_malformed
        self.tool_block = render_tool_definitions(catalog, tool_subset)

    def _transform(self, artifact: ArtifactValue, step_id: int) -> tuple[str, dict | None]:
        """Tool-conditioned conversion; returns (rendering, transform payload).

        Text and opaque references pass through unchanged with no event payload.
        """
        if artifact.kind == "pose_params":
            ref = render_pose_placeholder(artifact.value)
            return ref, {
                "step": step_id,
                "source_tool": artifact.source_tool,
                "kind": "pose_render",
                "rendering": ref,
            }
        if artifact.kind == "contact_vector":
            sentence = transform_contact(artifact.value, self.vertex_map)
            return sentence, {
                "step": step_id,
                "source_tool": artifact.source_tool,
                "kind": "contact",
                "rendering": sentence,
            }
        if artifact.kind == "shape_params":
            result = transform_shape(artifact.value, self.shape_model)
            payload = {
                "step": step_id,
                "source_tool": artifact.source_tool,
                "kind": "shape",
                "rendering": result.sentence,
                "flags": list(result.flags),
            }
            if result.flags:
                try:
                    fixed = discriminate_modify(self.backend, result.sentence, result)
                    payload["rendering"] = fixed.sentence
                    payload["revised"] = list(fixed.revised_fields)
                    payload["rejected"] = list(fixed.rejected_fields)
                except (UnparseableRevision, ToolchatError):
                    payload["revised"] = []
            return payload["rendering"], payload
        if artifact.kind == "measurement_set":
            sentence = render_measurement_sentence(artifact.value)
            return sentence, {
                "step": step_id,
                "source_tool": artifact.source_tool,
                "kind": "measurement",
                "rendering": sentence,
            }
        return render_inline(artifact), None

    def run_turn(
        self,
        text: str,
        images: tuple[str, ...] = (),
        history: tuple[tuple[str, str], ...] = (),
    ) -> Iterator[TurnEvent]:
        emit = _Emitter()

        retrieved = None
        if self.index is not None and self.index.examples:
            retrieved = retrieve(self.index, text, k=1)[0][0]
        retrieved_info = None
        if retrieved is not None:
            retrieved_info = {"tool_name": retrieved.tool_name, "query": retrieved.query}
        ctx = PromptContext(
            query=text,
            tool_block=self.tool_block,
            image_refs=tuple(images),
            history=history,
            retrieved=retrieved,
        )

        try:
            raw = self.backend.complete(compose_plan_prompt(ctx))
        except ToolchatError as e:
            yield emit("pipeline_error", {"stage": "plan", "cause": str(e)})
            yield emit("answer", {"text": FALLBACK_ANSWER})
            return

        try:
            parsed = parse_emission(raw)
        except ToolchatError as e:
            # Off by default so metric runs stay deterministic: one re-prompt
            # with the parse error appended, then give up.
            retried = False
            if self.retry_on_malformed:
                retry_prompt = (
                    compose_plan_prompt(ctx)
                    + f"\n\nYour previous reply could not be parsed ({e}). "
                    "Reply again using exactly one of the forms above."
                )
                try:
                    raw = self.backend.complete(retry_prompt)
                    parsed = parse_emission(raw)
                    retried = True
                except ToolchatError as retry_error:
                    e = retry_error
            if not retried:
                yield emit("pipeline_error", {"stage": "parse", "cause": str(e)})
                yield emit("answer", {"text": FALLBACK_ANSWER})
                return

        if isinstance(parsed, ToolInvocation) and not parsed.use_tool:
            yield emit("plan", {"raw": raw, "kind": "direct", "retrieved": retrieved_info})
            answer = parsed.answer
            if not answer:
                try:
                    answer = synthesize_response(self.backend, text, [])
                except ToolchatError as e:
                    yield emit("pipeline_error", {"stage": "respond", "cause": str(e)})
                    answer = FALLBACK_ANSWER
            yield emit("answer", {"text": answer})
            return

        graph = parsed if isinstance(parsed, ToolGraph) else invocation_as_graph(parsed)
        try:
            validated = validate_graph(graph, self.catalog)
            for step in validated.steps:
                if step.tool not in self.adapters:
                    raise AdapterMissing(step.tool)
        except ToolchatError as e:
            yield emit("pipeline_error", {"stage": "validate", "cause": str(e)})
            yield emit("answer", {"text": FALLBACK_ANSWER})
            return

        yield emit("plan", {
            "raw": raw,
            "kind": "graph" if isinstance(parsed, ToolGraph) else "invocation",
            "graph": render_tool_graph(validated.graph),
            "shape": classify_shape(validated).value,
            "steps": [{"id": s.id, "tool": s.tool} for s in validated.steps],
            "edges": [list(e) for e in validated.edges()],
            "retrieved": retrieved_info,
        })

        results: dict[int, StepResult] = {}
        if self.use_concurrency:
            trace = execute_graph(validated, self.adapters, images)
            for result in trace.results:
                step = validated.steps[list(s.id for s in validated.steps).index(result.step_id)]
                yield emit("step_started", {"step": result.step_id, "tool": step.tool})
                yield emit("step_finished", _step_finished_payload(result, step.tool))
                results[result.step_id] = result
        else:
            steps_by_id = {s.id: s for s in validated.steps}
            children = _dependents(validated)
            completed: dict[int, ArtifactValue] = {}
            for step_id in validated.order:
                step = steps_by_id[step_id]
                if step_id in results:  # poisoned by an upstream failure
                    yield emit("step_started", {"step": step_id, "tool": step.tool})
                    yield emit("step_finished", _step_finished_payload(results[step_id], step.tool))
                    continue
                yield emit("step_started", {"step": step_id, "tool": step.tool})
                result = _run_step(step, self.adapters[step.tool], completed, images)
                results[step_id] = result
                yield emit("step_finished", _step_finished_payload(result, step.tool))
                if result.status == "ok":
                    completed[step_id] = result.output
                else:
                    _poison(step_id, children, results)

        renderings: list[tuple[str, str]] = []
        for sink in sorted(_sink_ids(validated)):
            result = results.get(sink)
            if result is None or result.status != "ok":
                continue
            try:
                rendering, payload = self._transform(result.output, sink)
            except ToolchatError as e:
                yield emit("pipeline_error", {"stage": "transform", "cause": str(e)})
                continue
            if payload is not None:
                yield emit("transform", payload)
            renderings.append((result.output.source_tool, rendering))

        if not renderings:
            cause = "; ".join(
                f"step {sid}: {r.error}"
                for sid, r in sorted(results.items())
                if r.status == "failed"
            ) or "no usable tool output"
            yield emit("pipeline_error", {"stage": "execute", "cause": cause})
            yield emit("answer", {"text": FALLBACK_ANSWER})
            return

        chosen = [rendering for _, rendering in renderings]
        if len(renderings) >= 2:
            choices, prompt = format_choices(
                text, renderings, reveal_sources=self.reveal_choice_sources
            )
            yield emit("choice_presented", {
                "question": choices.question,
                "options": [
                    {"label": o.label, "rendering": o.rendering} for o in choices.options
                ],
            })
            try:
                option, _reply = discriminate_select(self.backend, choices, prompt)
                fallback = False
            except UnparseableSelection:
                option, fallback = choices.options[0], True
            except ToolchatError as e:
                yield emit("pipeline_error", {"stage": "discriminate", "cause": str(e)})
                option, fallback = choices.options[0], True
            yield emit("choice_resolved", {
                "label": option.label,
                "source_tool": option.source_tool,
                "fallback": fallback,
            })
            chosen = [option.rendering]

        try:
            answer = synthesize_response(self.backend, text, chosen)
        except ToolchatError as e:
            yield emit("pipeline_error", {"stage": "respond", "cause": str(e)})
            answer = FALLBACK_ANSWER
        yield emit("answer", {"text": answer})

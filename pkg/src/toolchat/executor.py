"""Graph execution against tool adapters.

Steps run in topological order; independent steps may fan out to a bounded
worker pool.  The trace always lists results by step id so concurrent and
sequential runs are comparable.  A failed step poisons its dependents (they
are marked failed with an "upstream" cause and never run) while independent
branches continue.
"""

from __future__ import annotations

import re
import time
from concurrent.futures import ThreadPoolExecutor, TimeoutError as FutureTimeout
from dataclasses import dataclass
from typing import Mapping, Protocol

import requests

from .artifacts import ArtifactValue, from_wire, image_artifact, render_inline, to_wire
from .errors import (
    AdapterMissing,
    ImageIndexOutOfRange,
    MissingUpstream,
    ToolFailure,
    ToolProtocolError,
    ToolTimeout,
    ToolUnavailable,
)
from .graphs import GraphStep, ValidatedGraph

DEFAULT_STEP_TIMEOUT = 60.0
DEFAULT_WORKER_CAP = 4

_EMBEDDED = re.compile(r"\{\{(step_(\d+)\.output|image_(\d+))\}\}")


class ToolAdapter(Protocol):
    tool_name: str

    def invoke(self, args: Mapping[str, ArtifactValue | str]) -> ArtifactValue: ...


@dataclass(frozen=True)
class StepResult:
    step_id: int
    status: str  # "ok" | "failed"
    output: ArtifactValue | None = None
    error: str | None = None
    duration_ms: float = 0.0
    started_at: float | None = None
    finished_at: float | None = None

    def __post_init__(self):
        if self.status == "ok" and self.output is None:
            raise ValueError("ok result requires an output")
        if self.status == "failed" and self.error is None:
            raise ValueError("failed result requires an error message")


@dataclass(frozen=True)
class ExecutionTrace:
    graph: ValidatedGraph
    results: tuple[StepResult, ...]  # ordered by step id
    overall: str  # "ok" | "partial" | "failed"

    def outputs(self) -> dict[int, ArtifactValue]:
        return {r.step_id: r.output for r in self.results if r.status == "ok"}

    def result_for(self, step_id: int) -> StepResult:
        for r in self.results:
            if r.step_id == step_id:
                return r
        raise KeyError(step_id)


def _substitute_literal(text: str, completed: Mapping[int, ArtifactValue], images) -> str:
    def repl(m: re.Match) -> str:
        if m.group(2) is not None:
            step_id = int(m.group(2))
            if step_id not in completed:
                raise MissingUpstream(f"step {step_id} output is not available")
            return render_inline(completed[step_id])
        j = int(m.group(3))
        if j >= len(images):
            raise ImageIndexOutOfRange(f"image_{j} with {len(images)} image(s)")
        return images[j]

    return _EMBEDDED.sub(repl, text)


def bind_arguments(
    step: GraphStep,
    completed: Mapping[int, ArtifactValue],
    images: list[str] | tuple[str, ...],
) -> dict[str, ArtifactValue | str]:
    """Materialize a step's bindings into concrete adapter arguments.

    Literals become text (with any embedded placeholders substituted by the
    upstream artifact's inline rendering), user images become image_ref
    artifacts, and step outputs are passed through whole.
    """
    args: dict[str, ArtifactValue | str] = {}
    for name, binding in step.bindings:
        if binding.kind == "literal":
            args[name] = _substitute_literal(binding.text, completed, images)
        elif binding.kind == "user_image":
            if binding.index >= len(images):
                raise ImageIndexOutOfRange(f"image_{binding.index} with {len(images)} image(s)")
            args[name] = image_artifact(images[binding.index], source_tool="user")
        elif binding.kind == "step_output":
            if binding.index not in completed:
                raise MissingUpstream(f"step {binding.index} output is not available")
            args[name] = completed[binding.index]
        else:
            raise ValueError(f"unknown binding kind {binding.kind!r}")
    return args


def _check_adapters(graph: ValidatedGraph, adapters: Mapping[str, ToolAdapter]) -> None:
    for step in graph.steps:
        if step.tool not in adapters:
            raise AdapterMissing(step.tool)


def _dependents(graph: ValidatedGraph) -> dict[int, set[int]]:
    children: dict[int, set[int]] = {s.id: set() for s in graph.steps}
    for src, dst in graph.edges():
        children[src].add(dst)
    return children


def _deps(graph: ValidatedGraph) -> dict[int, set[int]]:
    parents: dict[int, set[int]] = {s.id: set() for s in graph.steps}
    for src, dst in graph.edges():
        parents[dst].add(src)
    return parents


def _run_step(
    step: GraphStep,
    adapter: ToolAdapter,
    completed: Mapping[int, ArtifactValue],
    images,
) -> StepResult:
    started = time.monotonic()
    try:
        args = bind_arguments(step, completed, images)
        output = adapter.invoke(args)
        finished = time.monotonic()
        return StepResult(
            step_id=step.id,
            status="ok",
            output=output,
            duration_ms=(finished - started) * 1000.0,
            started_at=started,
            finished_at=finished,
        )
    except Exception as e:  # adapters may raise anything; contain it in the trace
        finished = time.monotonic()
        return StepResult(
            step_id=step.id,
            status="failed",
            error=f"{type(e).__name__}: {e}",
            duration_ms=(finished - started) * 1000.0,
            started_at=started,
            finished_at=finished,
        )


def _overall(results: dict[int, StepResult]) -> str:
    ok = sum(1 for r in results.values() if r.status == "ok")
    if ok == len(results):
        return "ok"
    if ok == 0:
        return "failed"
    return "partial"


def _poison(
    step_id: int,
    children: dict[int, set[int]],
    results: dict[int, StepResult],
) -> None:
    """Mark every transitive dependent of a failed step as upstream-failed."""
    stack = [step_id]
    while stack:
        current = stack.pop()
        for child in children[current]:
            if child not in results:
                results[child] = StepResult(step_id=child, status="failed", error="upstream")
                stack.append(child)


def execute_graph_sequential(
    graph: ValidatedGraph,
    adapters: Mapping[str, ToolAdapter],
    images: list[str] | tuple[str, ...] = (),
) -> ExecutionTrace:
    """Reference executor: one step at a time in the annotated topological order."""
    _check_adapters(graph, adapters)
    steps = {s.id: s for s in graph.steps}
    children = _dependents(graph)
    completed: dict[int, ArtifactValue] = {}
    results: dict[int, StepResult] = {}
    for step_id in graph.order:
        if step_id in results:  # already poisoned by an upstream failure
            continue
        step = steps[step_id]
        result = _run_step(step, adapters[step.tool], completed, images)
        results[step_id] = result
        if result.status == "ok":
            completed[step_id] = result.output
        else:
            _poison(step_id, children, results)
    ordered = tuple(results[sid] for sid in sorted(results))
    return ExecutionTrace(graph=graph, results=ordered, overall=_overall(results))


def execute_graph(
    graph: ValidatedGraph,
    adapters: Mapping[str, ToolAdapter],
    images: list[str] | tuple[str, ...] = (),
    max_workers: int | None = None,
    step_timeout: float = DEFAULT_STEP_TIMEOUT,
) -> ExecutionTrace:
    """Execute with bounded fan-out over independent steps.

    The default worker bound is the size of the initial dependency-free
    frontier, capped at four.  The trace is assembled single-writer and listed
    by step id, so outputs are identical to the sequential executor's for
    deterministic adapters.
    """
    _check_adapters(graph, adapters)
    steps = {s.id: s for s in graph.steps}
    children = _dependents(graph)
    parents = _deps(graph)
    if max_workers is None:
        frontier_size = sum(1 for s in graph.steps if not parents[s.id])
        max_workers = max(1, min(DEFAULT_WORKER_CAP, frontier_size))

    completed: dict[int, ArtifactValue] = {}
    results: dict[int, StepResult] = {}
    pending = set(steps)

    def ready(step_id: int) -> bool:
        return step_id in pending and all(
            p in completed for p in parents[step_id]
        )

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        in_flight = {}
        while pending or in_flight:
            for step_id in sorted(pending):
                if step_id in results:
                    pending.discard(step_id)
                    continue
                if ready(step_id) and step_id not in in_flight:
                    step = steps[step_id]
                    in_flight[step_id] = pool.submit(
                        _run_step, step, adapters[step.tool], dict(completed), images
                    )
            if not in_flight:
                break
            # Wait for the lowest-id in-flight step; dict order is insertion
            # order so this is deterministic enough for trace assembly.
            step_id = min(in_flight)
            future = in_flight.pop(step_id)
            try:
                result = future.result(timeout=step_timeout)
            except FutureTimeout:
                result = StepResult(
                    step_id=step_id,
                    status="failed",
                    error=f"timeout after {step_timeout}s",
                )
            results[step_id] = result
            pending.discard(step_id)
            if result.status == "ok":
                completed[step_id] = result.output
            else:
                _poison(step_id, children, results)
                pending.difference_update(results)
    ordered = tuple(results[sid] for sid in sorted(results))
    return ExecutionTrace(graph=graph, results=ordered, overall=_overall(results))


class HttpToolAdapter:
    """Adapter for a tool served over the remote-tool protocol.

    POSTs ``{"tool": name, "args": {name: {"kind": k, "value": v}}}`` and
    decodes ``{"kind": k, "value": v, "error": null | {code, message}}``.
    """

    def __init__(
        self,
        tool_name: str,
        endpoint: str,
        timeout: float = DEFAULT_STEP_TIMEOUT,
        session: requests.Session | None = None,
    ):
        self.tool_name = tool_name
        self.endpoint = endpoint
        self.timeout = timeout
        self.session = session or requests.Session()

    def invoke(self, args: Mapping[str, ArtifactValue | str]) -> ArtifactValue:
        payload_args = {}
        for name, value in args.items():
            if isinstance(value, ArtifactValue):
                payload_args[name] = to_wire(value)
            else:
                payload_args[name] = {"kind": "text", "value": str(value)}
        try:
            resp = self.session.post(
                self.endpoint,
                json={"tool": self.tool_name, "args": payload_args},
                timeout=self.timeout,
            )
        except requests.Timeout as e:
            raise ToolTimeout(str(e)) from None
        except requests.RequestException as e:
            raise ToolUnavailable(str(e)) from None
        if resp.status_code != 200:
            raise ToolUnavailable(f"tool endpoint returned {resp.status_code}", resp.status_code)
        try:
            body = resp.json()
        except ValueError as e:
            raise ToolProtocolError(f"non-JSON tool response: {e}") from None
        if not isinstance(body, dict):
            raise ToolProtocolError(f"tool response must be an object: {body!r}")
        error = body.get("error")
        if error:
            raise ToolFailure(f"{error.get('code', 'error')}: {error.get('message', '')}")
        return from_wire(body, source_tool=self.tool_name)

"""Benchmark datasets and the end-to-end evaluation runner.

Datasets are JSONL, one record per line::

    {"id": "...", "instruction": "...", "caption": "...", "images": [...],
     "split": "seen" | "unseen",
     "gold": {"kind": "node", "thought": true, "action": "...", "action_input": ...}
           | {"kind": "graph", "steps": [{"tool": "...", "args": ["...", ...]}]},
     "turns": [{"instruction": "...", "gold": {...}}]}        # multi-turn only

For each record the runner retrieves an in-context example, composes the
planning prompt, queries the backend, parses the emission, and scores it.
Under the scripted backend the whole run is deterministic and the per-record
dump is byte-identical across runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .backends import prompt_sha256
from .errors import DatasetParseError, ToolchatError
from .graphs import GraphStep, ToolGraph, _parse_binding
from .invocation import ToolInvocation
from .metrics import (
    BLEU_CONFIG,
    DEFAULT_BLEU_THRESHOLD,
    FieldScores,
    MetricReport,
    aggregate,
    render_gold,
    score_invocation,
)
from .planner import PromptContext, compose_plan_prompt, parse_emission
from .registry import ToolCatalog, invocation_from_json, invocation_to_json, render_tool_definitions
from .retrieval import RetrievalIndex, retrieve

SPLITS = ("seen", "unseen")

GoldSpec = ToolInvocation | ToolGraph


@dataclass(frozen=True)
class Turn:
    instruction: str
    gold: GoldSpec


@dataclass(frozen=True)
class BenchmarkRecord:
    id: str
    instruction: str
    caption: str = ""
    images: tuple[str, ...] = ()
    split: str = "seen"
    gold: GoldSpec | None = None
    turns: tuple[Turn, ...] = ()
    merge_fallback: bool = False

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}")
        if self.turns:
            if self.gold is not None:
                raise ValueError("multi-turn records carry per-turn golds only")
        elif self.gold is None:
            raise ValueError("single-turn records need a gold")

    def turn_list(self) -> list[Turn]:
        if self.turns:
            return list(self.turns)
        return [Turn(instruction=self.instruction, gold=self.gold)]


@dataclass(frozen=True)
class PredictionRecord:
    record_id: str
    raw: str
    parsed: ToolInvocation | ToolGraph | None = None
    parse_error: str | None = None

    def __post_init__(self):
        if (self.parsed is None) == (self.parse_error is None):
            raise ValueError("exactly one of parsed/parse_error must be present")


def gold_to_json(gold: GoldSpec) -> dict:
    if isinstance(gold, ToolGraph):
        return {
            "kind": "graph",
            "steps": [
                {
                    "tool": step.tool,
                    "args": [_binding_source(b) for _, b in step.bindings],
                }
                for step in gold.steps
            ],
        }
    out = invocation_to_json(gold)
    out["kind"] = "node"
    return out


def _binding_source(binding) -> str:
    if binding.kind == "literal":
        return binding.text
    if binding.kind == "user_image":
        return f"{{{{image_{binding.index}}}}}"
    return f"{{{{step_{binding.index}.output}}}}"


def gold_from_json(obj: dict, where: str) -> GoldSpec:
    kind = obj.get("kind")
    if kind == "graph":
        steps = []
        for i, step in enumerate(obj.get("steps", [])):
            bindings = tuple(
                (f"arg{j}", _parse_binding(arg, i))
                for j, arg in enumerate(step.get("args", []))
            )
            steps.append(GraphStep(id=i, tool=step["tool"], bindings=bindings))
        if not steps:
            raise DatasetParseError(f"{where}: graph gold has no steps")
        return ToolGraph(steps=tuple(steps))
    if kind == "node":
        return invocation_from_json(obj, where)
    raise DatasetParseError(f"{where}: gold.kind must be 'node' or 'graph', got {kind!r}")


def record_to_json(record: BenchmarkRecord) -> dict:
    out: dict = {
        "id": record.id,
        "instruction": record.instruction,
        "caption": record.caption,
        "images": list(record.images),
        "split": record.split,
    }
    if record.turns:
        out["turns"] = [
            {"instruction": t.instruction, "gold": gold_to_json(t.gold)} for t in record.turns
        ]
        if record.merge_fallback:
            out["merge_fallback"] = True
    else:
        out["gold"] = gold_to_json(record.gold)
    return out


def record_from_json(obj: dict, where: str) -> BenchmarkRecord:
    try:
        turns = tuple(
            Turn(
                instruction=t["instruction"],
                gold=gold_from_json(t["gold"], f"{where}.turns[{i}]"),
            )
            for i, t in enumerate(obj.get("turns", []))
        )
        gold = None
        if not turns:
            gold = gold_from_json(obj["gold"], f"{where}.gold")
        return BenchmarkRecord(
            id=str(obj["id"]),
            instruction=obj["instruction"],
            caption=obj.get("caption", ""),
            images=tuple(obj.get("images", [])),
            split=obj.get("split", "seen"),
            gold=gold,
            turns=turns,
            merge_fallback=bool(obj.get("merge_fallback", False)),
        )
    except DatasetParseError:
        raise
    except (KeyError, TypeError, ValueError, ToolchatError) as e:
        raise DatasetParseError(f"{where}: {e}") from None


def load_dataset(path: str | Path) -> list[BenchmarkRecord]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DatasetParseError(f"{path}: {e}") from None
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise DatasetParseError(f"{path}:{lineno}: {e.msg}") from None
        records.append(record_from_json(obj, f"{path}:{lineno}"))
    if not records:
        raise DatasetParseError(f"{path}: dataset is empty")
    return records


def save_dataset(records: list[BenchmarkRecord], path: str | Path) -> None:
    lines = [json.dumps(record_to_json(r), ensure_ascii=False) for r in records]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def replay_rules(records: list[BenchmarkRecord]) -> list[dict]:
    """Scripted-backend rules that replay every gold emission verbatim."""
    rules = []
    for record in records:
        for turn_index, turn in enumerate(record.turn_list()):
            match: dict = {"record_id": record.id}
            if record.turns:
                match["turn_index"] = turn_index
            rules.append({"match": match, "completion": render_gold(turn.gold)})
    return rules


def write_scripted_fixture(rules: list[dict], path: str | Path) -> None:
    lines = [json.dumps(rule, ensure_ascii=False) for rule in rules]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class ScoredTurn:
    record_id: str
    turn_index: int
    split: str
    prompt_sha: str
    raw: str
    parse_error: str | None
    scores: FieldScores


@dataclass(frozen=True)
class BenchmarkRun:
    report: MetricReport
    scored: tuple[ScoredTurn, ...]
    bleu_threshold: float

    def dump_lines(self) -> list[str]:
        """Header line plus one JSON line per scored turn; no timestamps."""
        header = {
            "bleu": BLEU_CONFIG,
            "bleu_threshold": self.bleu_threshold,
            "n": self.report.n,
        }
        lines = [json.dumps(header, ensure_ascii=False, sort_keys=True)]
        for turn in self.scored:
            lines.append(
                json.dumps(
                    {
                        "record_id": turn.record_id,
                        "turn_index": turn.turn_index,
                        "split": turn.split,
                        "prompt_sha256": turn.prompt_sha,
                        "raw": turn.raw,
                        "parse_error": turn.parse_error,
                        "scores": {
                            "thought": turn.scores.thought,
                            "action": turn.scores.action,
                            "args": turn.scores.args,
                            "success": turn.scores.success,
                            "iou": turn.scores.iou,
                        },
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
            )
        return lines


def run_benchmark(
    dataset: list[BenchmarkRecord],
    catalog: ToolCatalog,
    backend,
    index: RetrievalIndex | None = None,
    bleu_threshold: float = DEFAULT_BLEU_THRESHOLD,
    tool_subset: list[str] | None = None,
) -> BenchmarkRun:
    """Retrieval, planning, parsing, and scoring over a whole dataset.

    Backend failures are recorded per record as zero-scoring failures and the
    run continues.  Multi-turn records are scored one turn at a time with the
    prior turns' gold emissions replayed as history.
    """
    tool_block = render_tool_definitions(catalog, tool_subset)
    scored: list[tuple[FieldScores, str]] = []
    dump: list[ScoredTurn] = []
    for record in dataset:
        history: list[tuple[str, str]] = []
        if record.caption:
            history.append(("user", f"Image caption: {record.caption}"))
        for turn_index, turn in enumerate(record.turn_list()):
            retrieved = None
            if index is not None and index.examples:
                retrieved = retrieve(index, turn.instruction, k=1)[0][0]
            ctx = PromptContext(
                query=turn.instruction,
                tool_block=tool_block,
                image_refs=record.images,
                history=tuple(history),
                retrieved=retrieved,
            )
            prompt = compose_plan_prompt(ctx)
            meta = {"record_id": record.id, "turn_index": turn_index}
            raw = ""
            parse_error: str | None = None
            parsed: ToolInvocation | ToolGraph | None = None
            try:
                raw = backend.complete(prompt, meta)
            except ToolchatError as e:
                parse_error = f"backend: {e}"
            if parse_error is None:
                try:
                    parsed = parse_emission(raw)
                except ToolchatError as e:
                    parse_error = f"{type(e).__name__}: {e}"
            scores = score_invocation(
                raw, parsed, turn.gold, catalog=catalog, bleu_threshold=bleu_threshold
            )
            scored.append((scores, record.split))
            dump.append(
                ScoredTurn(
                    record_id=record.id,
                    turn_index=turn_index,
                    split=record.split,
                    prompt_sha=prompt_sha256(prompt),
                    raw=raw,
                    parse_error=parse_error,
                    scores=scores,
                )
            )
            history.append(("user", turn.instruction))
            history.append(("assistant", render_gold(turn.gold)))
    report = aggregate(scored)
    return BenchmarkRun(report=report, scored=tuple(dump), bleu_threshold=bleu_threshold)


def write_report(run: BenchmarkRun, path: str | Path) -> None:
    payload = {
        "metrics": run.report.as_dict(),
        "config": {"bleu": BLEU_CONFIG, "bleu_threshold": run.bleu_threshold},
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def write_dump(run: BenchmarkRun, path: str | Path) -> None:
    Path(path).write_text("\n".join(run.dump_lines()) + "\n", encoding="utf-8")

"""Data-construction prompts and parsing of their outputs.

Templates live as versioned fixture files under ``templates/``; rendering
substitutes ``{slot}`` tokens verbatim.  ``parse_generated_records`` turns a
generation reply back into benchmark-record drafts, collecting unparseable
lines in a reject list instead of dropping them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

from .errors import MissingSlot, ToolchatError
from .benchmark import BenchmarkRecord, Turn
from .graphs import parse_tool_graph
from .invocation import ToolInvocation, parse_action_input

TEMPLATE_IDS = (
    "toolcard_from_paper",
    "instructions_from_caption",
    "hoi_integration",
    "shape_integration",
    "tool_graph_construction",
    "multiturn_merge",
)

_SLOT = re.compile(r"\{([a-z_]+)\}")
_LIST_PREFIX = re.compile(r"^\s*\d+[.)]\s*")

MULTITURN_CONNECTIVES = ("Then, ", "Also, ", "Next, ", "After that, ")


@dataclass(frozen=True)
class GenerationPromptSpec:
    template_id: str
    slots: dict[str, str]


def load_template(template_id: str) -> str:
    if template_id not in TEMPLATE_IDS:
        raise ValueError(f"unknown template id {template_id!r}; known: {TEMPLATE_IDS}")
    return (
        resources.files("toolchat")
        .joinpath(f"templates/{template_id}.txt")
        .read_text("utf-8")
    )


def render_generation_prompt(spec: GenerationPromptSpec) -> str:
    """Substitute every slot; an unfilled slot raises MissingSlot with its name."""
    template = load_template(spec.template_id)

    def repl(m: re.Match) -> str:
        name = m.group(1)
        if name not in spec.slots:
            raise MissingSlot(name)
        return spec.slots[name]

    return _SLOT.sub(repl, template)


@dataclass(frozen=True)
class RejectedLine:
    line: str
    reason: str


def parse_generated_records(
    text: str, id_prefix: str = "gen", split: str = "seen", images: tuple[str, ...] = ()
) -> tuple[list[BenchmarkRecord], list[RejectedLine]]:
    """Line-oriented parse of generated instructions.

    Accepts both the single-call form ``content, [name, args]`` and the graph
    form ``content, [[n1, a1], [n2, a2]]``.  Never raises on malformed lines;
    drafts and rejects partition the non-empty input lines.
    """
    drafts: list[BenchmarkRecord] = []
    rejects: list[RejectedLine] = []
    for line in text.splitlines():
        stripped = _LIST_PREFIX.sub("", line.strip())
        if not stripped:
            continue
        cut = stripped.find(", [")
        if cut < 0 or not stripped.endswith("]"):
            rejects.append(RejectedLine(line=line, reason="no bracketed gold"))
            continue
        content = stripped[:cut].strip()
        bracket = stripped[cut + 2 :].strip()
        if not content:
            rejects.append(RejectedLine(line=line, reason="empty instruction content"))
            continue
        try:
            if bracket.startswith("[["):
                gold = parse_tool_graph(bracket)
            else:
                inner = bracket[1:-1]
                name, _, args_text = inner.partition(",")
                name = name.strip()
                if not name:
                    raise ToolchatError("empty tool name")
                args, raw = parse_action_input(args_text)
                gold = ToolInvocation(use_tool=True, action=name, args=args, raw_input=raw)
        except (ToolchatError, ValueError) as e:
            rejects.append(RejectedLine(line=line, reason=str(e)))
            continue
        drafts.append(
            BenchmarkRecord(
                id=f"{id_prefix}-{len(drafts)}",
                instruction=content,
                images=images,
                split=split,
                gold=gold,
            )
        )
    return drafts, rejects


def _render_records_slot(records: list[BenchmarkRecord]) -> str:
    return "\n".join(f"{i + 1}. {r.instruction}" for i, r in enumerate(records))


def _offline_merge(records: list[BenchmarkRecord], fallback: bool) -> BenchmarkRecord:
    turns = []
    for i, record in enumerate(records):
        if i == 0:
            instruction = record.instruction
        else:
            connective = MULTITURN_CONNECTIVES[(i - 1) % len(MULTITURN_CONNECTIVES)]
            instruction = connective + record.instruction
        turns.append(Turn(instruction=instruction, gold=record.gold))
    first = records[0]
    return BenchmarkRecord(
        id="+".join(r.id for r in records),
        instruction=turns[0].instruction,
        caption=first.caption,
        images=first.images,
        split=first.split,
        turns=tuple(turns),
        merge_fallback=fallback,
    )


def merge_multiturn(
    records: list[BenchmarkRecord], llm_backend=None
) -> BenchmarkRecord:
    """Merge single-turn records over one image context into a multi-turn record.

    Gold invocations are preserved per turn unchanged.  With a backend, later
    instructions are rewritten with anaphora; offline (or on backend failure,
    which sets ``merge_fallback``) instructions are joined with fixed
    connectives.
    """
    if len(records) < 2:
        raise ValueError("need at least 2 records to merge")
    first = records[0]
    for r in records[1:]:
        if r.images != first.images:
            raise ValueError("records must share the same image context")
        if r.turns:
            raise ValueError("only single-turn records can be merged")
    if llm_backend is None:
        return _offline_merge(records, fallback=False)
    prompt = render_generation_prompt(
        GenerationPromptSpec(
            template_id="multiturn_merge",
            slots={"records": _render_records_slot(records)},
        )
    )
    try:
        reply = llm_backend.complete(prompt)
    except ToolchatError:
        return _offline_merge(records, fallback=True)
    rewritten = [
        _LIST_PREFIX.sub("", line.strip())
        for line in reply.splitlines()
        if line.strip()
    ]
    if len(rewritten) != len(records):
        return _offline_merge(records, fallback=True)
    turns = tuple(
        Turn(instruction=instruction, gold=record.gold)
        for instruction, record in zip(rewritten, records)
    )
    return BenchmarkRecord(
        id="+".join(r.id for r in records),
        instruction=turns[0].instruction,
        caption=first.caption,
        images=first.images,
        split=first.split,
        turns=turns,
    )

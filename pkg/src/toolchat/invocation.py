"""Single tool-call grammar: the Thought / Action / Action Input emission.

The planner answers either in this line-oriented form (one tool call or a
direct answer) or in the bracketed step-list form handled by
:mod:`toolchat.graphs`.  The grammar here is::

    Thought: Do I need to use a tool? Yes
    Action: <tool name>
    Action Input: <value, or name=value pairs separated by ';'>

or, when no tool is needed::

    Thought: Do I need to use a tool? No
    <answer text>

Parsing is total over arbitrary text: anything that does not fit raises
MalformedEmission (never an unhandled exception), keeping the raw text for
metric scoring.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import MalformedEmission

THOUGHT_PREFIX = "Thought:"
ACTION_PREFIX = "Action:"
INPUT_PREFIX = "Action Input:"
THOUGHT_YES = "Thought: Do I need to use a tool? Yes"
THOUGHT_NO = "Thought: Do I need to use a tool? No"

_YES_NO = re.compile(r"\b(yes|no)\b", re.IGNORECASE)
_KEY_VALUE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=(.*)$", re.DOTALL)


@dataclass(frozen=True)
class ToolInvocation:
    """One parsed planner emission for a single tool call.

    ``args`` holds named arguments in emission order; ``raw_input`` holds the
    bare positional form used by single-argument tools.  At most one of the
    two is populated.  ``answer`` carries the direct reply when no tool is
    used.
    """

    use_tool: bool
    action: str | None = None
    args: dict[str, str] = field(default_factory=dict)
    raw_input: str | None = None
    answer: str | None = None

    def __post_init__(self):
        if self.use_tool and not self.action:
            raise ValueError("use_tool=True requires an action name")
        if not self.use_tool and self.action is not None:
            raise ValueError("use_tool=False forbids an action name")

    def input_text(self) -> str:
        """The Action Input field as emitted."""
        if self.raw_input is not None:
            return self.raw_input
        return "; ".join(f"{k}={v}" for k, v in self.args.items())


def render_invocation(inv: ToolInvocation) -> str:
    """Render an invocation back to emission text (inverse of parse)."""
    if not inv.use_tool:
        if inv.answer:
            return f"{THOUGHT_NO}\n{inv.answer}"
        return THOUGHT_NO
    return f"{THOUGHT_YES}\nAction: {inv.action}\nAction Input: {inv.input_text()}"


def parse_action_input(text: str) -> tuple[dict[str, str], str | None]:
    """Split an Action Input value into (named args, raw positional form).

    If every ';'-separated segment looks like ``name=value`` the input is a
    named-argument map; a single plain segment is the raw positional form.
    Mixing the two styles is unparseable.
    """
    stripped = text.strip()
    if not stripped:
        return {}, None
    segments = [seg.strip() for seg in stripped.split(";")]
    matches = [_KEY_VALUE.match(seg) for seg in segments]
    if all(matches):
        args: dict[str, str] = {}
        for m in matches:
            args[m.group(1)] = m.group(2).strip()
        return args, None
    if any(matches) and len(segments) > 1:
        raise MalformedEmission("mixed named and positional action input", text)
    return {}, stripped


def parse_invocation(text: str) -> ToolInvocation:
    """Parse a planner emission into a ToolInvocation.

    Surrounding whitespace is stripped from every field and unknown trailing
    lines are ignored.  Raises MalformedEmission (carrying the raw text) when
    the Thought line is missing, a Yes thought has no Action, or the Action
    Input cannot be split.
    """
    lines = text.splitlines()
    thought_idx = None
    for i, line in enumerate(lines):
        if line.lstrip().startswith(THOUGHT_PREFIX):
            thought_idx = i
            break
    if thought_idx is None:
        raise MalformedEmission("missing Thought line", text)

    thought_rest = lines[thought_idx].lstrip()[len(THOUGHT_PREFIX):]
    m = _YES_NO.search(thought_rest)
    if m is None:
        raise MalformedEmission("Thought line has no Yes/No decision", text)
    use_tool = m.group(1).lower() == "yes"

    if not use_tool:
        answer = "\n".join(lines[thought_idx + 1:]).strip()
        return ToolInvocation(use_tool=False, answer=answer or None)

    action = None
    input_args: dict[str, str] = {}
    raw_input: str | None = None
    saw_input = False
    for line in lines[thought_idx + 1:]:
        stripped = line.lstrip()
        if action is None and stripped.startswith(ACTION_PREFIX):
            action = stripped[len(ACTION_PREFIX):].strip()
        elif not saw_input and stripped.startswith(INPUT_PREFIX):
            try:
                input_args, raw_input = parse_action_input(stripped[len(INPUT_PREFIX):])
            except MalformedEmission as e:
                raise MalformedEmission(str(e), text) from None
            saw_input = True
    if not action:
        raise MalformedEmission("Yes thought without an Action line", text)
    return ToolInvocation(use_tool=True, action=action, args=input_args, raw_input=raw_input)

"""Tool catalog: cards, question-answer documents, and prompt rendering.

A ToolCard describes one external capability (name, canonical description,
argument schema, category, seen/unseen split flag).  A ToolDocument holds the
question-answer pairs harvested for that tool, which the retrieval index
serves as in-context examples.  The catalog is immutable after load;
``register_tool`` returns a new catalog value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .errors import (
    DuplicateToolName,
    InvalidCard,
    InvariantViolation,
    MissingField,
    ParseError,
    UnknownToolName,
)
from .invocation import ToolInvocation

ARG_KINDS = ("file_ref", "text", "person_description", "numeric")
CATEGORIES = ("perception", "reasoning", "generation")


@dataclass(frozen=True)
class ArgSpec:
    name: str
    kind: str
    required: bool = True
    description: str = ""


@dataclass(frozen=True)
class ToolCard:
    """One registered tool.

    ``description`` follows the canonical pattern
    "<name> is a tool to ... Useful when ... Like: <example query>".
    An empty ``args`` tuple is the explicit zero-argument marker.
    """

    name: str
    description: str
    args: tuple[ArgSpec, ...]
    category: str
    seen: bool = True


@dataclass(frozen=True)
class QAPair:
    query: str
    gold: ToolInvocation


@dataclass(frozen=True)
class ToolDocument:
    tool_name: str
    qa_pairs: tuple[QAPair, ...]


@dataclass(frozen=True)
class ToolCatalog:
    cards: dict[str, ToolCard] = field(default_factory=dict)
    documents: dict[str, ToolDocument] = field(default_factory=dict)

    def card(self, name: str) -> ToolCard:
        try:
            return self.cards[name]
        except KeyError:
            raise UnknownToolName(name) from None

    def names(self) -> list[str]:
        return list(self.cards)

    def __len__(self) -> int:
        return len(self.cards)


def validate_card(card: ToolCard) -> None:
    """Raise InvalidCard (with a field path) on any violated invariant."""
    if not card.name or "\n" in card.name:
        raise InvalidCard(f"{card.name!r}: name must be non-empty without newlines")
    if not card.description:
        raise InvalidCard(f"{card.name}: description must be non-empty")
    if card.category not in CATEGORIES:
        raise InvalidCard(f"{card.name}: category {card.category!r} not in {CATEGORIES}")
    seen_names = set()
    for i, arg in enumerate(card.args):
        if not arg.name:
            raise InvalidCard(f"{card.name}: args[{i}].name is empty")
        if arg.name in seen_names:
            raise InvalidCard(f"{card.name}: args[{i}].name {arg.name!r} duplicated")
        seen_names.add(arg.name)
        if arg.kind not in ARG_KINDS:
            raise InvalidCard(f"{card.name}: args[{i}].kind {arg.kind!r} not in {ARG_KINDS}")


def validate_document(doc: ToolDocument) -> None:
    if not doc.qa_pairs:
        raise InvariantViolation(f"document {doc.tool_name!r} has no qa_pairs")
    for i, pair in enumerate(doc.qa_pairs):
        if not pair.gold.use_tool or pair.gold.action != doc.tool_name:
            raise InvariantViolation(
                f"document {doc.tool_name!r} qa_pairs[{i}] gold action is not {doc.tool_name!r}"
            )


def register_tool(
    catalog: ToolCatalog, card: ToolCard, doc: ToolDocument | None = None
) -> ToolCatalog:
    """Return a new catalog with ``card`` (and optionally ``doc``) added."""
    if card.name in catalog.cards:
        raise DuplicateToolName(card.name)
    validate_card(card)
    cards = dict(catalog.cards)
    cards[card.name] = card
    documents = dict(catalog.documents)
    if doc is not None:
        if doc.tool_name != card.name:
            raise InvariantViolation(
                f"document is for {doc.tool_name!r}, card is {card.name!r}"
            )
        validate_document(doc)
        documents[doc.tool_name] = doc
    return ToolCatalog(cards=cards, documents=documents)


def render_tool_definitions(catalog: ToolCatalog, subset: list[str] | None = None) -> str:
    """Render the numbered tool-definition block injected into planner prompts.

    Entries appear in registration order, one per line:
    ``N. name: description, args: arg (kind), ...``.  A pure function of the
    catalog contents and subset; byte-identical across calls with equal input.
    """
    if subset is not None:
        wanted = set(subset)
        for name in wanted:
            if name not in catalog.cards:
                raise UnknownToolName(name)
        names = [n for n in catalog.cards if n in wanted]
    else:
        names = list(catalog.cards)
    lines = []
    for i, name in enumerate(names, start=1):
        card = catalog.cards[name]
        if card.args:
            args_txt = ", ".join(f"{a.name} ({a.kind})" for a in card.args)
        else:
            args_txt = "none"
        lines.append(f"{i}. {card.name}: {card.description}, args: {args_txt}")
    return "\n".join(lines)


# --- persistence ------------------------------------------------------------
# Single human-editable JSON document:
# {"tools": [{name, description, category, seen, args: [...]}],
#  "documents": [{tool_name, qa_pairs: [{query, invocation: {...}}]}]}


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise MissingField(f"{where}.{key}")
    return obj[key]


def invocation_to_json(inv: ToolInvocation) -> dict:
    out: dict = {"thought": inv.use_tool}
    if inv.use_tool:
        out["action"] = inv.action
        out["action_input"] = inv.raw_input if inv.raw_input is not None else dict(inv.args)
    else:
        out["action"] = None
        out["action_input"] = None
        if inv.answer is not None:
            out["answer"] = inv.answer
    return out


def invocation_from_json(obj: dict, where: str) -> ToolInvocation:
    thought = _require(obj, "thought", where)
    if not thought:
        return ToolInvocation(use_tool=False, answer=obj.get("answer"))
    action = _require(obj, "action", where)
    action_input = obj.get("action_input")
    if action_input is None:
        return ToolInvocation(use_tool=True, action=action)
    if isinstance(action_input, str):
        return ToolInvocation(use_tool=True, action=action, raw_input=action_input)
    if isinstance(action_input, dict):
        return ToolInvocation(
            use_tool=True, action=action, args={str(k): str(v) for k, v in action_input.items()}
        )
    raise InvariantViolation(f"{where}.action_input must be a string or object")


def catalog_to_json(catalog: ToolCatalog) -> dict:
    return {
        "tools": [
            {
                "name": c.name,
                "description": c.description,
                "category": c.category,
                "seen": c.seen,
                "args": [
                    {
                        "name": a.name,
                        "kind": a.kind,
                        "required": a.required,
                        "description": a.description,
                    }
                    for a in c.args
                ],
            }
            for c in catalog.cards.values()
        ],
        "documents": [
            {
                "tool_name": d.tool_name,
                "qa_pairs": [
                    {"query": p.query, "invocation": invocation_to_json(p.gold)}
                    for p in d.qa_pairs
                ],
            }
            for d in catalog.documents.values()
        ],
    }


def catalog_from_json(data: dict) -> ToolCatalog:
    catalog = ToolCatalog()
    for i, tool in enumerate(_require(data, "tools", "catalog")):
        where = f"tools[{i}]"
        args = tuple(
            ArgSpec(
                name=_require(a, "name", f"{where}.args[{j}]"),
                kind=_require(a, "kind", f"{where}.args[{j}]"),
                required=bool(a.get("required", True)),
                description=a.get("description", ""),
            )
            for j, a in enumerate(_require(tool, "args", where))
        )
        card = ToolCard(
            name=_require(tool, "name", where),
            description=_require(tool, "description", where),
            category=_require(tool, "category", where),
            seen=bool(_require(tool, "seen", where)),
            args=args,
        )
        catalog = register_tool(catalog, card)
    for i, doc in enumerate(data.get("documents", [])):
        where = f"documents[{i}]"
        tool_name = _require(doc, "tool_name", where)
        if tool_name not in catalog.cards:
            raise InvariantViolation(f"{where} references unregistered tool {tool_name!r}")
        pairs = tuple(
            QAPair(
                query=_require(p, "query", f"{where}.qa_pairs[{j}]"),
                gold=invocation_from_json(
                    _require(p, "invocation", f"{where}.qa_pairs[{j}]"),
                    f"{where}.qa_pairs[{j}].invocation",
                ),
            )
            for j, p in enumerate(_require(doc, "qa_pairs", where))
        )
        document = ToolDocument(tool_name=tool_name, qa_pairs=pairs)
        validate_document(document)
        documents = dict(catalog.documents)
        documents[tool_name] = document
        catalog = replace(catalog, documents=documents)
    return catalog


def load_catalog(path: str | Path) -> ToolCatalog:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"{path}: {e}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}:{e.lineno}: {e.msg}") from None
    return catalog_from_json(data)


def save_catalog(catalog: ToolCatalog, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(catalog_to_json(catalog), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def default_catalog() -> ToolCatalog:
    """The built-in catalog of 26 human-centric tools with their documents."""
    data = resources.files("toolchat").joinpath("data/default_catalog.json").read_text("utf-8")
    return catalog_from_json(json.loads(data))

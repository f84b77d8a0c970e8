"""Turning raw tool outputs into text the language model can reason over.

Contact vectors become part-level sentences via a vertex-to-part map, body
shape coefficients become anthropometric measurements via an affine model,
and poses become opaque placeholder image ids.  When several tools answer the
same request their renderings are framed as a multiple-choice question; when
a single result looks implausible the model is asked to repair only the
flagged fields.
"""

from __future__ import annotations

import json
import re
import struct
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import (
    InvariantViolation,
    LengthMismatch,
    MissingField,
    ParseError,
    TooFewOptions,
    UnparseableRevision,
    UnparseableSelection,
)

# The fixed 18-part body vocabulary, in canonical order.
PART_VOCABULARY = (
    "right hand",
    "right upper leg",
    "left arm",
    "left leg",
    "left foot",
    "back",
    "left shoulder",
    "right shoulder",
    "right foot",
    "head",
    "right arm",
    "left hand",
    "right leg",
    "left forearm",
    "right forearm",
    "neck",
    "left upper leg",
    "hips",
)

MEASUREMENT_FIELDS = ("height", "weight", "chest", "waist", "hip")
_FIELD_UNITS = {"height": "m", "weight": "kg", "chest": "m", "waist": "m", "hip": "m"}

NO_CONTACT_SENTENCE = "No contact detected."
CONTACT_PREFIX = "Contact detected on: "


@dataclass(frozen=True)
class VertexPartMap:
    """Assignment of each mesh vertex to one named body part."""

    parts: tuple[str, ...]
    assignment: tuple[int, ...]

    @property
    def vertex_count(self) -> int:
        return len(self.assignment)

    def __post_init__(self):
        if not self.parts:
            raise InvariantViolation("vertex-part map has no parts")
        for i, p in enumerate(self.assignment):
            if not 0 <= p < len(self.parts):
                raise InvariantViolation(f"assignment[{i}]={p} out of range")


def default_vertex_part_map(vertex_count: int = 24) -> VertexPartMap:
    """Toy map cycling the part vocabulary over ``vertex_count`` vertices."""
    return VertexPartMap(
        parts=PART_VOCABULARY,
        assignment=tuple(i % len(PART_VOCABULARY) for i in range(vertex_count)),
    )


def load_vertex_part_map(path: str | Path) -> VertexPartMap:
    """Load {"V": int, "parts": [...], "assignment": [...]} and validate it."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"{path}: {e}") from None
    for key in ("V", "parts", "assignment"):
        if key not in data:
            raise MissingField(key)
    if data["V"] != len(data["assignment"]):
        raise InvariantViolation(f"V={data['V']} but assignment has {len(data['assignment'])}")
    return VertexPartMap(
        parts=tuple(str(p) for p in data["parts"]),
        assignment=tuple(int(a) for a in data["assignment"]),
    )


def transform_contact(contact: Sequence[int], vmap: VertexPartMap) -> str:
    """Render a per-vertex contact vector as a part-level sentence.

    Parts are listed in the map's vocabulary order; an all-zero vector yields
    the fixed no-contact sentence.
    """
    if len(contact) != vmap.vertex_count:
        raise LengthMismatch(f"contact length {len(contact)} != map V {vmap.vertex_count}")
    touched = sorted({vmap.assignment[i] for i, bit in enumerate(contact) if bit})
    if not touched:
        return NO_CONTACT_SENTENCE
    return CONTACT_PREFIX + ", ".join(vmap.parts[p] for p in touched)


@dataclass(frozen=True)
class MeasurementSet:
    """Anthropometric measurements; absent fields are None.

    Plausibility bounds: all present values strictly positive, height below
    3.0 m, weight below 400 kg.
    """

    height: float | None = None
    weight: float | None = None
    chest: float | None = None
    waist: float | None = None
    hip: float | None = None

    def get(self, name: str) -> float | None:
        return getattr(self, name)

    def violations(self) -> tuple[str, ...]:
        """Names of fields whose values fall outside the plausibility bounds."""
        bad = []
        for name in MEASUREMENT_FIELDS:
            value = self.get(name)
            if value is None:
                continue
            if value <= 0:
                bad.append(name)
            elif name == "height" and value >= 3.0:
                bad.append(name)
            elif name == "weight" and value >= 400:
                bad.append(name)
        return tuple(bad)


def render_measurement_sentence(ms: MeasurementSet) -> str:
    """Canonical sentence with values rounded to two decimals."""
    parts = [
        f"{name}: {ms.get(name):.2f} {_FIELD_UNITS[name]}"
        for name in MEASUREMENT_FIELDS
        if ms.get(name) is not None
    ]
    return "Estimated measurements — " + ", ".join(parts)


_NUMBER = r"([-+]?\d+(?:\.\d+)?)"


def parse_measurement_sentence(text: str) -> MeasurementSet:
    """Extract measurement values from free text; missing fields stay None."""
    found = {}
    for name in MEASUREMENT_FIELDS:
        m = re.search(
            rf"\b{name}\b(?:\s+circumference)?\s*(?:is|of|:)?\s*(?:about\s+)?{_NUMBER}",
            text,
            re.IGNORECASE,
        )
        if m:
            found[name] = float(m.group(1))
    return MeasurementSet(**found)


@dataclass(frozen=True)
class ShapeMeasurementModel:
    """Affine map from 10 shape coefficients to the 5 measurements.

    ``rows`` is a 5x10 matrix and ``offset`` the 5-vector; a zero shape vector
    maps to the offset exactly.  Coefficients are configuration data loaded
    from a JSON file {"A": [[...]*5], "b": [...]}.
    """

    rows: tuple[tuple[float, ...], ...]
    offset: tuple[float, ...]

    def __post_init__(self):
        if len(self.rows) != len(MEASUREMENT_FIELDS) or len(self.offset) != len(MEASUREMENT_FIELDS):
            raise InvariantViolation("shape model must have 5 rows and a 5-vector offset")
        for i, row in enumerate(self.rows):
            if len(row) != 10:
                raise InvariantViolation(f"A row {i} must have 10 entries")


def load_shape_model(path: str | Path) -> ShapeMeasurementModel:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"{path}: {e}") from None
    for key in ("A", "b"):
        if key not in data:
            raise MissingField(key)
    return ShapeMeasurementModel(
        rows=tuple(tuple(float(x) for x in row) for row in data["A"]),
        offset=tuple(float(x) for x in data["b"]),
    )


def default_shape_model() -> ShapeMeasurementModel:
    """Small built-in model: first coefficients scale overall size."""
    rows = (
        (0.080, -0.010, 0.004, 0.000, 0.002, 0.000, 0.000, 0.000, 0.000, 0.000),
        (9.500, 3.200, 0.600, 0.150, 0.000, 0.050, 0.000, 0.000, 0.000, 0.000),
        (0.055, 0.038, 0.006, 0.002, 0.000, 0.000, 0.001, 0.000, 0.000, 0.000),
        (0.050, 0.052, 0.008, 0.000, 0.001, 0.000, 0.000, 0.001, 0.000, 0.000),
        (0.058, 0.045, 0.005, 0.001, 0.000, 0.000, 0.000, 0.000, 0.001, 0.000),
    )
    offset = (1.70, 70.0, 0.95, 0.80, 0.97)
    return ShapeMeasurementModel(rows=rows, offset=offset)


@dataclass(frozen=True)
class ShapeTransformResult:
    measurements: MeasurementSet
    sentence: str
    flags: tuple[str, ...]  # fields outside plausibility bounds


def transform_shape(beta: Sequence[float], model: ShapeMeasurementModel) -> ShapeTransformResult:
    """Apply the affine model to a 10-vector of shape coefficients.

    Out-of-bounds results are not rejected; they come back flagged so the
    modification scheme can repair them.
    """
    if len(beta) != 10:
        raise ValueError(f"shape vector must have 10 entries, got {len(beta)}")
    values = [
        sum(a * b for a, b in zip(row, beta)) + off
        for row, off in zip(model.rows, model.offset)
    ]
    ms = MeasurementSet(**dict(zip(MEASUREMENT_FIELDS, values)))
    return ShapeTransformResult(
        measurements=ms,
        sentence=render_measurement_sentence(ms),
        flags=ms.violations(),
    )


def render_pose_placeholder(pose: Sequence[float]) -> str:
    """Deterministic opaque image id for a 72-dimensional pose vector.

    True mesh rendering happens elsewhere; this id resolves to a pre-generated
    placeholder in the artifact store.  Equal poses yield equal ids.
    """
    if len(pose) != 72:
        raise ValueError(f"pose vector must have 72 entries, got {len(pose)}")
    digest = hashlib.sha256(struct.pack("<72d", *(float(x) for x in pose))).hexdigest()
    return f"pose-render-{digest[:16]}.png"


# --- multiple-choice discrimination ----------------------------------------

@dataclass(frozen=True)
class ChoiceOption:
    label: str
    rendering: str
    source_tool: str


@dataclass(frozen=True)
class ChoiceSet:
    question: str
    options: tuple[ChoiceOption, ...]

    def option_for(self, label: str) -> ChoiceOption:
        for opt in self.options:
            if opt.label == label:
                return opt
        raise KeyError(label)


def format_choices(
    query: str, transformed: Sequence[tuple[str, str]], reveal_sources: bool = False
) -> tuple[ChoiceSet, str]:
    """Frame tool results as a lettered multiple-choice question.

    ``transformed`` is a list of (source_tool, rendering); options keep input
    order and are labeled A, B, ...  Tool identities are hidden from the
    prompt unless ``reveal_sources`` is set.
    """
    if len(transformed) < 2:
        raise TooFewOptions(f"need at least 2 options, got {len(transformed)}")
    if len(transformed) > 26:
        raise ValueError("more than 26 options cannot be labeled")
    options = tuple(
        ChoiceOption(label=chr(ord("A") + i), rendering=rendering, source_tool=source)
        for i, (source, rendering) in enumerate(transformed)
    )
    lines = [query, "Which option best answers the request?"]
    for opt in options:
        if reveal_sources:
            lines.append(f"{opt.label}. [{opt.source_tool}] {opt.rendering}")
        else:
            lines.append(f"{opt.label}. {opt.rendering}")
    return ChoiceSet(question=query, options=options), "\n".join(lines)


_LABEL_TOKEN = re.compile(r"\b([A-Za-z])\b")


def discriminate_select(llm_backend, choices: ChoiceSet, prompt: str) -> tuple[ChoiceOption, str]:
    """Ask the backend to pick an option; returns (option, raw reply).

    The reply is scanned for the first standalone letter within the label
    range, case-insensitively.  No such letter raises UnparseableSelection;
    the caller falls back to option A and records the fallback.
    """
    reply = llm_backend.complete(prompt)
    last_label = choices.options[-1].label
    for m in _LABEL_TOKEN.finditer(reply):
        letter = m.group(1).upper()
        if "A" <= letter <= last_label:
            return choices.option_for(letter), reply
    raise UnparseableSelection(reply)


@dataclass(frozen=True)
class ModificationResult:
    measurements: MeasurementSet
    sentence: str
    revised_fields: tuple[str, ...]
    rejected_fields: tuple[str, ...]  # unflagged fields the reply tried to change
    backend_called: bool


def discriminate_modify(
    llm_backend, query: str, result: ShapeTransformResult
) -> ModificationResult:
    """Repair flagged measurement fields while preserving the sound ones.

    Without flags the original result is returned untouched and the backend is
    never called.  With flags, the reply is re-parsed into measurements; only
    flagged fields may change.  Any drift in an unflagged field is rejected and
    the original value restored (recorded in ``rejected_fields``).  A reply
    with no value for any flagged field raises UnparseableRevision.
    """
    if not result.flags:
        return ModificationResult(
            measurements=result.measurements,
            sentence=result.sentence,
            revised_fields=(),
            rejected_fields=(),
            backend_called=False,
        )
    prompt = (
        f"{query}\n"
        f"A tool estimated: {result.sentence}\n"
        f"The following values look implausible: {', '.join(result.flags)}.\n"
        "Provide corrected measurements in the same format, changing only the "
        "implausible values."
    )
    reply = llm_backend.complete(prompt)
    parsed = parse_measurement_sentence(reply)
    revised = {}
    revised_fields = []
    rejected_fields = []
    for name in MEASUREMENT_FIELDS:
        original = result.measurements.get(name)
        proposed = parsed.get(name)
        if name in result.flags:
            if proposed is not None:
                revised[name] = proposed
                revised_fields.append(name)
            else:
                revised[name] = original
        else:
            # A reply echoing the two-decimal rendering is not drift; a value
            # that rounds differently (or appears from nowhere) is.
            if proposed is not None and (
                original is None or f"{proposed:.2f}" != f"{original:.2f}"
            ):
                rejected_fields.append(name)
            revised[name] = original
    if not revised_fields:
        raise UnparseableRevision(reply)
    ms = MeasurementSet(**revised)
    return ModificationResult(
        measurements=ms,
        sentence=render_measurement_sentence(ms),
        revised_fields=tuple(revised_fields),
        rejected_fields=tuple(rejected_fields),
        backend_called=True,
    )


def synthesize_response(llm_backend, query: str, renderings: Sequence[str]) -> str:
    """Final response generation; tool renderings ride along as a clue."""
    if renderings:
        prompt = f"{query}\nClue: " + " ".join(renderings)
    else:
        prompt = query
    return llm_backend.complete(prompt)

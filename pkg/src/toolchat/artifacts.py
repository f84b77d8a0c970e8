"""Tool output values: a tagged union plus the wire codec and file store.

Pose, shape, and contact vectors must flow between steps whole; inlining them
into prompt text would be silently lossy, so ``render_inline`` refuses them.
Image and motion values are opaque ids resolvable through an ArtifactStore
directory.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .errors import ArtifactRenderError, ToolProtocolError
from .integration import MeasurementSet, MEASUREMENT_FIELDS, render_measurement_sentence

ARTIFACT_KINDS = (
    "text",
    "image_ref",
    "pose_params",
    "shape_params",
    "contact_vector",
    "measurement_set",
    "motion_ref",
)

POSE_DIM = 72
SHAPE_DIM = 10


@dataclass(frozen=True)
class ArtifactValue:
    kind: str
    value: Any
    source_tool: str = ""

    def __post_init__(self):
        if self.kind not in ARTIFACT_KINDS:
            raise ValueError(f"unknown artifact kind {self.kind!r}")
        if self.kind in ("text", "image_ref", "motion_ref") and not isinstance(self.value, str):
            raise ValueError(f"{self.kind} artifact value must be a string")
        if self.kind == "pose_params":
            vec = tuple(float(x) for x in self.value)
            if len(vec) != POSE_DIM or not all(math.isfinite(x) for x in vec):
                raise ValueError(f"pose_params must be {POSE_DIM} finite values")
            object.__setattr__(self, "value", vec)
        if self.kind == "shape_params":
            vec = tuple(float(x) for x in self.value)
            if len(vec) != SHAPE_DIM or not all(math.isfinite(x) for x in vec):
                raise ValueError(f"shape_params must be {SHAPE_DIM} finite values")
            object.__setattr__(self, "value", vec)
        if self.kind == "contact_vector":
            bits = tuple(int(bool(x)) for x in self.value)
            if not bits:
                raise ValueError("contact_vector must be non-empty")
            object.__setattr__(self, "value", bits)
        if self.kind == "measurement_set" and not isinstance(self.value, MeasurementSet):
            raise ValueError("measurement_set artifact value must be a MeasurementSet")


def text_artifact(value: str, source_tool: str = "") -> ArtifactValue:
    return ArtifactValue(kind="text", value=value, source_tool=source_tool)


def image_artifact(ref: str, source_tool: str = "") -> ArtifactValue:
    return ArtifactValue(kind="image_ref", value=ref, source_tool=source_tool)


def render_inline(artifact: ArtifactValue) -> str:
    """Textual rendering for placeholder substitution inside literal args.

    Vectors refuse to inline: they must be passed whole between steps.
    """
    if artifact.kind == "text":
        return artifact.value
    if artifact.kind in ("image_ref", "motion_ref"):
        return artifact.value
    if artifact.kind == "measurement_set":
        return render_measurement_sentence(artifact.value)
    raise ArtifactRenderError(
        f"{artifact.kind} cannot be inlined into text; pass it as a whole-step input"
    )


def to_wire(artifact: ArtifactValue) -> dict:
    """Encode for the remote-tool protocol: {"kind": ..., "value": ...}."""
    if artifact.kind == "measurement_set":
        value = {
            name: artifact.value.get(name)
            for name in MEASUREMENT_FIELDS
            if artifact.value.get(name) is not None
        }
    elif artifact.kind in ("pose_params", "shape_params", "contact_vector"):
        value = list(artifact.value)
    else:
        value = artifact.value
    return {"kind": artifact.kind, "value": value}


def from_wire(payload: Any, source_tool: str = "") -> ArtifactValue:
    """Decode a remote-tool response; malformed payloads raise ToolProtocolError."""
    if not isinstance(payload, dict) or "kind" not in payload or "value" not in payload:
        raise ToolProtocolError(f"artifact payload must carry kind and value: {payload!r}")
    kind = payload["kind"]
    value = payload["value"]
    if kind not in ARTIFACT_KINDS:
        raise ToolProtocolError(f"unknown artifact kind {kind!r}")
    try:
        if kind == "measurement_set":
            value = MeasurementSet(**{k: float(v) for k, v in value.items()})
        return ArtifactValue(kind=kind, value=value, source_tool=source_tool)
    except (TypeError, ValueError) as e:
        raise ToolProtocolError(f"bad {kind} payload: {e}") from None


# A valid single-pixel PNG used for placeholder image ids that were never
# materialized (for example pose renderings).
_PLACEHOLDER_PNG = bytes.fromhex(
    "89504e470d0a1a0a0000000d49484452000000010000000108060000001f15c489"
    "0000000d4944415478da63fcffff3f030005fe02fea7568a400000000049454e44ae426082"
)


class ArtifactStore:
    """Content-addressed file store for uploaded images and tool outputs."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def put(self, data: bytes, suffix: str = ".png") -> str:
        digest = hashlib.sha256(data).hexdigest()[:16]
        ref = f"img-{digest}{suffix}"
        path = self.root / ref
        if not path.exists():
            path.write_bytes(data)
        return ref

    def resolve(self, ref: str) -> Path:
        """Path for an id; unknown generated ids resolve to a placeholder image."""
        path = self.root / ref
        if path.exists():
            return path
        placeholder = self.root / "placeholder.png"
        if not placeholder.exists():
            placeholder.write_bytes(_PLACEHOLDER_PNG)
        return placeholder

    def exists(self, ref: str) -> bool:
        return (self.root / ref).exists()

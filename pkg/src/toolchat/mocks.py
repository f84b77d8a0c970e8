"""Deterministic stand-ins for the real vision tools.

Each adapter is a pure function of (arguments, seed): vector outputs come
from an RNG seeded by hashing the tool name and canonicalized arguments,
captions are templated over the input reference, and generators emit opaque
ids derived by hashing their inputs.  A configurable failure pattern lets
tests exercise the failure paths.
"""

from __future__ import annotations

import hashlib
import json
from typing import Mapping

import numpy as np

from .artifacts import ArtifactValue, to_wire
from .errors import ScriptedFailure
from .registry import ToolCatalog, default_catalog

POSE_TOOLS = {
    "Body Pose Estimation",
    "Selective Person Pose Detection",
    "Hand Pose Estimation",
    "Targeted Hand Pose Estimation",
    "Text-to-Pose Generation",
    "Speculative Pose Generation",
    "Text-based Pose Editing",
}
SHAPE_TOOLS = {"Body Shape Measurement", "Specific Person Shape Measurement"}
CONTACT_TOOLS = {"HOI Detection", "Selective Person Contact Estimation"}
IMAGE_TOOLS = {
    "Human Segmentation",
    "Described Person Segmentation",
    "Face Reconstruction",
    "Described Person Face Reconstruction",
    "Text-to-Image Generation",
    "Remove Someone From The Photo",
    "Replace Someone From The Photo",
    "Instruct Image Using Text",
}
MOTION_TOOLS = {
    "Motion Capture",
    "Text-to-Motion Generation",
    "Text-to-Video Generation",
    "Image-to-Video Generation",
}
TEXT_TOOLS = {"Image Caption", "Visual Question Answering", "Pose Description"}


def _arg_text(value: ArtifactValue | str) -> str:
    if isinstance(value, ArtifactValue):
        return json.dumps(to_wire(value), sort_keys=True)
    return str(value)


def _canonical(tool: str, args: Mapping[str, ArtifactValue | str], seed: int) -> bytes:
    payload = {name: _arg_text(value) for name, value in args.items()}
    return f"{seed}:{tool}:{json.dumps(payload, sort_keys=True)}".encode("utf-8")


def _digest(tool: str, args: Mapping, seed: int) -> str:
    return hashlib.sha256(_canonical(tool, args, seed)).hexdigest()


def _rng(tool: str, args: Mapping, seed: int) -> np.random.Generator:
    material = hashlib.sha256(_canonical(tool, args, seed)).digest()
    return np.random.default_rng(int.from_bytes(material[:8], "big"))


def _first_ref(args: Mapping[str, ArtifactValue | str]) -> str:
    for value in args.values():
        if isinstance(value, ArtifactValue) and value.kind in ("image_ref", "motion_ref"):
            return value.value
        if isinstance(value, str):
            return value
    return "input"


class MockAdapter:
    """One deterministic adapter; behavior chosen by tool family."""

    def __init__(self, tool_name: str, seed: int, contact_len: int, failure_pattern: str | None):
        self.tool_name = tool_name
        self.seed = seed
        self.contact_len = contact_len
        self.failure_pattern = failure_pattern

    def invoke(self, args: Mapping[str, ArtifactValue | str]) -> ArtifactValue:
        if self.failure_pattern:
            for value in args.values():
                if self.failure_pattern in _arg_text(value):
                    raise ScriptedFailure(
                        f"{self.tool_name}: argument matched {self.failure_pattern!r}"
                    )
        tool = self.tool_name
        if tool in POSE_TOOLS:
            rng = _rng(tool, args, self.seed)
            pose = rng.uniform(-1.0, 1.0, 72)
            return ArtifactValue(kind="pose_params", value=tuple(pose), source_tool=tool)
        if tool in SHAPE_TOOLS:
            rng = _rng(tool, args, self.seed)
            beta = rng.uniform(-2.0, 2.0, 10)
            return ArtifactValue(kind="shape_params", value=tuple(beta), source_tool=tool)
        if tool in CONTACT_TOOLS:
            rng = _rng(tool, args, self.seed)
            bits = (rng.uniform(0.0, 1.0, self.contact_len) < 0.25).astype(int)
            return ArtifactValue(kind="contact_vector", value=tuple(bits), source_tool=tool)
        if tool in IMAGE_TOOLS:
            ref = f"img-{_digest(tool, args, self.seed)[:16]}.png"
            return ArtifactValue(kind="image_ref", value=ref, source_tool=tool)
        if tool in MOTION_TOOLS:
            ref = f"motion-{_digest(tool, args, self.seed)[:16]}"
            return ArtifactValue(kind="motion_ref", value=ref, source_tool=tool)
        if tool == "Image Caption":
            return ArtifactValue(
                kind="text",
                value=f"A photo ({_first_ref(args)}) of a person in a scene.",
                source_tool=tool,
            )
        if tool == "Visual Question Answering":
            question = ""
            for name in ("question", "arg1"):
                if name in args:
                    question = _arg_text(args[name])
                    break
            return ArtifactValue(
                kind="text",
                value=f"Looking at {_first_ref(args)}: the answer to '{question}' is yes.",
                source_tool=tool,
            )
        if tool == "Pose Description":
            return ArtifactValue(
                kind="text",
                value=f"The person in {_first_ref(args)} stands upright with relaxed arms.",
                source_tool=tool,
            )
        # Unknown tools still answer deterministically so ad-hoc cards work.
        return ArtifactValue(
            kind="text",
            value=f"{tool} output for {_first_ref(args)}",
            source_tool=tool,
        )


def build_mock_adapters(
    catalog: ToolCatalog | None = None,
    seed: int = 0,
    contact_len: int = 24,
    failure_pattern: str | None = None,
) -> dict[str, MockAdapter]:
    """One mock adapter per catalog tool (defaults to the built-in catalog)."""
    catalog = catalog or default_catalog()
    return {
        name: MockAdapter(name, seed=seed, contact_len=contact_len, failure_pattern=failure_pattern)
        for name in catalog.names()
    }

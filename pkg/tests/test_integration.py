import json
import random

import numpy as np
import pytest

from toolchat.errors import (
    InvariantViolation,
    LengthMismatch,
    MissingField,
    TooFewOptions,
    UnparseableRevision,
    UnparseableSelection,
)
from toolchat.integration import (
    PART_VOCABULARY,
    MeasurementSet,
    ShapeMeasurementModel,
    VertexPartMap,
    default_shape_model,
    default_vertex_part_map,
    discriminate_modify,
    discriminate_select,
    format_choices,
    load_shape_model,
    load_vertex_part_map,
    parse_measurement_sentence,
    render_measurement_sentence,
    render_pose_placeholder,
    synthesize_response,
    transform_contact,
    transform_shape,
)

from oracles import contact_parts_oracle


class QueueBackend:
    """Replies from a fixed queue; remembers prompts it saw."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.prompts = []

    def complete(self, prompt, meta=None):
        self.prompts.append(prompt)
        return self.replies.pop(0)


# --- vertex-part map and contact -------------------------------------------

def test_part_vocabulary_is_fixed_18():
    assert len(PART_VOCABULARY) == 18
    assert PART_VOCABULARY[8] == "right foot"
    assert PART_VOCABULARY[11] == "left hand"
    assert PART_VOCABULARY[17] == "hips"


def toy_map():
    # Vertices 0-4 belong to the left hand (index 11), 5-9 to the right foot (8).
    assignment = tuple([11] * 5 + [8] * 5)
    return VertexPartMap(parts=PART_VOCABULARY, assignment=assignment)


def test_contact_toy_map_vocabulary_order():
    contact = [0] * 10
    contact[2] = 1
    contact[7] = 1
    assert transform_contact(contact, toy_map()) == "Contact detected on: right foot, left hand"


def test_contact_empty():
    assert transform_contact([0] * 10, toy_map()) == "No contact detected."


def test_contact_length_mismatch():
    with pytest.raises(LengthMismatch):
        transform_contact([1, 0], toy_map())


def test_contact_full_scale_hips_only(tmp_path):
    # A full-resolution map: hips own vertices 3000..3499, the rest cycle
    # through the other parts.
    assignment = []
    other = [i for i in range(18) if i != 17]
    for v in range(6890):
        if 3000 <= v < 3500:
            assignment.append(17)
        else:
            assignment.append(other[v % len(other)])
    path = tmp_path / "map.json"
    path.write_text(json.dumps({"V": 6890, "parts": list(PART_VOCABULARY), "assignment": assignment}))
    vmap = load_vertex_part_map(path)
    contact = [0] * 6890
    for v in range(3100, 3200):
        contact[v] = 1
    assert transform_contact(contact, vmap) == "Contact detected on: hips"
    # Brute-force scan over the assignment file agrees.
    assert contact_parts_oracle(contact, vmap.parts, vmap.assignment) == ["hips"]


def test_contact_equals_brute_force_on_random_maps():
    rng = random.Random(42)
    for _ in range(60):
        v_count = rng.randint(1, 200)
        assignment = tuple(rng.randrange(18) for _ in range(v_count))
        vmap = VertexPartMap(parts=PART_VOCABULARY, assignment=assignment)
        contact = [rng.randint(0, 1) for _ in range(v_count)]
        rendered = transform_contact(contact, vmap)
        expected_parts = contact_parts_oracle(contact, vmap.parts, vmap.assignment)
        if expected_parts:
            assert rendered == "Contact detected on: " + ", ".join(expected_parts)
        else:
            assert rendered == "No contact detected."


def test_vertex_map_validation(tmp_path):
    with pytest.raises(InvariantViolation):
        VertexPartMap(parts=("a",), assignment=(0, 1))
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"V": 3, "parts": ["a"], "assignment": [0, 0]}))
    with pytest.raises(InvariantViolation):
        load_vertex_part_map(path)
    path.write_text(json.dumps({"parts": ["a"], "assignment": [0]}))
    with pytest.raises(MissingField):
        load_vertex_part_map(path)


def test_default_vertex_map_cycles_vocabulary():
    vmap = default_vertex_part_map()
    assert vmap.vertex_count == 24
    assert vmap.assignment[:18] == tuple(range(18))
    assert vmap.assignment[18] == 0


# --- shape model -------------------------------------------------------------

def test_shape_zero_beta_returns_offset_exactly():
    model = default_shape_model()
    result = transform_shape([0.0] * 10, model)
    values = tuple(result.measurements.get(n) for n in ("height", "weight", "chest", "waist", "hip"))
    assert values == model.offset
    assert result.flags == ()


def test_shape_zero_matrix_returns_offset_for_any_beta():
    model = ShapeMeasurementModel(rows=tuple((0.0,) * 10 for _ in range(5)), offset=(1.7, 70.0, 0.9, 0.8, 0.95))
    result = transform_shape([3.0, -2.0, 1.0, 0.5, 0.0, 0.0, 1.0, 2.0, -1.0, 0.25], model)
    assert tuple(result.measurements.get(n) for n in ("height", "weight", "chest", "waist", "hip")) == model.offset


def test_shape_matches_independent_matrix_product():
    rng = np.random.default_rng(9)
    rows = tuple(tuple(float(x) for x in rng.uniform(-0.2, 0.2, 10)) for _ in range(5))
    offset = (1.7, 70.0, 0.95, 0.8, 0.97)
    model = ShapeMeasurementModel(rows=rows, offset=offset)
    beta = [float(x) for x in rng.uniform(-2, 2, 10)]
    expected = np.array(rows) @ np.array(beta) + np.array(offset)
    result = transform_shape(beta, model)
    got = [result.measurements.get(n) for n in ("height", "weight", "chest", "waist", "hip")]
    assert got == pytest.approx(list(expected), abs=1e-12)


def test_shape_linearity():
    model = default_shape_model()
    rng = np.random.default_rng(4)
    offset = np.array(model.offset)
    for _ in range(50):
        b1 = rng.uniform(-2, 2, 10)
        b2 = rng.uniform(-2, 2, 10)
        f = lambda b: np.array(
            [transform_shape(list(b), model).measurements.get(n) for n in ("height", "weight", "chest", "waist", "hip")]
        )
        lhs = f(b1 + b2) - offset
        rhs = (f(b1) - offset) + (f(b2) - offset)
        assert np.max(np.abs(lhs - rhs)) < 1e-9


def test_shape_flags_out_of_bounds():
    model = ShapeMeasurementModel(
        rows=tuple((0.0,) * 10 for _ in range(5)), offset=(4.2, 70.0, 0.9, 0.8, 0.95)
    )
    result = transform_shape([0.0] * 10, model)
    assert result.flags == ("height",)
    assert "height: 4.20 m" in result.sentence


def test_measurement_sentence_format():
    ms = MeasurementSet(height=1.748, weight=70.0, chest=0.951, waist=0.8, hip=0.97)
    assert (
        render_measurement_sentence(ms)
        == "Estimated measurements — height: 1.75 m, weight: 70.00 kg, chest: 0.95 m, waist: 0.80 m, hip: 0.97 m"
    )


def test_parse_measurement_sentence_round_trip():
    ms = MeasurementSet(height=1.85, weight=72.5, chest=0.95, waist=0.8, hip=0.97)
    parsed = parse_measurement_sentence(render_measurement_sentence(ms))
    assert parsed == ms


def test_shape_model_file_round_trip(tmp_path):
    model = default_shape_model()
    path = tmp_path / "model.json"
    path.write_text(json.dumps({"A": [list(r) for r in model.rows], "b": list(model.offset)}))
    assert load_shape_model(path) == model
    path.write_text(json.dumps({"A": [[0] * 9] * 5, "b": [0] * 5}))
    with pytest.raises(InvariantViolation):
        load_shape_model(path)


# --- pose placeholder ---------------------------------------------------------

def test_pose_placeholder_deterministic():
    pose = [0.25] * 72
    assert render_pose_placeholder(pose) == render_pose_placeholder(list(pose))


def test_pose_placeholder_sensitive_to_components():
    pose = [0.25] * 72
    other = list(pose)
    other[20] += 1e-9
    assert render_pose_placeholder(pose) != render_pose_placeholder(other)


def test_pose_placeholder_zero_pose_frozen():
    assert render_pose_placeholder([0.0] * 72) == "pose-render-1a0295f4bf5986c5.png"


def test_pose_placeholder_requires_72():
    with pytest.raises(ValueError):
        render_pose_placeholder([0.0] * 10)


# --- choices and discrimination ------------------------------------------------

def test_format_choices_labels_in_order():
    choices, prompt = format_choices("which pose?", [("T1", "r1"), ("T2", "r2"), ("T3", "r3"), ("T4", "r4")])
    assert [o.label for o in choices.options] == ["A", "B", "C", "D"]
    assert prompt.splitlines()[0] == "which pose?"
    assert prompt.splitlines()[1] == "Which option best answers the request?"
    assert "A. r1" in prompt and "D. r4" in prompt
    assert "T1" not in prompt  # sources hidden by default


def test_format_choices_too_few():
    with pytest.raises(TooFewOptions):
        format_choices("q", [("T1", "only")])


def test_select_parses_label_in_prose():
    choices, prompt = format_choices("q", [("T1", "r1"), ("T2", "r2")])
    backend = QueueBackend(["The answer is B because it looks right."])
    option, raw = discriminate_select(backend, choices, prompt)
    assert option.label == "B" and option.source_tool == "T2"
    assert "because" in raw


def test_select_lowercase_label():
    choices, prompt = format_choices("q", [("T1", "r1"), ("T2", "r2")])
    option, _ = discriminate_select(QueueBackend(["b)"]), choices, prompt)
    assert option.label == "B"


def test_select_skips_out_of_range_letters():
    choices, prompt = format_choices("q", [("T1", "r1"), ("T2", "r2")])
    option, _ = discriminate_select(QueueBackend(["I think B"]), choices, prompt)
    assert option.label == "B"


def test_select_unparseable():
    choices, prompt = format_choices("q", [("T1", "r1"), ("T2", "r2")])
    with pytest.raises(UnparseableSelection):
        discriminate_select(QueueBackend(["no label here"]), choices, prompt)


def test_select_content_determined_under_permutation():
    # A position-blind scripted discriminator that always prefers the pose
    # rendering selects the same source tool regardless of option order.
    def pick(options):
        for opt in options:
            if "pose" in opt.rendering:
                return opt.label
        return "A"

    class ContentBackend:
        def complete(self, prompt, meta=None):
            lines = [l for l in prompt.splitlines() if len(l) > 2 and l[1] == "."]
            for line in lines:
                if "pose" in line:
                    return line[0]
            return "A"

    for order in ([("T1", "a pose image"), ("T2", "a caption")],
                  [("T2", "a caption"), ("T1", "a pose image")]):
        choices, prompt = format_choices("q", order)
        option, _ = discriminate_select(ContentBackend(), choices, prompt)
        assert option.source_tool == "T1"


def test_modify_short_circuits_without_flags():
    model = default_shape_model()
    result = transform_shape([0.0] * 10, model)
    backend = QueueBackend([])  # would raise if called
    out = discriminate_modify(backend, "q", result)
    assert out.backend_called is False
    assert out.measurements == result.measurements
    assert backend.prompts == []


def _flagged_result():
    model = ShapeMeasurementModel(
        rows=tuple((0.0,) * 10 for _ in range(5)), offset=(4.2, 70.0, 0.9, 0.8, 0.95)
    )
    return transform_shape([0.0] * 10, model)


def test_modify_replaces_flagged_preserves_rest():
    result = _flagged_result()
    backend = QueueBackend(
        ["height: 1.85 m, weight: 70.00 kg, chest: 0.90 m, waist: 0.80 m, hip: 0.95 m"]
    )
    out = discriminate_modify(backend, "how tall?", result)
    assert out.measurements.height == 1.85
    assert out.revised_fields == ("height",)
    assert out.rejected_fields == ()
    for name in ("weight", "chest", "waist", "hip"):
        assert out.measurements.get(name) == result.measurements.get(name)
    # Unflagged sentence fragments are byte-identical.
    for fragment in ("weight: 70.00 kg", "chest: 0.90 m", "waist: 0.80 m", "hip: 0.95 m"):
        assert fragment in result.sentence and fragment in out.sentence


def test_modify_rejects_unflagged_drift():
    result = _flagged_result()
    backend = QueueBackend(["height: 1.85 m, weight: 95.00 kg"])
    out = discriminate_modify(backend, "q", result)
    assert out.measurements.height == 1.85
    assert out.measurements.weight == 70.0  # original restored
    assert out.rejected_fields == ("weight",)


def test_modify_unparseable_revision():
    result = _flagged_result()
    with pytest.raises(UnparseableRevision):
        discriminate_modify(QueueBackend(["nothing numeric about the flagged field"]), "q", result)


def test_modify_preservation_fuzz():
    rng = random.Random(17)
    fields = ("height", "weight", "chest", "waist", "hip")
    for _ in range(50):
        # Random plausible measurements with a forced-implausible height.
        values = dict(
            height=rng.uniform(3.0, 6.0),  # flagged
            weight=rng.uniform(40, 120),
            chest=rng.uniform(0.7, 1.3),
            waist=rng.uniform(0.5, 1.2),
            hip=rng.uniform(0.7, 1.3),
        )
        ms = MeasurementSet(**values)
        from toolchat.integration import ShapeTransformResult

        result = ShapeTransformResult(
            measurements=ms, sentence=render_measurement_sentence(ms), flags=ms.violations()
        )
        assert result.flags == ("height",)
        new_height = rng.uniform(1.4, 2.1)
        reply = f"height: {new_height:.2f} m"
        out = discriminate_modify(QueueBackend([reply]), "q", result)
        assert out.measurements.height == pytest.approx(float(f"{new_height:.2f}"))
        for name in fields[1:]:
            assert out.measurements.get(name) == ms.get(name)


# --- synthesis -----------------------------------------------------------------

def test_synthesize_with_clue():
    backend = QueueBackend(["final answer"])
    out = synthesize_response(backend, "how tall is he?", ["Estimated measurements — height: 1.85 m"])
    assert out == "final answer"
    assert backend.prompts[0] == "how tall is he?\nClue: Estimated measurements — height: 1.85 m"


def test_synthesize_zero_results_no_clue():
    backend = QueueBackend(["direct"])
    synthesize_response(backend, "hello there", [])
    assert "Clue:" not in backend.prompts[0]

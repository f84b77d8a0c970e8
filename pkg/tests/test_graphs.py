import random

import pytest
from hypothesis import given, settings, strategies as st

from toolchat.errors import (
    BadPlaceholder,
    CycleDetected,
    ForwardReference,
    MalformedGraph,
    MissingRequiredArg,
    ToolchatError,
    UnknownToolName,
)
from toolchat.graphs import (
    Binding,
    GraphStep,
    ToolGraph,
    classify_shape,
    parse_tool_graph,
    render_tool_graph,
    validate_graph,
)


def test_parse_single_node():
    graph = parse_tool_graph("[[Image Caption, {{image_0}}]]")
    assert len(graph.steps) == 1
    assert graph.steps[0].tool == "Image Caption"
    assert graph.steps[0].binding_values() == [Binding.user_image(0)]
    assert classify_shape(graph).value == "node"


def test_parse_chain_with_edge():
    graph = parse_tool_graph(
        "[[Human Segmentation, {{image_0}}], "
        "[Instruct Image Using Text, {{step_0.output}}; make background snowy]]"
    )
    assert len(graph.steps) == 2
    assert graph.edges() == [(0, 1)]
    assert graph.steps[1].binding_values() == [
        Binding.step_output(0),
        Binding.literal("make background snowy"),
    ]
    assert classify_shape(graph).value == "chain"


def test_forward_reference_rejected():
    with pytest.raises(ForwardReference):
        parse_tool_graph("[[A, {{step_1.output}}], [B, x]]")
    with pytest.raises(ForwardReference):
        parse_tool_graph("[[A, {{step_0.output}}]]")


def test_bad_placeholder_rejected():
    with pytest.raises(BadPlaceholder):
        parse_tool_graph("[[A, {{nonsense}}]]")


def test_unbalanced_brackets_rejected():
    for text in ("[[A, x]", "[[A, x]]]", "[A, x]]", "[", "[]", "[[]]", "not a graph"):
        with pytest.raises(MalformedGraph):
            parse_tool_graph(text)


def test_literal_with_comma_survives():
    graph = parse_tool_graph("[[A, make it snowy, please]]")
    assert graph.steps[0].binding_values() == [Binding.literal("make it snowy, please")]


def test_embedded_placeholder_in_literal():
    graph = parse_tool_graph("[[A, {{image_0}}], [B, crop {{step_0.output}} tightly]]")
    assert graph.edges() == [(0, 1)]
    binding = graph.steps[1].binding_values()[0]
    assert binding.kind == "literal"
    assert binding.step_refs() == [0]


def test_dag_shape():
    graph = parse_tool_graph(
        "[[A, x], [B, y], [C, {{step_0.output}}; {{step_1.output}}]]"
    )
    assert classify_shape(graph).value == "dag"
    assert graph.edges() == [(0, 2), (1, 2)]


def test_disconnected_steps_classify_as_dag():
    graph = parse_tool_graph("[[A, x], [B, y]]")
    assert classify_shape(graph).value == "dag"


def test_validate_graph_against_catalog(small_catalog):
    graph = parse_tool_graph(
        "[[Body Pose Estimation, {{image_0}}], "
        "[Instruct Image Using Text, {{step_0.output}}; warmer colors], "
        "[Image Caption, {{step_1.output}}]]"
    )
    validated = validate_graph(graph, small_catalog)
    assert validated.order == (0, 1, 2)
    assert [n for n, _ in validated.steps[1].bindings] == ["image", "instruction"]


def test_validate_unknown_tool(small_catalog):
    with pytest.raises(UnknownToolName) as err:
        validate_graph(parse_tool_graph("[[Foo, x]]"), small_catalog)
    assert "Foo" in str(err.value)


def test_validate_missing_required_arg(small_catalog):
    with pytest.raises(MissingRequiredArg):
        validate_graph(parse_tool_graph("[[Instruct Image Using Text, {{image_0}}]]"), small_catalog)


def test_validate_detects_cycle_in_hand_built_graph(small_catalog):
    # Parsing forbids forward references, but hand-built graphs can cycle.
    steps = (
        GraphStep(id=0, tool="Body Pose Estimation", bindings=(("image", Binding.step_output(1)),)),
        GraphStep(id=1, tool="Image Caption", bindings=(("image", Binding.step_output(0)),)),
    )
    with pytest.raises(CycleDetected):
        validate_graph(ToolGraph(steps=steps), small_catalog)


def test_validated_topological_order_respects_edges(small_catalog):
    rng = random.Random(11)
    tools = ["Body Pose Estimation", "Image Caption"]
    for _ in range(25):
        n = rng.randint(2, 5)
        steps = []
        for i in range(n):
            bindings = [("image", Binding.literal(f"img{i}.png"))]
            for j in range(i):
                if rng.random() < 0.4:
                    bindings.append((f"dep{j}", Binding.step_output(j)))
            steps.append(GraphStep(id=i, tool=rng.choice(tools), bindings=tuple(bindings)))
        graph = ToolGraph(steps=tuple(steps))
        validated = validate_graph(graph, small_catalog)
        position = {sid: k for k, sid in enumerate(validated.order)}
        for src, dst in graph.edges():
            assert position[src] < position[dst]


def _random_graph(rng: random.Random) -> ToolGraph:
    words = ["crop", "tighter", "snowy", "softer", "brighter", "zoom", "wide"]
    tools = ["Body Pose Estimation", "Image Caption", "Human Segmentation", "HOI Detection"]
    n = rng.randint(1, 5)
    steps = []
    for i in range(n):
        bindings = []
        for a in range(rng.randint(0, 3)):
            roll = rng.random()
            if roll < 0.3 and i > 0:
                bindings.append((f"arg{a}", Binding.step_output(rng.randrange(i))))
            elif roll < 0.5:
                bindings.append((f"arg{a}", Binding.user_image(rng.randrange(3))))
            elif roll < 0.7 and i > 0:
                text = f"{rng.choice(words)} {{{{step_{rng.randrange(i)}.output}}}} {rng.choice(words)}"
                bindings.append((f"arg{a}", Binding.literal(text)))
            else:
                bindings.append(
                    (f"arg{a}", Binding.literal(" ".join(rng.choices(words, k=rng.randint(1, 3)))))
                )
        steps.append(GraphStep(id=i, tool=rng.choice(tools), bindings=tuple(bindings)))
    return ToolGraph(steps=tuple(steps))


def test_render_parse_round_trip_random_graphs():
    rng = random.Random(23)
    for _ in range(200):
        graph = _random_graph(rng)
        text = render_tool_graph(graph)
        reparsed = parse_tool_graph(text)
        assert render_tool_graph(reparsed) == text
        assert [s.tool for s in reparsed.steps] == [s.tool for s in graph.steps]
        assert [
            [b for _, b in s.bindings] for s in reparsed.steps
        ] == [[b for _, b in s.bindings] for s in graph.steps]


def test_render_rejects_unrenderable_literals():
    for bad in ("", " padded ", "a;b", "a[b", "{{step_0.output}}", "weird {{thing}}"):
        graph = ToolGraph(
            steps=(GraphStep(id=0, tool="A", bindings=(("arg0", Binding.literal(bad)),)),)
        )
        with pytest.raises(ValueError):
            render_tool_graph(graph)


@settings(max_examples=300)
@given(st.text(max_size=200))
def test_graph_parser_total(text):
    try:
        parse_tool_graph(text)
    except (MalformedGraph, ForwardReference, BadPlaceholder):
        pass


@settings(max_examples=300)
@given(
    st.text(
        alphabet=st.sampled_from(list("[]{},;_.abcXYZ012 \n")),
        max_size=120,
    )
)
def test_graph_parser_total_bracket_heavy(text):
    try:
        parse_tool_graph(text)
    except (MalformedGraph, ForwardReference, BadPlaceholder):
        pass

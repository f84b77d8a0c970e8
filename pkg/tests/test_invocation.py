import pytest
from hypothesis import given, strategies as st

from toolchat.errors import MalformedEmission
from toolchat.invocation import (
    ToolInvocation,
    parse_action_input,
    parse_invocation,
    render_invocation,
)


def test_parse_single_tool_call():
    inv = parse_invocation(
        "Thought: Do I need to use a tool? Yes\nAction: Body Pose Estimation\nAction Input: example.jpg"
    )
    assert inv.use_tool is True
    assert inv.action == "Body Pose Estimation"
    assert inv.raw_input == "example.jpg"
    assert inv.args == {}


def test_parse_no_tool_keeps_answer():
    inv = parse_invocation("Thought: Do I need to use a tool? No\nThere are two people.")
    assert inv.use_tool is False
    assert inv.action is None
    assert inv.answer == "There are two people."


def test_parse_named_args():
    inv = parse_invocation(
        "Thought: Do I need to use a tool? Yes\n"
        "Action: Instruct Image Using Text\n"
        "Action Input: image=example.jpg; instruction=make it snowy"
    )
    assert inv.args == {"image": "example.jpg", "instruction": "make it snowy"}
    assert inv.raw_input is None


def test_missing_thought_line_is_malformed():
    with pytest.raises(MalformedEmission):
        parse_invocation("Action: X")


def test_yes_without_action_is_malformed():
    with pytest.raises(MalformedEmission):
        parse_invocation("Thought: Do I need to use a tool? Yes\nnothing else")


def test_mixed_action_input_is_malformed():
    with pytest.raises(MalformedEmission) as err:
        parse_invocation(
            "Thought: Do I need to use a tool? Yes\nAction: T\nAction Input: plain; key=value"
        )
    assert err.value.raw  # raw text retained for scoring


def test_trailing_lines_ignored_and_whitespace_stripped():
    inv = parse_invocation(
        "Thought: Do I need to use a tool? Yes\n"
        "Action:   Image Caption  \n"
        "Action Input:  example.jpg \n"
        "Observation: something the model rambled"
    )
    assert inv.action == "Image Caption"
    assert inv.raw_input == "example.jpg"


def test_invocation_invariants():
    with pytest.raises(ValueError):
        ToolInvocation(use_tool=True)
    with pytest.raises(ValueError):
        ToolInvocation(use_tool=False, action="X")


def test_render_parse_round_trip():
    for inv in [
        ToolInvocation(use_tool=True, action="Image Caption", raw_input="example.jpg"),
        ToolInvocation(
            use_tool=True,
            action="Instruct Image Using Text",
            args={"image": "a.png", "instruction": "make it snowy"},
        ),
        ToolInvocation(use_tool=False, answer="No tool needed."),
        ToolInvocation(use_tool=False),
    ]:
        text = render_invocation(inv)
        again = parse_invocation(text)
        assert again == inv
        assert render_invocation(again) == text


def test_parse_action_input_empty():
    assert parse_action_input("   ") == ({}, None)


@given(st.text(max_size=300))
def test_parser_is_total(text):
    try:
        parse_invocation(text)
    except MalformedEmission:
        pass

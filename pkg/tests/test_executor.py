import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netorch import canonical
from netorch.canonical import Matrix
from netorch.errors import EnvelopeParseError, PlanInvalid
from netorch.executor import (
    MASK,
    ToolCall,
    compose_response,
    decode_tool_call,
    encode_tool_call,
    execute_plan,
)
from netorch.planner import Plan, Slot, TaskSpec, plan_mock


def bandwidth_plan(gains=(3.0, 3.0), total=100.0, query="split bandwidth fairly"):
    slots = (Slot("gains", tuple(gains)), Slot("total_bw", total))
    return Plan(query, (TaskSpec(0, "bandwidth_allocation", "proportional_fairness", slots),))


# -------------------------------------------------------------- envelopes


def test_matrix_round_trip():
    call = ToolCall("c1", "maxmin_power_v1", {"signal_gain": Matrix(2, 2, (1.0, 2.0, 3.0, 4.5)), "p_max": 10})
    wire = encode_tool_call(call)
    assert b'{"cols":2,"data":[1.0,2.0,3.0,4.5],"rows":2}' in wire
    assert decode_tool_call(wire) == call
    assert encode_tool_call(call) == wire


def test_missing_tool_field():
    with pytest.raises(EnvelopeParseError) as err:
        decode_tool_call(b'{"arguments":{},"call_id":"x"}')
    assert err.value.path == "tool"
    with pytest.raises(EnvelopeParseError):
        decode_tool_call(b"not json")
    with pytest.raises(EnvelopeParseError):
        decode_tool_call(b'{"call_id":"x","tool":"t","extra":1}')


_RESERVED = {"rows", "cols", "data"}
keys = st.text(min_size=1, max_size=8).filter(lambda k: k not in _RESERVED)
numbers = st.one_of(st.integers(-(2**53), 2**53), st.floats(allow_nan=False, allow_infinity=False))


@st.composite
def matrices(draw):
    r, c = draw(st.integers(1, 4)), draw(st.integers(1, 4))
    data = draw(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=r * c, max_size=r * c))
    return Matrix(r, c, tuple(data))


values = st.recursive(
    st.one_of(numbers, st.text(max_size=10), st.booleans(), st.none(), matrices()),
    lambda inner: st.one_of(st.lists(inner, max_size=4), st.dictionaries(keys, inner, max_size=4)),
    max_leaves=12,
)
tool_calls = st.builds(
    ToolCall,
    call_id=st.text(min_size=1, max_size=16),
    tool=st.text(min_size=1, max_size=16),
    arguments=st.dictionaries(keys, values, max_size=5),
)


@settings(max_examples=1000, deadline=None)
@given(tool_calls)
def test_fuzzed_round_trip(call):
    wire = encode_tool_call(call)
    back = decode_tool_call(wire)
    assert back == call
    assert encode_tool_call(back) == wire
    assert canonical.encode(canonical.loads(wire)) == wire


# -------------------------------------------------------------- execution


def test_equal_gain_bandwidth_trace(registry):
    trace = execute_plan(bandwidth_plan(), registry)
    assert len(trace.calls) == 1
    entry = trace.calls[0]
    assert entry.result.status == "ok"
    assert entry.call.tool == "pf_bandwidth_v1"
    np.testing.assert_allclose(entry.result.output["allocation"], [50.0, 50.0], atol=1e-9)
    assert trace.metrics["tasks"] == 1 and trace.metrics["ok"] == 1
    assert set(entry.result.output) <= set(registry.get("pf_bandwidth_v1").output_schema)


def test_unregistered_task_type(registry):
    plan = Plan("estimate", (TaskSpec(0, "channel_estimation", "none"),))
    with pytest.raises(PlanInvalid):
        execute_plan(plan, registry)


def test_infeasible_power_problem_is_error_result(registry):
    slots = (
        Slot("cross_gain", Matrix(1, 1, (1.0,))),
        Slot("noise", 1.0),
        Slot("p_max", 1.0),
        Slot("signal_gain", Matrix(1, 1, (0.5,))),  # coherent gain below own-cell gain
    )
    plan = Plan("power", (TaskSpec(0, "power_allocation", "max_min_sinr", slots),))
    trace = execute_plan(plan, registry)
    result = trace.calls[0].result
    assert result.status == "error"
    assert result.error_message.startswith("InvalidProblem:")
    summary = compose_response(trace).summary_text
    assert "FAILED: InvalidProblem" in summary
    assert "Tasks: 0/1 ok, errors: 1" in summary


def test_dependency_order_and_unmatched_outputs(registry):
    first = bandwidth_plan().tasks[0]
    second = TaskSpec(1, "baseline", "equal_split", first.slots)
    power = TaskSpec(
        2,
        "power_allocation",
        "max_min_sinr",
        (Slot("cross_gain", Matrix(1, 1, (1.0,))), Slot("noise", 1.0), Slot("p_max", 1.0), Slot("signal_gain", Matrix(1, 1, (2.0,)))),
        (1,),
    )
    trace = execute_plan(Plan("q", (first, second, power)), registry)
    assert [e.call.call_id for e in trace.calls] == ["call-0", "call-1", "call-2"]
    # equal_split outputs do not name any of the power model's slots
    assert trace.calls[1].result.status == "ok"
    assert trace.calls[2].result.status == "error"
    assert "no output of task 1" in trace.calls[2].result.error_message


def test_trace_masking_and_determinism(registry):
    a = execute_plan(bandwidth_plan((1.0, 5.0, 20.0)), registry)
    b = execute_plan(bandwidth_plan((1.0, 5.0, 20.0)), registry)
    assert a.to_json(mask_timing=True) == b.to_json(mask_timing=True)
    assert MASK.encode() in a.to_json(mask_timing=True)
    assert compose_response(a).summary_text == compose_response(b).summary_text


def test_compose_bandwidth_table(registry):
    trace = execute_plan(bandwidth_plan(), registry)
    text = compose_response(trace).summary_text
    assert "pf_bandwidth_v1" in text
    rows = [line for line in text.splitlines() if line.strip() and line.split()[0] in {"0", "1"}]
    assert len(rows) == 2
    assert math.isclose(sum(float(r.split()[1]) for r in rows), 100.0, rel_tol=1e-9)


def test_full_pipeline_power(registry, power_problems):
    P = power_problems[0]
    payload = {
        "signal_gain": Matrix.from_array(P.signal_gain),
        "cross_gain": Matrix.from_array(P.cross_gain),
        "noise": P.noise,
        "p_max": P.p_max,
    }
    plan = plan_mock("maximize the minimum SINR", payload, registry)
    trace = execute_plan(plan, registry)
    out = trace.calls[0].result.output
    sinrs = out["sinrs"].to_array()
    assert (sinrs.max() - sinrs.min()) / sinrs.min() <= 1e-4
    assert "min SINR" in compose_response(trace).summary_text

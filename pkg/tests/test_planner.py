import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netorch.canonical import Matrix
from netorch.errors import UnrecognizedIntent
from netorch.planner import Plan, Slot, TaskSpec, plan_mock, plan_query, validate_plan
from netorch.registry import Registry, default_registry

GAINS = [float(g) for g in np.linspace(0.5, 10.0, 20)]
POWER_PAYLOAD = {
    "signal_gain": Matrix(1, 2, (4.0, 3.0)),
    "cross_gain": Matrix(1, 2, (1.0, 0.5)),
    "noise": 1.0,
    "p_max": 1.0,
}
FULL_PAYLOAD = {"gains": GAINS, "total_bw": 100.0, **POWER_PAYLOAD}


def test_bandwidth_query(registry):
    plan = plan_query(
        "Allocate 100 bandwidth units among 20 users for proportional fairness", {"gains": GAINS}, registry=registry
    )
    assert len(plan.tasks) == 1
    task = plan.tasks[0]
    assert (task.task_type, task.objective) == ("bandwidth_allocation", "proportional_fairness")
    assert task.slot("total_bw") == 100
    assert task.slot("users") == 20
    assert task.slot("gains") == tuple(GAINS)
    assert validate_plan(plan, registry) == []


def test_poem_is_unrecognized(registry):
    with pytest.raises(UnrecognizedIntent):
        plan_query("please write a poem", registry=registry)


def test_maxmin_query(registry):
    plan = plan_query("maximize the minimum SINR", POWER_PAYLOAD, registry=registry)
    assert [(t.task_type, t.objective) for t in plan.tasks] == [("power_allocation", "max_min_sinr")]
    assert validate_plan(plan, registry) == []


@pytest.mark.parametrize(
    "query,expected",
    [
        ("maximize the product of SINRs with power control", ("power_allocation", "max_prod_sinr")),
        ("power allocation with proportional fairness on sinr", ("power_allocation", "max_prod_sinr")),
        ("distribute power uniformly", ("baseline", "uniform_power")),
        ("split bandwidth equally", ("baseline", "equal_split")),
        ("water-filling power allocation", ("baseline", "water_filling")),
        ("allocate bandwidth", ("bandwidth_allocation", "proportional_fairness")),
        ("allocate power", ("power_allocation", "max_min_sinr")),
        ("help the worst user via power", ("power_allocation", "max_min_sinr")),
        ("predict the best beam", ("beam_prediction", "none")),
    ],
)
def test_grammar(query, expected, registry):
    plan = plan_mock(query, {}, registry)
    assert (plan.tasks[0].task_type, plan.tasks[0].objective) == expected


def test_multi_task_split(registry):
    plan = plan_mock("allocate 100 bandwidth units fairly and maximize the minimum sinr", FULL_PAYLOAD, registry)
    assert [t.task_type for t in plan.tasks] == ["bandwidth_allocation", "power_allocation"]
    assert [t.task_id for t in plan.tasks] == [0, 1]
    assert plan.tasks[1].slot("gains") is None  # payload fields follow each model's schema
    assert validate_plan(plan, registry) == []
    # "and" inside a single task does not split
    single = plan_mock("allocate bandwidth fairly and quickly", {"gains": GAINS}, registry)
    assert len(single.tasks) == 1


def test_validate_examples(registry):
    empty = Registry()
    plan = Plan("q", (TaskSpec(0, "channel_estimation", "none"),))
    assert [str(v) for v in validate_plan(plan, empty)] == ["NoModelForTask(0)"]

    dangling = Plan(
        "q",
        (TaskSpec(0, "bandwidth_allocation", "proportional_fairness", (Slot("gains", (1.0,)), Slot("total_bw", 1)), (5,)),),
    )
    assert [str(v) for v in validate_plan(dangling, registry)] == ["DanglingDependency(0→5)"]

    missing = Plan("q", (TaskSpec(0, "bandwidth_allocation", "proportional_fairness", (Slot("total_bw", 1),)),))
    assert [str(v) for v in validate_plan(missing, registry)] == ["MissingSlot(0:gains)"]


def test_plan_json_round_trip(registry):
    plan = plan_mock("maximize the minimum sinr and allocate 100 bandwidth units", FULL_PAYLOAD, registry)
    from netorch.canonical import loads

    back = Plan.from_dict(loads(plan.to_json()))
    assert back == plan
    assert back.to_json() == plan.to_json()


WORDS = [
    "allocate", "bandwidth", "power", "sinr", "maximize", "minimum", "product", "proportional",
    "fairness", "equal", "uniform", "water-filling", "worst", "100", "units", "20", "users", "4",
    "cells", "and", "for", "the", "of", "please", "poem",
]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from(WORDS), min_size=1, max_size=12))
def test_mock_plans_valid_or_unrecognized(words):
    registry = default_registry()
    # with every schema field available in the payload, the only failure mode is an unknown intent
    query = " ".join(words)
    try:
        plan = plan_query(query, FULL_PAYLOAD, registry=registry)
    except UnrecognizedIntent:
        return
    assert validate_plan(plan, registry) == []
    assert plan_query(query, FULL_PAYLOAD, registry=registry).to_json() == plan.to_json()


def test_empty_query_rejected(registry):
    with pytest.raises(ValueError):
        plan_mock("   ", None, registry)
    with pytest.raises(ValueError):
        plan_query("allocate bandwidth", backend="nope", registry=registry)

"""Function calling, task execution and response generation."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from netorch import canonical
from netorch.canonical import Matrix
from netorch.errors import EnvelopeParseError, NetOrchError, PlanInvalid
from netorch.planner import Plan, TaskSpec, validate_plan
from netorch.registry import ModelDescriptor, Registry
from netorch.selector import RankedCandidate, cosine_similarity, rank_models
from netorch.memory import embed_text
from netorch.solvers import (
    BandwidthProblem,
    PowerProblem,
    geometric_mean,
    jain_index,
    rates,
    sinr_all,
    solve_bandwidth_equal,
    solve_bandwidth_pf,
    solve_power_maxmin,
    solve_power_maxprod,
    solve_power_uniform,
    solve_power_waterfilling,
)

MASK = "<masked>"


# ---------------------------------------------------------------- envelopes


@dataclass(frozen=True)
class ToolCall:
    call_id: str
    tool: str
    arguments: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"call_id": self.call_id, "tool": self.tool, "arguments": self.arguments}


@dataclass(frozen=True)
class ToolResult:
    call_id: str
    status: str
    output: dict = field(default_factory=dict)
    error_message: str | None = None

    def to_dict(self) -> dict:
        return {
            "call_id": self.call_id,
            "status": self.status,
            "output": self.output,
            "error_message": self.error_message,
        }


def encode_tool_call(call: ToolCall) -> bytes:
    if not isinstance(call.call_id, str) or not call.call_id:
        raise EnvelopeParseError("call_id", "call_id must be a non-empty string")
    if not isinstance(call.tool, str) or not call.tool:
        raise EnvelopeParseError("tool", "tool must be a non-empty string")
    return canonical.encode(call)


def tool_call_from_obj(obj: Any, path: str = "") -> ToolCall:
    if not isinstance(obj, dict):
        raise EnvelopeParseError(path or "$", "envelope must be an object")
    for key in ("call_id", "tool"):
        if key not in obj:
            raise EnvelopeParseError(path + key, "missing field")
        if not isinstance(obj[key], str) or not obj[key]:
            raise EnvelopeParseError(path + key, "must be a non-empty string")
    args = obj.get("arguments", {})
    if not isinstance(args, dict):
        raise EnvelopeParseError(path + "arguments", "must be an object")
    unknown = set(obj) - {"call_id", "tool", "arguments"}
    if unknown:
        raise EnvelopeParseError(path + sorted(unknown)[0], "unknown field")
    try:
        arguments = canonical.from_plain(args)
    except ValueError as exc:
        raise EnvelopeParseError(path + "arguments", str(exc)) from exc
    return ToolCall(obj["call_id"], obj["tool"], arguments)


def decode_tool_call(data: bytes) -> ToolCall:
    try:
        obj = canonical.loads(data)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise EnvelopeParseError("$", f"not UTF-8 JSON: {exc}") from exc
    return tool_call_from_obj(obj)


# ----------------------------------------------------------------- handlers


def _vector(value) -> np.ndarray:
    if isinstance(value, Matrix):
        return value.to_array().ravel()
    return np.asarray(value, dtype=float).ravel()


def _matrix(value, name: str) -> np.ndarray:
    if isinstance(value, Matrix):
        return value.to_array()
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"argument {name!r} must be a matrix")
    return arr


def _bandwidth_problem(args: dict) -> BandwidthProblem:
    problem = BandwidthProblem(float(args["total_bw"]), _vector(args["gains"]))
    users = args.get("users")
    if users is not None and int(users) != problem.K:
        raise ValueError(f"users={users} but {problem.K} gains supplied")
    return problem


def _bandwidth_output(problem: BandwidthProblem, alloc) -> dict:
    r = rates(problem, alloc.values)
    return {
        "allocation": [float(x) for x in alloc.values],
        "rates": [float(x) for x in r],
        "utility": float(alloc.objective_value),
        "jain": jain_index(alloc.values),
        "diagnostics": alloc.diagnostics,
    }


def _power_problem(args: dict) -> PowerProblem:
    problem = PowerProblem(
        signal_gain=_matrix(args["signal_gain"], "signal_gain"),
        cross_gain=_matrix(args["cross_gain"], "cross_gain"),
        noise=float(args["noise"]),
        p_max=float(args["p_max"]),
    )
    for name, expect in (("cells", problem.L), ("users", problem.K)):
        if args.get(name) is not None and int(args[name]) != expect:
            raise ValueError(f"{name}={args[name]} but gains describe {expect}")
    problem.validate()
    return problem


def _power_output(problem: PowerProblem, alloc) -> dict:
    s = sinr_all(problem, alloc.values)
    positive = bool(np.all(s > 0))
    return {
        "powers": Matrix.from_array(alloc.values),
        "sinrs": Matrix.from_array(s),
        "min_sinr": float(s.min()),
        "geomean_sinr": geometric_mean(s),
        "sum_log_sinr": float(np.sum(np.log(s))) if positive else None,
        "jain": jain_index(s) if np.any(s > 0) else None,
        "diagnostics": alloc.diagnostics,
    }


def _run_pf(args):
    p = _bandwidth_problem(args)
    return _bandwidth_output(p, solve_bandwidth_pf(p, float(args.get("tol", 1e-9))))


def _run_equal(args):
    p = _bandwidth_problem(args)
    p.validate()
    return _bandwidth_output(p, solve_bandwidth_equal(p))


def _run_power(solver: Callable) -> Callable[[dict], dict]:
    def run(args):
        p = _power_problem(args)
        return _power_output(p, solver(p))

    return run


HANDLERS: dict[str, Callable[[dict], dict]] = {
    "proportional_fairness": _run_pf,
    "equal_split": _run_equal,
    "max_min_sinr": _run_power(solve_power_maxmin),
    "max_prod_sinr": _run_power(solve_power_maxprod),
    "uniform_power": _run_power(solve_power_uniform),
    "water_filling": _run_power(solve_power_waterfilling),
}


def dispatch(model: ModelDescriptor, call: ToolCall) -> dict:
    handler = HANDLERS.get(model.objective)
    if handler is None:
        raise NotImplementedError(f"no solver implementation behind model {model.model_id!r}")
    out = handler(call.arguments)
    missing = [k for k in model.output_schema if k not in out]
    if missing:
        raise ValueError(f"solver did not produce output fields {missing}")
    return {k: out[k] for k in model.output_schema}


# -------------------------------------------------------------------- trace


@dataclass
class TraceEntry:
    call: ToolCall
    result: ToolResult
    selected: RankedCandidate
    selector_choice: str
    wall_ms: float

    def to_dict(self, mask_timing: bool = False) -> dict:
        return {
            "call": self.call,
            "result": self.result,
            "selected": self.selected,
            "selector_choice": self.selector_choice,
            "wall_ms": MASK if mask_timing else self.wall_ms,
        }


@dataclass
class ExecutionTrace:
    plan: Plan
    calls: list[TraceEntry] = field(default_factory=list)
    metrics: dict = field(default_factory=dict)

    def to_dict(self, mask_timing: bool = False) -> dict:
        metrics = dict(self.metrics)
        if mask_timing:
            metrics["wall_ms_total"] = MASK
        return {
            "plan": self.plan,
            "calls": [c.to_dict(mask_timing) for c in self.calls],
            "metrics": metrics,
        }

    def to_json(self, mask_timing: bool = False) -> bytes:
        return canonical.encode(self.to_dict(mask_timing))


def _dependency_order(plan: Plan) -> list[TaskSpec]:
    # task ids are validated to be 0..n-1 with backward-only edges; a stable
    # Kahn pass keeps that guarantee explicit
    done: set[int] = set()
    order: list[TaskSpec] = []
    pending = list(plan.tasks)
    while pending:
        for t in pending:
            if all(d in done for d in t.depends_on):
                order.append(t)
                done.add(t.task_id)
                pending.remove(t)
                break
        else:
            raise PlanInvalid(["cyclic dependencies"])
    return order


def _select(task: TaskSpec, plan: Plan, registry: Registry) -> tuple[RankedCandidate, str]:
    ranked = rank_models(registry, task.task_type, task.objective, plan.query_text, top_n=len(registry))
    choice = ranked[0]
    if task.model_id is not None and task.model_id != choice.model_id:
        for cand in ranked:
            if cand.model_id == task.model_id:
                return cand, choice.model_id
        desc = registry.get(task.model_id)
        score = cosine_similarity(embed_text(desc.description), embed_text(plan.query_text))
        return RankedCandidate(task.model_id, score, len(ranked) + 1), choice.model_id
    return choice, choice.model_id


def execute_plan(plan: Plan, registry: Registry) -> ExecutionTrace:
    violations = validate_plan(plan, registry)
    if violations:
        raise PlanInvalid(violations)
    trace = ExecutionTrace(plan)
    outputs: dict[int, ToolResult] = {}
    total_ms = 0.0
    for task in _dependency_order(plan):
        selected, selector_choice = _select(task, plan, registry)
        model = registry.get(selected.model_id)
        call_id = f"call-{task.task_id}"
        accepted = set(model.slot_names())
        arguments = {s.name: s.value for s in task.slots if s.name in accepted}
        call = ToolCall(call_id, model.model_id, canonical.from_plain(canonical.to_plain(arguments)))
        start = time.perf_counter()
        try:
            for d in task.depends_on:
                dep = outputs[d]
                if dep.status != "ok":
                    raise RuntimeError(f"dependency task {d} failed")
                matched = [k for k in dep.output if k in accepted]
                if not matched:
                    raise ValueError(f"no output of task {d} matches an input slot of {model.model_id}")
                for k in matched:
                    arguments.setdefault(k, dep.output[k])
            call = ToolCall(call_id, model.model_id, canonical.from_plain(canonical.to_plain(arguments)))
            wire = encode_tool_call(call)
            output = dispatch(model, decode_tool_call(wire))
            result = ToolResult(call_id, "ok", canonical.from_plain(canonical.to_plain(output)))
        except (NetOrchError, ValueError, KeyError, TypeError, RuntimeError, NotImplementedError) as exc:
            msg = str(exc) or type(exc).__name__
            result = ToolResult(call_id, "error", {}, f"{type(exc).__name__}: {msg}")
        wall_ms = (time.perf_counter() - start) * 1000.0
        total_ms += wall_ms
        outputs[task.task_id] = result
        trace.calls.append(TraceEntry(call, result, selected, selector_choice, wall_ms))
    trace.metrics = {
        "tasks": len(trace.calls),
        "ok": sum(1 for c in trace.calls if c.result.status == "ok"),
        "errors": sum(1 for c in trace.calls if c.result.status == "error"),
        "wall_ms_total": total_ms,
    }
    return trace


# ----------------------------------------------------------------- response


@dataclass
class ResponseDocument:
    summary_text: str
    structured_results: list
    metrics: dict

    def to_dict(self) -> dict:
        return {
            "summary_text": self.summary_text,
            "structured_results": self.structured_results,
            "metrics": self.metrics,
        }


def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.6f}"


def _bandwidth_lines(out: dict) -> list[str]:
    alloc, r = out["allocation"], out["rates"]
    lines = ["  UE    bandwidth          rate"]
    lines += [f"  {k:>3}  {b:>12.6f}  {rk:>12.6f}" for k, (b, rk) in enumerate(zip(alloc, r))]
    lines.append(f"  total bandwidth: {sum(alloc):.6f}")
    lines.append(f"  objective (sum log rate): {_fmt(out['utility'])}")
    lines.append(f"  Jain index (bandwidth): {_fmt(out['jain'])}")
    return lines


def _power_lines(out: dict) -> list[str]:
    powers = out["powers"].to_array() if isinstance(out["powers"], Matrix) else np.asarray(out["powers"])
    sinrs = out["sinrs"].to_array() if isinstance(out["sinrs"], Matrix) else np.asarray(out["sinrs"])
    lines = ["  cell  UE         power          SINR"]
    for j in range(powers.shape[0]):
        for k in range(powers.shape[1]):
            lines.append(f"  {j:>4}  {k:>2}  {powers[j, k]:>12.6f}  {sinrs[j, k]:>12.6f}")
    lines.append(f"  min SINR: {_fmt(out['min_sinr'])}")
    lines.append(f"  geometric-mean SINR: {_fmt(out['geomean_sinr'])}")
    lines.append(f"  sum log SINR: {_fmt(out['sum_log_sinr'])}")
    lines.append(f"  Jain index (SINR): {_fmt(out['jain'])}")
    return lines


def compose_response(trace: ExecutionTrace, precedents=()) -> ResponseDocument:
    """Render a deterministic text summary of a trace.

    ``precedents`` are memory hits surfaced for context only.
    """
    lines = [f"Query: {trace.plan.query_text}"]
    tasks = {t.task_id: t for t in trace.plan.tasks}
    for entry in trace.calls:
        tid = int(entry.call.call_id.rsplit("-", 1)[1])
        task = tasks[tid]
        lines.append(
            f"Task {tid}: {task.task_type} / {task.objective} -> model {entry.selected.model_id}"
            f" (score {entry.selected.score:.4f})"
        )
        if entry.selector_choice != entry.selected.model_id:
            lines.append(f"  selector preferred: {entry.selector_choice}")
        if entry.result.status != "ok":
            lines.append(f"  FAILED: {entry.result.error_message}")
            continue
        out = entry.result.output
        if "allocation" in out:
            lines += _bandwidth_lines(out)
        elif "powers" in out:
            lines += _power_lines(out)
        else:
            lines.append("  output fields: " + ", ".join(sorted(out)))
    m = trace.metrics
    lines.append(f"Tasks: {m.get('ok', 0)}/{m.get('tasks', 0)} ok, errors: {m.get('errors', 0)}")
    for hit in precedents:
        lines.append(f"Related past query #{hit.record.record_id} (score {hit.score:.4f}): {hit.record.query_text}")
    metrics = {k: v for k, v in m.items() if k != "wall_ms_total"}
    return ResponseDocument("\n".join(lines) + "\n", [c.result for c in trace.calls], metrics)

"""``netorch`` command line: chat REPL, scenario runs, scaling bench, inspection.

Exit codes: 0 success, 1 domain/solver failure, 2 usage/config failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from netorch import canonical
from netorch.errors import NetOrchError, NonConvergence, ParseError
from netorch.executor import compose_response, execute_plan
from netorch.memory import Archive
from netorch.planner import plan_query, validate_plan
from netorch.registry import default_registry, load_registry
from netorch.simenv import (
    Geometry,
    generate_scenario,
    load_scenario,
    scenario_payload,
    scenario_to_bandwidth_problem,
    scenario_to_power_problem,
)
from netorch.solvers import (
    geometric_mean,
    jain_index,
    rates,
    sinr_all,
    solve_bandwidth_equal,
    solve_bandwidth_pf,
    solve_power_maxmin,
    solve_power_maxprod,
    solve_power_uniform,
)

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2

BENCH_COLUMNS = ("L", "K", "seed", "objective", "min_sinr", "geomean_sinr", "jain", "runtime_ms")
POWER_SOLVERS = {
    "maxmin": solve_power_maxmin,
    "maxprod": solve_power_maxprod,
    "uniform": solve_power_uniform,
}


class UsageError(Exception):
    pass


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    return cfg


def _setting(args, cfg: dict, name: str, env: str | None = None, default=None):
    """flags > environment > config file > default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    if env and os.environ.get(env):
        return os.environ[env]
    return cfg.get(name, default)


def _registry(path: str | None):
    return load_registry(path) if path else default_registry()


def _scenario_from_args(args):
    if getattr(args, "scenario", None):
        return load_scenario(args.scenario)
    geometry = Geometry(shadowing_std_db=args.shadowing)
    return generate_scenario(args.cells, args.users, args.antennas, args.seed, geometry)


# --------------------------------------------------------------------- chat


def _split_attachment(line: str) -> tuple[str, str | None]:
    words, attachment = [], None
    for w in line.split():
        if w.startswith("@") and len(w) > 1:
            attachment = w[1:]
        else:
            words.append(w)
    return " ".join(words), attachment


def cmd_chat(args, stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    out = stdout or sys.stdout
    try:
        cfg = _load_config(args.config)
        registry = _registry(_setting(args, cfg, "registry", "NETORCH_REGISTRY"))
        memory_path = _setting(args, cfg, "memory", "NETORCH_MEMORY")
        archive = Archive.open(memory_path) if memory_path else Archive()
        backend = _setting(args, cfg, "backend", default="mock")
        p_max = float(_setting(args, cfg, "pmax", default=1000.0))
        config = None
        if backend == "llm":
            from netorch.llmgw import GatewayConfig

            config = GatewayConfig.from_env(
                endpoint=cfg.get("endpoint") if not os.environ.get("NETORCH_LLM_ENDPOINT") else None,
                model=cfg.get("model") if not os.environ.get("NETORCH_LLM_MODEL") else None,
            )
    except (UsageError, NetOrchError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    interactive = stdin.isatty() if hasattr(stdin, "isatty") else False
    while True:
        if interactive:
            out.write("netorch> ")
            out.flush()
        line = stdin.readline()
        if not line:
            break
        line = line.strip()
        if not line:
            continue
        if line.lower() in ("quit", "exit"):
            break
        if line.lower().startswith("feedback "):
            _chat_feedback(archive, line, out)
            continue
        query, attachment = _split_attachment(line)
        try:
            payload = None
            if attachment:
                payload = scenario_payload(load_scenario(attachment), p_max=p_max)
            plan = plan_query(query, payload, backend, registry=registry, config=config)
            violations = validate_plan(plan, registry)
            if violations:
                out.write("PlanInvalid: " + "; ".join(map(str, violations)) + "\n")
                continue
            precedents = archive.retrieve(query, 3) if len(archive) else []
            trace = execute_plan(plan, registry)
            response = compose_response(trace, [h for h in precedents if h.score > 0])
            out.write(response.summary_text)
            rid = archive.store_record(query, plan, response.summary_text, response.metrics)
            out.write(f"(stored as record {rid})\n")
        except (NetOrchError, OSError, ValueError) as exc:
            out.write(f"{type(exc).__name__}: {exc}\n")
    return EXIT_OK


def _chat_feedback(archive: Archive, line: str, out) -> None:
    parts = line.split(maxsplit=3)
    try:
        rid, rating = int(parts[1]), int(parts[2])
        note = parts[3] if len(parts) > 3 else ""
        archive.record_feedback(rid, rating, note)
        out.write(f"feedback recorded for record {rid}\n")
    except (IndexError, ValueError) as exc:
        out.write(f"usage: feedback <record_id> <-1|0|1> [note] ({exc})\n")
    except NetOrchError as exc:
        out.write(f"{type(exc).__name__}: {exc}\n")


# ---------------------------------------------------------------------- run


def _power_result(problem, alloc, runtime_ms: float) -> dict:
    s = sinr_all(problem, alloc.values)
    return {
        "allocation": canonical.Matrix.from_array(alloc.values),
        "sinrs": canonical.Matrix.from_array(s),
        "min": float(s.min()),
        "geomean": geometric_mean(s),
        "jain": jain_index(s),
        "runtime_ms": runtime_ms,
        "diagnostics": alloc.diagnostics,
    }


def run_objective(scenario, objective: str, p_max: float, total_bw: float = 100.0) -> dict:
    start = time.perf_counter()
    if objective in ("pf_bandwidth", "equal"):
        problem = scenario_to_bandwidth_problem(scenario, 0, total_bw)
        alloc = solve_bandwidth_pf(problem) if objective == "pf_bandwidth" else solve_bandwidth_equal(problem)
        runtime_ms = (time.perf_counter() - start) * 1000.0
        r = rates(problem, alloc.values)
        return {
            "allocation": [float(x) for x in alloc.values],
            "rates": [float(x) for x in r],
            "min": float(r.min()),
            "geomean": geometric_mean(r),
            "jain": jain_index(alloc.values),
            "runtime_ms": runtime_ms,
            "diagnostics": alloc.diagnostics,
        }
    problem = scenario_to_power_problem(scenario, p_max)
    alloc = POWER_SOLVERS[objective](problem)
    return _power_result(problem, alloc, (time.perf_counter() - start) * 1000.0)


def cmd_run(args, stdout=None) -> int:
    out = stdout or sys.stdout
    try:
        scenario = _scenario_from_args(args)
    except (NetOrchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = run_objective(scenario, args.objective, args.pmax, args.bw)
    except NetOrchError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    if args.out:
        Path(args.out).write_bytes(canonical.encode(result) + b"\n")
    out.write(
        f"objective={args.objective} L={scenario.L} K={scenario.K} M={scenario.M} seed={scenario.seed}\n"
        f"min={result['min']:.6f} geomean={result['geomean']:.6f} jain={result['jain']:.6f}"
        f" runtime_ms={result['runtime_ms']:.3f}\n"
    )
    return EXIT_OK


# -------------------------------------------------------------------- bench


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("need a non-empty list of positive integers")
    return values


def bench_rows(cells_list, users, antennas, seeds, p_max):
    """Yield one dict per (L, seed, objective); failures carry the error name."""
    for L in cells_list:
        for seed in range(seeds):
            problem = scenario_to_power_problem(generate_scenario(L, users, antennas, seed), p_max)
            for name in ("maxmin", "maxprod", "uniform"):
                row = {"L": L, "K": users, "seed": seed, "objective": name}
                start = time.perf_counter()
                try:
                    alloc = POWER_SOLVERS[name](problem)
                except NonConvergence:
                    row.update(min_sinr="NonConvergence", geomean_sinr="NonConvergence", jain="NonConvergence")
                    row["runtime_ms"] = f"{(time.perf_counter() - start) * 1000.0:.3f}"
                    yield row
                    continue
                runtime = (time.perf_counter() - start) * 1000.0
                s = sinr_all(problem, alloc.values)
                row.update(
                    min_sinr=repr(float(s.min())),
                    geomean_sinr=repr(geometric_mean(s)),
                    jain=repr(jain_index(s)),
                    runtime_ms=f"{runtime:.3f}",
                )
                yield row


def cmd_bench(args, stdout=None) -> int:
    out = stdout or sys.stdout
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    writer.writeheader()
    failed = 0
    n = 0
    for row in bench_rows(args.cells_list, args.users, args.antennas, args.seeds, args.pmax):
        writer.writerow(row)
        n += 1
        failed += row["min_sinr"] == "NonConvergence"
    data = buf.getvalue()
    if args.out:
        Path(args.out).write_text(data, encoding="utf-8", newline="\n")
    else:
        out.write(data)
    print(f"{n} rows, {failed} NonConvergence", file=sys.stderr)
    return EXIT_DOMAIN if failed else EXIT_OK


# ---------------------------------------------------------------- inspection


def cmd_registry_list(args, stdout=None) -> int:
    out = stdout or sys.stdout
    try:
        registry = _registry(args.registry)
    except (NetOrchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    models = registry.list_models(args.task_type)
    out.write(f"{'model_id':<20} {'task_type':<22} {'objective':<22} {'downloads':>9}\n")
    for m in models:
        out.write(f"{m.model_id:<20} {m.task_type:<22} {m.objective:<22} {m.download_count:>9}\n")
    return EXIT_OK


def cmd_memory_show(args, stdout=None) -> int:
    out = stdout or sys.stdout
    try:
        archive = Archive.open(args.memory) if args.memory else Archive()
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    records = archive.last(args.last)
    out.write(f"{len(archive)} records\n")
    for rec in records:
        fb = "" if rec.feedback is None else f" feedback={rec.feedback.rating:+d}"
        out.write(f"#{rec.record_id}{fb}: {rec.query_text}\n")
    return EXIT_OK


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="netorch", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    chat = sub.add_parser("chat", help="interactive query session")
    chat.add_argument("--backend", choices=("mock", "llm"), default=None)
    chat.add_argument("--registry", default=None)
    chat.add_argument("--memory", default=None)
    chat.add_argument("--config", default=None)
    chat.add_argument("--pmax", type=float, default=None, help="per-BS budget for @scenario payloads")
    chat.set_defaults(func=cmd_chat)

    run = sub.add_parser("run", help="solve one scenario")
    run.add_argument("--scenario", default=None)
    run.add_argument("--cells", type=int, default=1)
    run.add_argument("--users", type=int, default=10)
    run.add_argument("--antennas", type=int, default=96)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--shadowing", type=float, default=0.0, help="shadowing std in dB")
    run.add_argument(
        "--objective", required=True, choices=("maxmin", "maxprod", "uniform", "pf_bandwidth", "equal")
    )
    run.add_argument("--pmax", type=float, default=1000.0)
    run.add_argument("--bw", type=float, default=100.0)
    run.add_argument("--out", default=None)
    run.set_defaults(func=cmd_run)

    bench = sub.add_parser("bench", help="scaling benchmark over cell counts and seeds")
    bench.add_argument("--cells-list", type=_int_list, default=[1, 4, 16])
    bench.add_argument("--users", type=int, default=10)
    bench.add_argument("--antennas", type=int, default=96)
    bench.add_argument("--seeds", type=int, default=1)
    bench.add_argument("--pmax", type=float, default=1000.0)
    bench.add_argument("--out", default=None)
    bench.set_defaults(func=cmd_bench)

    reg = sub.add_parser("registry", help="registry inspection")
    reg_sub = reg.add_subparsers(dest="registry_command", required=True)
    reg_list = reg_sub.add_parser("list")
    reg_list.add_argument("--registry", default=None)
    reg_list.add_argument("--task-type", default=None)
    reg_list.set_defaults(func=cmd_registry_list)

    mem = sub.add_parser("memory", help="experience archive inspection")
    mem_sub = mem.add_subparsers(dest="memory_command", required=True)
    show = mem_sub.add_parser("show")
    show.add_argument("--memory", default=None)
    show.add_argument("--last", type=int, default=10)
    show.set_defaults(func=cmd_memory_show)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

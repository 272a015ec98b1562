"""Command line front end.

Each command prints a short human-readable summary followed by a structured
report block; the same block is written to --output when given. Reports
carry no timestamps, so identical configurations produce byte-identical
output. Exit status: 0 on success (and Feasible synthesis), 2 when a
synthesis outcome is not Feasible, 1 on errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from .checking import ExpectedCost, SafetyReach, Specification, UntilProb, check
from .estimation import estimate_strategy, hoeffding_sample_size
from .explicit import export_explicit
from .gridworld import (
    baseline_human_strategy,
    best_case_heatmap,
    compile_scenario,
    heatmap_matrix,
    worst_case_heatmap,
)
from .model import BlendingFunction, Mdp, blend, validate_strategy
from .modelio import (
    blending_to_dict,
    load_blending,
    load_model,
    load_scenario,
    load_strategy,
    load_trajectory,
    save_heatmap,
    save_model,
    save_strategy,
    strategy_to_dict,
)
from .synthesis import (
    FEASIBLE,
    SynthesisProblem,
    SynthesisResult,
    generalized_blending,
    repair_synthesize,
    synthesize_general,
    synthesize_reachability,
)


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage errors surface as CliError (exit 1)."""

    def error(self, message):
        raise CliError(message)


def parse_spec(text: str, model: Mdp) -> Specification:
    """Parse a property descriptor against a model's label sets.

    Grammar: ``P<=B [F LABEL]`` | ``P>=B [!LABEL U LABEL]`` | ``E<=B [F LABEL]``.
    """
    kind, bound, names = _parse_descriptor(text)

    def states(name: str) -> frozenset[int]:
        if name not in model.labels:
            known = ", ".join(sorted(model.labels)) or "none"
            raise ValueError(
                f"cannot resolve {text!r}: unknown label {name!r} (model labels: {known})"
            )
        return model.labels[name]

    if kind == "reach-leq":
        return SafetyReach(bound, target=states(names[0]))
    if kind == "until-geq":
        return UntilProb(bound, avoid=states(names[0]), goal=states(names[1]))
    return ExpectedCost(bound, goal=states(names[0]))


def _parse_descriptor(text: str) -> tuple[str, float, tuple[str, ...]]:
    pos = 0

    def fail(expected: str):
        raise ValueError(f"cannot parse {text!r}: expected {expected} at position {pos}")

    def skip_ws():
        nonlocal pos
        while pos < len(text) and text[pos].isspace():
            pos += 1

    def ident() -> str:
        nonlocal pos
        start = pos
        if pos < len(text) and (text[pos].isalpha() or text[pos] == "_"):
            pos += 1
            while pos < len(text) and (text[pos].isalnum() or text[pos] == "_"):
                pos += 1
            return text[start:pos]
        fail("a label name")

    skip_ws()
    if pos < len(text) and text[pos] in "PE":
        kind = text[pos]
        pos += 1
    else:
        fail("'P' or 'E'")
    if text.startswith("<=", pos):
        comp = "<="
    elif text.startswith(">=", pos):
        comp = ">="
    else:
        fail("'<=' or '>='")
    if kind == "E" and comp == ">=":
        fail("'<=' (expected costs take upper bounds only)")
    pos += 2
    skip_ws()
    num_start = pos
    while pos < len(text) and (
        text[pos].isdigit()
        or text[pos] == "."
        or (text[pos] in "eE" and pos > num_start)
        or (text[pos] in "+-" and pos > num_start and text[pos - 1] in "eE")
    ):
        pos += 1
    try:
        bound = float(text[num_start:pos])
    except ValueError:
        pos = num_start
        fail("a numeric bound")
    skip_ws()
    if pos >= len(text) or text[pos] != "[":
        fail("'['")
    pos += 1
    skip_ws()
    body_pos = pos
    if pos < len(text) and text[pos] == "!":
        pos += 1
        skip_ws()
        avoid = ident()
        skip_ws()
        connective = ident()
        if connective != "U":
            pos -= len(connective)
            fail("'U'")
        skip_ws()
        goal = ident()
        form = ("until", avoid, goal)
    else:
        token = ident()
        if token != "F":
            pos = body_pos
            fail("'F' or '!'")
        skip_ws()
        target = ident()
        form = ("reach", target)
    skip_ws()
    if pos >= len(text) or text[pos] != "]":
        fail("']'")
    pos += 1
    skip_ws()
    if pos != len(text):
        fail("end of descriptor")

    if form[0] == "reach":
        if kind == "P" and comp == "<=":
            return "reach-leq", bound, (form[1],)
        if kind == "E":
            return "cost-leq", bound, (form[1],)
        pos = body_pos
        fail("'!' (lower probability bounds take the form 'P>=B [!A U G]')")
    if kind == "P" and comp == ">=":
        return "until-geq", bound, (form[1], form[2])
    pos = body_pos
    fail("'F' (upper probability bounds take the form 'P<=B [F T]')")


def _emit(args, lines: list[str], report: dict) -> None:
    for line in lines:
        print(line)
    blob = json.dumps(report, sort_keys=True, indent=2)
    print("--- report ---")
    print(blob)
    if getattr(args, "output", None):
        out = Path(args.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(blob + "\n")


def _finite(value: float):
    """Report-friendly float: JSON has no infinity literal."""
    return value if math.isfinite(value) else None


def _gather_specs(args, model: Mdp) -> tuple[list[Specification], list[str]]:
    texts = list(args.spec or [])
    leq = getattr(args, "reach_leq", None)
    target = getattr(args, "target", None)
    if leq is not None or target is not None:
        if leq is None or target is None:
            raise CliError("--reach-leq and --target must be given together")
        texts.append(f"P<={leq!r} [F {target}]")
    if not texts:
        raise CliError("no specification given (use --spec, or --reach-leq with --target)")
    return [parse_spec(t, model) for t in texts], texts


def _parse_blend_arg(raw: str):
    if raw == "synthesize":
        return "synthesize"
    try:
        value = float(raw)
    except ValueError:
        if os.path.exists(raw):
            return load_blending(raw)
        raise CliError(
            f"--blend takes a number in [0, 1], a blending file, or 'synthesize'; got {raw!r}"
        )
    return BlendingFunction.uniform(value)


def _certificates(result: SynthesisResult, texts: list[str]) -> list[dict]:
    out = []
    for i, res in enumerate(result.certificates):
        descriptor = texts[i] if i < len(texts) else None
        out.append(
            {
                "descriptor": descriptor,
                "value": _finite(float(res.value)),
                "satisfied": bool(res.satisfied),
            }
        )
    return out


def _synthesis_report(command: str, result: SynthesisResult, texts: list[str], seed: int) -> dict:
    report = {
        "command": command,
        "status": result.status,
        "objective": _finite(result.objective),
        "seed": seed,
        "certificates": _certificates(result, texts),
        "trace": {k: v for k, v in result.trace.items() if isinstance(v, (str, int, float, bool))},
    }
    if result.autonomous is not None:
        report["autonomous"] = strategy_to_dict(result.autonomous)
    if result.blended is not None:
        report["blended"] = strategy_to_dict(result.blended)
    if result.blending_out is not None:
        report["blending"] = blending_to_dict(result.blending_out)
    return report


def _synthesis_lines(result: SynthesisResult, texts: list[str]) -> list[str]:
    lines = [f"status: {result.status}", f"objective: {result.objective!r}"]
    for i, res in enumerate(result.certificates):
        descriptor = texts[i] if i < len(texts) else "(spec)"
        verdict = "SATISFIED" if res.satisfied else "NOT SATISFIED"
        lines.append(f"{descriptor}: value {float(res.value)!r} -> {verdict}")
    return lines


def _write_strategies(args, result: SynthesisResult) -> None:
    if getattr(args, "strategy_out", None) and result.autonomous is not None:
        save_strategy(args.strategy_out, result.autonomous)
    if getattr(args, "blended_out", None) and result.blended is not None:
        save_strategy(args.blended_out, result.blended)


def _cmd_check(args) -> int:
    model = load_model(args.model)
    sigma = load_strategy(args.strategy)
    bad = validate_strategy(model, sigma)
    if bad:
        raise CliError("strategy does not fit the model: " + "; ".join(bad[:3]))
    specs, texts = _gather_specs(args, model)
    results = check(model, sigma, specs, method=args.method)
    lines = []
    entries = []
    for text, res in zip(texts, results):
        verdict = "SATISFIED" if res.satisfied else "NOT SATISFIED"
        value = float(res.value)
        lines.append(f"{text}: value {value!r} -> {verdict}")
        entries.append(
            {"descriptor": text, "value": _finite(value), "satisfied": bool(res.satisfied)}
        )
    report = {
        "command": "check",
        "method": args.method,
        "results": entries,
        "all_satisfied": all(r.satisfied for r in results),
    }
    _emit(args, lines, report)
    return 0


def _cmd_synthesize(args) -> int:
    model = load_model(args.model)
    human = load_strategy(args.human)
    blending = _parse_blend_arg(args.blend)
    specs, texts = _gather_specs(args, model)
    problem = SynthesisProblem(model, human, blending, tuple(specs))
    if blending == "synthesize":
        result = generalized_blending(problem, mode=args.blend_mode)
    else:
        method = args.method
        if method == "auto":
            single_reach = len(specs) == 1 and isinstance(specs[0], SafetyReach)
            method = "exact" if single_reach else "general"
        if method == "exact":
            result = synthesize_reachability(problem)
        elif method == "general":
            result = synthesize_general(problem, max_iterations=args.max_iterations)
        elif method == "repair":
            result = repair_synthesize(
                problem,
                budget=args.budget,
                step=args.step,
                max_iterations=args.max_iterations,
            )
        else:
            raise CliError(f"unknown method {method!r}")
    _write_strategies(args, result)
    report = _synthesis_report("synthesize", result, texts, args.seed)
    _emit(args, _synthesis_lines(result, texts), report)
    return 0 if result.status == FEASIBLE else 2


def _cmd_blend(args) -> int:
    human = load_strategy(args.human)
    autonomous = load_strategy(args.autonomous)
    blending = _parse_blend_arg(args.blend)
    if blending == "synthesize":
        raise CliError("the blend command needs a concrete blending function")
    blended = blend(human, autonomous, blending)
    if args.model:
        model = load_model(args.model)
        bad = validate_strategy(model, blended)
        if bad:
            raise CliError("blended strategy does not fit the model: " + "; ".join(bad[:3]))
    if args.strategy_out:
        save_strategy(args.strategy_out, blended)
    report = {"command": "blend", "strategy": strategy_to_dict(blended)}
    _emit(args, [f"blended {len(blended.choice)} states"], report)
    return 0


def _cmd_repair(args) -> int:
    model = load_model(args.model)
    human = load_strategy(args.human)
    blending = _parse_blend_arg(args.blend)
    if blending == "synthesize":
        raise CliError("repair needs a concrete blending function")
    specs, texts = _gather_specs(args, model)
    problem = SynthesisProblem(model, human, blending, tuple(specs))
    result = repair_synthesize(
        problem, budget=args.budget, step=args.step, max_iterations=args.max_iterations
    )
    lines = _synthesis_lines(result, texts)
    report = _synthesis_report("repair", result, texts, args.seed)
    if args.compare_exact:
        if len(specs) == 1 and isinstance(specs[0], SafetyReach) and specs[0].direction == "<=":
            exact = synthesize_reachability(problem)
            report["exact_objective"] = _finite(exact.objective)
            lines.append(f"exact objective: {exact.objective!r}")
        else:
            raise CliError("--compare-exact needs a single 'P<=B [F T]' specification")
    _write_strategies(args, result)
    _emit(args, lines, report)
    return 0 if result.status == FEASIBLE else 2


def _cmd_gridworld(args) -> int:
    scenario = load_scenario(args.scenario)
    lmdp = compile_scenario(scenario)
    model = lmdp.model
    if args.model_out:
        save_model(args.model_out, model)
    exported = []
    if args.export:
        exported = [str(p) for p in export_explicit(model, args.export)]
    if args.human_out:
        save_strategy(args.human_out, baseline_human_strategy(lmdp, noise=args.noise))
    lines = [
        f"states: {model.n_states}",
        f"crash states: {len(lmdp.crash)}",
        f"target states: {len(lmdp.target)}",
    ]
    report = {
        "command": "gridworld",
        "states": model.n_states,
        "actions": list(model.actions),
        "crash_states": len(lmdp.crash),
        "target_states": len(lmdp.target),
        "initial": model.initial,
        "exported": exported,
    }
    _emit(args, lines, report)
    return 0


def _cmd_estimate(args) -> int:
    model = load_model(args.model)
    trajectories = [load_trajectory(p)[1] for p in args.trajectories]
    sigma = estimate_strategy(model, trajectories, smoothing=args.smoothing)
    if args.strategy_out:
        save_strategy(args.strategy_out, sigma)
    total_steps = sum(len(t.steps) for t in trajectories)
    lines = [f"estimated {len(sigma.choice)} states from {total_steps} recorded steps"]
    report = {
        "command": "estimate",
        "trajectories": len(trajectories),
        "steps": total_steps,
        "smoothing": args.smoothing,
        "strategy": strategy_to_dict(sigma),
    }
    if args.epsilon is not None or args.delta is not None:
        if args.epsilon is None or args.delta is None:
            raise CliError("--epsilon and --delta must be given together")
        size = hoeffding_sample_size(args.epsilon, args.delta)
        report["recommended_samples"] = size
        lines.append(
            f"samples for confidence {1 - args.delta!r} at precision {args.epsilon!r}: {size}"
        )
    _emit(args, lines, report)
    return 0


def _cmd_heatmap(args) -> int:
    scenario = load_scenario(args.scenario)
    lmdp = compile_scenario(scenario)
    sigma = load_strategy(args.strategy)
    if args.human:
        blending = _parse_blend_arg(args.blend if args.blend is not None else "0.5")
        if blending == "synthesize":
            raise CliError("heatmap needs a concrete blending function")
        sigma = blend(load_strategy(args.human), sigma, blending)
    bad = validate_strategy(lmdp.model, sigma)
    if bad:
        raise CliError("strategy does not fit the compiled scenario: " + "; ".join(bad[:3]))
    heat = best_case_heatmap(lmdp, sigma) if args.best else worst_case_heatmap(lmdp, sigma)
    matrix = heatmap_matrix(lmdp, heat)
    if args.matrix_out:
        save_heatmap(args.matrix_out, matrix)
    values = {f"{x},{y}": v for (x, y), v in sorted(heat.items())}
    report = {
        "command": "heatmap",
        "kind": "best-case" if args.best else "worst-case",
        "width": scenario.width,
        "height": scenario.height,
        "values": values,
        "min": min(values.values()) if values else None,
        "max": max(values.values()) if values else None,
    }
    lines = [f"{len(values)} cells, min {report['min']!r}, max {report['max']!r}"]
    _emit(args, lines, report)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level=args.log_level)
    return 0


def _add_spec_options(p: _Parser, shortcut: bool = True):
    p.add_argument(
        "--spec",
        action="append",
        help="property descriptor: 'P<=B [F T]', 'P>=B [!A U G]', or 'E<=B [F G]' (repeatable)",
    )
    if shortcut:
        p.add_argument("--reach-leq", type=float, help="shortcut: bound B of 'P<=B [F TARGET]'")
        p.add_argument("--target", help="shortcut: target label of 'P<=B [F TARGET]'")


def _add_synthesis_options(p: _Parser):
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--human", required=True, help="human strategy JSON file")
    p.add_argument(
        "--blend",
        required=True,
        help="human confidence: number in [0, 1], blending JSON file, or 'synthesize'",
    )
    _add_spec_options(p)
    p.add_argument("--max-iterations", type=int, default=10_000)
    p.add_argument("--budget", type=float, default=1.0, help="repair: entrywise change cap")
    p.add_argument("--step", type=float, default=0.05, help="repair: per-iteration step fraction")
    p.add_argument("--seed", type=int, default=0, help="recorded in the report; reruns are deterministic")
    p.add_argument("--strategy-out", help="write the autonomous strategy here")
    p.add_argument("--blended-out", help="write the blended strategy here")
    p.add_argument("--output", help="write the structured report here")


def build_parser() -> _Parser:
    parser = _Parser(prog="sharedctl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="model-check a strategy against properties")
    p.add_argument("--model", required=True)
    p.add_argument("--strategy", required=True)
    _add_spec_options(p)
    p.add_argument("--method", choices=["linear", "value-iteration"], default="linear")
    p.add_argument("--output")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("synthesize", help="synthesize a minimal-deviation autonomous strategy")
    _add_synthesis_options(p)
    p.add_argument("--method", choices=["auto", "exact", "general", "repair"], default="auto")
    p.add_argument("--blend-mode", choices=["uniform-max", "per-state"], default="uniform-max")
    p.set_defaults(func=_cmd_synthesize)

    p = sub.add_parser("blend", help="blend a human and an autonomous strategy")
    p.add_argument("--human", required=True)
    p.add_argument("--autonomous", required=True)
    p.add_argument("--blend", required=True)
    p.add_argument("--model", help="optional model for validating the result")
    p.add_argument("--strategy-out")
    p.add_argument("--output")
    p.set_defaults(func=_cmd_blend)

    p = sub.add_parser("repair", help="repair a violating strategy, then minimize its deviation")
    _add_synthesis_options(p)
    p.add_argument("--compare-exact", action="store_true")
    p.set_defaults(func=_cmd_repair)

    p = sub.add_parser("gridworld", help="compile a scenario file into a model")
    p.add_argument("--scenario", required=True)
    p.add_argument("--model-out")
    p.add_argument("--export", help="base path for explicit-state export files")
    p.add_argument("--human-out", help="write the distance-based baseline human strategy here")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--output")
    p.set_defaults(func=_cmd_gridworld)

    p = sub.add_parser("estimate", help="estimate a strategy from recorded trajectories")
    p.add_argument("--model", required=True)
    p.add_argument("--trajectories", nargs="+", required=True)
    p.add_argument("--smoothing", type=float, default=0.0)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--strategy-out")
    p.add_argument("--output")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("heatmap", help="per-cell safety probabilities of a scenario strategy")
    p.add_argument("--scenario", required=True)
    p.add_argument("--strategy", required=True)
    p.add_argument("--human", help="blend this human strategy with --strategy first")
    p.add_argument("--blend")
    p.add_argument("--best", action="store_true", help="best case over obstacle positions")
    p.add_argument("--matrix-out", help="write the matrix as text rows")
    p.add_argument("--output")
    p.set_defaults(func=_cmd_heatmap)

    p = sub.add_parser("serve", help="run the session server")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--log-level", default="info")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("SHAREDCTL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

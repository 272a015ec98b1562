"""File formats: models, strategies, blending functions, scenarios,
trajectories, and heatmap matrices.

Everything is plain JSON except trajectories (line-oriented text with a
header naming the model file) and heatmaps (rows of space-separated values).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .estimation import Trajectory
from .gridworld import GridScenario, LabeledMdp, Obstacle
from .model import BlendingFunction, Mdp, Strategy, validate_mdp


def dump_text(path: str | Path, text: str) -> None:
    """Write `text` to `path`, creating parent directories as needed."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def model_to_dict(model: Mdp) -> dict:
    doc = {
        "states": model.n_states,
        "initial": model.initial,
        "actions": list(model.actions),
        "transitions": [
            {"from": s, "action": a, "to": t, "prob": p}
            for s in range(model.n_states)
            for a in model.enabled(s)
            for t, p in sorted(model.transitions[s][a].items())
        ],
    }
    if model.costs is not None:
        doc["costs"] = [
            {"from": s, "action": a, "cost": c}
            for (s, a), c in sorted(model.costs.items())
        ]
    if model.labels:
        doc["labels"] = {name: sorted(states) for name, states in model.labels.items()}
    return doc


def model_from_dict(doc: dict) -> Mdp:
    transitions: dict[int, dict[str, dict[int, float]]] = {}
    for entry in doc["transitions"]:
        s, a, t, p = entry["from"], entry["action"], entry["to"], entry["prob"]
        transitions.setdefault(s, {}).setdefault(a, {})[t] = float(p)
    costs = None
    if "costs" in doc:
        costs = {
            (entry["from"], entry["action"]): float(entry["cost"])
            for entry in doc["costs"]
        }
    labels = {
        name: frozenset(states) for name, states in doc.get("labels", {}).items()
    }
    model = Mdp(
        n_states=int(doc["states"]),
        initial=int(doc["initial"]),
        actions=tuple(doc["actions"]),
        transitions=transitions,
        costs=costs,
        labels=labels,
    )
    problems = validate_mdp(model)
    if problems:
        raise ValueError("invalid model: " + "; ".join(problems[:5]))
    return model


def load_model(path: str | Path) -> Mdp:
    return model_from_dict(json.loads(Path(path).read_text()))


def save_model(path: str | Path, model: Mdp) -> None:
    dump_text(path, json.dumps(model_to_dict(model), indent=2, sort_keys=True))


def strategy_to_dict(sigma: Strategy) -> dict:
    return {str(s): dict(sorted(dist.items())) for s, dist in sorted(sigma.choice.items())}


def strategy_from_dict(doc: dict) -> Strategy:
    return Strategy({int(s): {a: float(p) for a, p in dist.items()} for s, dist in doc.items()})


def load_strategy(path: str | Path) -> Strategy:
    return strategy_from_dict(json.loads(Path(path).read_text()))


def save_strategy(path: str | Path, sigma: Strategy) -> None:
    dump_text(path, json.dumps(strategy_to_dict(sigma), indent=2, sort_keys=True))


def blending_to_dict(blending: BlendingFunction) -> dict:
    doc = {str(s): w for s, w in sorted(blending.weights.items())}
    doc["default"] = blending.default
    return doc


def blending_from_dict(doc: dict) -> BlendingFunction:
    default = float(doc.get("default", 0.0))
    weights = {int(s): float(w) for s, w in doc.items() if s != "default"}
    return BlendingFunction(weights=weights, default=default)


def load_blending(path: str | Path) -> BlendingFunction:
    return blending_from_dict(json.loads(Path(path).read_text()))


def save_blending(path: str | Path, blending: BlendingFunction) -> None:
    dump_text(path, json.dumps(blending_to_dict(blending), indent=2, sort_keys=True))


def _cell(raw) -> tuple[int, int]:
    x, y = raw
    return (int(x), int(y))


def scenario_from_dict(doc: dict) -> GridScenario:
    obstacles = []
    for entry in doc.get("obstacles", []):
        movement = entry.get("movement", "uniform")
        if isinstance(movement, dict):
            movement = {
                _cell(key.split(",")): {m: float(p) for m, p in dist.items()}
                for key, dist in movement.items()
            }
        obstacles.append(Obstacle(start=_cell(entry["start"]), movement=movement))
    return GridScenario(
        width=int(doc["width"]),
        height=int(doc["height"]),
        agent_start=_cell(doc["agent_start"]),
        targets=frozenset(_cell(c) for c in doc["targets"]),
        walls=frozenset(_cell(c) for c in doc.get("walls", [])),
        obstacles=tuple(obstacles),
        agent_slip=float(doc.get("agent_slip", 0.0)),
    )


def scenario_to_dict(scenario: GridScenario) -> dict:
    obstacles = []
    for o in scenario.obstacles:
        movement = o.movement
        if isinstance(movement, dict):
            movement = {
                f"{x},{y}": dict(sorted(dist.items()))
                for (x, y), dist in sorted(movement.items())
            }
        obstacles.append({"start": list(o.start), "movement": movement})
    return {
        "width": scenario.width,
        "height": scenario.height,
        "agent_start": list(scenario.agent_start),
        "targets": [list(c) for c in sorted(scenario.targets)],
        "walls": [list(c) for c in sorted(scenario.walls)],
        "obstacles": obstacles,
        "agent_slip": scenario.agent_slip,
    }


def load_scenario(path: str | Path) -> GridScenario:
    return scenario_from_dict(json.loads(Path(path).read_text()))


def save_scenario(path: str | Path, scenario: GridScenario) -> None:
    dump_text(path, json.dumps(scenario_to_dict(scenario), indent=2, sort_keys=True))


def save_trajectory(path: str | Path, trajectory: Trajectory, model_name: str) -> None:
    """Line format: header `model <name>`, then `state action state` triples."""
    lines = [f"model {model_name}"]
    steps = trajectory.steps
    for i, (s, a) in enumerate(steps):
        nxt = steps[i + 1][0] if i + 1 < len(steps) else trajectory.final_state
        if nxt is None:
            raise ValueError("trajectory has a trailing step without a successor")
        lines.append(f"{s} {a} {nxt}")
    dump_text(path, "\n".join(lines) + "\n")


def load_trajectory(path: str | Path) -> tuple[str, Trajectory]:
    """Returns the model name from the header and the trajectory."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("model "):
        raise ValueError(f"{path}: missing `model <name>` header line")
    model_name = lines[0][len("model "):].strip()
    steps = []
    final = None
    prev_to = None
    for ln_no, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{ln_no}: expected `state action state`")
        s, a, t = int(parts[0]), parts[1], int(parts[2])
        if prev_to is not None and s != prev_to:
            raise ValueError(f"{path}:{ln_no}: step starts at {s}, previous ended at {prev_to}")
        steps.append((s, a))
        prev_to = t
        final = t
    return model_name, Trajectory(steps=tuple(steps), final_state=final)


def save_heatmap(path: str | Path, matrix: np.ndarray) -> None:
    """Rows of space-separated values, six decimals, NaN for empty cells."""
    rows = [" ".join(f"{v:.6f}" for v in row) for row in matrix]
    dump_text(path, "\n".join(rows) + "\n")


def load_heatmap(path: str | Path) -> np.ndarray:
    rows = [
        [float(v) for v in line.split()]
        for line in Path(path).read_text().splitlines()
        if line.strip()
    ]
    return np.array(rows)


def labeled_mdp_meaning_to_dict(lmdp: LabeledMdp) -> dict:
    return {
        str(s): {"agent": list(cell), "obstacles": [list(c) for c in obstacles]}
        for s, (cell, obstacles) in sorted(lmdp.state_meaning.items())
    }

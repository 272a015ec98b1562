"""Grid scenarios with moving obstacles, compiled into labeled MDPs.

Cells are (x, y) with x growing rightwards and y growing downwards, so row 0
is the top row of exported matrices. A joint state is the agent cell plus
the tuple of obstacle cells; crash and target states are absorbing.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .checking import UntilProb, until_probabilities
from .model import Mdp, Strategy, induce_mc

Cell = tuple[int, int]

MOVE_DELTAS: dict[str, tuple[int, int]] = {
    "up": (0, -1),
    "down": (0, 1),
    "left": (-1, 0),
    "right": (1, 0),
}
AGENT_ACTIONS = tuple(MOVE_DELTAS)
OBSTACLE_MOVES = AGENT_ACTIONS + ("stay",)
# Slipping replaces a move by one of the two orthogonal ones.
PERPENDICULAR = {
    "up": ("left", "right"),
    "down": ("left", "right"),
    "left": ("up", "down"),
    "right": ("up", "down"),
}


@dataclass(frozen=True)
class Obstacle:
    """Moving obstacle: start cell and per-cell move distribution.

    movement is "uniform" (1/5 on each move) or a map cell -> distribution
    over {up, down, left, right, stay}; cells missing from the map move
    uniformly. Mass on blocked moves is folded into stay.
    """

    start: Cell
    movement: str | dict[Cell, dict[str, float]] = "uniform"


@dataclass(frozen=True)
class GridScenario:
    width: int
    height: int
    agent_start: Cell
    targets: frozenset[Cell]
    walls: frozenset[Cell] = frozenset()
    obstacles: tuple[Obstacle, ...] = ()
    agent_slip: float = 0.0


@dataclass(frozen=True)
class LabeledMdp:
    """Compiled scenario: model plus crash/target state sets and meanings."""

    model: Mdp
    crash: frozenset[int]
    target: frozenset[int]
    state_meaning: dict[int, tuple[Cell, tuple[Cell, ...]]]
    scenario: GridScenario


def _inside(scenario: GridScenario, cell: Cell) -> bool:
    x, y = cell
    return 0 <= x < scenario.width and 0 <= y < scenario.height and cell not in scenario.walls


def _shift(cell: Cell, move: str) -> Cell:
    dx, dy = MOVE_DELTAS[move]
    return (cell[0] + dx, cell[1] + dy)


def validate_scenario(scenario: GridScenario) -> list[str]:
    problems = []
    if scenario.width < 1 or scenario.height < 1:
        problems.append("grid dimensions must be positive")
        return problems
    for cell in scenario.walls:
        x, y = cell
        if not (0 <= x < scenario.width and 0 <= y < scenario.height):
            problems.append(f"wall {cell} outside the grid")
    if not _inside(scenario, scenario.agent_start):
        problems.append(f"agent start {scenario.agent_start} blocked or outside")
    if not scenario.targets:
        problems.append("scenario has no target cell")
    for cell in scenario.targets:
        if not _inside(scenario, cell):
            problems.append(f"target {cell} blocked or outside")
    for i, obstacle in enumerate(scenario.obstacles):
        if not _inside(scenario, obstacle.start):
            problems.append(f"obstacle {i} start {obstacle.start} blocked or outside")
        if isinstance(obstacle.movement, dict):
            for cell, dist in obstacle.movement.items():
                if not _inside(scenario, cell):
                    problems.append(f"obstacle {i} lists blocked cell {cell}")
                unknown = set(dist) - set(OBSTACLE_MOVES)
                if unknown:
                    problems.append(f"obstacle {i} at {cell} uses unknown moves {sorted(unknown)}")
                total = sum(dist.values())
                if abs(total - 1.0) > 1e-9 or any(p < 0 for p in dist.values()):
                    problems.append(f"obstacle {i} distribution at {cell} is not a distribution")
        elif obstacle.movement != "uniform":
            problems.append(f"obstacle {i} has unknown movement mode {obstacle.movement!r}")
    if not 0.0 <= scenario.agent_slip < 1.0:
        problems.append(f"agent_slip {scenario.agent_slip} outside [0, 1)")
    return problems


def _agent_moves(scenario: GridScenario, cell: Cell) -> tuple[str, ...]:
    return tuple(m for m in AGENT_ACTIONS if _inside(scenario, _shift(cell, m)))


def _agent_outcomes(scenario: GridScenario, cell: Cell, move: str) -> dict[Cell, float]:
    slip = scenario.agent_slip
    outcomes = {_shift(cell, move): 1.0 - slip}
    if slip > 0.0:
        for side in PERPENDICULAR[move]:
            dest = _shift(cell, side)
            if not _inside(scenario, dest):
                dest = cell
            outcomes[dest] = outcomes.get(dest, 0.0) + slip / 2.0
    return outcomes


def _obstacle_outcomes(
    scenario: GridScenario, obstacle: Obstacle, cell: Cell
) -> dict[Cell, float]:
    if isinstance(obstacle.movement, dict) and cell in obstacle.movement:
        base = obstacle.movement[cell]
    else:
        base = {m: 1.0 / len(OBSTACLE_MOVES) for m in OBSTACLE_MOVES}
    outcomes: dict[Cell, float] = {}
    for move, p in base.items():
        if p <= 0.0:
            continue
        dest = cell if move == "stay" else _shift(cell, move)
        if not _inside(scenario, dest):
            dest = cell
        outcomes[dest] = outcomes.get(dest, 0.0) + p
    return outcomes


def compile_scenario(scenario: GridScenario) -> LabeledMdp:
    """Enumerate the reachable joint states and build the labeled MDP.

    The agent and the obstacles move simultaneously; an outcome is a crash
    when the agent shares a cell with an obstacle afterwards, or when the
    two swapped cells during the step. Swaps are recorded by placing the
    swapping obstacle in the agent's destination cell, so every crash state
    is a co-location state. Crash wins over target when both would apply.
    """
    problems = validate_scenario(scenario)
    if problems:
        raise ValueError("invalid scenario: " + "; ".join(problems))

    initial = (scenario.agent_start, tuple(o.start for o in scenario.obstacles))
    index: dict[tuple[Cell, tuple[Cell, ...]], int] = {initial: 0}
    order = [initial]
    transitions: dict[int, dict[str, dict[int, float]]] = {}
    crash, target = set(), set()
    head = 0
    while head < len(order):
        joint = order[head]
        s = index[joint]
        head += 1
        agent, obstacles = joint
        moves = _agent_moves(scenario, agent)
        if not moves:
            raise ValueError(f"invalid scenario: cell {agent} has no legal move")
        is_crash = agent in obstacles
        is_target = not is_crash and agent in scenario.targets
        if is_crash:
            crash.add(s)
        if is_target:
            target.add(s)
        if is_crash or is_target:
            transitions[s] = {m: {s: 1.0} for m in moves}
            continue
        row: dict[str, dict[int, float]] = {}
        obstacle_branches = [
            list(_obstacle_outcomes(scenario, o, c).items())
            for o, c in zip(scenario.obstacles, obstacles)
        ]
        for m in moves:
            acc: dict[int, float] = {}
            for agent_next, pa in _agent_outcomes(scenario, agent, m).items():
                for combo in itertools.product(*obstacle_branches):
                    p = pa
                    cells = []
                    for (prev, (nxt, po)) in zip(obstacles, combo):
                        p *= po
                        # Swap-through collision: both crossed the same edge.
                        if prev == agent_next and nxt == agent:
                            nxt = agent_next
                        cells.append(nxt)
                    succ = (agent_next, tuple(cells))
                    if succ not in index:
                        index[succ] = len(order)
                        order.append(succ)
                    t = index[succ]
                    acc[t] = acc.get(t, 0.0) + p
            row[m] = acc
        transitions[s] = row

    n = len(order)
    costs = {
        (s, m): 1.0 for s in range(n) for m in transitions[s]
    }
    model = Mdp(
        n_states=n,
        initial=0,
        actions=AGENT_ACTIONS,
        transitions=transitions,
        costs=costs,
        labels={"crash": frozenset(crash), "target": frozenset(target)},
    )
    meaning = {index[j]: j for j in index}
    return LabeledMdp(model, frozenset(crash), frozenset(target), meaning, scenario)


def baseline_human_strategy(lmdp: LabeledMdp, noise: float = 0.0) -> Strategy:
    """Obstacle-blind greedy strategy with added randomness.

    Per state, moves that shrink the Manhattan distance from the agent cell
    to the nearest target share probability 1 - noise; the remaining enabled
    moves share noise. When either group is empty the other carries all the
    mass.
    """
    if not 0.0 <= noise <= 1.0:
        raise ValueError(f"noise {noise} outside [0, 1]")
    targets = lmdp.scenario.targets

    def dist_to_target(cell: Cell) -> int:
        return min(abs(cell[0] - t[0]) + abs(cell[1] - t[1]) for t in targets)

    choice = {}
    for s, (agent, _obstacles) in lmdp.state_meaning.items():
        moves = lmdp.model.enabled(s)
        d = dist_to_target(agent)
        reducing = [m for m in moves if dist_to_target(_shift(agent, m)) < d]
        rest = [m for m in moves if m not in reducing]
        dist: dict[str, float] = {}
        if not reducing:
            for m in rest:
                dist[m] = 1.0 / len(rest)
        elif not rest:
            for m in reducing:
                dist[m] = 1.0 / len(reducing)
        else:
            for m in reducing:
                dist[m] = (1.0 - noise) / len(reducing)
            for m in rest:
                dist[m] = noise / len(rest)
        choice[s] = dist
    return Strategy(choice)


def safety_spec(lmdp: LabeledMdp, bound: float) -> UntilProb:
    """The scenario's safety property: avoid crashes until the target."""
    return UntilProb(bound=bound, avoid=lmdp.crash, goal=lmdp.target)


def _cell_heatmap(lmdp: LabeledMdp, sigma: Strategy, best: bool) -> dict[Cell, float]:
    chain = induce_mc(lmdp.model, sigma)
    values = until_probabilities(chain, lmdp.crash, lmdp.target)
    target_cells = {lmdp.state_meaning[s][0] for s in lmdp.target}
    alive: dict[Cell, list[float]] = {}
    seen: set[Cell] = set()
    for s, (cell, _obstacles) in lmdp.state_meaning.items():
        seen.add(cell)
        if s not in lmdp.crash:
            alive.setdefault(cell, []).append(float(values[s]))
    result = {}
    for cell in seen:
        if cell in target_cells:
            result[cell] = 1.0
        elif cell in alive:
            result[cell] = max(alive[cell]) if best else min(alive[cell])
        else:
            # The agent is only ever here on top of an obstacle.
            result[cell] = 0.0
    return result


def worst_case_heatmap(lmdp: LabeledMdp, sigma: Strategy) -> dict[Cell, float]:
    """Per agent cell, the until-probability minimized over the reachable
    obstacle configurations in which the agent is still alive there.

    Target cells map to 1; cells that only occur co-located map to 0.
    """
    return _cell_heatmap(lmdp, sigma, best=False)


def best_case_heatmap(lmdp: LabeledMdp, sigma: Strategy) -> dict[Cell, float]:
    """Companion to worst_case_heatmap with the maximum instead."""
    return _cell_heatmap(lmdp, sigma, best=True)


def heatmap_matrix(lmdp: LabeledMdp, heat: dict[Cell, float]) -> np.ndarray:
    """Dense height x width matrix; cells without a value become NaN."""
    grid = np.full((lmdp.scenario.height, lmdp.scenario.width), np.nan)
    for (x, y), v in heat.items():
        grid[y, x] = v
    return grid

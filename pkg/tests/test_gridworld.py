from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from sharedctl.checking import expected_costs, until_probabilities
from sharedctl.gridworld import (
    GridScenario,
    Obstacle,
    baseline_human_strategy,
    best_case_heatmap,
    compile_scenario,
    heatmap_matrix,
    safety_spec,
    validate_scenario,
    worst_case_heatmap,
)
from sharedctl.model import induce_mc, validate_mdp

from .reference import until_vector


def corridor(obstacle_movement="uniform"):
    # one-row corridor: agent left, obstacle middle, target right
    return GridScenario(
        width=3,
        height=1,
        agent_start=(0, 0),
        targets=frozenset({(2, 0)}),
        obstacles=(Obstacle(start=(1, 0), movement=obstacle_movement),),
    )


def test_validate_scenario_flags_problems():
    bad = GridScenario(
        width=0, height=3, agent_start=(0, 0), targets=frozenset({(1, 1)})
    )
    assert validate_scenario(bad) == ["grid dimensions must be positive"]

    bad = GridScenario(
        width=3,
        height=3,
        agent_start=(1, 1),
        targets=frozenset(),
        walls=frozenset({(5, 5), (1, 1)}),
        obstacles=(
            Obstacle(start=(9, 9)),
            Obstacle(start=(0, 0), movement="drunk"),
            Obstacle(start=(2, 2), movement={(2, 2): {"fly": 1.0}}),
            Obstacle(start=(2, 0), movement={(2, 0): {"stay": 0.5}}),
        ),
        agent_slip=1.0,
    )
    problems = "\n".join(validate_scenario(bad))
    assert "wall (5, 5) outside" in problems
    assert "agent start (1, 1) blocked" in problems
    assert "no target cell" in problems
    assert "obstacle 0 start (9, 9)" in problems
    assert "unknown movement mode 'drunk'" in problems
    assert "unknown moves ['fly']" in problems
    assert "not a distribution" in problems
    assert "agent_slip 1.0" in problems


def test_compile_rejects_invalid_and_stuck_scenarios():
    with pytest.raises(ValueError, match="invalid scenario"):
        compile_scenario(
            GridScenario(width=2, height=2, agent_start=(0, 0), targets=frozenset())
        )
    with pytest.raises(ValueError, match="no legal move"):
        compile_scenario(
            GridScenario(width=1, height=1, agent_start=(0, 0),
                         targets=frozenset({(0, 0)}))
        )


def test_corridor_swap_collision_probabilities():
    lmdp = compile_scenario(corridor())
    model = lmdp.model
    # at the left edge of a one-row world the only legal move is right
    assert model.enabled(0) == ("right",)
    # moving right: the obstacle stays put with mass 3/5 (up/down fold into
    # stay) and we walk into it; with 1/5 it swaps through us; with 1/5 it
    # steps aside to the target cell
    row = model.transitions[0]["right"]
    crash_mass = sum(p for t, p in row.items() if t in lmdp.crash)
    assert crash_mass == pytest.approx(4 / 5)
    safe = [(t, p) for t, p in row.items() if t not in lmdp.crash]
    assert len(safe) == 1
    t, p = safe[0]
    assert p == pytest.approx(1 / 5)
    assert lmdp.state_meaning[t] == ((1, 0), ((2, 0),))


def test_crash_and_target_states_are_absorbing(grid3_scenario):
    lmdp = compile_scenario(grid3_scenario)
    for s in lmdp.crash | lmdp.target:
        for a, dist in lmdp.model.transitions[s].items():
            assert dist == {s: 1.0}
    # crash states are exactly the co-location states
    for s, (agent, obstacles) in lmdp.state_meaning.items():
        assert (s in lmdp.crash) == (agent in obstacles)
        if s in lmdp.target:
            assert agent in grid3_scenario.targets


def test_grid3_compiles_to_frozen_sizes(grid3_scenario):
    lmdp = compile_scenario(grid3_scenario)
    assert lmdp.model.n_states == 81
    assert len(lmdp.crash) == 9
    assert len(lmdp.target) == 8
    assert validate_mdp(lmdp.model) == []
    # unit cost on every enabled pair
    assert set(lmdp.model.costs.values()) == {1.0}


def test_grid8_compiles_to_frozen_sizes(grid8_scenario):
    lmdp = compile_scenario(grid8_scenario)
    assert lmdp.model.n_states == 3721
    assert len(lmdp.crash) == 61
    assert len(lmdp.target) == 60


def test_agent_slip_spreads_to_perpendicular_moves():
    sc = GridScenario(width=3, height=3, agent_start=(1, 1),
                      targets=frozenset({(2, 0)}), agent_slip=0.2)
    lmdp = compile_scenario(sc)
    cells = {lmdp.state_meaning[s][0]: s for s in lmdp.state_meaning}
    row = lmdp.model.transitions[cells[(1, 1)]]["up"]
    by_cell = {lmdp.state_meaning[t][0]: p for t, p in row.items()}
    assert by_cell[(1, 0)] == pytest.approx(0.8)
    assert by_cell[(0, 1)] == pytest.approx(0.1)
    assert by_cell[(2, 1)] == pytest.approx(0.1)
    # at the bottom edge a slip toward the outside folds back into staying
    row = lmdp.model.transitions[cells[(1, 2)]]["left"]
    by_cell = {lmdp.state_meaning[t][0]: p for t, p in row.items()}
    assert by_cell[(0, 2)] == pytest.approx(0.8)
    assert by_cell[(1, 1)] == pytest.approx(0.1)
    assert by_cell[(1, 2)] == pytest.approx(0.1)


def test_movement_table_folds_blocked_mass():
    # an obstacle commanded into the wall stays put instead
    lmdp = compile_scenario(
        corridor(obstacle_movement={(1, 0): {"up": 0.4, "right": 0.6}})
    )
    assert "left" not in lmdp.model.transitions[0]
    row = lmdp.model.transitions[0]["right"]
    by_joint = {lmdp.state_meaning[t]: p for t, p in row.items()}
    # up folds to stay: obstacle remains at (1, 0) with 0.4 (we crash into
    # it), moves to (2, 0) with 0.6
    assert by_joint[((1, 0), ((1, 0),))] == pytest.approx(0.4)
    assert by_joint[((1, 0), ((2, 0),))] == pytest.approx(0.6)


def test_baseline_human_prefers_distance_reducing_moves(grid3_scenario):
    lmdp = compile_scenario(replace(grid3_scenario, obstacles=()))
    cells = {lmdp.state_meaning[s][0]: s for s in lmdp.state_meaning}
    sigma = baseline_human_strategy(lmdp, noise=0.2)
    # at (0, 1) the moves toward (2, 0) are up and right; down is noise
    dist = sigma.choice[cells[(0, 1)]]
    assert dist["up"] == pytest.approx(0.4)
    assert dist["right"] == pytest.approx(0.4)
    assert dist["down"] == pytest.approx(0.2)
    # both enabled moves at the start reduce the distance, so they split
    # evenly whatever the noise
    start = sigma.choice[cells[(0, 2)]]
    assert start["up"] == pytest.approx(0.5)
    assert start["right"] == pytest.approx(0.5)
    with pytest.raises(ValueError, match="noise"):
        baseline_human_strategy(lmdp, noise=1.5)


def test_noise_free_human_walks_shortest_paths(grid3_scenario):
    lmdp = compile_scenario(replace(grid3_scenario, obstacles=()))
    sigma = baseline_human_strategy(lmdp, noise=0.0)
    costs = expected_costs(induce_mc(lmdp.model, sigma), lmdp.target)
    # Manhattan distance from (0, 2) to (2, 0) is four unit-cost steps
    assert costs[0] == pytest.approx(4.0, abs=1e-9)


def test_until_value_on_grid3_frozen(grid3_scenario):
    lmdp = compile_scenario(grid3_scenario)
    sigma = baseline_human_strategy(lmdp, noise=0.2)
    vals = until_probabilities(induce_mc(lmdp.model, sigma), lmdp.crash, lmdp.target)
    assert vals[0] == pytest.approx(0.4853977067825216, abs=1e-12)
    spec = safety_spec(lmdp, bound=0.4)
    assert spec.avoid == lmdp.crash and spec.goal == lmdp.target
    assert spec.bound == 0.4


def test_until_matches_dense_reference_on_grid3(grid3_scenario):
    lmdp = compile_scenario(grid3_scenario)
    sigma = baseline_human_strategy(lmdp, noise=0.2)
    got = until_probabilities(induce_mc(lmdp.model, sigma), lmdp.crash, lmdp.target)
    want = until_vector(lmdp.model, sigma, lmdp.crash, lmdp.target)
    assert np.max(np.abs(got - want)) < 1e-9


def test_heatmaps_on_grid3_frozen(grid3_scenario):
    lmdp = compile_scenario(grid3_scenario)
    sigma = baseline_human_strategy(lmdp, noise=0.2)
    worst = heatmap_matrix(lmdp, worst_case_heatmap(lmdp, sigma))
    want = np.array([
        [0.26313951656876150, 0.23507232144086720, 1.0],
        [0.36714881873403454, 0.31283258105924390, 0.23507232144086718],
        [0.40450800270555115, 0.36714881873403450, 0.26313951656876133],
    ])
    assert np.max(np.abs(worst - want)) < 1e-9
    best = heatmap_matrix(lmdp, best_case_heatmap(lmdp, sigma))
    assert (best >= worst - 1e-12).all()
    # target cell pins to 1, and the best case at the start is the actual
    # initial-state value
    assert best[0, 2] == 1.0
    assert best[2, 0] == pytest.approx(0.4853977067825216, abs=1e-12)


def test_heatmap_against_statewise_reference(grid3_scenario):
    lmdp = compile_scenario(grid3_scenario)
    sigma = baseline_human_strategy(lmdp, noise=0.3)
    vals = until_vector(lmdp.model, sigma, lmdp.crash, lmdp.target)
    target_cells = {lmdp.state_meaning[s][0] for s in lmdp.target}
    by_cell: dict[tuple[int, int], list[float]] = {}
    for s, (cell, _) in lmdp.state_meaning.items():
        if s not in lmdp.crash:
            by_cell.setdefault(cell, []).append(float(vals[s]))
    got = worst_case_heatmap(lmdp, sigma)
    for cell, value in got.items():
        if cell in target_cells:
            assert value == 1.0
        elif cell in by_cell:
            assert value == pytest.approx(min(by_cell[cell]), abs=1e-9)
        else:
            assert value == 0.0


def test_heatmap_without_obstacles_equals_until(grid3_scenario):
    lmdp = compile_scenario(replace(grid3_scenario, obstacles=()))
    sigma = baseline_human_strategy(lmdp, noise=0.2)
    vals = until_probabilities(induce_mc(lmdp.model, sigma), lmdp.crash, lmdp.target)
    worst = worst_case_heatmap(lmdp, sigma)
    best = best_case_heatmap(lmdp, sigma)
    assert worst == best
    for s, (cell, _) in lmdp.state_meaning.items():
        if cell in lmdp.scenario.targets:
            assert worst[cell] == 1.0
        else:
            assert worst[cell] == pytest.approx(float(vals[s]), abs=1e-12)


def test_immobile_obstacle_cell_reads_zero():
    sc = GridScenario(
        width=3, height=3, agent_start=(0, 2), targets=frozenset({(2, 0)}),
        obstacles=(Obstacle(start=(1, 1), movement={(1, 1): {"stay": 1.0}}),),
    )
    lmdp = compile_scenario(sc)
    sigma = baseline_human_strategy(lmdp, noise=0.2)
    heat = worst_case_heatmap(lmdp, sigma)
    # the agent is never alive on top of the parked obstacle
    assert heat[(1, 1)] == 0.0


def test_heatmap_matrix_marks_walls_nan():
    sc = GridScenario(
        width=3, height=2, agent_start=(0, 0), targets=frozenset({(2, 0)}),
        walls=frozenset({(1, 1)}),
    )
    lmdp = compile_scenario(sc)
    sigma = baseline_human_strategy(lmdp)
    mat = heatmap_matrix(lmdp, worst_case_heatmap(lmdp, sigma))
    assert mat.shape == (2, 3)
    assert np.isnan(mat[1, 1])
    assert not np.isnan(mat[0, 0])

"""Regenerate the JSON fixtures under data/.

The two-branch model is the small running example used across the test
suite; the grid scenarios feed the compilation, repair, and service tests.
Run from the repository root: python3 scripts/build_fixtures.py
"""

from pathlib import Path

from sharedctl import Mdp, Strategy
from sharedctl.gridworld import GridScenario, Obstacle
from sharedctl.modelio import save_model, save_scenario, save_strategy

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"


def twobranch() -> Mdp:
    transitions = {
        0: {"a": {1: 0.6, 3: 0.4}, "b": {1: 0.4, 3: 0.6}},
        1: {"c": {2: 0.6, 4: 0.4}, "d": {2: 0.4, 4: 0.6}},
        2: {"a": {2: 1.0}, "b": {2: 1.0}},
        3: {"a": {3: 1.0}, "b": {3: 1.0}},
        4: {"a": {4: 1.0}, "b": {4: 1.0}},
    }
    labels = {
        "s2": frozenset({2}),
        "s3": frozenset({3}),
        "s4": frozenset({4}),
    }
    return Mdp(
        n_states=5,
        initial=0,
        actions=("a", "b", "c", "d"),
        transitions=transitions,
        labels=labels,
    )


def twobranch_uniform() -> Strategy:
    return Strategy(
        {
            0: {"a": 0.5, "b": 0.5},
            1: {"c": 0.5, "d": 0.5},
            2: {"a": 0.5, "b": 0.5},
            3: {"a": 0.5, "b": 0.5},
            4: {"a": 0.5, "b": 0.5},
        }
    )


def grid8() -> GridScenario:
    return GridScenario(
        width=8,
        height=8,
        agent_start=(0, 7),
        targets=frozenset({(7, 0)}),
        walls=frozenset({(3, 3), (3, 4), (4, 3)}),
        obstacles=(Obstacle(start=(5, 2)),),
        agent_slip=0.1,
    )


def grid3() -> GridScenario:
    return GridScenario(
        width=3,
        height=3,
        agent_start=(0, 2),
        targets=frozenset({(2, 0)}),
        walls=frozenset(),
        obstacles=(Obstacle(start=(2, 2)),),
        agent_slip=0.0,
    )


def main():
    DATA.mkdir(exist_ok=True)
    save_model(DATA / "twobranch.json", twobranch())
    save_strategy(DATA / "twobranch_uniform.json", twobranch_uniform())
    save_scenario(DATA / "grid8.json", grid8())
    save_scenario(DATA / "grid3.json", grid3())
    print("fixtures written to", DATA)


if __name__ == "__main__":
    main()

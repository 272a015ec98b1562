"""Estimating a human strategy from observed trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import Mdp, Strategy


@dataclass(frozen=True)
class Trajectory:
    """Observed run: (state, action) steps plus the final state reached."""

    steps: tuple[tuple[int, str], ...]
    final_state: int | None = None


def validate_trajectory(model: Mdp, trajectory: Trajectory) -> list[str]:
    """Check that consecutive steps follow positive-probability transitions."""
    problems = []
    steps = trajectory.steps
    for i, (s, a) in enumerate(steps):
        dist = model.transitions.get(s, {}).get(a)
        if dist is None:
            problems.append(f"step {i}: action {a!r} disabled at state {s}")
            continue
        nxt = steps[i + 1][0] if i + 1 < len(steps) else trajectory.final_state
        if nxt is None:
            continue
        if dist.get(nxt, 0.0) <= 0.0:
            problems.append(
                f"step {i}: transition {s} --{a}--> {nxt} has zero probability"
            )
    return problems


def estimate_strategy(
    model: Mdp,
    trajectories: list[Trajectory] | tuple[Trajectory, ...],
    smoothing: float = 0.0,
) -> Strategy:
    """Frequency estimate of the strategy that generated the trajectories.

    estimate(s)(a) = (count(s, a) + smoothing) / (count(s) + smoothing * |Act(s)|)

    States never visited fall back to the uniform distribution over their
    enabled actions.
    """
    if smoothing < 0:
        raise ValueError(f"smoothing must be nonnegative: {smoothing}")
    counts: dict[int, dict[str, int]] = {}
    for trajectory in trajectories:
        bad = validate_trajectory(model, trajectory)
        if bad:
            raise ValueError("invalid trajectory: " + "; ".join(bad[:3]))
        for s, a in trajectory.steps:
            counts.setdefault(s, {})[a] = counts.get(s, {}).get(a, 0) + 1
    choice = {}
    for s in range(model.n_states):
        acts = model.enabled(s)
        seen = counts.get(s, {})
        total = sum(seen.values())
        if total == 0 and smoothing == 0.0:
            choice[s] = {a: 1.0 / len(acts) for a in acts}
            continue
        denom = total + smoothing * len(acts)
        choice[s] = {a: (seen.get(a, 0) + smoothing) / denom for a in acts}
    return Strategy(choice)


def hoeffding_sample_size(epsilon: float, delta: float) -> int:
    """Samples per state so a frequency estimate is epsilon-accurate
    with confidence 1 - delta (two-sided Hoeffding bound)."""
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1): {epsilon}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1): {delta}")
    return math.ceil(math.log(2.0 / delta) / (2.0 * epsilon * epsilon))


def record_trajectory(model: Mdp, events: list[tuple[int, str, int]]) -> Trajectory:
    """Build a trajectory from (state, action, successor) session events."""
    steps = []
    final = None
    for i, (s, a, nxt) in enumerate(events):
        steps.append((s, a))
        if i + 1 < len(events) and events[i + 1][0] != nxt:
            raise ValueError(
                f"event {i + 1} starts at state {events[i + 1][0]}, "
                f"but the previous event ended at {nxt}"
            )
        final = nxt
    trajectory = Trajectory(steps=tuple(steps), final_state=final)
    bad = validate_trajectory(model, trajectory)
    if bad:
        raise ValueError("invalid trajectory: " + "; ".join(bad[:3]))
    return trajectory

"""Core types: MDPs, induced Markov chains, strategies, blending, perturbations.

States are integers 0..n-1. Actions are names drawn from a global alphabet;
each state enables a nonempty subset. Transition functions are partial: only
enabled state/action pairs carry a distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

# Tolerance for "sums to one" checks on distributions.
DIST_TOL = 1e-9
# Tolerance for exact algebraic identities (blend/perturb round trips).
ALGEBRA_TOL = 1e-12


@dataclass(frozen=True)
class Mdp:
    """MDP with a global action alphabet and a partial transition function.

    transitions[s][a] is a dict successor -> probability for every enabled
    action a of state s. costs, when present, maps enabled (s, a) pairs to a
    nonnegative cost. labels maps a name to a set of states.
    """

    n_states: int
    initial: int
    actions: tuple[str, ...]
    transitions: dict[int, dict[str, dict[int, float]]]
    costs: dict[tuple[int, str], float] | None = None
    labels: dict[str, frozenset[int]] = field(default_factory=dict)

    def enabled(self, state: int) -> tuple[str, ...]:
        """Enabled actions of a state, in alphabet order."""
        row = self.transitions.get(state, {})
        return tuple(a for a in self.actions if a in row)

    @property
    def has_costs(self) -> bool:
        return self.costs is not None

    def states_with_label(self, name: str) -> frozenset[int]:
        try:
            return self.labels[name]
        except KeyError:
            raise KeyError(f"unknown label {name!r}") from None


@dataclass(frozen=True)
class MarkovChain:
    """Markov chain induced by fixing a strategy: sparse row-stochastic matrix.

    costs, when present, is the per-state expected one-step cost under the
    inducing strategy.
    """

    n_states: int
    initial: int
    matrix: sp.csr_matrix
    costs: np.ndarray | None = None


@dataclass(frozen=True)
class Strategy:
    """Memoryless randomized strategy: per-state distribution over actions."""

    choice: dict[int, dict[str, float]]

    def prob(self, state: int, action: str) -> float:
        return self.choice.get(state, {}).get(action, 0.0)

    def states(self) -> list[int]:
        return sorted(self.choice)


@dataclass(frozen=True)
class BlendingFunction:
    """State-wise confidence weight on the human strategy, values in [0, 1].

    States absent from ``weights`` fall back to ``default``.
    """

    weights: dict[int, float] = field(default_factory=dict)
    default: float = 0.0

    def __post_init__(self):
        for s, w in self.weights.items():
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"blending weight at state {s} outside [0, 1]: {w}")
        if not 0.0 <= self.default <= 1.0:
            raise ValueError(f"default blending weight outside [0, 1]: {self.default}")

    def value(self, state: int) -> float:
        return self.weights.get(state, self.default)

    @staticmethod
    def uniform(weight: float) -> "BlendingFunction":
        return BlendingFunction(weights={}, default=weight)


@dataclass(frozen=True)
class Perturbation:
    """Additive strategy perturbation; per-state entries sum to zero."""

    delta: dict[int, dict[str, float]]

    def entry(self, state: int, action: str) -> float:
        return self.delta.get(state, {}).get(action, 0.0)


def validate_mdp(model: Mdp) -> list[str]:
    """Return a list of invariant violations (empty when the model is sound)."""
    problems: list[str] = []
    if model.n_states <= 0:
        problems.append("model has no states")
    if not 0 <= model.initial < model.n_states:
        problems.append(f"initial state {model.initial} out of range")
    alphabet = set(model.actions)
    if len(alphabet) != len(model.actions):
        problems.append("duplicate action names in alphabet")
    for s in range(model.n_states):
        row = model.transitions.get(s, {})
        if not row:
            problems.append(f"state {s} has no enabled action (deadlock)")
            continue
        for a, dist in row.items():
            if a not in alphabet:
                problems.append(f"state {s} enables unknown action {a!r}")
            if not dist:
                problems.append(f"({s}, {a}) has an empty distribution")
                continue
            total = 0.0
            for t, p in dist.items():
                if not 0 <= t < model.n_states:
                    problems.append(f"({s}, {a}) targets out-of-range state {t}")
                if p < -DIST_TOL or p > 1 + DIST_TOL:
                    problems.append(f"({s}, {a}) -> {t} has probability {p} outside [0, 1]")
                total += p
            if abs(total - 1.0) > DIST_TOL:
                problems.append(f"({s}, {a}) sums to {total}, expected 1")
    if model.costs is not None:
        for (s, a), c in model.costs.items():
            if a not in model.transitions.get(s, {}):
                problems.append(f"cost attached to disabled pair ({s}, {a})")
            if c < 0:
                problems.append(f"negative cost at ({s}, {a}): {c}")
    for name, states in model.labels.items():
        for s in states:
            if not 0 <= s < model.n_states:
                problems.append(f"label {name!r} names out-of-range state {s}")
    return problems


def validate_strategy(model: Mdp, sigma: Strategy) -> list[str]:
    """Check that sigma is a distribution over enabled actions at every state."""
    problems: list[str] = []
    for s in range(model.n_states):
        dist = sigma.choice.get(s)
        if dist is None:
            problems.append(f"strategy undefined at state {s}")
            continue
        enabled = set(model.transitions.get(s, {}))
        total = 0.0
        for a, p in dist.items():
            if p < -DIST_TOL:
                problems.append(f"strategy({s})({a}) is negative: {p}")
            if p > DIST_TOL and a not in enabled:
                problems.append(f"strategy({s}) puts {p} on disabled action {a!r}")
            total += p
        if abs(total - 1.0) > DIST_TOL:
            problems.append(f"strategy({s}) sums to {total}, expected 1")
    return problems


def uniform_strategy(model: Mdp) -> Strategy:
    """Uniform distribution over the enabled actions of every state."""
    choice = {}
    for s in range(model.n_states):
        acts = model.enabled(s)
        choice[s] = {a: 1.0 / len(acts) for a in acts}
    return Strategy(choice)


def deterministic_strategy(model: Mdp, picks: dict[int, str]) -> Strategy:
    """Dirac strategy from a state -> action map."""
    choice = {}
    for s in range(model.n_states):
        a = picks[s]
        if a not in model.transitions.get(s, {}):
            raise ValueError(f"action {a!r} is disabled at state {s}")
        choice[s] = {a: 1.0}
    return Strategy(choice)


def induce_mc(model: Mdp, sigma: Strategy) -> MarkovChain:
    """Collapse an MDP under a strategy into the induced Markov chain.

    P(s, s') = sum over enabled actions a of sigma(s)(a) * P(s, a)(s').
    Raises ValueError if sigma puts positive mass on a disabled action or is
    undefined at some state.
    """
    bad = validate_strategy(model, sigma)
    if bad:
        raise ValueError("invalid strategy: " + "; ".join(bad[:5]))
    rows, cols, vals = [], [], []
    costs = np.zeros(model.n_states) if model.costs is not None else None
    for s in range(model.n_states):
        acc: dict[int, float] = {}
        for a, p_a in sigma.choice[s].items():
            if p_a <= 0.0:
                continue
            for t, p in model.transitions[s][a].items():
                acc[t] = acc.get(t, 0.0) + p_a * p
            if costs is not None:
                costs[s] += p_a * model.costs.get((s, a), 0.0)
        for t, p in acc.items():
            rows.append(s)
            cols.append(t)
            vals.append(p)
    matrix = sp.csr_matrix(
        (vals, (rows, cols)), shape=(model.n_states, model.n_states)
    )
    return MarkovChain(model.n_states, model.initial, matrix, costs)


def blend(human: Strategy, autonomous: Strategy, blending: BlendingFunction) -> Strategy:
    """Pointwise convex combination weighted toward the human by b(s).

    blended(s)(a) = b(s) * human(s)(a) + (1 - b(s)) * autonomous(s)(a)
    """
    if set(human.choice) != set(autonomous.choice):
        raise ValueError("strategies are defined over different state sets")
    choice = {}
    for s, h_dist in human.choice.items():
        a_dist = autonomous.choice[s]
        w = blending.value(s)
        choice[s] = {
            a: w * h_dist.get(a, 0.0) + (1.0 - w) * a_dist.get(a, 0.0)
            for a in sorted(set(h_dist) | set(a_dist))
        }
    return Strategy(choice)


def perturbation_between(base: Strategy, other: Strategy) -> Perturbation:
    """Perturbation delta with other = base + delta (rows sum to zero)."""
    if set(base.choice) != set(other.choice):
        raise ValueError("strategies are defined over different state sets")
    delta = {}
    for s, b_dist in base.choice.items():
        o_dist = other.choice[s]
        actions = set(b_dist) | set(o_dist)
        delta[s] = {a: o_dist.get(a, 0.0) - b_dist.get(a, 0.0) for a in actions}
    return Perturbation(delta)


def apply_perturbation(sigma: Strategy, delta: Perturbation) -> Strategy:
    """Shift a strategy by delta, checking the result stays stochastic."""
    choice = {}
    for s, dist in sigma.choice.items():
        d_row = delta.delta.get(s, {})
        row_sum = sum(d_row.values())
        if abs(row_sum) > DIST_TOL:
            raise ValueError(f"perturbation row at state {s} sums to {row_sum}, expected 0")
        new_dist = {}
        for a in set(dist) | set(d_row):
            v = dist.get(a, 0.0) + d_row.get(a, 0.0)
            if v < -DIST_TOL or v > 1 + DIST_TOL:
                raise ValueError(
                    f"perturbed strategy({s})({a}) = {v} falls outside [0, 1]"
                )
            new_dist[a] = min(max(v, 0.0), 1.0)
        choice[s] = new_dist
    return Strategy(choice)


def deviation_inf_norm(delta: Perturbation) -> float:
    """Largest absolute entry of the perturbation."""
    worst = 0.0
    for row in delta.delta.values():
        for v in row.values():
            worst = max(worst, abs(v))
    return worst

"""Model checking of induced Markov chains.

Supports unbounded reachability probabilities, until probabilities (reach a
goal while avoiding a set), and expected accumulated cost to a goal. Every
quantity is available through two interchangeable backends: a sparse linear
solve after qualitative elimination, and plain value iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import MarkovChain, Mdp, Strategy, induce_mc

VI_TOL = 1e-10
VI_MAX_ITER = 10**6
# Slack used when comparing a computed value against a spec bound, so that a
# certificate sitting exactly on the bound is not rejected for float noise.
BOUND_TOL = 1e-9


def _state_set(raw, field_name: str) -> frozenset[int]:
    """Coerce a state collection to frozenset[int], rejecting label names.

    A string is iterable, so passing a label here would otherwise dissolve
    into its characters and fail far away from the mistake.
    """
    if isinstance(raw, str):
        raise TypeError(
            f"{field_name} takes a set of state indices, not a label name; "
            f"resolve it first, e.g. model.labels[{raw!r}]"
        )
    states = frozenset(raw)
    for s in states:
        if not isinstance(s, (int, np.integer)):
            raise TypeError(f"{field_name} contains a non-integer state: {s!r}")
    return states


@dataclass(frozen=True)
class SafetyReach:
    """Bound on the probability of eventually reaching ``target``.

    direction "<=" reads: reaching the target set (e.g. bad states) must not
    be too likely. ">=" is the dual lower bound.
    """

    bound: float
    target: frozenset[int]
    direction: str = "<="

    def __post_init__(self):
        if not 0.0 <= self.bound <= 1.0:
            raise ValueError(f"probability bound outside [0, 1]: {self.bound}")
        if self.direction not in ("<=", ">="):
            raise ValueError(f"unknown direction {self.direction!r}")
        object.__setattr__(self, "target", _state_set(self.target, "target"))


@dataclass(frozen=True)
class UntilProb:
    """Lower bound on P(avoid-states are dodged until goal is reached)."""

    bound: float
    avoid: frozenset[int]
    goal: frozenset[int]

    def __post_init__(self):
        if not 0.0 <= self.bound <= 1.0:
            raise ValueError(f"probability bound outside [0, 1]: {self.bound}")
        object.__setattr__(self, "avoid", _state_set(self.avoid, "avoid"))
        object.__setattr__(self, "goal", _state_set(self.goal, "goal"))


@dataclass(frozen=True)
class ExpectedCost:
    """Upper bound on the expected accumulated cost until reaching ``goal``."""

    bound: float
    goal: frozenset[int]

    def __post_init__(self):
        if self.bound < 0:
            raise ValueError(f"cost bound must be nonnegative: {self.bound}")
        object.__setattr__(self, "goal", _state_set(self.goal, "goal"))


Specification = SafetyReach | UntilProb | ExpectedCost


@dataclass(frozen=True)
class CheckResult:
    spec: Specification
    satisfied: bool
    value: float
    per_state_values: np.ndarray


def prob0_states(chain: MarkovChain, target: frozenset[int]) -> frozenset[int]:
    """States from which the target is graph-unreachable.

    Backward reachability as repeated sparse matrix-vector products; each
    pass extends the reached set by one edge layer.
    """
    n = chain.n_states
    seen = np.zeros(n, dtype=bool)
    seen[list(target)] = True
    while True:
        grown = seen | ((chain.matrix @ seen.astype(float)) > 0.0)
        if (grown == seen).all():
            return frozenset(np.flatnonzero(~seen))
        seen = grown


def reach_probabilities(
    chain: MarkovChain, target: frozenset[int], method: str = "linear"
) -> np.ndarray:
    """Per-state probability of eventually reaching the target set.

    Parameters
    ----------
    chain : MarkovChain
    target : frozenset[int]
        Absorbing or not; probabilities refer to the first visit.
    method : str
        "linear" solves the sparse system on states with nontrivial value,
        "value-iteration" iterates from below to tolerance 1e-10.
    """
    n = chain.n_states
    if not target:
        return np.zeros(n)
    for t in target:
        if not 0 <= t < n:
            raise ValueError(f"target state {t} out of range")
    zero = prob0_states(chain, target)
    p = np.zeros(n)
    p[list(target)] = 1.0
    unknown = np.array(
        sorted(set(range(n)) - set(target) - set(zero)), dtype=int
    )
    if unknown.size == 0:
        return p
    if method == "linear":
        sub = chain.matrix[unknown][:, unknown]
        ident = sp.identity(unknown.size, format="csr")
        rhs = np.asarray(
            chain.matrix[unknown][:, sorted(target)].sum(axis=1)
        ).ravel()
        sol = spla.spsolve((ident - sub).tocsc(), rhs)
        p[unknown] = np.atleast_1d(sol)
    elif method == "value-iteration":
        target_idx = np.array(sorted(target), dtype=int)
        zero_idx = np.array(sorted(zero), dtype=int)
        prev_step = math.inf
        streak = 0
        for _ in range(VI_MAX_ITER):
            nxt = chain.matrix @ p
            nxt[target_idx] = 1.0
            if zero_idx.size:
                nxt[zero_idx] = 0.0
            step = float(np.max(np.abs(nxt - p)))
            p = nxt
            # stop on the geometric residual bound step * rho / (1 - rho),
            # not the raw step size, so the values themselves are converged
            # to VI_TOL; require it twice to ride out transient ratios
            if step == 0.0:
                break
            rho = step / prev_step
            prev_step = step
            if rho < 1.0 and step * rho / (1.0 - rho) < VI_TOL:
                streak += 1
                if streak >= 2:
                    break
            else:
                streak = 0
    else:
        raise ValueError(f"unknown backend {method!r}")
    return np.clip(p, 0.0, 1.0)


def until_probabilities(
    chain: MarkovChain,
    avoid: frozenset[int],
    goal: frozenset[int],
    method: str = "linear",
) -> np.ndarray:
    """Per-state probability of reaching goal without first entering avoid.

    Avoid states are made absorbing, then this reduces to plain reachability.
    A state in both sets counts as goal.
    """
    blocked = sorted(avoid - goal)
    if blocked:
        n = chain.n_states
        keep = np.ones(n)
        keep[blocked] = 0.0
        loops = sp.csr_matrix(
            (np.ones(len(blocked)), (blocked, blocked)), shape=(n, n)
        )
        matrix = (sp.diags(keep) @ chain.matrix + loops).tocsr()
        transformed = MarkovChain(chain.n_states, chain.initial, matrix, chain.costs)
    else:
        transformed = chain
    return reach_probabilities(transformed, goal, method=method)


def expected_costs(
    chain: MarkovChain, goal: frozenset[int], method: str = "linear"
) -> np.ndarray:
    """Expected accumulated cost until the first visit to goal.

    Value is 0 on goal states and +inf wherever goal is reached with
    probability below one. Requires the chain to carry costs.
    """
    if chain.costs is None:
        raise ValueError("chain carries no cost annotations")
    n = chain.n_states
    reach = reach_probabilities(chain, goal, method="linear")
    r = np.full(n, np.inf)
    r[list(goal)] = 0.0
    finite = np.array(
        sorted(
            s
            for s in range(n)
            if s not in goal and reach[s] >= 1.0 - BOUND_TOL
        ),
        dtype=int,
    )
    if finite.size == 0:
        return r
    if method == "linear":
        sub = chain.matrix[finite][:, finite]
        ident = sp.identity(finite.size, format="csr")
        sol = spla.spsolve((ident - sub).tocsc(), chain.costs[finite])
        r[finite] = np.atleast_1d(sol)
    elif method == "value-iteration":
        goal_idx = np.array(sorted(goal), dtype=int)
        v = np.zeros(n)
        # Iterate only over almost-surely-reaching states; others stay +inf.
        mask = np.zeros(n, dtype=bool)
        mask[finite] = True
        prev_step = math.inf
        streak = 0
        for _ in range(VI_MAX_ITER):
            nxt = chain.costs + chain.matrix @ v
            nxt[~mask] = v[~mask]
            nxt[goal_idx] = 0.0
            step = float(np.max(np.abs(nxt - v)))
            v = nxt
            if step == 0.0:
                break
            rho = step / prev_step
            prev_step = step
            if rho < 1.0 and step * rho / (1.0 - rho) < VI_TOL:
                streak += 1
                if streak >= 2:
                    break
            else:
                streak = 0
        r[finite] = v[finite]
    else:
        raise ValueError(f"unknown backend {method!r}")
    return r


def satisfies(spec: Specification, value: float) -> bool:
    """Bound comparison with the shared tolerance slack."""
    if isinstance(spec, SafetyReach):
        if spec.direction == "<=":
            return value <= spec.bound + BOUND_TOL
        return value >= spec.bound - BOUND_TOL
    if isinstance(spec, UntilProb):
        return value >= spec.bound - BOUND_TOL
    if isinstance(spec, ExpectedCost):
        return bool(value <= spec.bound + BOUND_TOL)
    raise TypeError(f"unknown specification {spec!r}")


def evaluate_spec(
    chain: MarkovChain, spec: Specification, method: str = "linear"
) -> CheckResult:
    """Evaluate one specification on a chain."""
    if isinstance(spec, SafetyReach):
        values = reach_probabilities(chain, spec.target, method=method)
    elif isinstance(spec, UntilProb):
        values = until_probabilities(chain, spec.avoid, spec.goal, method=method)
    elif isinstance(spec, ExpectedCost):
        values = expected_costs(chain, spec.goal, method=method)
    else:
        raise TypeError(f"unknown specification {spec!r}")
    v = float(values[chain.initial])
    return CheckResult(spec, satisfies(spec, v), v, values)


def check(
    model: Mdp,
    sigma: Strategy,
    specs: list[Specification] | tuple[Specification, ...],
    method: str = "linear",
) -> list[CheckResult]:
    """Induce the chain for sigma once and evaluate every specification."""
    chain = induce_mc(model, sigma)
    return [evaluate_spec(chain, spec, method=method) for spec in specs]

"""Synthesis of blended strategies under probabilistic specifications.

The decision variable throughout is the blended strategy. Fixing the human
strategy and a blending function confines the blended strategy to a per-state
box inside the probability simplex; synthesis searches that box for a point
that satisfies the specifications while staying as close to the human
strategy as possible (inf-norm of the perturbation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize as sopt
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .checking import (
    BOUND_TOL,
    CheckResult,
    ExpectedCost,
    SafetyReach,
    Specification,
    UntilProb,
    check,
    evaluate_spec,
    prob0_states,
    satisfies,
)
from .model import (
    BlendingFunction,
    MarkovChain,
    Mdp,
    Perturbation,
    Strategy,
    deviation_inf_norm,
    induce_mc,
    perturbation_between,
)

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
SOLVER_LIMIT = "solver-limit"

# Resolution of the bisections on the deviation cap and on uniform blending.
BISECT_TOL = 1e-6
# Inner value-iteration tolerance of the box feasibility oracle.
BOX_VI_TOL = 1e-10
BOX_VI_MAX_ITER = 10**6


@dataclass(frozen=True)
class SynthesisProblem:
    """Synthesis instance: model, human strategy, blending, specifications.

    blending is either a fixed BlendingFunction or the string "synthesize"
    when the blending function itself is the unknown.
    """

    model: Mdp
    human: Strategy
    blending: BlendingFunction | str
    specs: tuple[Specification, ...]

    def fixed_blending(self) -> BlendingFunction:
        if not isinstance(self.blending, BlendingFunction):
            raise ValueError("problem does not fix a blending function")
        return self.blending


@dataclass
class SynthesisResult:
    status: str
    autonomous: Strategy | None = None
    blended: Strategy | None = None
    perturbation: Perturbation | None = None
    objective: float = math.inf
    blending_out: BlendingFunction | None = None
    certificates: list[CheckResult] = field(default_factory=list)
    trace: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RepairBounds:
    """Entrywise transition bounds over all strategies: lower <= P^sigma <= upper."""

    lower: sp.csr_matrix
    upper: sp.csr_matrix


def _strategy_array(model: Mdp, sigma: Strategy) -> np.ndarray:
    arr = np.zeros((model.n_states, len(model.actions)))
    index = {a: j for j, a in enumerate(model.actions)}
    for s, dist in sigma.choice.items():
        for a, p in dist.items():
            arr[s, index[a]] = p
    return arr


def _array_strategy(model: Mdp, arr: np.ndarray) -> Strategy:
    choice: dict[int, dict[str, float]] = {}
    for s in range(model.n_states):
        row = {}
        for j, a in enumerate(model.actions):
            if a in model.transitions[s]:
                row[a] = float(arr[s, j])
        choice[s] = row
    return Strategy(choice)


def _enabled_mask(model: Mdp) -> np.ndarray:
    mask = np.zeros((model.n_states, len(model.actions)), dtype=bool)
    index = {a: j for j, a in enumerate(model.actions)}
    for s in range(model.n_states):
        for a in model.transitions[s]:
            mask[s, index[a]] = True
    return mask


def _action_matrix(model: Mdp) -> sp.csr_matrix:
    """Stacked transition rows, one per (state, action) pair, shape (S*A, S)."""
    n, m = model.n_states, len(model.actions)
    index = {a: j for j, a in enumerate(model.actions)}
    rows, cols, vals = [], [], []
    for s in range(n):
        for a, dist in model.transitions[s].items():
            base = s * m + index[a]
            for t, p in dist.items():
                rows.append(base)
                cols.append(t)
                vals.append(p)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n * m, n))


def _blending_vector(model: Mdp, blending: BlendingFunction) -> np.ndarray:
    return np.array([blending.value(s) for s in range(model.n_states)])


def _boxes(
    model: Mdp,
    human_arr: np.ndarray,
    bvec: np.ndarray,
    cap: float | None = None,
    budget: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-entry bounds on the blended strategy.

    Blending confines entry (s, a) to [b*h, b*h + (1-b)]; cap additionally
    bounds the deviation from the human strategy, budget does the same for
    the repair path. Disabled entries are pinned to zero.
    """
    enabled = _enabled_mask(model)
    b = bvec[:, None]
    lower = b * human_arr
    upper = b * human_arr + (1.0 - b)
    if cap is not None:
        lower = np.maximum(lower, human_arr - cap)
        upper = np.minimum(upper, human_arr + cap)
    if budget is not None:
        lower = np.maximum(lower, human_arr - budget)
        upper = np.minimum(upper, human_arr + budget)
    lower = np.clip(lower, 0.0, 1.0)
    upper = np.clip(upper, 0.0, 1.0)
    lower[~enabled] = 0.0
    upper[~enabled] = 0.0
    return lower, upper


def local_strategy_box(
    problem: SynthesisProblem, state: int, cap: float | None = None
) -> dict[str, tuple[float, float]]:
    """Feasible interval for each enabled action of a state."""
    model = problem.model
    human_arr = _strategy_array(model, problem.human)
    bvec = _blending_vector(model, problem.fixed_blending())
    lower, upper = _boxes(model, human_arr, bvec, cap=cap)
    index = {a: j for j, a in enumerate(model.actions)}
    return {
        a: (float(lower[state, index[a]]), float(upper[state, index[a]]))
        for a in model.enabled(state)
    }


def _box_greedy(
    q: np.ndarray, lower: np.ndarray, upper: np.ndarray, maximize: bool = False
) -> np.ndarray:
    """Optimize a linear objective over one box-constrained simplex row.

    Assigns every entry its lower bound, then spends the remaining mass on
    actions in order of objective value.
    """
    x = lower.copy()
    rem = 1.0 - x.sum()
    order = np.argsort(-q if maximize else q, kind="stable")
    for j in order:
        if rem <= 0:
            break
        room = upper[j] - x[j]
        if room > 0:
            add = min(room, rem)
            x[j] += add
            rem -= add
    if rem > 1e-9:
        raise ValueError("box does not intersect the probability simplex")
    return x


def _tie_toward(
    q: np.ndarray,
    x: np.ndarray,
    reference: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
) -> np.ndarray:
    """Prefer the reference row when it achieves the same objective value."""
    if np.all(reference >= lower - 1e-12) and np.all(reference <= upper + 1e-12):
        if reference @ q <= x @ q + 1e-12:
            return np.clip(reference, lower, upper)
    return x


def min_reach_over_box(
    problem: SynthesisProblem,
    target: frozenset[int] | None = None,
    cap: float | None = None,
    maximize: bool = False,
) -> tuple[float, Strategy]:
    """Optimal reachability value over all blended strategies in the boxes.

    Value iteration where each state greedily re-optimizes its local
    distribution against the current continuation values. Returns the value
    at the initial state together with an optimizing blended strategy that
    deviates from the human strategy only where it pays off.
    """
    model = problem.model
    if target is None:
        reach_specs = [s for s in problem.specs if isinstance(s, SafetyReach)]
        if len(reach_specs) != 1:
            raise ValueError("problem does not carry a single reachability spec")
        target = reach_specs[0].target
    human_arr = _strategy_array(model, problem.human)
    bvec = _blending_vector(model, problem.fixed_blending())
    lower, upper = _boxes(model, human_arr, bvec, cap=cap)
    n, m = model.n_states, len(model.actions)
    amat = _action_matrix(model)
    target_idx = np.array(sorted(target), dtype=int)
    free = np.array([s for s in range(n) if s not in target], dtype=int)

    v = np.zeros(n)
    v[target_idx] = 1.0
    for _ in range(BOX_VI_MAX_ITER):
        q = (amat @ v).reshape(n, m)
        nxt = v.copy()
        for s in free:
            x = _box_greedy(q[s], lower[s], upper[s], maximize=maximize)
            nxt[s] = x @ q[s]
        if np.max(np.abs(nxt - v)) < BOX_VI_TOL:
            v = nxt
            break
        v = nxt

    q = (amat @ v).reshape(n, m)
    witness = human_arr.copy()
    for s in free:
        x = _box_greedy(q[s], lower[s], upper[s], maximize=maximize)
        witness[s] = _tie_toward(q[s], x, human_arr[s], lower[s], upper[s])
    # Rows of target states never influence the value; keep the human row
    # clipped into the box so the witness stays a valid blended strategy.
    for s in target_idx:
        witness[s] = _project_row(human_arr[s], lower[s], upper[s])
    return float(v[model.initial]), _array_strategy(model, witness)


def _project_row(row: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Clip a simplex row into a box and restore the unit sum."""
    x = np.clip(row, lower, upper)
    diff = 1.0 - x.sum()
    if abs(diff) <= 1e-15:
        return x
    if diff > 0:
        room = upper - x
        total = room.sum()
        if total <= 0:
            raise ValueError("box does not intersect the probability simplex")
        x += room * (diff / total)
    else:
        slack = x - lower
        total = slack.sum()
        if total <= 0:
            raise ValueError("box does not intersect the probability simplex")
        x += slack * (diff / total)
    return x


def _recover_autonomous(
    model: Mdp,
    human: Strategy,
    blending: BlendingFunction,
    blended: Strategy,
) -> Strategy:
    """Invert the blending equation for the autonomous strategy.

    sigma_a = (sigma_ha - b * sigma_h) / (1 - b); at states with full human
    confidence the autonomous strategy is unconstrained and defaults to the
    human one.
    """
    choice: dict[int, dict[str, float]] = {}
    for s in range(model.n_states):
        b = blending.value(s)
        h_dist = human.choice[s]
        if b >= 1.0 - 1e-12:
            choice[s] = dict(h_dist)
            continue
        dist = {}
        for a in model.enabled(s):
            v = (blended.prob(s, a) - b * h_dist.get(a, 0.0)) / (1.0 - b)
            dist[a] = max(v, 0.0)
        total = sum(dist.values())
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"autonomous recovery at state {s} sums to {total}")
        choice[s] = {a: v / total for a, v in dist.items()}
    return Strategy(choice)


def _result_from_blended(
    problem: SynthesisProblem,
    blended: Strategy,
    blending: BlendingFunction,
    status: str,
    trace: dict,
) -> SynthesisResult:
    autonomous = _recover_autonomous(problem.model, problem.human, blending, blended)
    perturbation = perturbation_between(problem.human, blended)
    certificates = check(problem.model, blended, problem.specs)
    return SynthesisResult(
        status=status,
        autonomous=autonomous,
        blended=blended,
        perturbation=perturbation,
        objective=deviation_inf_norm(perturbation),
        blending_out=blending,
        certificates=certificates,
        trace=trace,
    )


def synthesize_reachability(problem: SynthesisProblem) -> SynthesisResult:
    """Minimal-deviation blended strategy for one upper-bounded reachability spec.

    Bisects on the deviation cap t; at each t the feasibility oracle is the
    box-constrained minimal reachability value with every box intersected
    with [human - t, human + t]. Exact up to the bisection resolution.
    """
    if len(problem.specs) != 1 or not isinstance(problem.specs[0], SafetyReach):
        raise ValueError("expected exactly one reachability specification")
    spec = problem.specs[0]
    if spec.direction != "<=":
        raise ValueError("only upper-bounded reachability is supported here")
    blending = problem.fixed_blending()
    lam = spec.bound

    full_value, full_witness = min_reach_over_box(problem, spec.target, cap=None)
    if full_value > lam + BOUND_TOL:
        res = _result_from_blended(
            problem, full_witness, blending, INFEASIBLE,
            {"min_reach": full_value, "bound": lam},
        )
        res.objective = math.inf
        return res

    zero_value, _ = min_reach_over_box(problem, spec.target, cap=0.0)
    if zero_value <= lam + BOUND_TOL:
        blended = Strategy({s: dict(d) for s, d in problem.human.choice.items()})
        return _result_from_blended(
            problem, blended, blending, FEASIBLE, {"iterations": 0, "cap": 0.0}
        )

    lo, hi = 0.0, 1.0
    iterations = 0
    while hi - lo > BISECT_TOL:
        mid = 0.5 * (lo + hi)
        value, _ = min_reach_over_box(problem, spec.target, cap=mid)
        if value <= lam:
            hi = mid
        else:
            lo = mid
        iterations += 1
    _, witness = min_reach_over_box(problem, spec.target, cap=hi)
    return _result_from_blended(
        problem, witness, blending, FEASIBLE,
        {"iterations": iterations, "cap": hi, "bracket": (lo, hi)},
    )


def _violation(result: CheckResult) -> float:
    spec, v = result.spec, result.value
    if isinstance(spec, SafetyReach):
        gap = v - spec.bound if spec.direction == "<=" else spec.bound - v
    elif isinstance(spec, UntilProb):
        gap = spec.bound - v
    else:
        if math.isinf(spec.bound):
            return 0.0
        gap = (min(v, 1e9) - spec.bound) / max(spec.bound, 1.0)
    return max(0.0, gap)


def _total_violation(results: list[CheckResult]) -> float:
    return sum(_violation(r) for r in results)


def synthesize_general(
    problem: SynthesisProblem,
    max_iterations: int = 10_000,
    penalty_schedule: tuple[float, ...] = (1e1, 1e2, 1e3, 1e4, 1e5, 1e6),
) -> SynthesisResult:
    """Heuristic minimal-deviation synthesis for a mix of specifications.

    Penalized local search over the blended strategy: sweeps the states,
    moving one local distribution at a time toward its greedy target while
    the penalized objective ||delta||_inf + mu * violation improves, with an
    escalating penalty weight. A feasible iterate is then pulled back toward
    the human strategy along the segment between them. Never reports
    Infeasible; when the budget runs out it returns SolverLimit with the best
    iterate found.
    """
    model = problem.model
    blending = problem.fixed_blending()
    human_arr = _strategy_array(model, problem.human)
    base = check(model, problem.human, problem.specs)
    if all(r.satisfied for r in base):
        blended = Strategy({s: dict(d) for s, d in problem.human.choice.items()})
        return _result_from_blended(
            problem, blended, blending, FEASIBLE, {"iterations": 0}
        )

    bvec = _blending_vector(model, blending)
    lower, upper = _boxes(model, human_arr, bvec)
    n, m = model.n_states, len(model.actions)
    amat = _action_matrix(model)
    sigma = human_arr.copy()
    iterations = 0
    feasible_arr = None

    def objective(arr: np.ndarray, mu: float) -> tuple[float, float, list[CheckResult]]:
        results = check(model, _array_strategy(model, arr), problem.specs)
        viol = _total_violation(results)
        dev = float(np.max(np.abs(arr - human_arr)))
        return dev + mu * viol, viol, results

    for mu in penalty_schedule:
        improved = True
        while improved and iterations < max_iterations:
            improved = False
            f_cur, viol_cur, results = objective(sigma, mu)
            if viol_cur <= 0.0:
                feasible_arr = sigma.copy()
                break
            worst = max(results, key=_violation)
            values = _spec_direction_values(worst)
            q = (amat @ values).reshape(n, m)
            maximize = _wants_larger(worst.spec)
            for s in range(n):
                tgt = _box_greedy(q[s], lower[s], upper[s], maximize=maximize)
                if np.allclose(tgt, sigma[s], atol=1e-12):
                    continue
                for theta in (1.0, 0.5, 0.25, 0.1, 0.05):
                    iterations += 1
                    cand = sigma.copy()
                    cand[s] = sigma[s] + theta * (tgt - sigma[s])
                    f_new, _, _ = objective(cand, mu)
                    if f_new < f_cur - 1e-12:
                        sigma = cand
                        f_cur = f_new
                        improved = True
                        break
                    if iterations >= max_iterations:
                        break
                if iterations >= max_iterations:
                    break
        if feasible_arr is not None or iterations >= max_iterations:
            break

    if feasible_arr is None:
        blended = _array_strategy(model, sigma)
        res = _result_from_blended(
            problem, blended, blending, SOLVER_LIMIT, {"iterations": iterations}
        )
        return res

    # Pull the feasible iterate back toward the human strategy.
    lo, hi = 0.0, 1.0
    for _ in range(24):
        mid = 0.5 * (lo + hi)
        cand = human_arr + mid * (feasible_arr - human_arr)
        results = check(model, _array_strategy(model, cand), problem.specs)
        if all(r.satisfied for r in results):
            hi = mid
        else:
            lo = mid
    final = human_arr + hi * (feasible_arr - human_arr)
    blended = _array_strategy(model, final)
    return _result_from_blended(
        problem, blended, blending, FEASIBLE,
        {"iterations": iterations, "pullback": hi},
    )


def _wants_larger(spec: Specification) -> bool:
    if isinstance(spec, SafetyReach):
        return spec.direction == ">="
    if isinstance(spec, UntilProb):
        return True
    return False


def _spec_direction_values(result: CheckResult) -> np.ndarray:
    values = result.per_state_values.copy()
    if isinstance(result.spec, ExpectedCost):
        values[np.isinf(values)] = 1e12
    return values


def generalized_blending(
    problem: SynthesisProblem,
    mode: str = "uniform-max",
    state_resolution: float = 1e-3,
) -> SynthesisResult:
    """Synthesize the blending function itself.

    uniform-max finds the largest constant human confidence c for which the
    specifications stay achievable; per-state starts from zero confidence
    and greedily raises each state's weight while feasibility holds. For a
    single upper-bounded reachability spec feasibility probes are exact;
    other spec mixes fall back to the heuristic solver and never prove
    infeasibility (SolverLimit instead).
    """
    if problem.blending != "synthesize":
        raise ValueError('generalized blending expects blending="synthesize"')
    single_reach = (
        len(problem.specs) == 1
        and isinstance(problem.specs[0], SafetyReach)
        and problem.specs[0].direction == "<="
    )

    def feasible(blending: BlendingFunction) -> bool:
        fixed = SynthesisProblem(problem.model, problem.human, blending, problem.specs)
        if single_reach:
            spec = problem.specs[0]
            value, _ = min_reach_over_box(fixed, spec.target)
            return value <= spec.bound + BOUND_TOL
        sub = synthesize_general(fixed, max_iterations=2000)
        return sub.status == FEASIBLE

    if mode == "uniform-max":
        if not feasible(BlendingFunction.uniform(0.0)):
            if single_reach:
                return SynthesisResult(
                    status=INFEASIBLE, trace={"reason": "unachievable at zero confidence"}
                )
            return SynthesisResult(
                status=SOLVER_LIMIT, trace={"reason": "no feasible point found"}
            )
        if feasible(BlendingFunction.uniform(1.0)):
            best = 1.0
        else:
            lo, hi = 0.0, 1.0
            while hi - lo > BISECT_TOL:
                mid = 0.5 * (lo + hi)
                if feasible(BlendingFunction.uniform(mid)):
                    lo = mid
                else:
                    hi = mid
            best = lo
        blending = BlendingFunction.uniform(best)
    elif mode == "per-state":
        blending = BlendingFunction(weights={}, default=0.0)
        if not feasible(blending):
            if single_reach:
                return SynthesisResult(
                    status=INFEASIBLE, trace={"reason": "unachievable at zero confidence"}
                )
            return SynthesisResult(
                status=SOLVER_LIMIT, trace={"reason": "no feasible point found"}
            )
        weights: dict[int, float] = {}
        for s in range(problem.model.n_states):
            lo, hi = 0.0, 1.0
            if feasible(BlendingFunction(weights={**weights, s: 1.0}, default=0.0)):
                lo = 1.0
            else:
                while hi - lo > state_resolution:
                    mid = 0.5 * (lo + hi)
                    if feasible(BlendingFunction(weights={**weights, s: mid}, default=0.0)):
                        lo = mid
                    else:
                        hi = mid
            weights[s] = lo
        blending = BlendingFunction(weights=weights, default=0.0)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    fixed = SynthesisProblem(problem.model, problem.human, blending, problem.specs)
    if single_reach:
        result = synthesize_reachability(fixed)
    else:
        result = synthesize_general(fixed)
    result.blending_out = blending
    result.trace["mode"] = mode
    return result


def repair_bounds(model: Mdp) -> RepairBounds:
    """Entrywise bounds on induced chains over all strategies.

    upper(s, s') is the largest one-action probability of the move, lower
    the smallest with missing entries counting as zero.
    """
    n = model.n_states
    up_rows: dict[tuple[int, int], float] = {}
    low_rows: dict[tuple[int, int], float] = {}
    for s in range(n):
        actions = list(model.transitions[s].values())
        succs = set()
        for dist in actions:
            succs.update(dist)
        for t in succs:
            ps = [dist.get(t, 0.0) for dist in actions]
            up_rows[(s, t)] = max(ps)
            low = min(ps)
            if low > 0.0:
                low_rows[(s, t)] = low
    def build(entries):
        if not entries:
            return sp.csr_matrix((n, n))
        rows, cols = zip(*entries.keys())
        return sp.csr_matrix((list(entries.values()), (rows, cols)), shape=(n, n))
    return RepairBounds(lower=build(low_rows), upper=build(up_rows))


def _chain_matrix(model: Mdp, amat: sp.csr_matrix, sigma: np.ndarray) -> sp.csr_matrix:
    """Induced chain matrix straight from the dense strategy array."""
    n, m = sigma.shape
    sel = sp.csr_matrix(
        (sigma.ravel(), (np.repeat(np.arange(n), m), np.arange(n * m))),
        shape=(n, n * m),
    )
    return (sel @ amat).tocsr()


def _pinned_values(
    chainmat: sp.csr_matrix,
    ones: np.ndarray,
    zeros: np.ndarray,
    warm: np.ndarray | None = None,
) -> np.ndarray:
    """Reach-style value iteration with pinned boundary states.

    Pinning zeros each pass is equivalent to making those states absorbing
    with value zero, which turns until into plain reachability. A warm
    start from a nearby strategy's values cuts the pass count; the repair
    loop re-confirms any exit decision with a cold, authoritative check.
    """
    n = chainmat.shape[0]
    v = np.zeros(n) if warm is None else warm.copy()
    v[ones] = 1.0
    if zeros.size:
        v[zeros] = 0.0
    for _ in range(BOX_VI_MAX_ITER):
        nv = chainmat @ v
        nv[ones] = 1.0
        if zeros.size:
            nv[zeros] = 0.0
        if np.max(np.abs(nv - v)) < BOX_VI_TOL:
            return np.clip(nv, 0.0, 1.0)
        v = nv
    return np.clip(v, 0.0, 1.0)


def _occupancy(
    chainmat: sp.csr_matrix,
    initial: int,
    active: np.ndarray,
    warm: np.ndarray | None = None,
    gamma: float = 0.95,
) -> np.ndarray:
    """Discounted expected visit counts, used to rank states for repair.

    Fixed-point iteration of occ = e_init + gamma * P^T occ restricted to
    the active (non-frozen) states; the discount makes it a contraction, so
    any warm start converges to the same occupancy.
    """
    n = chainmat.shape[0]
    e = np.zeros(n)
    e[initial] = 1.0
    e *= active
    occ = np.zeros(n) if warm is None else warm.copy()
    ct = chainmat.T.tocsr()
    for _ in range(BOX_VI_MAX_ITER):
        nxt = e + gamma * (ct @ (occ * active))
        nxt *= active
        if np.max(np.abs(nxt - occ)) < 1e-9:
            return nxt
        occ = nxt
    return occ


def _greedy_targets(
    q: np.ndarray, lower: np.ndarray, upper: np.ndarray, maximize: bool
) -> np.ndarray:
    """Per-state box-greedy rows for every state at once.

    Same fill rule as _box_greedy, vectorized over states: start at the
    lower bounds, then pour the remaining mass over the actions in value
    order. Rows whose boxes contain a stochastic vector come out stochastic.
    """
    order = np.argsort(-q if maximize else q, axis=1, kind="stable")
    lo = np.take_along_axis(lower, order, axis=1)
    hi = np.take_along_axis(upper, order, axis=1)
    room = hi - lo
    remaining = np.maximum(1.0 - lower.sum(axis=1, keepdims=True), 0.0)
    used_before = np.cumsum(room, axis=1) - room
    add = np.clip(remaining - used_before, 0.0, room)
    filled = lo + add
    out = np.empty_like(filled)
    np.put_along_axis(out, order, filled, axis=1)
    return out


def _frozen_states(spec: Specification) -> frozenset[int]:
    if isinstance(spec, SafetyReach):
        return spec.target
    if isinstance(spec, UntilProb):
        return spec.avoid | spec.goal
    return spec.goal


def repair_synthesize(
    problem: SynthesisProblem,
    budget: float = 1.0,
    step: float = 0.05,
    max_iterations: int = 10_000,
) -> SynthesisResult:
    """Two-phase repair: greedy strategy repair, then an LP deviation cleanup.

    Phase one walks the blended strategy away from the human one, one state
    per iteration (the state with the steepest predicted improvement of the
    most violated specification), moving a fraction ``step`` toward the local
    greedy target and capping every entry's total change by ``budget``.
    Phase two freezes the resulting per-state values and solves the linear
    program that minimizes the deviation among all strategies consistent
    with those values. The final strategy is re-verified; if the LP point
    fails verification the phase-one strategy is kept.
    """
    model = problem.model
    blending = problem.fixed_blending()
    human_arr = _strategy_array(model, problem.human)
    bvec = _blending_vector(model, blending)
    lower, upper = _boxes(model, human_arr, bvec, budget=budget)
    n, m = model.n_states, len(model.actions)
    amat = _action_matrix(model)

    sigma = human_arr.copy()
    iterations = 0
    satisfied = False
    costarr = None
    if model.has_costs and any(isinstance(s, ExpectedCost) for s in problem.specs):
        costarr = np.zeros((n, m))
        for (s, a), c in model.costs.items():
            costarr[s, model.actions.index(a)] = c
    spec_ones = []
    spec_zeros = []
    frozen_masks = []
    for spec in problem.specs:
        frozen = _frozen_states(spec)
        mask = np.zeros(n, dtype=bool)
        mask[list(frozen)] = True
        frozen_masks.append(mask)
        if isinstance(spec, SafetyReach):
            spec_ones.append(np.array(sorted(spec.target), dtype=int))
            spec_zeros.append(np.array([], dtype=int))
        elif isinstance(spec, UntilProb):
            spec_ones.append(np.array(sorted(spec.goal), dtype=int))
            spec_zeros.append(np.array(sorted(spec.avoid - spec.goal), dtype=int))
        else:
            spec_ones.append(None)
            spec_zeros.append(None)
    value_warm: dict[int, np.ndarray] = {}
    occ_warm: dict[int, np.ndarray] = {}

    def survey(chainmat: sp.csr_matrix) -> list[CheckResult]:
        out = []
        costvec = (sigma * costarr).sum(axis=1) if costarr is not None else None
        for i, spec in enumerate(problem.specs):
            if isinstance(spec, ExpectedCost):
                mc = MarkovChain(n, model.initial, chainmat, costvec)
                out.append(evaluate_spec(mc, spec))
            else:
                vals = _pinned_values(
                    chainmat, spec_ones[i], spec_zeros[i], warm=value_warm.get(i)
                )
                value_warm[i] = vals
                v = float(vals[model.initial])
                out.append(CheckResult(spec, satisfies(spec, v), v, vals))
        return out

    while iterations < max_iterations:
        chainmat = _chain_matrix(model, amat, sigma)
        results = survey(chainmat)
        if all(r.satisfied for r in results):
            # Warm-started values are only a heuristic; the exit verdict
            # comes from a cold check through the standard backend.
            confirmed = check(model, _array_strategy(model, sigma), problem.specs)
            if all(r.satisfied for r in confirmed):
                satisfied = True
                break
            for i, res in enumerate(confirmed):
                if not isinstance(problem.specs[i], ExpectedCost):
                    value_warm[i] = res.per_state_values
            results = confirmed
        worst_idx = max(range(len(results)), key=lambda i: _violation(results[i]))
        worst = results[worst_idx]
        values = _spec_direction_values(worst)
        maximize = _wants_larger(worst.spec)
        q = np.asarray(amat @ values).reshape(n, m)
        fmask = frozen_masks[worst_idx]
        occ = _occupancy(chainmat, model.initial, ~fmask, warm=occ_warm.get(worst_idx))
        occ_warm[worst_idx] = occ

        targets = _greedy_targets(q, lower, upper, maximize)
        local = ((targets - sigma) * q).sum(axis=1)
        gains = occ * (local if maximize else -local)
        gains[fmask] = 0.0
        best_state = int(np.argmax(gains))
        if gains[best_state] <= 1e-14:
            break
        sigma[best_state] = sigma[best_state] + step * (targets[best_state] - sigma[best_state])
        iterations += 1

    trace = {"phase1_iterations": iterations, "phase1_satisfied": satisfied}
    if not satisfied:
        blended = _array_strategy(model, sigma)
        res = _result_from_blended(problem, blended, blending, SOLVER_LIMIT, trace)
        return res

    refined = _deviation_lp(problem, sigma, lower, upper, human_arr, amat)
    if refined is not None:
        results = check(model, _array_strategy(model, refined), problem.specs)
        if all(r.satisfied for r in results):
            trace["phase2"] = "applied"
            sigma = refined
        else:
            trace["phase2"] = "rejected by verification"
    else:
        trace["phase2"] = "lp not solved"
    blended = _array_strategy(model, sigma)
    return _result_from_blended(problem, blended, blending, FEASIBLE, trace)


def _deviation_lp(
    problem: SynthesisProblem,
    sigma: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    human_arr: np.ndarray,
    amat: sp.csr_matrix,
) -> np.ndarray | None:
    """Minimize the deviation over strategies consistent with frozen values.

    For each specification the per-state values of the phase-one strategy
    are held fixed, which turns the value-consistency constraints into
    affine equalities in the strategy entries.
    """
    model = problem.model
    n, m = model.n_states, len(model.actions)
    enabled = _enabled_mask(model)
    current = check(model, _array_strategy(model, sigma), problem.specs)

    var_index = -np.ones((n, m), dtype=int)
    variables = []
    for s in range(n):
        for j in range(m):
            if enabled[s, j]:
                var_index[s, j] = len(variables)
                variables.append((s, j))
    nvar = len(variables)
    t_index = nvar

    eq_rows, eq_cols, eq_vals, eq_rhs = [], [], [], []
    row = 0
    for s in range(n):
        for j in range(m):
            if enabled[s, j]:
                eq_rows.append(row)
                eq_cols.append(var_index[s, j])
                eq_vals.append(1.0)
        eq_rhs.append(1.0)
        row += 1

    for result in current:
        values = result.per_state_values.copy()
        frozen = _frozen_states(result.spec)
        finite = ~np.isinf(values)
        if isinstance(result.spec, ExpectedCost):
            weights_const = np.array(
                [
                    model.costs.get((s, a), 0.0) if model.costs else 0.0
                    for s in range(n)
                    for a in model.actions
                ]
            ).reshape(n, m)
        else:
            weights_const = np.zeros((n, m))
        vals_for_q = values.copy()
        vals_for_q[~finite] = 0.0
        q = (amat @ vals_for_q).reshape(n, m) + weights_const
        for s in range(n):
            if s in frozen or not finite[s]:
                continue
            for j in range(m):
                if enabled[s, j]:
                    eq_rows.append(row)
                    eq_cols.append(var_index[s, j])
                    eq_vals.append(q[s, j])
            eq_rhs.append(float(values[s]))
            row += 1

    a_eq = sp.csr_matrix((eq_vals, (eq_rows, eq_cols)), shape=(row, nvar + 1))
    b_eq = np.array(eq_rhs)

    ub_rows, ub_cols, ub_vals, ub_rhs = [], [], [], []
    r = 0
    for k, (s, j) in enumerate(variables):
        ub_rows += [r, r]
        ub_cols += [k, t_index]
        ub_vals += [1.0, -1.0]
        ub_rhs.append(human_arr[s, j])
        r += 1
        ub_rows += [r, r]
        ub_cols += [k, t_index]
        ub_vals += [-1.0, -1.0]
        ub_rhs.append(-human_arr[s, j])
        r += 1
    a_ub = sp.csr_matrix((ub_vals, (ub_rows, ub_cols)), shape=(r, nvar + 1))
    b_ub = np.array(ub_rhs)

    cost = np.zeros(nvar + 1)
    cost[t_index] = 1.0
    bounds = [(lower[s, j], upper[s, j]) for (s, j) in variables] + [(0.0, 1.0)]
    res = sopt.linprog(
        cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds,
        method="highs",
    )
    if not res.success:
        return None
    out = human_arr.copy()
    for k, (s, j) in enumerate(variables):
        out[s, j] = res.x[k]
    # Repair float drift so each row is exactly stochastic.
    for s in range(n):
        mask = enabled[s]
        total = out[s, mask].sum()
        if abs(total - 1.0) > 1e-12 and total > 0:
            out[s, mask] = out[s, mask] / total
    return out


def compare_deviation(exact: SynthesisResult, repaired: SynthesisResult) -> dict:
    """Gap report between the exact solver and the repair path.

    The repair path can never beat the exact solver; a negative gap beyond
    float tolerance indicates a broken solver and raises.
    """
    if exact.status != FEASIBLE or repaired.status != FEASIBLE:
        raise ValueError("both results must be feasible to compare")
    gap = repaired.objective - exact.objective
    if gap < -1e-6:
        raise RuntimeError(
            f"repair objective {repaired.objective} beats exact {exact.objective}"
        )
    return {
        "exact_objective": exact.objective,
        "repaired_objective": repaired.objective,
        "gap": gap,
    }

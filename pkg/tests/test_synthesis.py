from __future__ import annotations

import math

import numpy as np
import pytest

from sharedctl.checking import BOUND_TOL, SafetyReach, UntilProb, check
from sharedctl.model import (
    BlendingFunction,
    Mdp,
    Strategy,
    blend,
    deviation_inf_norm,
    perturbation_between,
    uniform_strategy,
)
from sharedctl.synthesis import (
    FEASIBLE,
    INFEASIBLE,
    SOLVER_LIMIT,
    SynthesisProblem,
    compare_deviation,
    generalized_blending,
    local_strategy_box,
    min_reach_over_box,
    repair_bounds,
    repair_synthesize,
    synthesize_general,
    synthesize_reachability,
)

from .reference import (
    box_min_reach,
    chain_rows,
    exact_chain_reach,
    grid_min_deviation,
    random_mdp,
    two_action_instance,
)

# Closed forms for the five-state two-branch example with uniform human
# strategy, confidence 1/2 on the human, and bound 0.21 on reaching s2:
# the optimum puts x on the risky branch in both decision states, the
# blended reach is (0.4 + 0.2 x)^2, and the smallest feasible x solves
# (0.4 + 0.2 x)^2 = 0.21.
X_STAR = (math.sqrt(0.21) - 0.4) / 0.2
T_STAR = 0.5 - X_STAR


def tb_problem(twobranch, human, b=0.5, lam=0.21):
    return SynthesisProblem(
        model=twobranch,
        human=human,
        blending=BlendingFunction.uniform(b),
        specs=(SafetyReach(bound=lam, target=twobranch.states_with_label("s2")),),
    )


def test_local_strategy_box(twobranch, tb_uniform):
    problem = tb_problem(twobranch, tb_uniform)
    box = local_strategy_box(problem, 0)
    assert box["a"] == pytest.approx((0.25, 0.75))
    assert box["b"] == pytest.approx((0.25, 0.75))
    tight = local_strategy_box(problem, 0, cap=0.1)
    assert tight["a"] == pytest.approx((0.4, 0.6))


def test_min_reach_over_full_box(twobranch, tb_uniform):
    problem = tb_problem(twobranch, tb_uniform)
    target = twobranch.states_with_label("s2")
    value, witness = min_reach_over_box(problem, target)
    # optimum drives both decision states to the lower box corner 0.25,
    # giving branch probability 0.45 twice
    assert value == pytest.approx(0.2025, abs=1e-9)
    assert witness.prob(0, "a") == pytest.approx(0.25, abs=1e-9)
    vmax, _ = min_reach_over_box(problem, target, maximize=True)
    assert vmax == pytest.approx(0.3025, abs=1e-9)


def test_min_reach_box_matches_vertex_enumeration():
    rng = np.random.default_rng(41)
    for _ in range(12):
        m = two_action_instance(rng)
        human = Strategy({s: {"a": 0.5, "b": 0.5} for s in range(4)})
        goal = m.states_with_label("goal")
        problem = SynthesisProblem(
            model=m, human=human, blending=BlendingFunction.uniform(0.5),
            specs=(SafetyReach(bound=0.5, target=goal),),
        )
        got, _ = min_reach_over_box(problem, goal)
        lower = {s: (0.25, 0.25) for s in range(4)}
        upper = {s: (0.75, 0.75) for s in range(4)}
        want = box_min_reach(m, lower, upper, goal)
        assert got == pytest.approx(want, abs=1e-7)


def test_exact_synthesis_twobranch(twobranch, tb_uniform):
    result = synthesize_reachability(tb_problem(twobranch, tb_uniform))
    assert result.status == FEASIBLE
    assert result.objective == pytest.approx(T_STAR, abs=2e-6)
    assert result.blended.prob(0, "a") == pytest.approx(X_STAR, abs=1e-5)
    assert result.blended.prob(1, "c") == pytest.approx(X_STAR, abs=1e-5)
    # recovered autonomous strategy satisfies blended = 0.5 h + 0.5 a
    assert result.autonomous.prob(0, "a") == pytest.approx(2 * X_STAR - 0.5, abs=1e-5)
    cert = result.certificates[0]
    assert cert.satisfied and cert.value <= 0.21 + BOUND_TOL
    # the witness sits on the deviation cap
    dev = deviation_inf_norm(perturbation_between(tb_uniform, result.blended))
    assert dev == pytest.approx(result.objective, abs=1e-9)


def test_exact_synthesis_blend_identity(twobranch, tb_uniform):
    result = synthesize_reachability(tb_problem(twobranch, tb_uniform))
    rebuilt = blend(tb_uniform, result.autonomous, BlendingFunction.uniform(0.5))
    for s in range(twobranch.n_states):
        for a in twobranch.enabled(s):
            assert rebuilt.prob(s, a) == pytest.approx(result.blended.prob(s, a), abs=1e-9)


def test_exact_synthesis_infeasible_confidences(twobranch, tb_uniform):
    # with confidence 0.6 the box floor is 0.3 per action and even the best
    # blend reaches s2 with probability (0.4 + 0.2 * 0.3)^2 = 0.2116 > 0.21
    result = synthesize_reachability(tb_problem(twobranch, tb_uniform, b=0.6))
    assert result.status == INFEASIBLE
    assert math.isinf(result.objective)
    assert result.trace["min_reach"] == pytest.approx(0.2116, abs=1e-9)

    full_trust = synthesize_reachability(tb_problem(twobranch, tb_uniform, b=1.0))
    assert full_trust.status == INFEASIBLE


def test_exact_synthesis_with_sparse_human_support():
    # the human never plays "safe", so the optimizer has to move mass onto an
    # action absent from the human's support dict
    model = Mdp(
        n_states=3,
        initial=0,
        actions=("go", "safe"),
        transitions={
            0: {"go": {1: 0.8, 2: 0.2}, "safe": {1: 1.0}},
            1: {"go": {1: 1.0}},
            2: {"go": {2: 1.0}},
        },
        labels={"bad": frozenset({2})},
    )
    human = Strategy({0: {"go": 1.0}, 1: {"go": 1.0}, 2: {"go": 1.0}})
    blending = BlendingFunction.uniform(0.4)
    problem = SynthesisProblem(
        model=model, human=human, blending=blending,
        specs=(SafetyReach(bound=0.1, target=frozenset({2})),),
    )
    result = synthesize_reachability(problem)
    assert result.status == FEASIBLE
    # reach = 0.2 * blended(go), so the optimum sits at blended(go) = 0.5
    assert result.blended.prob(0, "go") == pytest.approx(0.5, abs=1e-5)
    assert result.objective == pytest.approx(0.5, abs=1e-5)
    assert sum(result.autonomous.choice[0].values()) == pytest.approx(1.0)
    rebuilt = blend(human, result.autonomous, blending)
    for a in ("go", "safe"):
        assert rebuilt.prob(0, a) == pytest.approx(result.blended.prob(0, a), abs=1e-12)

    tight = SynthesisProblem(
        model=model, human=human, blending=blending,
        specs=(SafetyReach(bound=0.05, target=frozenset({2})),),
    )
    infeasible = synthesize_reachability(tight)
    assert infeasible.status == INFEASIBLE
    assert math.isinf(infeasible.objective)


def test_exact_synthesis_zero_cap_shortcut(twobranch, tb_uniform):
    # the human strategy already satisfies a loose bound, no deviation needed
    result = synthesize_reachability(tb_problem(twobranch, tb_uniform, lam=0.25))
    assert result.status == FEASIBLE
    assert result.objective == 0.0
    assert result.trace["cap"] == 0.0
    for s in range(twobranch.n_states):
        assert result.blended.choice[s] == pytest.approx(tb_uniform.choice[s])


def test_exact_synthesis_input_validation(twobranch, tb_uniform):
    target = twobranch.states_with_label("s2")
    with pytest.raises(ValueError, match="exactly one reachability"):
        synthesize_reachability(
            SynthesisProblem(twobranch, tb_uniform, BlendingFunction.uniform(0.5),
                             specs=()),
        )
    with pytest.raises(ValueError, match="upper-bounded"):
        synthesize_reachability(
            SynthesisProblem(
                twobranch, tb_uniform, BlendingFunction.uniform(0.5),
                specs=(SafetyReach(bound=0.2, target=target, direction=">="),),
            )
        )
    with pytest.raises(ValueError, match="does not fix"):
        synthesize_reachability(
            SynthesisProblem(twobranch, tb_uniform, "synthesize",
                             specs=(SafetyReach(bound=0.2, target=target),))
        )


def test_exact_synthesis_matches_grid_brute_force():
    rng = np.random.default_rng(97)
    agreements = 0
    for _ in range(8):
        m = two_action_instance(rng)
        human = Strategy({s: {"a": 0.5, "b": 0.5} for s in range(4)})
        goal = m.states_with_label("goal")
        hval = float(exact_chain_reach(chain_rows(m, human), goal)[m.initial])
        floor = box_min_reach(
            m, {s: (0.25, 0.25) for s in range(4)},
            {s: (0.75, 0.75) for s in range(4)}, goal,
        )
        for u in (0.3, 0.7):
            lam = floor + u * (hval - floor)
            if not 0.0 < lam < 1.0 or hval - floor < 1e-6:
                continue
            problem = SynthesisProblem(
                model=m, human=human, blending=BlendingFunction.uniform(0.5),
                specs=(SafetyReach(bound=lam, target=goal),),
            )
            result = synthesize_reachability(problem)
            brute = grid_min_deviation(m, human, lambda s: 0.5, lam, goal)
            assert result.status == FEASIBLE
            assert brute is not None
            assert abs(result.objective - brute) <= 0.02
            agreements += 1
    assert agreements >= 6


def test_general_solver_agrees_with_exact_on_single_reach(twobranch, tb_uniform):
    problem = tb_problem(twobranch, tb_uniform)
    exact = synthesize_reachability(problem)
    general = synthesize_general(problem)
    assert general.status == FEASIBLE
    assert general.certificates[0].satisfied
    assert general.objective >= exact.objective - 1e-6
    assert general.objective - exact.objective < 0.02


def test_general_solver_handles_spec_mix(twobranch, tb_uniform):
    s2 = twobranch.states_with_label("s2")
    s4 = twobranch.states_with_label("s4")
    problem = SynthesisProblem(
        model=twobranch,
        human=tb_uniform,
        blending=BlendingFunction.uniform(0.5),
        specs=(
            # jointly achievable: e.g. branch weights 0.5 / 0.25 give
            # reach 0.225 and until 0.275
            SafetyReach(bound=0.23, target=s2),
            UntilProb(bound=0.27, avoid=s2, goal=s4),
        ),
    )
    result = synthesize_general(problem)
    assert result.status == FEASIBLE
    assert all(c.satisfied for c in result.certificates)
    verified = check(twobranch, result.blended, list(problem.specs))
    assert all(r.satisfied for r in verified)


def test_uniform_max_blending_closed_form(twobranch, tb_uniform):
    problem = SynthesisProblem(
        model=twobranch,
        human=tb_uniform,
        blending="synthesize",
        specs=(SafetyReach(bound=0.21, target=twobranch.states_with_label("s2")),),
    )
    result = generalized_blending(problem, mode="uniform-max")
    assert result.status == FEASIBLE
    # largest constant confidence keeping 0.21 reachable:
    # floor of the box at confidence c is (0.4 + 0.2 * c/2)^2 = 0.21
    c_star = (math.sqrt(0.21) - 0.4) / 0.1
    assert result.blending_out.value(0) == pytest.approx(c_star, abs=1e-4)
    assert all(c.satisfied for c in result.certificates)


def test_uniform_max_blending_infeasible_below_simplex_floor(twobranch, tb_uniform):
    # even full autonomy cannot push the reach below 0.16
    problem = SynthesisProblem(
        model=twobranch,
        human=tb_uniform,
        blending="synthesize",
        specs=(SafetyReach(bound=0.1, target=twobranch.states_with_label("s2")),),
    )
    result = generalized_blending(problem, mode="uniform-max")
    assert result.status == INFEASIBLE


def test_per_state_blending_weights(twobranch, tb_uniform):
    problem = SynthesisProblem(
        model=twobranch,
        human=tb_uniform,
        blending="synthesize",
        specs=(SafetyReach(bound=0.21, target=twobranch.states_with_label("s2")),),
    )
    result = generalized_blending(problem, mode="per-state")
    assert result.status == FEASIBLE
    weights = [result.blending_out.value(s) for s in range(twobranch.n_states)]
    assert all(0.0 <= w <= 1.0 for w in weights)
    assert sum(weights) > 0.0
    assert all(c.satisfied for c in result.certificates)
    # per-state freedom never does worse than the best uniform confidence
    uniform = generalized_blending(problem, mode="uniform-max")
    assert sum(weights) >= uniform.blending_out.value(0) * twobranch.n_states - 1e-6


def test_generalized_blending_requires_marker(twobranch, tb_uniform):
    problem = tb_problem(twobranch, tb_uniform)
    with pytest.raises(ValueError, match="synthesize"):
        generalized_blending(problem)


def test_repair_bounds_twobranch(twobranch):
    bounds = repair_bounds(twobranch)
    assert bounds.upper[0, 1] == pytest.approx(0.6)
    assert bounds.lower[0, 1] == pytest.approx(0.4)
    assert bounds.upper[0, 3] == pytest.approx(0.6)
    assert bounds.upper[1, 2] == pytest.approx(0.6)
    assert bounds.lower[2, 2] == pytest.approx(1.0)
    # rows of the upper bound dominate rows of the lower bound
    assert (bounds.upper.toarray() >= bounds.lower.toarray() - 1e-12).all()


def test_repair_stays_within_budget_and_verifies(twobranch, tb_uniform):
    problem = tb_problem(twobranch, tb_uniform)
    result = repair_synthesize(problem, budget=0.3, step=0.1)
    assert result.status == FEASIBLE
    assert result.objective <= 0.3 + 1e-9
    assert all(c.satisfied for c in result.certificates)
    verified = check(twobranch, result.blended, list(problem.specs))
    assert all(r.satisfied for r in verified)
    dev = deviation_inf_norm(perturbation_between(tb_uniform, result.blended))
    assert dev == pytest.approx(result.objective, abs=1e-9)


def test_repair_cannot_beat_exact(twobranch, tb_uniform):
    problem = tb_problem(twobranch, tb_uniform)
    exact = synthesize_reachability(problem)
    repaired = repair_synthesize(problem, budget=1.0, step=0.1)
    assert repaired.status == FEASIBLE
    report = compare_deviation(exact, repaired)
    assert report["gap"] >= -1e-6
    assert report["repaired_objective"] >= report["exact_objective"] - 1e-6


def test_repair_reports_solver_limit_on_tiny_budget(twobranch, tb_uniform):
    # the bound needs deviation about 0.209, so a 0.05 budget cannot work
    problem = tb_problem(twobranch, tb_uniform)
    result = repair_synthesize(problem, budget=0.05, step=0.1)
    assert result.status == SOLVER_LIMIT


def test_compare_deviation_input_checks(twobranch, tb_uniform):
    problem = tb_problem(twobranch, tb_uniform)
    exact = synthesize_reachability(problem)
    bad = repair_synthesize(problem, budget=0.05, step=0.1)
    with pytest.raises(ValueError, match="feasible"):
        compare_deviation(exact, bad)

    import dataclasses

    cheat = dataclasses.replace(exact)
    cheat.objective = exact.objective - 1e-3
    with pytest.raises(RuntimeError, match="beats exact"):
        compare_deviation(exact, cheat)


def test_repair_handles_until_spec(twobranch, tb_uniform):
    s2 = twobranch.states_with_label("s2")
    s4 = twobranch.states_with_label("s4")
    problem = SynthesisProblem(
        model=twobranch,
        human=tb_uniform,
        blending=BlendingFunction.uniform(0.5),
        # the box tops out at 0.3025, so 0.28 is reachable but not free
        specs=(UntilProb(bound=0.28, avoid=s2, goal=s4),),
    )
    result = repair_synthesize(problem, budget=1.0, step=0.1)
    assert result.status == FEASIBLE
    verified = check(twobranch, result.blended, list(problem.specs))
    assert all(r.satisfied for r in verified)


def test_feasible_results_respect_blend_box(twobranch):
    # whatever the solver returns must stay inside the blending box:
    # blended >= b * human entrywise, and autonomous rows stochastic
    rng = np.random.default_rng(3)
    for _ in range(5):
        m = random_mdp(rng, n_states=6, alphabet=("a", "b"), min_actions=2, n_goal=1)
        human = uniform_strategy(m)
        b = 0.4
        problem = SynthesisProblem(
            model=m, human=human, blending=BlendingFunction.uniform(b),
            specs=(SafetyReach(bound=0.6, target=m.states_with_label("goal")),),
        )
        result = synthesize_reachability(problem)
        if result.status != FEASIBLE:
            continue
        for s in range(m.n_states):
            a_row = result.autonomous.choice[s]
            assert sum(a_row.values()) == pytest.approx(1.0, abs=1e-6)
            for a in m.enabled(s):
                assert result.blended.prob(s, a) >= b * human.prob(s, a) - 1e-9
                assert -1e-9 <= a_row[a] <= 1 + 1e-9

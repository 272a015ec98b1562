"""Session server for live shared control.

Each session holds a compiled scenario, the autonomous strategy, and a
blending function. A submitted human command is treated as the Dirac
distribution at that action, blended with the autonomous distribution at the
current state, and one action is sampled from the blend; the environment
then advances stochastically. Sessions are in-memory and single-process.
"""

from __future__ import annotations

import json
import secrets
import threading
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from scipy.stats import norm

from .gridworld import (
    GridScenario,
    LabeledMdp,
    baseline_human_strategy,
    compile_scenario,
    heatmap_matrix,
    worst_case_heatmap,
)
from .model import BlendingFunction, Strategy, blend, validate_strategy
from .modelio import blending_from_dict, scenario_from_dict, strategy_from_dict

RUNNING, CRASHED, REACHED = "running", "crashed", "reached"

_scenario_cache: dict[str, LabeledMdp] = {}


def _compile_cached(scenario: GridScenario, doc: dict) -> LabeledMdp:
    key = json.dumps(doc, sort_keys=True)
    if key not in _scenario_cache:
        _scenario_cache[key] = compile_scenario(scenario)
    return _scenario_cache[key]


@dataclass
class Session:
    id: str
    lmdp: LabeledMdp
    autonomous: Strategy
    blending: BlendingFunction
    human: Strategy | None
    seed: int
    rng: np.random.Generator
    current: int = 0
    status: str = RUNNING
    history: list[dict] = field(default_factory=list)
    episodes_completed: int = 0
    safe_arrivals: int = 0
    crashes: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)
    listeners: list[Any] = field(default_factory=list)
    heat_cache: dict[str, dict] = field(default_factory=dict)


def _snapshot(session: Session) -> dict:
    lmdp = session.lmdp
    agent, obstacles = lmdp.state_meaning[session.current]
    scenario = lmdp.scenario
    last = session.history[-1] if session.history else None
    return {
        "id": session.id,
        "status": session.status,
        "step_count": len(session.history),
        "state": session.current,
        "agent": list(agent),
        "obstacles": [list(c) for c in obstacles],
        "width": scenario.width,
        "height": scenario.height,
        "walls": [list(c) for c in sorted(scenario.walls)],
        "targets": [list(c) for c in sorted(scenario.targets)],
        "enabled_actions": list(lmdp.model.enabled(session.current)),
        "blending_weight": session.blending.value(session.current),
        "episodes": {
            "completed": session.episodes_completed,
            "safe_arrivals": session.safe_arrivals,
            "crashes": session.crashes,
        },
        "heatmap": f"/heatmap?session={session.id}",
        "last_step": last,
    }


def _runtime_blend(session: Session, human_action: str) -> dict[str, float]:
    """Blend the Dirac human command with the autonomous distribution."""
    b = session.blending.value(session.current)
    auto = session.autonomous.choice[session.current]
    dist = {a: (1.0 - b) * p for a, p in auto.items()}
    dist[human_action] = dist.get(human_action, 0.0) + b
    return dist


def _step(session: Session, human_action: str) -> dict:
    lmdp = session.lmdp
    state = session.current
    b = session.blending.value(state)
    blended = _runtime_blend(session, human_action)
    actions = sorted(blended)
    probs = np.array([blended[a] for a in actions])
    sampled = actions[int(session.rng.choice(len(actions), p=probs / probs.sum()))]
    successors = sorted(lmdp.model.transitions[state][sampled].items())
    succ_states = [t for t, _ in successors]
    succ_probs = np.array([p for _, p in successors])
    nxt = succ_states[int(session.rng.choice(len(succ_states), p=succ_probs / succ_probs.sum()))]

    session.current = nxt
    if nxt in lmdp.crash:
        session.status = CRASHED
        session.episodes_completed += 1
        session.crashes += 1
    elif nxt in lmdp.target:
        session.status = REACHED
        session.episodes_completed += 1
        session.safe_arrivals += 1
    outcome = {
        "state": state,
        "human_action": human_action,
        "sampled_action": sampled,
        "successor": nxt,
        "blending_weight": b,
        "human_distribution": {human_action: 1.0},
        "autonomous_distribution": dict(sorted(session.autonomous.choice[state].items())),
        "blended_distribution": {a: blended[a] for a in actions},
        "overridden": sampled != human_action,
        "status": session.status,
    }
    session.history.append(outcome)
    return outcome


class SessionStore:
    def __init__(self):
        self.sessions: dict[str, Session] = {}

    def new_id(self) -> str:
        return secrets.token_hex(8)


def _error(status: int, message: str, **extra) -> JSONResponse:
    return JSONResponse({"error": message, **extra}, status_code=status)


async def _json_body(request: Request) -> dict | JSONResponse:
    try:
        body = await request.json()
    except Exception:
        return _error(422, "request body is not valid JSON")
    if not isinstance(body, dict):
        return _error(422, "request body must be a JSON object")
    return body


def create_app() -> FastAPI:
    app = FastAPI(title="sharedctl service")
    store = SessionStore()
    app.state.store = store

    def build_session(body: dict) -> Session | JSONResponse:
        if "scenario" not in body:
            return _error(404, "no scenario supplied")
        try:
            scenario = scenario_from_dict(body["scenario"])
            lmdp = _compile_cached(scenario, body["scenario"])
        except (KeyError, TypeError, ValueError) as exc:
            return _error(422, f"invalid scenario: {exc}")
        if "autonomous" not in body:
            return _error(422, "no autonomous strategy supplied")
        try:
            autonomous = strategy_from_dict(body["autonomous"])
        except (TypeError, ValueError, AttributeError) as exc:
            return _error(422, f"invalid autonomous strategy: {exc}")
        bad = validate_strategy(lmdp.model, autonomous)
        if bad:
            return _error(422, "autonomous strategy does not fit the model", details=bad[:5])
        raw_blending = body.get("blending", 0.0)
        try:
            if isinstance(raw_blending, (int, float)):
                blending = BlendingFunction.uniform(float(raw_blending))
            else:
                blending = blending_from_dict(raw_blending)
        except (TypeError, ValueError) as exc:
            return _error(422, f"invalid blending: {exc}")
        human = None
        if "human" in body and body["human"] is not None:
            try:
                human = strategy_from_dict(body["human"])
            except (TypeError, ValueError, AttributeError) as exc:
                return _error(422, f"invalid human strategy: {exc}")
            bad = validate_strategy(lmdp.model, human)
            if bad:
                return _error(422, "human strategy does not fit the model", details=bad[:5])
        seed = int(body.get("seed", 0))
        session = Session(
            id=store.new_id(),
            lmdp=lmdp,
            autonomous=autonomous,
            blending=blending,
            human=human,
            seed=seed,
            rng=np.random.default_rng(seed),
            current=lmdp.model.initial,
        )
        if session.current in lmdp.crash:
            session.status = CRASHED
        elif session.current in lmdp.target:
            session.status = REACHED
        return session

    @app.post("/sessions")
    async def create_session(request: Request):
        body = await _json_body(request)
        if isinstance(body, JSONResponse):
            return body
        session = build_session(body)
        if isinstance(session, JSONResponse):
            return session
        store.sessions[session.id] = session
        return JSONResponse(
            {"id": session.id, "snapshot": _snapshot(session)}, status_code=201
        )

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        session = store.sessions.get(session_id)
        if session is None:
            return _error(404, "unknown session")
        return _snapshot(session)

    @app.post("/sessions/{session_id}/command")
    async def submit_command(session_id: str, request: Request):
        session = store.sessions.get(session_id)
        if session is None:
            return _error(404, "unknown session")
        body = await _json_body(request)
        if isinstance(body, JSONResponse):
            return body
        action = body.get("action")
        if session.status != RUNNING:
            return _error(410, f"session is finished ({session.status})")
        enabled = session.lmdp.model.enabled(session.current)
        if action not in enabled:
            return _error(409, f"action {action!r} is not enabled", enabled=list(enabled))
        with session.lock:
            outcome = _step(session, action)
        snapshot = _snapshot(session)
        for ws in list(session.listeners):
            try:
                await ws.send_json(snapshot)
            except Exception:
                try:
                    session.listeners.remove(ws)
                except ValueError:
                    pass
        return {**outcome, "snapshot": snapshot}

    @app.post("/sessions/{session_id}/reset")
    async def reset_session(session_id: str):
        session = store.sessions.get(session_id)
        if session is None:
            return _error(404, "unknown session")
        with session.lock:
            session.current = session.lmdp.model.initial
            session.status = RUNNING
        snapshot = _snapshot(session)
        for ws in list(session.listeners):
            try:
                await ws.send_json(snapshot)
            except Exception:
                pass
        return snapshot

    @app.websocket("/sessions/{session_id}/ws")
    async def session_ws(websocket: WebSocket, session_id: str):
        session = store.sessions.get(session_id)
        if session is None:
            # Accept first: closing an unaccepted socket surfaces as a bare
            # handshake failure and the client never sees the close code.
            await websocket.accept()
            await websocket.close(code=4404)
            return
        await websocket.accept()
        session.listeners.append(websocket)
        try:
            await websocket.send_json(_snapshot(session))
            while True:
                # Clients only listen; receiving detects the disconnect.
                await websocket.receive_text()
        except WebSocketDisconnect:
            pass
        finally:
            if websocket in session.listeners:
                session.listeners.remove(websocket)

    @app.get("/heatmap")
    async def heatmap(session: str, which: str = "blended"):
        sess = store.sessions.get(session)
        if sess is None:
            return _error(404, "unknown session")
        if which not in ("human", "autonomous", "blended"):
            return _error(422, f"unknown strategy selector {which!r}")
        if which in ("human", "blended") and sess.human is None:
            return _error(409, "session carries no human strategy")
        if which not in sess.heat_cache:
            if which == "human":
                sigma = sess.human
            elif which == "autonomous":
                sigma = sess.autonomous
            else:
                sigma = blend(sess.human, sess.autonomous, sess.blending)
            heat = worst_case_heatmap(sess.lmdp, sigma)
            matrix = heatmap_matrix(sess.lmdp, heat)
            sess.heat_cache[which] = {
                "which": which,
                "width": sess.lmdp.scenario.width,
                "height": sess.lmdp.scenario.height,
                "values": {f"{x},{y}": v for (x, y), v in sorted(heat.items())},
                "matrix": [
                    [None if np.isnan(v) else v for v in row] for row in matrix
                ],
            }
        return sess.heat_cache[which]

    @app.post("/rollouts")
    async def rollouts(request: Request):
        body = await _json_body(request)
        if isinstance(body, JSONResponse):
            return body
        if "scenario" not in body:
            return _error(404, "no scenario supplied")
        try:
            scenario = scenario_from_dict(body["scenario"])
            lmdp = _compile_cached(scenario, body["scenario"])
        except (KeyError, TypeError, ValueError) as exc:
            return _error(422, f"invalid scenario: {exc}")
        try:
            autonomous = strategy_from_dict(body["autonomous"]) if "autonomous" in body else None
            human = strategy_from_dict(body["human"]) if "human" in body else None
        except (TypeError, ValueError, AttributeError) as exc:
            return _error(422, f"invalid strategy: {exc}")
        raw_blending = body.get("blending", 0.0)
        if isinstance(raw_blending, (int, float)):
            blending = BlendingFunction.uniform(float(raw_blending))
        else:
            blending = blending_from_dict(raw_blending)
        policy = body.get("policy", "blended")
        episodes = int(body.get("episodes", 0))
        seed = int(body.get("seed", 0))
        max_steps = int(body.get("max_steps", 10_000))
        if human is None:
            human = baseline_human_strategy(lmdp, noise=float(body.get("noise", 0.0)))
        if policy != "human-only" and autonomous is None:
            return _error(422, "policy needs an autonomous strategy")
        try:
            report = batch_rollout(
                lmdp,
                blending=blending,
                autonomous=autonomous,
                human=human,
                episodes=episodes,
                policy=policy,
                seed=seed,
                max_steps=max_steps,
            )
        except ValueError as exc:
            return _error(422, str(exc))
        return report

    return app


def binomial_interval(successes: int, trials: int, level: float = 0.99) -> dict:
    """Wilson score interval for a binomial proportion."""
    if trials == 0:
        return {"level": level, "low": 0.0, "high": 1.0}
    z = float(norm.ppf(1.0 - (1.0 - level) / 2.0))
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = (z / denom) * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    return {"level": level, "low": float(center - half), "high": float(center + half)}


def _cumulative_tables(strategy: Strategy, states: int):
    actions, cums = {}, {}
    for s in range(states):
        items = sorted(strategy.choice.get(s, {}).items())
        acts = [a for a, _ in items]
        probs = np.array([p for _, p in items], dtype=float)
        total = probs.sum()
        if total <= 0:
            continue
        actions[s] = acts
        cums[s] = np.cumsum(probs / total)
    return actions, cums


def batch_rollout(
    lmdp: LabeledMdp,
    blending: BlendingFunction,
    autonomous: Strategy | None,
    human: Strategy,
    episodes: int,
    policy: str = "blended",
    seed: int = 0,
    max_steps: int = 10_000,
) -> dict:
    """Simulate episodes of the runtime arbitration loop.

    The automated human samples its command from the human strategy each
    step; under the blended policy that command wins the arbitration coin
    with probability b(s), otherwise the autonomous strategy is sampled.
    Episodes end on crash, target, or after max_steps.
    """
    if policy not in ("blended", "human-only", "autonomous-only"):
        raise ValueError(f"unknown policy {policy!r}")
    if policy != "human-only" and autonomous is None:
        raise ValueError("policy needs an autonomous strategy")
    if episodes == 0:
        return {"episodes": 0, "policy": policy, "seed": seed, "note": "no episodes requested"}
    model = lmdp.model
    n = model.n_states
    rng = np.random.default_rng(seed)
    crash_mask = np.zeros(n, dtype=bool)
    crash_mask[list(lmdp.crash)] = True
    target_mask = np.zeros(n, dtype=bool)
    target_mask[list(lmdp.target)] = True

    h_actions, h_cums = _cumulative_tables(human, n)
    a_actions, a_cums = (
        _cumulative_tables(autonomous, n) if autonomous is not None else ({}, {})
    )
    succ_states: dict[tuple[int, str], np.ndarray] = {}
    succ_cums: dict[tuple[int, str], np.ndarray] = {}
    for s in range(n):
        for a, dist in model.transitions[s].items():
            items = sorted(dist.items())
            succ_states[(s, a)] = np.array([t for t, _ in items])
            probs = np.array([p for _, p in items])
            succ_cums[(s, a)] = np.cumsum(probs / probs.sum())

    bvec = np.array([blending.value(s) for s in range(n)])
    states = np.full(episodes, model.initial)
    active = np.ones(episodes, dtype=bool)
    safe = np.zeros(episodes, dtype=bool)
    crashed = np.zeros(episodes, dtype=bool)
    steps = np.zeros(episodes, dtype=int)

    for _ in range(max_steps):
        done_target = active & target_mask[states]
        done_crash = active & crash_mask[states]
        safe |= done_target
        crashed |= done_crash
        active &= ~(done_target | done_crash)
        if not active.any():
            break
        idx = np.flatnonzero(active)
        cur = states[idx]
        chosen = np.empty(idx.size, dtype=object)
        for s in np.unique(cur):
            mask = cur == s
            k = int(mask.sum())
            if policy == "human-only":
                picks = np.searchsorted(h_cums[s], rng.random(k))
                chosen[mask] = np.array(h_actions[s], dtype=object)[picks]
            elif policy == "autonomous-only":
                picks = np.searchsorted(a_cums[s], rng.random(k))
                chosen[mask] = np.array(a_actions[s], dtype=object)[picks]
            else:
                h_picks = np.searchsorted(h_cums[s], rng.random(k))
                a_picks = np.searchsorted(a_cums[s], rng.random(k))
                take_human = rng.random(k) < bvec[s]
                local = np.where(
                    take_human,
                    np.array(h_actions[s], dtype=object)[h_picks],
                    np.array(a_actions[s], dtype=object)[a_picks],
                )
                chosen[mask] = local
        nxt = np.empty(idx.size, dtype=int)
        for s in np.unique(cur):
            mask = cur == s
            for a in set(chosen[mask]):
                amask = mask & (chosen == a)
                k = int(amask.sum())
                picks = np.searchsorted(succ_cums[(s, a)], rng.random(k))
                nxt[amask] = succ_states[(s, a)][picks]
        states[idx] = nxt
        steps[idx] += 1

    hits = int(safe.sum())
    freq = hits / episodes
    return {
        "episodes": episodes,
        "policy": policy,
        "seed": seed,
        "safe_arrivals": hits,
        "crashes": int(crashed.sum()),
        "unfinished": int(active.sum()),
        "frequency": freq,
        "interval": binomial_interval(hits, episodes),
        "mean_steps": float(steps.mean()),
    }


app = create_app()

"""Explicit-state triple files for interop with external model checkers.

Three files per model: `<base>.sta` holds the state count, `<base>.tra`
holds one `from action_index to prob` line per transition entry, and
`<base>.lab` holds `state label` lines. The initial state travels as the
reserved label `init`. A `<base>.cost` file is written when the model
carries costs so the round trip stays lossless.
"""

from __future__ import annotations

from pathlib import Path

from .model import Mdp


def export_explicit(model: Mdp, base: str | Path) -> list[Path]:
    """Write the triple files; returns the paths written."""
    base = Path(base)
    base.parent.mkdir(parents=True, exist_ok=True)
    action_index = {a: i for i, a in enumerate(model.actions)}
    sta = base.with_suffix(".sta")
    tra = base.with_suffix(".tra")
    lab = base.with_suffix(".lab")
    sta.write_text(f"{model.n_states}\n")
    lines = []
    for s in range(model.n_states):
        for a in model.enabled(s):
            for t, p in sorted(model.transitions[s][a].items()):
                lines.append(f"{s} {action_index[a]} {t} {p!r}")
    tra.write_text("\n".join(lines) + "\n")
    label_lines = [f"{model.initial} init"]
    for name in sorted(model.labels):
        for s in sorted(model.labels[name]):
            label_lines.append(f"{s} {name}")
    lab.write_text("\n".join(label_lines) + "\n")
    written = [sta, tra, lab]
    if model.costs is not None:
        cost = base.with_suffix(".cost")
        cost_lines = [
            f"{s} {action_index[a]} {c!r}" for (s, a), c in sorted(model.costs.items())
        ]
        cost.write_text("\n".join(cost_lines) + "\n")
        written.append(cost)
    return written


def import_explicit(base: str | Path, actions: tuple[str, ...] | list[str]) -> Mdp:
    """Rebuild a model from triple files; the action alphabet is not stored
    in the files and must be supplied."""
    base = Path(base)
    actions = tuple(actions)
    n_states = int(base.with_suffix(".sta").read_text().strip())
    transitions: dict[int, dict[str, dict[int, float]]] = {}
    for ln_no, line in enumerate(base.with_suffix(".tra").read_text().splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"{base.with_suffix('.tra')}:{ln_no}: expected 4 fields")
        s, ai, t, p = int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3])
        if not 0 <= ai < len(actions):
            raise ValueError(f"{base.with_suffix('.tra')}:{ln_no}: action index {ai} out of range")
        transitions.setdefault(s, {}).setdefault(actions[ai], {})[t] = p
    initial = None
    labels: dict[str, set[int]] = {}
    for ln_no, line in enumerate(base.with_suffix(".lab").read_text().splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{base.with_suffix('.lab')}:{ln_no}: expected `state label`")
        s, name = int(parts[0]), parts[1]
        if name == "init":
            if initial is not None and initial != s:
                raise ValueError("multiple init labels")
            initial = s
        else:
            labels.setdefault(name, set()).add(s)
    if initial is None:
        raise ValueError("labels file carries no init label")
    costs = None
    cost_path = base.with_suffix(".cost")
    if cost_path.exists():
        costs = {}
        for ln_no, line in enumerate(cost_path.read_text().splitlines(), 1):
            if not line.strip():
                continue
            s, ai, c = line.split()
            costs[(int(s), actions[int(ai)])] = float(c)
    return Mdp(
        n_states=n_states,
        initial=initial,
        actions=actions,
        transitions=transitions,
        costs=costs,
        labels={name: frozenset(states) for name, states in labels.items()},
    )

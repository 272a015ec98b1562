import { Snapshot } from "./payloads.js";
import { labelColor, shade } from "./shading.js";
import { Overlay, ViewState } from "./state.js";

export interface Handlers {
  onConnect(sessionId: string): void;
  onOverlay(overlay: Overlay): void;
  onReset(): void;
}

const OVERLAYS: Overlay[] = ["none", "human", "autonomous", "blended"];

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function cellKey(x: number, y: number): string {
  return `${x},${y}`;
}

function renderGrid(state: ViewState, snapshot: Snapshot): HTMLElement {
  const table = el("table", "grid");
  const walls = new Set(snapshot.walls.map(([x, y]) => cellKey(x, y)));
  const targets = new Set(snapshot.targets.map(([x, y]) => cellKey(x, y)));
  const obstacles = new Set(snapshot.obstacles.map(([x, y]) => cellKey(x, y)));
  const heat = state.overlay === "none" ? null : state.heatmaps[state.overlay] ?? null;

  for (let y = 0; y < snapshot.height; y++) {
    const row = el("tr");
    for (let x = 0; x < snapshot.width; x++) {
      const key = cellKey(x, y);
      const cell = el("td", "cell");
      if (walls.has(key)) {
        cell.classList.add("wall");
      } else if (heat && key in heat.values) {
        const value = heat.values[key];
        cell.style.background = shade(value);
        cell.style.color = labelColor(value);
      }
      if (targets.has(key)) cell.classList.add("target");
      let glyph = targets.has(key) ? "◎" : "";
      if (obstacles.has(key)) glyph = "▣";
      if (snapshot.agent[0] === x && snapshot.agent[1] === y) glyph = "●";
      cell.textContent = glyph;
      row.appendChild(cell);
    }
    table.appendChild(row);
  }
  return table;
}

// Side-by-side bars of the last step's human and blended distributions.
// Labels are the raw payload strings; bar widths use the parsed values.
function renderBars(state: ViewState): HTMLElement {
  const wrap = el("div", "bars");
  const outcome = state.lastOutcome;
  if (!outcome) return wrap;
  const panels: Array<[string, string]> = [
    ["human", "human_distribution"],
    ["blended", "blended_distribution"],
  ];
  for (const [title, field] of panels) {
    const panel = el("div", "panel");
    panel.appendChild(el("h3", undefined, title));
    const parsed = (outcome as unknown as Record<string, Record<string, number>>)[field];
    const raw = state.display[field] ?? {};
    for (const action of Object.keys(parsed).sort()) {
      const line = el("div", "bar-line");
      line.appendChild(el("span", "bar-action", action));
      const bar = el("div", "bar");
      bar.style.width = `${Math.round(parsed[action] * 160)}px`;
      line.appendChild(bar);
      line.appendChild(el("span", "bar-value", raw[action] ?? ""));
      panel.appendChild(line);
    }
    wrap.appendChild(panel);
  }
  return wrap;
}

function renderHistory(state: ViewState): HTMLElement {
  const wrap = el("div", "history");
  wrap.appendChild(el("h3", undefined, `history (${state.history.length} steps)`));
  const list = el("ol");
  for (const record of state.history.slice(-20)) {
    const text = record.overridden
      ? `${record.humanAction} corrected to ${record.sampledAction}`
      : `${record.humanAction}`;
    const item = el("li", record.overridden ? "overridden" : undefined, text);
    list.appendChild(item);
  }
  wrap.appendChild(list);
  return wrap;
}

export function render(root: HTMLElement, state: ViewState, handlers: Handlers): void {
  const previousInput = root.querySelector<HTMLInputElement>("#session-id");
  const typed = previousInput?.value ?? "";
  root.textContent = "";

  const controls = el("div", "controls");
  const input = el("input") as HTMLInputElement;
  input.id = "session-id";
  input.placeholder = "session id";
  input.value = typed;
  controls.appendChild(input);
  const connect = el("button", undefined, "connect") as HTMLButtonElement;
  connect.onclick = () => handlers.onConnect(input.value.trim());
  controls.appendChild(connect);
  const reset = el("button", undefined, "reset") as HTMLButtonElement;
  reset.onclick = () => handlers.onReset();
  reset.disabled = state.snapshot === null;
  controls.appendChild(reset);
  root.appendChild(controls);

  const status = el("div", `status ${state.connection}`);
  if (state.connection === "lost") {
    status.textContent = "connection lost; check the session id and retry";
  } else if (state.snapshot) {
    const s = state.snapshot;
    const weight = state.weightString ?? String(s.blending_weight);
    status.textContent =
      `status ${s.status} | step ${s.step_count} | human confidence ${weight} | ` +
      `episodes ${s.episodes.completed} (safe ${s.episodes.safe_arrivals}, ` +
      `crashes ${s.episodes.crashes})`;
    if (s.status !== "running") status.classList.add("terminal");
  } else {
    status.textContent = state.connection === "connecting" ? "connecting..." : "not connected";
  }
  root.appendChild(status);

  if (state.notice) root.appendChild(el("div", "notice", state.notice));

  if (state.lastOutcome?.overridden) {
    root.appendChild(
      el(
        "div",
        "override-flag",
        `autonomy override: ${state.lastOutcome.human_action} became ` +
          `${state.lastOutcome.sampled_action}`,
      ),
    );
  }

  if (state.snapshot) {
    root.appendChild(renderGrid(state, state.snapshot));

    const toggles = el("div", "overlays");
    toggles.appendChild(el("span", undefined, "overlay: "));
    for (const overlay of OVERLAYS) {
      const button = el(
        "button",
        overlay === state.overlay ? "active" : undefined,
        overlay,
      ) as HTMLButtonElement;
      button.onclick = () => handlers.onOverlay(overlay);
      toggles.appendChild(button);
    }
    root.appendChild(toggles);

    root.appendChild(renderBars(state));
    root.appendChild(renderHistory(state));
  }
}

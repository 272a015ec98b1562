import { SessionClient, browserTransport } from "./client.js";
import { CommandGate, actionForKey, submitGuarded } from "./keyboard.js";
import { render } from "./render.js";
import { Overlay, UiEvent, ViewState, initialViewState, reduce } from "./state.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");

let state: ViewState = initialViewState();
const queue: UiEvent[] = [];
let scheduled = false;

// Single rendering loop: events queue up and are applied in arrival
// order in one animation frame, then the view is rebuilt once.
function flush(): void {
  scheduled = false;
  for (const event of queue.splice(0)) {
    state = reduce(state, event);
  }
  render(root as HTMLElement, state, handlers);
}

function dispatch(event: UiEvent): void {
  queue.push(event);
  if (!scheduled) {
    scheduled = true;
    requestAnimationFrame(flush);
  }
}

// The page is a static file; the service usually runs elsewhere. Point
// the UI at it with ?service=http://host:port (default: same origin).
const serviceBase =
  new URLSearchParams(window.location.search).get("service") ?? window.location.origin;
const client = new SessionClient(browserTransport(serviceBase), dispatch);
const gate = new CommandGate();

const handlers = {
  onConnect(sessionId: string) {
    if (sessionId) void client.connect(sessionId);
  },
  onOverlay(overlay: Overlay) {
    dispatch({ kind: "overlay", overlay });
    if (overlay !== "none" && !state.heatmaps[overlay]) {
      void client.loadHeatmap(overlay);
    }
  },
  onReset() {
    void client.reset();
  },
};

document.addEventListener("keydown", (event) => {
  const action = actionForKey(event.key);
  if (!action || !state.snapshot) return;
  if (document.activeElement instanceof HTMLInputElement) return;
  event.preventDefault();
  if (state.snapshot.status !== "running") {
    dispatch({ kind: "notice", message: "episode finished; reset to continue" });
    return;
  }
  if (!state.snapshot.enabled_actions.includes(action)) {
    dispatch({ kind: "notice", message: `${action} is not available here` });
    return;
  }
  void submitGuarded(gate, () => client.command(action));
});

render(root, state, handlers);

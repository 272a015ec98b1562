import { HeatmapPayload, Snapshot, StepOutcome } from "./payloads.js";

export type Overlay = "none" | "human" | "autonomous" | "blended";
export type OverlayKind = Exclude<Overlay, "none">;

export interface StepRecord {
  index: number;
  humanAction: string;
  sampledAction: string;
  overridden: boolean;
  status: string;
}

// Distribution display strings, keyed by payload field name, then action.
// These are raw payload bytes, never re-rendered numbers.
export type DisplayStrings = Record<string, Record<string, string>>;

export interface ViewState {
  connection: "idle" | "connecting" | "open" | "lost";
  snapshot: Snapshot | null;
  lastOutcome: StepOutcome | null;
  display: DisplayStrings;
  weightString: string | null;
  history: StepRecord[];
  overlay: Overlay;
  heatmaps: Partial<Record<OverlayKind, HeatmapPayload>>;
  notice: string | null;
}

export type UiEvent =
  | { kind: "connecting" }
  | { kind: "connected"; snapshot: Snapshot; weightString: string | null }
  | { kind: "snapshot"; snapshot: Snapshot; weightString?: string | null }
  | { kind: "step"; outcome: StepOutcome; display: DisplayStrings; weightString: string | null }
  | { kind: "rejected"; message: string }
  | { kind: "overlay"; overlay: Overlay }
  | { kind: "heatmap"; which: OverlayKind; payload: HeatmapPayload }
  | { kind: "lost" }
  | { kind: "notice"; message: string | null };

export function initialViewState(): ViewState {
  return {
    connection: "idle",
    snapshot: null,
    lastOutcome: null,
    display: {},
    weightString: null,
    history: [],
    overlay: "none",
    heatmaps: {},
    notice: null,
  };
}

function fresher(current: Snapshot | null, incoming: Snapshot): boolean {
  if (current === null) return true;
  if (incoming.id !== current.id) return false;
  // Pushed snapshots can arrive out of order; an older step count is stale.
  // Equal counts pass: a reset moves the agent without adding a step.
  return incoming.step_count >= current.step_count;
}

export function reduce(state: ViewState, event: UiEvent): ViewState {
  switch (event.kind) {
    case "connecting":
      return { ...initialViewState(), connection: "connecting" };
    case "connected":
      return {
        ...state,
        connection: "open",
        snapshot: event.snapshot,
        weightString: event.weightString,
        notice: null,
      };
    case "snapshot": {
      if (!fresher(state.snapshot, event.snapshot)) return state;
      return {
        ...state,
        snapshot: event.snapshot,
        weightString: event.weightString !== undefined ? event.weightString : state.weightString,
      };
    }
    case "step": {
      const record: StepRecord = {
        index: event.outcome.snapshot.step_count,
        humanAction: event.outcome.human_action,
        sampledAction: event.outcome.sampled_action,
        overridden: event.outcome.overridden,
        status: event.outcome.status,
      };
      const next: ViewState = {
        ...state,
        lastOutcome: event.outcome,
        display: event.display,
        history: [...state.history, record],
        notice: null,
      };
      if (fresher(state.snapshot, event.outcome.snapshot)) {
        next.snapshot = event.outcome.snapshot;
        next.weightString = event.weightString;
      }
      return next;
    }
    case "rejected":
      return { ...state, notice: event.message };
    case "overlay":
      // only the overlay selection changes; the session view is untouched
      return { ...state, overlay: event.overlay };
    case "heatmap":
      return { ...state, heatmaps: { ...state.heatmaps, [event.which]: event.payload } };
    case "lost":
      return { ...state, connection: "lost" };
    case "notice":
      return { ...state, notice: event.message };
  }
}

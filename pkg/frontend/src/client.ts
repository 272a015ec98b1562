import {
  HeatmapPayload,
  Snapshot,
  StepOutcome,
  parseRaw,
  rawDistribution,
  rawNumberField,
} from "./payloads.js";
import { DisplayStrings, OverlayKind, UiEvent } from "./state.js";

export interface HttpReply {
  status: number;
  text: string;
}

export interface SocketHandle {
  close(): void;
}

// The service is plain HTTP plus one WebSocket per session. Everything is
// behind this interface so tests can drive the client without a server.
export interface Transport {
  get(path: string): Promise<HttpReply>;
  post(path: string, body?: unknown): Promise<HttpReply>;
  openSocket(
    path: string,
    handlers: { onMessage(text: string): void; onClose(): void },
  ): SocketHandle;
}

export function browserTransport(baseUrl: string): Transport {
  const base = baseUrl.replace(/\/$/, "");
  const wsBase = base.replace(/^http/, "ws");
  return {
    async get(path) {
      const resp = await fetch(base + path);
      return { status: resp.status, text: await resp.text() };
    },
    async post(path, body) {
      const resp = await fetch(base + path, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
      return { status: resp.status, text: await resp.text() };
    },
    openSocket(path, handlers) {
      const socket = new WebSocket(wsBase + path);
      socket.onmessage = (msg) => handlers.onMessage(String(msg.data));
      socket.onclose = () => handlers.onClose();
      return { close: () => socket.close() };
    },
  };
}

function errorMessage(reply: HttpReply): string {
  try {
    const doc = JSON.parse(reply.text);
    if (doc && typeof doc.error === "string") {
      if (Array.isArray(doc.enabled)) {
        return `${doc.error} (enabled: ${doc.enabled.join(", ")})`;
      }
      return doc.error;
    }
  } catch {
    // not JSON; fall through to the generic message
  }
  return `request failed with status ${reply.status}`;
}

const DISTRIBUTION_FIELDS = [
  "human_distribution",
  "autonomous_distribution",
  "blended_distribution",
];

export class SessionClient {
  private sessionId: string | null = null;
  private socket: SocketHandle | null = null;

  constructor(
    private transport: Transport,
    private dispatch: (event: UiEvent) => void,
  ) {}

  get id(): string | null {
    return this.sessionId;
  }

  async connect(sessionId: string): Promise<boolean> {
    this.socket?.close();
    this.socket = null;
    this.dispatch({ kind: "connecting" });
    const reply = await this.transport.get(`/sessions/${sessionId}`);
    if (reply.status !== 200) {
      this.dispatch({ kind: "lost" });
      this.dispatch({ kind: "notice", message: errorMessage(reply) });
      return false;
    }
    const snapshot = JSON.parse(reply.text) as Snapshot;
    const weightString = rawNumberField(parseRaw(reply.text), "blending_weight");
    this.sessionId = sessionId;
    this.dispatch({ kind: "connected", snapshot, weightString });
    this.socket = this.transport.openSocket(`/sessions/${sessionId}/ws`, {
      onMessage: (text) => {
        const pushed = JSON.parse(text) as Snapshot;
        const raw = rawNumberField(parseRaw(text), "blending_weight");
        this.dispatch({ kind: "snapshot", snapshot: pushed, weightString: raw });
      },
      onClose: () => this.dispatch({ kind: "lost" }),
    });
    return true;
  }

  async command(action: string): Promise<void> {
    if (!this.sessionId) return;
    const reply = await this.transport.post(
      `/sessions/${this.sessionId}/command`,
      { action },
    );
    if (reply.status !== 200) {
      this.dispatch({ kind: "rejected", message: errorMessage(reply) });
      return;
    }
    const outcome = JSON.parse(reply.text) as StepOutcome;
    const root = parseRaw(reply.text);
    const display: DisplayStrings = {};
    for (const field of DISTRIBUTION_FIELDS) {
      display[field] = rawDistribution(root, field);
    }
    this.dispatch({
      kind: "step",
      outcome,
      display,
      weightString: rawNumberField(root, "blending_weight"),
    });
  }

  async reset(): Promise<void> {
    if (!this.sessionId) return;
    const reply = await this.transport.post(`/sessions/${this.sessionId}/reset`);
    if (reply.status !== 200) {
      this.dispatch({ kind: "rejected", message: errorMessage(reply) });
      return;
    }
    const snapshot = JSON.parse(reply.text) as Snapshot;
    const weightString = rawNumberField(parseRaw(reply.text), "blending_weight");
    this.dispatch({ kind: "snapshot", snapshot, weightString });
  }

  async loadHeatmap(which: OverlayKind): Promise<boolean> {
    if (!this.sessionId) return false;
    const reply = await this.transport.get(
      `/heatmap?session=${this.sessionId}&which=${which}`,
    );
    if (reply.status !== 200) {
      this.dispatch({ kind: "notice", message: errorMessage(reply) });
      return false;
    }
    const payload = JSON.parse(reply.text) as HeatmapPayload;
    this.dispatch({ kind: "heatmap", which, payload });
    return true;
  }

  disconnect(): void {
    this.socket?.close();
    this.socket = null;
    this.sessionId = null;
  }
}

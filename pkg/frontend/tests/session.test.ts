import { describe, expect, it } from "vitest";

import { HttpReply, SessionClient, Transport } from "../src/client";
import { CommandGate, submitGuarded } from "../src/keyboard";
import { UiEvent, ViewState, initialViewState, reduce } from "../src/state";

// Fake service speaking the same payloads as the real one. Bodies are
// built as text so the byte-match guarantee is actually exercised:
// "1.0" and "0.50000000000000011" must reach the view unchanged.

function snapshotText(stepCount: number, agent: [number, number], status = "running"): string {
  return (
    `{"id":"sess-1","status":"${status}","step_count":${stepCount},` +
    `"state":${stepCount},"agent":[${agent[0]},${agent[1]}],"obstacles":[[2,2]],` +
    `"width":3,"height":3,"walls":[],"targets":[[2,0]],` +
    `"enabled_actions":["up","right"],"blending_weight":0.5,` +
    `"episodes":{"completed":0,"safe_arrivals":0,"crashes":0},` +
    `"heatmap":"/heatmap?session=sess-1","last_step":null}`
  );
}

function outcomeText(step: number, human: string, sampled: string): string {
  return (
    `{"state":${step - 1},"human_action":"${human}","sampled_action":"${sampled}",` +
    `"successor":${step},"blending_weight":0.5,` +
    `"human_distribution":{"${human}":1.0},` +
    `"autonomous_distribution":{"right":0.50000000000000011,"up":0.5},` +
    `"blended_distribution":{"right":0.25,"up":0.75},` +
    `"overridden":${sampled !== human},"status":"running",` +
    `"snapshot":${snapshotText(step, [0, 2])}}`
  );
}

const HEATMAP_TEXT =
  '{"which":"blended","width":3,"height":3,' +
  '"values":{"2,0":1.0,"0,2":0.4853977067825216},' +
  '"matrix":[[null,null,1.0],[null,null,null],[0.4853977067825216,null,null]]}';

class FakeService implements Transport {
  step = 0;
  posts: string[] = [];
  overrideAt: Set<number>;
  pushSnapshot: ((text: string) => void) | null = null;

  constructor(overrideAt: Iterable<number> = []) {
    this.overrideAt = new Set(overrideAt);
  }

  async get(path: string): Promise<HttpReply> {
    if (path === "/sessions/sess-1") {
      return { status: 200, text: snapshotText(0, [0, 2]) };
    }
    if (path.startsWith("/heatmap?session=sess-1")) {
      return { status: 200, text: HEATMAP_TEXT };
    }
    return { status: 404, text: '{"error":"unknown session"}' };
  }

  async post(path: string, body?: unknown): Promise<HttpReply> {
    this.posts.push(path);
    if (path === "/sessions/sess-1/command") {
      const action = (body as { action: string }).action;
      if (action === "down") {
        return {
          status: 409,
          text: `{"error":"action ${action} is not enabled","enabled":["up","right"]}`,
        };
      }
      this.step += 1;
      const sampled = this.overrideAt.has(this.step) ? "right" : action;
      const text = outcomeText(this.step, action, sampled);
      this.pushSnapshot?.(snapshotText(this.step, [0, 2]));
      return { status: 200, text };
    }
    if (path === "/sessions/sess-1/reset") {
      return { status: 200, text: snapshotText(this.step, [0, 2]) };
    }
    return { status: 404, text: '{"error":"unknown session"}' };
  }

  openSocket(path: string, handlers: { onMessage(text: string): void; onClose(): void }) {
    void path;
    this.pushSnapshot = handlers.onMessage;
    return { close: () => undefined };
  }
}

function harness(service: FakeService) {
  let state: ViewState = initialViewState();
  const dispatch = (event: UiEvent) => {
    state = reduce(state, event);
  };
  const client = new SessionClient(service, dispatch);
  return { client, view: () => state };
}

describe("session flow against a captured-payload service", () => {
  it("connect, twenty commands, history of length twenty", async () => {
    const service = new FakeService([5, 12]);
    const { client, view } = harness(service);

    expect(await client.connect("sess-1")).toBe(true);
    expect(view().connection).toBe("open");
    expect(view().snapshot?.agent).toEqual([0, 2]);

    for (let k = 0; k < 20; k++) {
      await client.command("up");
    }
    expect(view().history).toHaveLength(20);
    expect(view().snapshot?.step_count).toBe(20);

    // the override indicator follows the payload flag exactly
    const overridden = view().history.filter((r) => r.overridden);
    expect(overridden.map((r) => r.index)).toEqual([5, 12]);
    expect(overridden[0].sampledAction).toBe("right");
    expect(view().history[0].overridden).toBe(false);
  });

  it("shows distribution bytes exactly as the service sent them", async () => {
    const service = new FakeService();
    const { client, view } = harness(service);
    await client.connect("sess-1");
    await client.command("up");

    const display = view().display;
    expect(display.human_distribution.up).toBe("1.0");
    expect(display.autonomous_distribution.right).toBe("0.50000000000000011");
    expect(display.blended_distribution.up).toBe("0.75");
    expect(view().weightString).toBe("0.5");
    // JSON round-tripping would have lost both of the first two
    expect(String(JSON.parse(outcomeText(1, "up", "up")).human_distribution.up)).toBe("1");
  });

  it("surfaces disabled-action rejections without losing the view", async () => {
    const service = new FakeService();
    const { client, view } = harness(service);
    await client.connect("sess-1");
    await client.command("up");
    const before = view().snapshot;
    await client.command("down");
    expect(view().notice).toContain("not enabled");
    expect(view().notice).toContain("up, right");
    expect(view().snapshot).toBe(before);
    expect(view().history).toHaveLength(1);
  });

  it("applies pushed snapshots and drops the stale ones", async () => {
    const service = new FakeService();
    const { client, view } = harness(service);
    await client.connect("sess-1");
    await client.command("up");
    await client.command("up");
    expect(view().snapshot?.step_count).toBe(2);
    // a delayed push from step 1 arrives after step 2 rendered
    service.pushSnapshot?.(snapshotText(1, [1, 1]));
    expect(view().snapshot?.step_count).toBe(2);
    expect(view().snapshot?.agent).toEqual([0, 2]);
  });

  it("loads heatmaps on demand for the overlay", async () => {
    const service = new FakeService();
    const { client, view } = harness(service);
    await client.connect("sess-1");
    expect(await client.loadHeatmap("blended")).toBe(true);
    expect(view().heatmaps.blended?.values["2,0"]).toBe(1.0);
  });

  it("fails cleanly on an unknown session", async () => {
    const service = new FakeService();
    const { client, view } = harness(service);
    expect(await client.connect("nope")).toBe(false);
    expect(view().connection).toBe("lost");
    expect(view().notice).toBe("unknown session");
  });

  it("sends exactly one command per round trip under key repeat", async () => {
    const service = new FakeService();
    const { client } = harness(service);
    await client.connect("sess-1");
    const commandPosts = () =>
      service.posts.filter((p) => p.endsWith("/command")).length;

    const gate = new CommandGate();
    const results = await Promise.all([
      submitGuarded(gate, () => client.command("up")),
      submitGuarded(gate, () => client.command("up")),
      submitGuarded(gate, () => client.command("up")),
    ]);
    expect(results).toEqual([true, false, false]);
    expect(commandPosts()).toBe(1);

    await submitGuarded(gate, () => client.command("up"));
    expect(commandPosts()).toBe(2);
  });
});

const KEY_ACTIONS: Record<string, string> = {
  ArrowUp: "up",
  ArrowDown: "down",
  ArrowLeft: "left",
  ArrowRight: "right",
  w: "up",
  s: "down",
  a: "left",
  d: "right",
};

export function actionForKey(key: string): string | null {
  return KEY_ACTIONS[key] ?? null;
}

// One service call per step: the gate closes on submit and opens when the
// round trip settles, so holding a key (auto-repeat) cannot double-send.
export class CommandGate {
  private inFlight = false;

  tryBegin(): boolean {
    if (this.inFlight) return false;
    this.inFlight = true;
    return true;
  }

  settle(): void {
    this.inFlight = false;
  }

  get pending(): boolean {
    return this.inFlight;
  }
}

export async function submitGuarded(
  gate: CommandGate,
  send: () => Promise<void>,
): Promise<boolean> {
  if (!gate.tryBegin()) return false;
  try {
    await send();
  } finally {
    gate.settle();
  }
  return true;
}

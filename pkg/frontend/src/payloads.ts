// Shapes of the service payloads this UI consumes, plus a raw-preserving
// JSON reader. The UI never computes probabilities itself: every number it
// shows is lifted verbatim from a payload, so alongside the parsed values
// we keep the exact byte strings the server sent.

export type Cell = [number, number];

export interface StepPayload {
  state: number;
  human_action: string;
  sampled_action: string;
  successor: number;
  blending_weight: number;
  human_distribution: Record<string, number>;
  autonomous_distribution: Record<string, number>;
  blended_distribution: Record<string, number>;
  overridden: boolean;
  status: string;
}

export interface Snapshot {
  id: string;
  status: "running" | "crashed" | "reached";
  step_count: number;
  state: number;
  agent: Cell;
  obstacles: Cell[];
  width: number;
  height: number;
  walls: Cell[];
  targets: Cell[];
  enabled_actions: string[];
  blending_weight: number;
  episodes: { completed: number; safe_arrivals: number; crashes: number };
  heatmap: string;
  last_step: StepPayload | null;
}

export interface StepOutcome extends StepPayload {
  snapshot: Snapshot;
}

export interface HeatmapPayload {
  which: string;
  width: number;
  height: number;
  values: Record<string, number>;
  matrix: (number | null)[][];
}

export type RawValue =
  | { kind: "object"; entries: Map<string, RawValue> }
  | { kind: "array"; items: RawValue[] }
  | { kind: "number"; raw: string; value: number }
  | { kind: "string"; value: string }
  | { kind: "literal"; value: boolean | null };

// Minimal JSON parser that remembers the source text of every number.
// JSON.parse("1.0") gives 1 and re-rendering it would print "1"; the
// byte-match guarantee needs the original "1.0".
export function parseRaw(text: string): RawValue {
  let i = 0;

  function error(what: string): never {
    throw new Error(`bad payload: ${what} at offset ${i}`);
  }

  function skipWs(): void {
    while (i < text.length && " \t\n\r".includes(text[i])) i++;
  }

  function readString(): string {
    if (text[i] !== '"') error("expected string");
    i++;
    let out = "";
    while (i < text.length && text[i] !== '"') {
      if (text[i] === "\\") {
        const esc = text[i + 1];
        if (esc === "u") {
          out += String.fromCharCode(parseInt(text.slice(i + 2, i + 6), 16));
          i += 6;
        } else {
          const simple: Record<string, string> = {
            '"': '"', "\\": "\\", "/": "/", b: "\b", f: "\f", n: "\n", r: "\r", t: "\t",
          };
          if (!(esc in simple)) error("bad escape");
          out += simple[esc];
          i += 2;
        }
      } else {
        out += text[i];
        i++;
      }
    }
    if (text[i] !== '"') error("unterminated string");
    i++;
    return out;
  }

  function readValue(): RawValue {
    skipWs();
    const c = text[i];
    if (c === "{") {
      i++;
      const entries = new Map<string, RawValue>();
      skipWs();
      if (text[i] === "}") { i++; return { kind: "object", entries }; }
      for (;;) {
        skipWs();
        const key = readString();
        skipWs();
        if (text[i] !== ":") error("expected ':'");
        i++;
        entries.set(key, readValue());
        skipWs();
        if (text[i] === ",") { i++; continue; }
        if (text[i] === "}") { i++; return { kind: "object", entries }; }
        error("expected ',' or '}'");
      }
    }
    if (c === "[") {
      i++;
      const items: RawValue[] = [];
      skipWs();
      if (text[i] === "]") { i++; return { kind: "array", items }; }
      for (;;) {
        items.push(readValue());
        skipWs();
        if (text[i] === ",") { i++; continue; }
        if (text[i] === "]") { i++; return { kind: "array", items }; }
        error("expected ',' or ']'");
      }
    }
    if (c === '"') return { kind: "string", value: readString() };
    if (text.startsWith("true", i)) { i += 4; return { kind: "literal", value: true }; }
    if (text.startsWith("false", i)) { i += 5; return { kind: "literal", value: false }; }
    if (text.startsWith("null", i)) { i += 4; return { kind: "literal", value: null }; }
    const start = i;
    while (i < text.length && "-+0123456789.eE".includes(text[i])) i++;
    if (i === start) error("unexpected character");
    const raw = text.slice(start, i);
    const value = Number(raw);
    if (Number.isNaN(value)) error(`bad number ${raw}`);
    return { kind: "number", raw, value };
  }

  const root = readValue();
  skipWs();
  if (i !== text.length) error("trailing content");
  return root;
}

function asObject(value: RawValue | undefined): Map<string, RawValue> | null {
  return value && value.kind === "object" ? value.entries : null;
}

// Exact byte strings of one distribution field of a payload, e.g.
// field "blended_distribution" of a command response.
export function rawDistribution(root: RawValue, field: string): Record<string, string> {
  const top = asObject(root);
  const dist = asObject(top?.get(field));
  const out: Record<string, string> = {};
  if (!dist) return out;
  for (const [action, entry] of dist) {
    if (entry.kind === "number") out[action] = entry.raw;
  }
  return out;
}

export function rawNumberField(root: RawValue, field: string): string | null {
  const top = asObject(root);
  const entry = top?.get(field);
  return entry && entry.kind === "number" ? entry.raw : null;
}

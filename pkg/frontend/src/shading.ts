// Heatmap shading: linear gray scale, darker means more probable,
// probability 1 is black and 0 is white.

export function shade(value: number): string {
  const v = Math.min(1, Math.max(0, value));
  const level = Math.round(255 * (1 - v));
  return `rgb(${level}, ${level}, ${level})`;
}

export function shadeLevel(value: number): number {
  const v = Math.min(1, Math.max(0, value));
  return Math.round(255 * (1 - v));
}

// readable label color on top of a shaded cell
export function labelColor(value: number): string {
  return value > 0.55 ? "#eeeeee" : "#111111";
}

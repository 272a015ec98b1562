import { describe, expect, it } from "vitest";

import { labelColor, shade, shadeLevel } from "../src/shading";

describe("heatmap shading", () => {
  it("renders probability 1 darkest and 0 lightest", () => {
    expect(shade(1)).toBe("rgb(0, 0, 0)");
    expect(shade(0)).toBe("rgb(255, 255, 255)");
  });

  it("is linear in the probability", () => {
    expect(shadeLevel(0.5)).toBe(128);
    expect(shadeLevel(0.25)).toBe(191);
    // equal increments in value give equal increments in gray level
    const step = shadeLevel(0.2) - shadeLevel(0.4);
    expect(shadeLevel(0.4) - shadeLevel(0.6)).toBe(step);
  });

  it("is monotone: darker means more probable", () => {
    let previous = shadeLevel(0);
    for (let v = 0.1; v <= 1.0001; v += 0.1) {
      const level = shadeLevel(v);
      expect(level).toBeLessThan(previous);
      previous = level;
    }
  });

  it("clamps values outside [0, 1]", () => {
    expect(shade(-0.5)).toBe("rgb(255, 255, 255)");
    expect(shade(1.5)).toBe("rgb(0, 0, 0)");
  });

  it("keeps labels readable on dark cells", () => {
    expect(labelColor(1)).toBe("#eeeeee");
    expect(labelColor(0)).toBe("#111111");
  });
});

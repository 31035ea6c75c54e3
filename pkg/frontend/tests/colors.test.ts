import { describe, expect, it } from "vitest";

import { colorForProcedure, cssColorToRgb, hashString } from "../src/colors.js";

describe("stable zone colors", () => {
  it("is deterministic per procedure text", () => {
    const text = "P{1,2}[L(00),P{1}[L(01),P{2}[L(10),L(11)]]]";
    expect(colorForProcedure(text)).toBe(colorForProcedure(text));
  });

  it("distinguishes the three two-sample zones", () => {
    const colors = new Set(
      [
        "P{1}[P{2}[L(00),L(01)],P{2}[L(10),L(11)]]",
        "P{1,2}[L(00),P{1}[L(01),P{2}[L(10),L(11)]]]",
        "P{1,2}[L(00),P{2}[L(10),P{1}[L(01),L(11)]]]",
      ].map(colorForProcedure),
    );
    expect(colors.size).toBe(3);
  });

  it("hash is stable across calls", () => {
    expect(hashString("abc")).toBe(hashString("abc"));
    expect(hashString("abc")).not.toBe(hashString("abd"));
  });

  it("hsl colors convert to rgb", () => {
    const [r, g, b] = cssColorToRgb("hsl(0.0, 100%, 50%)");
    expect([r, g, b]).toEqual([255, 0, 0]);
  });
});

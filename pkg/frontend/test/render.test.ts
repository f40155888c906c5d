import { describe, expect, it } from "vitest";

import { render, TOPPLED_UPDOT, VIEW_H, VIEW_W } from "../src/render.js";
import { bufferHash, rasterize } from "../src/raster.js";
import { parseFrame } from "../src/types.js";
import { makeFrame } from "./helpers.js";

// fingerprint of the reference frame's raster; update only for deliberate
// visual changes
const SNAPSHOT_HASH = "234be1fe";

describe("render", () => {
  it("draws upright objects as circles and toppled ones flattened", () => {
    const upright = render(makeFrame());
    expect(upright.some((c) => c.op === "circle" && c.color === "#d04040")).toBe(true);
    const frame = makeFrame();
    frame.objects[0].updot = 0.2;
    const toppled = render(frame);
    expect(toppled.some((c) => c.op === "rect" && c.color === "#d04040")).toBe(true);
    expect(toppled.some((c) => c.op === "circle" && c.color === "#d04040")).toBe(false);
  });

  it("switches glyph exactly at the toppled threshold", () => {
    for (const updot of [TOPPLED_UPDOT - 0.01, TOPPLED_UPDOT, TOPPLED_UPDOT + 0.01]) {
      const frame = makeFrame();
      frame.objects = [{ id: "red_0", color: "red", p: [0, 2], updot }];
      const cmds = render(frame);
      const flattened = cmds.some((c) => c.op === "rect" && c.color === "#d04040");
      expect(flattened).toBe(updot < TOPPLED_UPDOT);
    }
  });

  it("scales the character body with height", () => {
    const short = render(makeFrame({ character: { p: [0, 0], theta: 0, v: [0, 0], h: 0.5, a: 0 } }));
    const tall = render(makeFrame({ character: { p: [0, 0], theta: 0, v: [0, 0], h: 1.2, a: 0 } }));
    const radiusOf = (cmds: ReturnType<typeof render>) =>
      cmds.filter((c) => c.op === "circle" && c.color === "#222222")
          .map((c) => (c as { r: number }).r)[0];
    expect(radiusOf(short)).toBeCloseTo(3);
    expect(radiusOf(tall)).toBeCloseTo(7.2);
  });

  it("shows the active policy, object, and both score tables", () => {
    const cmds = render(makeFrame());
    const labels = cmds.filter((c) => c.op === "label").map((c) => (c as { text: string }).text);
    expect(labels).toContain("policy: location  object: red_0");
    expect(labels).toContain("task/strike: 0.1000");
    expect(labels).toContain("object/blue_1: 0.3000");
    expect(labels.some((t) => t === "red_0 *")).toBe(true); // active-object marker
  });

  it("is deterministic for a fixed frame", () => {
    const frame = makeFrame();
    expect(render(frame)).toEqual(render(frame));
  });

  it("raster snapshot is pixel-stable", () => {
    const frame = makeFrame({ tick: 42 });
    frame.objects[1].updot = 0.1;
    const a = rasterize(render(frame), VIEW_W, VIEW_H);
    const b = rasterize(render(frame), VIEW_W, VIEW_H);
    expect(Buffer.from(a).equals(Buffer.from(b))).toBe(true);
    expect(bufferHash(a)).toBe(SNAPSHOT_HASH);
  });
});

describe("parseFrame", () => {
  it("accepts a valid frame", () => {
    expect(parseFrame(makeFrame())).not.toBeNull();
  });

  it("rejects structural and numeric corruption", () => {
    expect(parseFrame(null)).toBeNull();
    expect(parseFrame({ type: "error", msg: "x" })).toBeNull();
    const noChar = makeFrame() as unknown as Record<string, unknown>;
    delete noChar.character;
    expect(parseFrame(noChar)).toBeNull();
    const nan = makeFrame();
    nan.character.theta = NaN;
    expect(parseFrame(nan)).toBeNull();
    const inf = makeFrame();
    inf.objects[0].updot = Infinity;
    expect(parseFrame(inf)).toBeNull();
    const badScores = makeFrame();
    (badScores.scores.task as Record<string, unknown>).strike = "high";
    expect(parseFrame(badScores)).toBeNull();
  });
});

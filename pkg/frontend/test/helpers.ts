import type { Frame } from "../src/types.js";

export function makeFrame(overrides: Partial<Frame> = {}): Frame {
  return {
    type: "frame",
    tick: 1,
    character: { p: [0, 0], theta: 0, v: [0, 0], h: 0.9, a: 0 },
    objects: [
      { id: "red_0", color: "red", p: [2, 1], updot: 1.0 },
      { id: "blue_1", color: "blue", p: [-2, -1], updot: 1.0 },
    ],
    active_policy: "location",
    active_object: "red_0",
    scores: {
      task: { strike: 0.1, location: 0.8, facing: 0.2 },
      object: { red_0: 0.9, blue_1: 0.3 },
    },
    ...overrides,
  };
}

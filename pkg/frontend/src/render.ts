import type { Frame } from "./types.js";

/** Deterministic draw-command list: the headless-testable form of the
 * scene.  The browser entry point replays these onto a canvas. */
export type DrawCmd =
  | { op: "clear"; color: string }
  | { op: "circle"; x: number; y: number; r: number; color: string }
  | { op: "rect"; x: number; y: number; w: number; h: number; color: string }
  | { op: "line"; x0: number; y0: number; x1: number; y1: number; color: string }
  | { op: "label"; x: number; y: number; text: string; color: string };

export const VIEW_W = 400;
export const VIEW_H = 400;
const SCALE = 20; // px per metre
/** below this up-vector alignment an object is drawn flattened */
export const TOPPLED_UPDOT = 0.3;

const PALETTE: Record<string, string> = {
  red: "#d04040",
  green: "#3f9d3f",
  blue: "#4060d0",
  purple: "#8d4fc0",
};

function colorOf(name: string): string {
  return PALETTE[name] ?? "#888888";
}

function toView(p: [number, number]): [number, number] {
  // world origin at the viewport centre, y up
  return [VIEW_W / 2 + p[0] * SCALE, VIEW_H / 2 - p[1] * SCALE];
}

function round2(v: number): number {
  return Math.round(v * 100) / 100;
}

export function render(frame: Frame): DrawCmd[] {
  const cmds: DrawCmd[] = [{ op: "clear", color: "#f4f1e8" }];

  for (const o of frame.objects) {
    const [x, y] = toView(o.p);
    const color = colorOf(o.color);
    if (o.updot < TOPPLED_UPDOT) {
      // flattened glyph: wide, short rectangle
      cmds.push({
        op: "rect",
        x: round2(x - 10), y: round2(y - 3), w: 20, h: 6, color,
      });
    } else {
      cmds.push({ op: "circle", x: round2(x), y: round2(y), r: 7, color });
    }
    const marker = o.id === frame.active_object ? " *" : "";
    cmds.push({ op: "label", x: round2(x), y: round2(y - 12), text: o.id + marker, color });
  }

  const c = frame.character;
  const [cx, cy] = toView(c.p);
  const radius = 6 * c.h; // standing height shown as body size
  cmds.push({ op: "circle", x: round2(cx), y: round2(cy), r: round2(radius), color: "#222222" });
  // heading arrow
  const hx = cx + Math.cos(c.theta) * (radius + 9);
  const hy = cy - Math.sin(c.theta) * (radius + 9);
  cmds.push({
    op: "line", x0: round2(cx), y0: round2(cy), x1: round2(hx), y1: round2(hy), color: "#222222",
  });
  // arm-phase ticks, perpendicular to the heading, length set by phase
  const tick = 4 + 4 * Math.abs(c.a);
  const px = Math.cos(c.theta + Math.PI / 2);
  const py = -Math.sin(c.theta + Math.PI / 2);
  for (const side of [1, -1]) {
    cmds.push({
      op: "line",
      x0: round2(cx + side * px * radius),
      y0: round2(cy + side * py * radius),
      x1: round2(cx + side * px * (radius + tick)),
      y1: round2(cy + side * py * (radius + tick)),
      color: "#555555",
    });
  }

  // routing display: active policy/object plus both questions' full scores
  cmds.push({
    op: "label", x: 8, y: 14,
    text: `policy: ${frame.active_policy}  object: ${frame.active_object}`,
    color: "#000000",
  });
  let row = 0;
  for (const [table, scores] of [
    ["task", frame.scores.task],
    ["object", frame.scores.object],
  ] as Array<[string, Record<string, number>]>) {
    for (const key of Object.keys(scores).sort()) {
      row += 1;
      cmds.push({
        op: "label", x: 8, y: 14 + 12 * row,
        text: `${table}/${key}: ${scores[key].toFixed(4)}`,
        color: "#333333",
      });
    }
  }
  return cmds;
}

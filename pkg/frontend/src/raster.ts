import type { DrawCmd } from "./render.js";

/** Minimal deterministic software rasterizer for snapshot tests.
 * Produces the same RGBA buffer for the same draw-command list on every
 * platform (integer spans, no anti-aliasing). */

export function rasterize(cmds: DrawCmd[], w: number, h: number): Uint8ClampedArray {
  const buf = new Uint8ClampedArray(w * h * 4);
  for (const cmd of cmds) {
    switch (cmd.op) {
      case "clear":
        fillRect(buf, w, h, 0, 0, w, h, cmd.color);
        break;
      case "rect":
        fillRect(buf, w, h, cmd.x, cmd.y, cmd.w, cmd.h, cmd.color);
        break;
      case "circle":
        fillCircle(buf, w, h, cmd.x, cmd.y, cmd.r, cmd.color);
        break;
      case "line":
        drawLine(buf, w, h, cmd.x0, cmd.y0, cmd.x1, cmd.y1, cmd.color);
        break;
      case "label":
        // text itself is not rasterized; a short underline marks presence
        fillRect(buf, w, h, cmd.x, cmd.y + 1, Math.min(cmd.text.length * 2, 60), 1, cmd.color);
        break;
    }
  }
  return buf;
}

function parseColor(color: string): [number, number, number] {
  const v = parseInt(color.slice(1), 16);
  return [(v >> 16) & 0xff, (v >> 8) & 0xff, v & 0xff];
}

function put(buf: Uint8ClampedArray, w: number, h: number, x: number, y: number,
             rgb: [number, number, number]): void {
  if (x < 0 || y < 0 || x >= w || y >= h) return;
  const i = (y * w + x) * 4;
  buf[i] = rgb[0];
  buf[i + 1] = rgb[1];
  buf[i + 2] = rgb[2];
  buf[i + 3] = 255;
}

function fillRect(buf: Uint8ClampedArray, w: number, h: number,
                  x: number, y: number, rw: number, rh: number, color: string): void {
  const rgb = parseColor(color);
  const x0 = Math.max(0, Math.round(x));
  const y0 = Math.max(0, Math.round(y));
  const x1 = Math.min(w, Math.round(x + rw));
  const y1 = Math.min(h, Math.round(y + rh));
  for (let yy = y0; yy < y1; yy++) {
    for (let xx = x0; xx < x1; xx++) {
      put(buf, w, h, xx, yy, rgb);
    }
  }
}

function fillCircle(buf: Uint8ClampedArray, w: number, h: number,
                    cx: number, cy: number, r: number, color: string): void {
  const rgb = parseColor(color);
  const ir = Math.max(1, Math.round(r));
  const icx = Math.round(cx);
  const icy = Math.round(cy);
  for (let dy = -ir; dy <= ir; dy++) {
    for (let dx = -ir; dx <= ir; dx++) {
      if (dx * dx + dy * dy <= ir * ir) {
        put(buf, w, h, icx + dx, icy + dy, rgb);
      }
    }
  }
}

function drawLine(buf: Uint8ClampedArray, w: number, h: number,
                  x0: number, y0: number, x1: number, y1: number, color: string): void {
  const rgb = parseColor(color);
  let ax = Math.round(x0);
  let ay = Math.round(y0);
  const bx = Math.round(x1);
  const by = Math.round(y1);
  const dx = Math.abs(bx - ax);
  const dy = -Math.abs(by - ay);
  const sx = ax < bx ? 1 : -1;
  const sy = ay < by ? 1 : -1;
  let err = dx + dy;
  for (;;) {
    put(buf, w, h, ax, ay, rgb);
    if (ax === bx && ay === by) break;
    const e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      ax += sx;
    }
    if (e2 <= dx) {
      err += dx;
      ay += sy;
    }
  }
}

/** FNV-1a over the raster buffer; a stable fingerprint for snapshots. */
export function bufferHash(buf: Uint8ClampedArray): string {
  let hash = 0x811c9dc5;
  for (let i = 0; i < buf.length; i++) {
    hash ^= buf[i];
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash.toString(16).padStart(8, "0");
}

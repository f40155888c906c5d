import { connect } from "./client.js";
import { render, VIEW_H, VIEW_W } from "./render.js";
import type { DrawCmd } from "./render.js";
import type { CommandKind } from "./types.js";

/** Browser entry point: wires the live session to a canvas and two
 * command inputs.  All rendering logic lives in render.ts so it stays
 * testable without a DOM. */

function paint(ctx: CanvasRenderingContext2D, cmds: DrawCmd[]): void {
  for (const cmd of cmds) {
    switch (cmd.op) {
      case "clear":
        ctx.fillStyle = cmd.color;
        ctx.fillRect(0, 0, VIEW_W, VIEW_H);
        break;
      case "rect":
        ctx.fillStyle = cmd.color;
        ctx.fillRect(cmd.x, cmd.y, cmd.w, cmd.h);
        break;
      case "circle":
        ctx.fillStyle = cmd.color;
        ctx.beginPath();
        ctx.arc(cmd.x, cmd.y, cmd.r, 0, 2 * Math.PI);
        ctx.fill();
        break;
      case "line":
        ctx.strokeStyle = cmd.color;
        ctx.beginPath();
        ctx.moveTo(cmd.x0, cmd.y0);
        ctx.lineTo(cmd.x1, cmd.y1);
        ctx.stroke();
        break;
      case "label":
        ctx.fillStyle = cmd.color;
        ctx.font = "10px monospace";
        ctx.fillText(cmd.text, cmd.x, cmd.y);
        break;
    }
  }
}

export function start(): void {
  const canvas = document.getElementById("arena") as HTMLCanvasElement;
  canvas.width = VIEW_W;
  canvas.height = VIEW_H;
  const ctx = canvas.getContext("2d")!;
  const banner = document.getElementById("banner")!;
  const status = document.getElementById("status")!;

  const url = `ws://${location.hostname}:8765`;
  const session = connect(url);

  const hookInput = (inputId: string, kind: CommandKind) => {
    const input = document.getElementById(inputId) as HTMLInputElement;
    input.addEventListener("keydown", (ev) => {
      if (ev.key === "Enter" && session.sendCommand(kind, input.value)) {
        input.value = "";
      }
    });
  };
  hookInput("skill-command", "skill_command");
  hookInput("task-command", "task_command");

  const loop = () => {
    const frame = session.queue.take();
    if (frame !== null) {
      paint(ctx, render(frame));
    }
    status.textContent = session.state.status;
    banner.textContent = session.state.errorBanner ?? "";
    requestAnimationFrame(loop);
  };
  requestAnimationFrame(loop);
}

if (typeof document !== "undefined" && document.getElementById("arena")) {
  start();
}

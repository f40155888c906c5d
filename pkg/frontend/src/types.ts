/** Wire schema for the session WebSocket. */

export interface CharacterFrame {
  p: [number, number];
  theta: number;
  v: [number, number];
  h: number;
  a: number;
}

export interface ObjectFrame {
  id: string;
  color: string;
  p: [number, number];
  updot: number;
}

export interface Frame {
  type: "frame";
  tick: number;
  character: CharacterFrame;
  objects: ObjectFrame[];
  active_policy: string;
  active_object: string;
  scores: {
    task: Record<string, number>;
    object: Record<string, number>;
  };
}

export type CommandKind = "skill_command" | "task_command";

export interface CommandMessage {
  type: CommandKind;
  text: string;
}

export interface ErrorMessage {
  type: "error";
  msg: string;
}

function isPair(x: unknown): x is [number, number] {
  return (
    Array.isArray(x) && x.length === 2 &&
    x.every((v) => typeof v === "number" && Number.isFinite(v))
  );
}

function isFiniteNumber(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x);
}

/** Validates one decoded wire message as a frame; returns null if it is
 * not a well-formed frame (all numbers must be finite). */
export function parseFrame(raw: unknown): Frame | null {
  if (typeof raw !== "object" || raw === null) return null;
  const f = raw as Record<string, unknown>;
  if (f.type !== "frame" || !isFiniteNumber(f.tick)) return null;
  const c = f.character as Record<string, unknown> | undefined;
  if (
    !c || !isPair(c.p) || !isPair(c.v) ||
    !isFiniteNumber(c.theta) || !isFiniteNumber(c.h) || !isFiniteNumber(c.a)
  ) {
    return null;
  }
  if (!Array.isArray(f.objects)) return null;
  for (const o of f.objects as Array<Record<string, unknown>>) {
    if (
      typeof o !== "object" || o === null || typeof o.id !== "string" ||
      typeof o.color !== "string" || !isPair(o.p) || !isFiniteNumber(o.updot)
    ) {
      return null;
    }
  }
  if (typeof f.active_policy !== "string" || typeof f.active_object !== "string") {
    return null;
  }
  const s = f.scores as Record<string, unknown> | undefined;
  if (!s || typeof s.task !== "object" || typeof s.object !== "object") return null;
  for (const table of [s.task, s.object] as Array<Record<string, unknown>>) {
    for (const v of Object.values(table)) {
      if (!isFiniteNumber(v)) return null;
    }
  }
  return raw as Frame;
}

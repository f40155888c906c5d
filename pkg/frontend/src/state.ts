import type { CommandKind, Frame } from "./types.js";

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface HistoryEntry {
  kind: CommandKind;
  text: string;
  /** tick of the latest frame when the command was sent (0 before any frame) */
  atTick: number;
}

/** Client-side session view: only the latest frame is retained for
 * rendering; the command history is append-only. */
export interface UiState {
  status: ConnectionStatus;
  frame: Frame | null;
  history: HistoryEntry[];
  framesSeen: number;
  /** frames discarded because a newer one arrived before a render */
  droppedFrames: number;
  errorBanner: string | null;
}

export function createUiState(): UiState {
  return {
    status: "connecting",
    frame: null,
    history: [],
    framesSeen: 0,
    droppedFrames: 0,
    errorBanner: null,
  };
}

/** Applies an incoming frame; frames older than the current one are
 * ignored so the view always shows the newest state. */
export function applyFrame(state: UiState, frame: Frame): void {
  state.framesSeen += 1;
  if (state.frame !== null && frame.tick <= state.frame.tick) {
    return;
  }
  state.frame = frame;
}

export function recordCommand(state: UiState, kind: CommandKind, text: string): void {
  state.history.push({ kind, text, atTick: state.frame ? state.frame.tick : 0 });
}

/** Latest-frame mailbox between the socket and the render loop.
 * Under backpressure the oldest pending frame is dropped, so the queue
 * never grows regardless of how far the renderer falls behind. */
export class FrameQueue {
  private pending: Frame | null = null;
  dropped = 0;

  push(frame: Frame): void {
    if (this.pending !== null) {
      this.dropped += 1;
    }
    this.pending = frame;
  }

  /** Removes and returns the newest pending frame, or null. */
  take(): Frame | null {
    const f = this.pending;
    this.pending = null;
    return f;
  }

  get depth(): number {
    return this.pending === null ? 0 : 1;
  }
}

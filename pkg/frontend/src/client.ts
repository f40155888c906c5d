import { parseFrame } from "./types.js";
import type { CommandKind } from "./types.js";
import { applyFrame, createUiState, FrameQueue, recordCommand, UiState } from "./state.js";

/** The subset of the WebSocket interface the client uses; injectable so
 * tests can run without real sockets. */
export interface SocketLike {
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  send(data: string): void;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface SessionOptions {
  socketFactory?: SocketFactory;
  /** called to schedule reconnects; defaults to setTimeout */
  schedule?: (fn: () => void, ms: number) => void;
  initialBackoffMs?: number;
  maxBackoffMs?: number;
  warn?: (msg: string) => void;
}

const defaultFactory: SocketFactory = (url) =>
  new (globalThis as unknown as { WebSocket: new (u: string) => SocketLike }).WebSocket(url);

/** Live session: subscribes to frames, reconnects with exponential
 * backoff on drop, and queues at most one frame for the renderer. */
export class LiveSession {
  readonly state: UiState = createUiState();
  readonly queue = new FrameQueue();
  backoffMs: number;

  private socket: SocketLike | null = null;
  private readonly url: string;
  private readonly factory: SocketFactory;
  private readonly schedule: (fn: () => void, ms: number) => void;
  private readonly maxBackoffMs: number;
  private readonly initialBackoffMs: number;
  private readonly warn: (msg: string) => void;
  private closed = false;

  constructor(url: string, opts: SessionOptions = {}) {
    this.url = url;
    this.factory = opts.socketFactory ?? defaultFactory;
    this.schedule = opts.schedule ?? ((fn, ms) => setTimeout(fn, ms));
    this.initialBackoffMs = opts.initialBackoffMs ?? 500;
    this.maxBackoffMs = opts.maxBackoffMs ?? 8000;
    this.backoffMs = this.initialBackoffMs;
    this.warn = opts.warn ?? ((msg) => console.warn(msg));
    this.open();
  }

  private open(): void {
    this.state.status = "connecting";
    let socket: SocketLike;
    try {
      socket = this.factory(this.url);
    } catch (e) {
      this.onDrop(String(e));
      return;
    }
    this.socket = socket;
    socket.onopen = () => {
      this.state.status = "connected";
      this.state.errorBanner = null;
      this.backoffMs = this.initialBackoffMs;
    };
    socket.onclose = () => this.onDrop("connection closed");
    socket.onmessage = (ev) => this.onMessage(ev.data);
  }

  private onDrop(reason: string): void {
    this.socket = null;
    if (this.closed) return;
    this.state.status = "disconnected";
    this.state.errorBanner = `disconnected (${reason}); retrying in ${this.backoffMs} ms`;
    const delay = this.backoffMs;
    this.backoffMs = Math.min(this.backoffMs * 2, this.maxBackoffMs);
    this.schedule(() => {
      if (!this.closed) this.open();
    }, delay);
  }

  private onMessage(data: string): void {
    let doc: unknown;
    try {
      doc = JSON.parse(data);
    } catch {
      this.warn("skipping malformed message (not JSON)");
      return;
    }
    const asError = doc as { type?: string; msg?: string };
    if (asError.type === "error") {
      this.state.errorBanner = asError.msg ?? "server error";
      return;
    }
    const frame = parseFrame(doc);
    if (frame === null) {
      this.warn("skipping malformed frame");
      return;
    }
    applyFrame(this.state, frame);
    this.queue.push(frame);
  }

  /** Sends a command; empty text is rejected client-side. */
  sendCommand(kind: CommandKind, text: string): boolean {
    if (text.trim() === "") return false;
    if (this.socket === null || this.state.status !== "connected") return false;
    this.socket.send(JSON.stringify({ type: kind, text }));
    recordCommand(this.state, kind, text);
    return true;
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
    this.socket = null;
    this.state.status = "disconnected";
  }
}

export function connect(url: string, opts: SessionOptions = {}): LiveSession {
  return new LiveSession(url, opts);
}

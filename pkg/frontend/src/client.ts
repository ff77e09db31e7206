// WebSocket protocol client: hello handshake, command acks by seq,
// reconnection with snapshot resync.

import type { CommandType, Role, ServerMessage } from "./protocol";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientHandlers {
  onMessage: (msg: ServerMessage) => void;
  onStatus: (status: "connecting" | "open" | "closed") => void;
}

interface Pending {
  resolve: (payload: Record<string, unknown>) => void;
  reject: (err: Error) => void;
}

export class ProtocolClient {
  private socket: SocketLike | null = null;
  private seq = 0;
  private pending = new Map<number, Pending>();
  private closedByUser = false;
  private reconnectDelayMs = 1000;

  constructor(
    private url: string,
    private role: Role,
    private handlers: ClientHandlers,
    private socketFactory: SocketFactory = (u) =>
      new WebSocket(u) as unknown as SocketLike,
    private schedule: (fn: () => void, ms: number) => void = (fn, ms) =>
      setTimeout(fn, ms),
  ) {}

  connect(): void {
    this.closedByUser = false;
    this.handlers.onStatus("connecting");
    const socket = this.socketFactory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.send({ type: "hello", role: this.role, seq: this.nextSeq() });
    };
    socket.onmessage = (ev) => this.onFrame(ev.data);
    socket.onclose = () => {
      this.socket = null;
      this.failPending("connection closed");
      this.handlers.onStatus("closed");
      if (!this.closedByUser) {
        this.schedule(() => this.connect(), this.reconnectDelayMs);
        this.reconnectDelayMs = Math.min(this.reconnectDelayMs * 2, 5000);
      }
    };
  }

  close(): void {
    this.closedByUser = true;
    this.socket?.close();
  }

  command(type: CommandType, payload: Record<string, unknown> = {}):
      Promise<Record<string, unknown>> {
    if (!this.socket) return Promise.reject(new Error("not connected"));
    const seq = this.nextSeq();
    const promise = new Promise<Record<string, unknown>>((resolve, reject) => {
      this.pending.set(seq, { resolve, reject });
    });
    this.send({ type, seq, payload });
    return promise;
  }

  private nextSeq(): number {
    return this.seq++;
  }

  private send(msg: Record<string, unknown>): void {
    this.socket?.send(JSON.stringify(msg));
  }

  private failPending(reason: string): void {
    for (const [, p] of this.pending) p.reject(new Error(reason));
    this.pending.clear();
  }

  private onFrame(data: string): void {
    let msg: ServerMessage;
    try {
      msg = JSON.parse(data) as ServerMessage;
    } catch {
      return;
    }
    if (msg.type === "welcome") {
      this.reconnectDelayMs = 1000;
      this.handlers.onStatus("open");
    }
    if (
      (msg.type === "ack" || msg.type === "error") &&
      typeof msg.in_reply_to === "number"
    ) {
      const pending = this.pending.get(msg.in_reply_to);
      if (pending) {
        this.pending.delete(msg.in_reply_to);
        if (msg.type === "ack") {
          pending.resolve((msg.payload ?? {}) as Record<string, unknown>);
        } else {
          pending.reject(new Error(String(msg.message)));
        }
      }
    }
    this.handlers.onMessage(msg);
  }
}

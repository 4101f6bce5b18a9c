// Session-service client: one websocket, typed messages, callback dispatch.
//
// The socket implementation is injectable so tests can run the client under
// node; the browser passes the native WebSocket constructor.

import { decodeServer, encode, type ClientMessage, type ServerMessage, type SessionConfig } from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientEvents {
  onOpen?: () => void;
  onMessage?: (msg: ServerMessage) => void;
  onClose?: () => void;
}

export class SessionClient {
  private socket: SocketLike | null = null;

  constructor(
    private readonly url: string,
    private readonly events: ClientEvents,
    private readonly factory: SocketFactory,
  ) {}

  connect(): void {
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => this.events.onOpen?.();
    socket.onclose = () => {
      this.socket = null;
      this.events.onClose?.();
    };
    socket.onerror = () => {
      // the close handler owns recovery; errors always precede a close
    };
    socket.onmessage = (ev) => {
      const msg = decodeServer(String(ev.data));
      this.events.onMessage?.(msg);
    };
  }

  get connected(): boolean {
    return this.socket !== null;
  }

  send(msg: ClientMessage): void {
    if (this.socket === null) {
      throw new Error("not connected");
    }
    this.socket.send(encode(msg));
  }

  startSession(participant: string | undefined, config?: SessionConfig): void {
    this.send({ v: 1, type: "start_session", participant, config });
  }

  startTrial(): void {
    this.send({ v: 1, type: "start_trial" });
  }

  commit(): void {
    this.send({ v: 1, type: "commit" });
  }

  endSession(): void {
    this.send({ v: 1, type: "end_session" });
  }

  close(): void {
    this.socket?.close();
  }
}

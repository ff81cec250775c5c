/** Session service client: snapshot bootstrap, stream subscription with
 * reconnect, and the command channel.
 *
 * The dashboard is a pure view over snapshot+stream, so reconnecting is just
 * "fetch a fresh snapshot, resubscribe, keep folding". Gestures issued while
 * disconnected are queued locally and flushed on reconnect.
 */
import { DashboardStore } from "./store";
import type { Gesture, SnapshotJson, StreamMessage, ViewLevel } from "./types";

export interface Transport {
  fetchJson(path: string, init?: { method?: string; body?: string }): Promise<any>;
  /** Resolves once the socket is open, so no published message is missed. */
  openSocket(path: string, handlers: SocketHandlers): Promise<SocketHandle>;
}

export interface SocketHandlers {
  onMessage(raw: string): void;
  onClose(): void;
}

export interface SocketHandle {
  send(raw: string): void;
  close(): void;
}

export class SessionClient {
  readonly store = new DashboardStore();
  connected = false;
  private socket: SocketHandle | null = null;
  private pendingCommands: object[] = [];
  private closed = false;

  constructor(
    private transport: Transport,
    private sessionId: string,
    private reconnectDelayMs = 500,
    private schedule: (fn: () => void, ms: number) => void = (fn, ms) => setTimeout(fn, ms),
  ) {}

  async connect(): Promise<void> {
    // subscribe first so nothing is missed, buffer until the snapshot lands,
    // then fold the buffered tail on top; entity states on the wire are
    // absolute, so replaying a message the snapshot already covers is safe
    const buffer: StreamMessage[] = [];
    let bootstrapping = true;
    this.socket = await this.transport.openSocket(`/sessions/${this.sessionId}/stream`, {
      onMessage: (raw) => {
        const message = JSON.parse(raw) as StreamMessage;
        if (bootstrapping) buffer.push(message);
        else this.store.apply(message);
      },
      onClose: () => this.handleClose(),
    });
    const snapshot: SnapshotJson = await this.transport.fetchJson(
      `/sessions/${this.sessionId}/snapshot`,
    );
    this.store.loadSnapshot(snapshot);
    for (const message of buffer) this.store.apply(message);
    bootstrapping = false;
    this.connected = true;
    await this.flushPending();
  }

  private handleClose(): void {
    this.connected = false;
    this.socket = null;
    if (this.closed) return;
    this.schedule(() => {
      void this.connect().catch(() => this.handleClose());
    }, this.reconnectDelayMs);
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
    this.socket = null;
    this.connected = false;
  }

  private async flushPending(): Promise<void> {
    const queued = this.pendingCommands.splice(0);
    for (const cmd of queued) {
      await this.sendCommand(cmd);
    }
  }

  /** POST a command; while disconnected, queue it for the next reconnect. */
  async sendCommand(cmd: object): Promise<any> {
    if (!this.connected) {
      this.pendingCommands.push(cmd);
      return { queued: true };
    }
    return this.transport.fetchJson(`/sessions/${this.sessionId}/commands`, {
      method: "POST",
      body: JSON.stringify(cmd),
    });
  }

  async emitInteraction(view: ViewLevel, gesture: Gesture): Promise<any> {
    return this.sendCommand({ type: "interaction", view, gesture });
  }

  async setView(view: ViewLevel): Promise<any> {
    return this.sendCommand({ type: "set_view", view });
  }

  async activate(id: string): Promise<any> {
    return this.sendCommand({ type: "activate", id });
  }

  async editAlert(id: string, patch: { threshold?: number; mode?: string; criteria?: object }): Promise<any> {
    return this.sendCommand({ type: "edit_alert", id, ...patch });
  }

  async playback(command: "Play" | "Pause" | "Seek" | "SetSpeed", args: object = {}): Promise<any> {
    return this.sendCommand({ type: "playback", command, ...args });
  }

  get pendingCount(): number {
    return this.pendingCommands.length;
  }
}

/** Browser transport over fetch + WebSocket. */
export function browserTransport(baseUrl: string): Transport {
  const wsBase = baseUrl.replace(/^http/, "ws");
  return {
    async fetchJson(path, init) {
      const resp = await fetch(baseUrl + path, {
        method: init?.method ?? "GET",
        headers: init?.body ? { "Content-Type": "application/json" } : undefined,
        body: init?.body,
      });
      if (!resp.ok) throw new Error(`${resp.status} ${await resp.text()}`);
      return resp.json();
    },
    openSocket(path, handlers) {
      return new Promise((resolve, reject) => {
        const ws = new WebSocket(wsBase + path);
        ws.addEventListener("message", (event) => handlers.onMessage(String(event.data)));
        ws.addEventListener("close", () => handlers.onClose());
        ws.addEventListener("error", () => reject(new Error("websocket error")));
        ws.addEventListener("open", () =>
          resolve({ send: (raw) => ws.send(raw), close: () => ws.close() }),
        );
      });
    },
  };
}

/**
 * Line-delimited JSON protocol spoken with the engine over a TCP socket.
 *
 * Engine-to-bridge kinds: `upload_batch`, `turn_request`, `verdict`,
 * `episode_end`.  The bridge answers every `upload_batch` and every
 * `turn_request` with exactly one `agent_action` line (`ack`, `ask_text`,
 * or `guess`); `verdict` and `episode_end` take no reply.
 */

import * as net from "node:net";

export const MAX_LINE_BYTES = 1_048_576;

export interface ItemDescriptor {
  item_id: string;
  position: number;
  media: string | null;
}

export interface UploadBatchMessage {
  kind: "upload_batch";
  batch_index: number;
  is_last: boolean;
  items: ItemDescriptor[];
}

export interface TurnRequestMessage {
  kind: "turn_request";
  budget_remaining: number;
}

export interface VerdictMessage {
  kind: "verdict";
  turn_index: number;
  verdict: "yes" | "no" | "unsure" | "skip";
  violation: string | null;
}

export interface EpisodeEndMessage {
  kind: "episode_end";
  outcome: string;
}

export type EngineMessage =
  | UploadBatchMessage
  | TurnRequestMessage
  | VerdictMessage
  | EpisodeEndMessage;

export type AgentAction =
  | { kind: "agent_action"; action: "ack" }
  | { kind: "agent_action"; action: "ask_text"; text: string }
  | { kind: "agent_action"; action: "guess"; index: number };

export class ProtocolMismatch extends Error {}

export function parseEngineMessage(line: string): EngineMessage {
  let parsed: unknown;
  try {
    parsed = JSON.parse(line);
  } catch (error) {
    throw new ProtocolMismatch(`engine sent non-JSON line: ${String(error)}`);
  }
  if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
    throw new ProtocolMismatch("engine message must be a JSON object");
  }
  const kind = (parsed as { kind?: unknown }).kind;
  if (
    kind !== "upload_batch" &&
    kind !== "turn_request" &&
    kind !== "verdict" &&
    kind !== "episode_end"
  ) {
    throw new ProtocolMismatch(`unknown engine message kind ${String(kind)}`);
  }
  return parsed as EngineMessage;
}

/** Buffers socket data into newline-delimited frames with a size cap. */
export class LineFramer {
  private buffer = "";

  push(chunk: string): string[] {
    this.buffer += chunk;
    if (Buffer.byteLength(this.buffer) > MAX_LINE_BYTES) {
      throw new ProtocolMismatch("engine line exceeds the size limit");
    }
    const lines: string[] = [];
    let index: number;
    while ((index = this.buffer.indexOf("\n")) >= 0) {
      lines.push(this.buffer.slice(0, index));
      this.buffer = this.buffer.slice(index + 1);
    }
    return lines.filter((line) => line.trim().length > 0);
  }
}

/** Engine connection delivering parsed messages in arrival order. */
export class EngineConnection {
  private framer = new LineFramer();
  private queue: EngineMessage[] = [];
  private waiters: Array<(message: EngineMessage | null) => void> = [];
  private closed = false;
  private failure: Error | null = null;

  constructor(private readonly socket: net.Socket) {
    socket.setEncoding("utf-8");
    socket.on("data", (chunk: string) => {
      let lines: string[];
      try {
        lines = this.framer.push(chunk);
      } catch (error) {
        this.fail(error as Error);
        return;
      }
      for (const line of lines) {
        try {
          this.deliver(parseEngineMessage(line));
        } catch (error) {
          this.fail(error as Error);
          return;
        }
      }
    });
    socket.on("error", (error) => this.fail(error));
    socket.on("close", () => this.finish());
  }

  static connect(host: string, port: number, retries = 20): Promise<EngineConnection> {
    return new Promise((resolve, reject) => {
      const attempt = (left: number) => {
        const socket = net.createConnection({ host, port });
        socket.once("connect", () => {
          socket.removeAllListeners("error");
          resolve(new EngineConnection(socket));
        });
        socket.once("error", (error) => {
          socket.destroy();
          if (left > 0) {
            setTimeout(() => attempt(left - 1), 250);
          } else {
            reject(error);
          }
        });
      };
      attempt(retries);
    });
  }

  send(action: AgentAction): void {
    this.socket.write(JSON.stringify(action) + "\n");
  }

  /** Next engine message, or null once the engine hangs up cleanly. */
  next(): Promise<EngineMessage | null> {
    if (this.queue.length > 0) {
      return Promise.resolve(this.queue.shift() as EngineMessage);
    }
    if (this.failure) {
      return Promise.reject(this.failure);
    }
    if (this.closed) {
      return Promise.resolve(null);
    }
    return new Promise((resolve) => this.waiters.push(resolve));
  }

  close(): void {
    this.socket.destroy();
  }

  private deliver(message: EngineMessage): void {
    const waiter = this.waiters.shift();
    if (waiter) {
      waiter(message);
    } else {
      this.queue.push(message);
    }
  }

  private finish(): void {
    this.closed = true;
    for (const waiter of this.waiters.splice(0)) {
      waiter(null);
    }
  }

  private fail(error: Error): void {
    this.failure = error;
    this.closed = true;
    this.socket.destroy();
    for (const waiter of this.waiters.splice(0)) {
      waiter(null);
    }
  }
}

// Server-sent events over fetch, so the Authorization header can be set
// (the native EventSource cannot carry one).  Reconnects with exponential
// backoff, resuming from the last seen event id; a 401 stops the loop and
// surfaces "unauthorized" instead of retrying silently.

import type { ConnectionState, GatewayEvent } from "./types.js";

export interface SseFrame {
  id: number | null;
  event: string;
  data: string;
}

export interface ParseResult {
  frames: SseFrame[];
  rest: string;
}

// Pure chunk parser: returns complete frames and the unconsumed tail.
export function parseSse(buffer: string): ParseResult {
  const frames: SseFrame[] = [];
  const blocks = buffer.split("\n\n");
  const rest = blocks.pop() ?? "";
  for (const block of blocks) {
    let id: number | null = null;
    let event = "";
    const dataLines: string[] = [];
    for (const line of block.split("\n")) {
      if (line.startsWith(":")) {
        continue; // comment / keep-alive
      }
      if (line.startsWith("id:")) {
        const parsed = Number.parseInt(line.slice(3).trim(), 10);
        id = Number.isNaN(parsed) ? null : parsed;
      } else if (line.startsWith("event:")) {
        event = line.slice(6).trim();
      } else if (line.startsWith("data:")) {
        dataLines.push(line.slice(5).trim());
      }
    }
    if (event || dataLines.length) {
      frames.push({ id, event, data: dataLines.join("\n") });
    }
  }
  return { frames, rest };
}

export function decodeEvent(frame: SseFrame): GatewayEvent | null {
  if (!frame.data) {
    return null;
  }
  try {
    const parsed = JSON.parse(frame.data) as GatewayEvent;
    if (typeof parsed.seq !== "number" || typeof parsed.kind !== "string") {
      return null;
    }
    return parsed;
  } catch {
    return null;
  }
}

const BACKOFF_MS = [500, 1000, 2000, 4000, 8000, 15000];

export class EventStream {
  private cursor: number | null = null;
  private stopped = false;
  private attempt = 0;

  constructor(
    private readonly baseUrl: string,
    private readonly token: string,
    private readonly onEvent: (event: GatewayEvent) => void,
    private readonly onState: (state: ConnectionState) => void,
  ) {}

  start(fromSeq: number | null = null): void {
    this.cursor = fromSeq;
    this.stopped = false;
    void this.loop();
  }

  stop(): void {
    this.stopped = true;
    this.onState("stopped");
  }

  private async loop(): Promise<void> {
    while (!this.stopped) {
      this.onState(this.attempt === 0 ? "connecting" : "reconnecting");
      try {
        const headers: Record<string, string> = {
          Authorization: `Bearer ${this.token}`,
          Accept: "text/event-stream",
        };
        if (this.cursor !== null) {
          headers["Last-Event-ID"] = String(this.cursor);
        }
        const response = await fetch(`${this.baseUrl}/v1/events`, { headers });
        if (response.status === 401) {
          this.onState("unauthorized");
          return; // no silent retry loop on a revoked token
        }
        if (!response.ok || !response.body) {
          throw new Error(`stream status ${response.status}`);
        }
        this.onState("live");
        this.attempt = 0;
        const reader = response.body.getReader();
        const decoder = new TextDecoder();
        let buffer = "";
        for (;;) {
          const { value, done } = await reader.read();
          if (done || this.stopped) {
            break;
          }
          buffer += decoder.decode(value, { stream: true });
          const { frames, rest } = parseSse(buffer);
          buffer = rest;
          for (const frame of frames) {
            if (frame.id !== null) {
              this.cursor = frame.id;
            }
            const event = decodeEvent(frame);
            if (event) {
              this.onEvent(event);
            }
          }
        }
        if (this.stopped) {
          return;
        }
        throw new Error("stream ended");
      } catch {
        const delay = BACKOFF_MS[Math.min(this.attempt, BACKOFF_MS.length - 1)];
        this.attempt += 1;
        await sleep(delay);
      }
    }
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

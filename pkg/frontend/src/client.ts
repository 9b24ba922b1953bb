/**
 * Typed client for the operator API plus the server-sent-events channel.
 *
 * The SSE reader is built on fetch + ReadableStream so the same code runs in
 * the browser and under node (tests), and it retries forever with a fixed
 * backoff so a restarted twin picks up where the console left off.
 */

import type {
  MatchResult,
  OfflineSample,
  PairSample,
  PresetsPayload,
  Status,
  StreamEvent,
} from "./types.js";

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

async function jsonOrThrow<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = `${response.status} ${response.statusText}`;
    try {
      const body = (await response.json()) as { detail?: unknown };
      if (body && body.detail !== undefined) detail = String(body.detail);
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

/** Parse an SSE byte stream into events; comments and heartbeats are skipped. */
export async function* sseEvents(
  body: ReadableStream<Uint8Array>,
): AsyncGenerator<StreamEvent> {
  const decoder = new TextDecoder();
  const reader = body.getReader();
  let buffer = "";
  try {
    for (;;) {
      const { value, done } = await reader.read();
      if (done) return;
      buffer += decoder.decode(value, { stream: true });
      let boundary: number;
      while ((boundary = buffer.indexOf("\n\n")) >= 0) {
        const chunk = buffer.slice(0, boundary);
        buffer = buffer.slice(boundary + 2);
        for (const line of chunk.split("\n")) {
          if (line.startsWith("data: ")) {
            yield JSON.parse(line.slice("data: ".length)) as StreamEvent;
          }
        }
      }
    }
  } finally {
    reader.releaseLock();
  }
}

export interface StreamHandlers {
  onEvent: (event: StreamEvent) => void;
  onConnected?: () => void;
  onDisconnected?: () => void;
}

export class ApiClient {
  constructor(
    readonly base: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  status(): Promise<Status> {
    return this.get<Status>("/status");
  }

  trace(since = 0): Promise<{ pairs: PairSample[] }> {
    return this.get<{ pairs: PairSample[] }>(`/trace?since=${since}`);
  }

  presets(): Promise<PresetsPayload> {
    return this.get<PresetsPayload>("/presets");
  }

  async submitSetpoint(value: number): Promise<void> {
    await this.post("/setpoint", { value });
  }

  match(generations?: number, seed?: number): Promise<MatchResult> {
    const body: Record<string, number> = {};
    if (generations !== undefined) body.generations = generations;
    if (seed !== undefined) body.seed = seed;
    return this.post<MatchResult>("/match", body);
  }

  offlineRun(
    profile:
      | { kind: "constant"; value: number }
      | { kind: "step_sequence"; segments: [number, number][] },
    duration: number,
  ): Promise<{ source: string; samples: OfflineSample[] }> {
    return this.post("/offline", { profile, duration });
  }

  stop(): Promise<unknown> {
    return this.post("/stop", {});
  }

  /**
   * Consume the push channel until the signal aborts, reconnecting on any
   * stream failure after retryMs.
   */
  async streamLoop(
    handlers: StreamHandlers,
    signal: AbortSignal,
    retryMs = 1000,
  ): Promise<void> {
    while (!signal.aborted) {
      try {
        const response = await this.fetchFn(`${this.base}/stream`, { signal });
        if (!response.ok || !response.body) {
          throw new ApiError(response.status, "stream unavailable");
        }
        handlers.onConnected?.();
        for await (const event of sseEvents(response.body)) {
          handlers.onEvent(event);
          if (signal.aborted) return;
        }
      } catch (error) {
        if (signal.aborted) return;
      }
      handlers.onDisconnected?.();
      await new Promise((resolve) => setTimeout(resolve, retryMs));
    }
  }

  private async get<T>(path: string): Promise<T> {
    return jsonOrThrow<T>(await this.fetchFn(`${this.base}${path}`));
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.base}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return jsonOrThrow<T>(response);
  }
}

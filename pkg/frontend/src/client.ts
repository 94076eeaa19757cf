/**
 * Session API client: event polling with index-based resume and an
 * idempotent turn-submission path.
 *
 * The only state kept locally is the last seen event index; everything else
 * is rebuilt from the server's stream. Turn submissions carry an idempotency
 * key so a retry (or an over-eager double click) can never create two turns.
 */

import type { SessionEvent, SessionSnapshot, TurnResult } from "./types.js";

export interface FetchResponse {
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<FetchResponse>;

export class ConflictError extends Error {
  constructor(detail: string) {
    super(detail);
    this.name = "ConflictError";
  }
}

export class SessionClient {
  private lastIndex = -1;
  private inFlightTurn: Promise<TurnResult> | null = null;
  private keyCounter = 0;
  private currentKey: string | null = null;

  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike,
    private readonly keyPrefix: string = `turn-${Date.now().toString(36)}`,
  ) {}

  get lastEventIndex(): number {
    return this.lastIndex;
  }

  async createSession(seed: Record<string, unknown>, horizon?: number): Promise<string> {
    const body: Record<string, unknown> = { seed };
    if (horizon !== undefined) body["horizon"] = horizon;
    const response = await this.fetchImpl(`${this.baseUrl}/v1/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (response.status !== 201) {
      throw new Error(`session creation failed: ${response.status}`);
    }
    const payload = (await response.json()) as { session_id: string };
    return payload.session_id;
  }

  async snapshot(sessionId: string): Promise<SessionSnapshot> {
    const response = await this.fetchImpl(`${this.baseUrl}/v1/sessions/${sessionId}`);
    if (response.status !== 200) {
      throw new Error(`snapshot failed: ${response.status}`);
    }
    return (await response.json()) as SessionSnapshot;
  }

  /**
   * Fetch events after the last seen index. Safe to call after a reconnect:
   * the index is the resume cursor, so no events are skipped or duplicated.
   */
  async pollEvents(sessionId: string, waitSeconds = 0): Promise<SessionEvent[]> {
    const url =
      `${this.baseUrl}/v1/sessions/${sessionId}/events` +
      `?since=${this.lastIndex}&wait=${waitSeconds}`;
    const response = await this.fetchImpl(url);
    if (response.status !== 200) {
      throw new Error(`event poll failed: ${response.status}`);
    }
    const payload = (await response.json()) as { events: SessionEvent[] };
    const fresh = payload.events.filter((e) => e.index > this.lastIndex);
    for (const event of fresh) {
      this.lastIndex = Math.max(this.lastIndex, event.index);
    }
    return fresh;
  }

  /**
   * Submit the human turn. While one submission is in flight, further calls
   * return the same promise. One logical turn holds one idempotency key: the
   * key is only released once the server accepts or rejects the turn, so a
   * retry after a network failure reuses it and can never double-apply.
   */
  submitTurn(sessionId: string, text: string): Promise<TurnResult> {
    if (this.inFlightTurn) {
      return this.inFlightTurn;
    }
    if (this.currentKey === null) {
      this.currentKey = `${this.keyPrefix}-${this.keyCounter++}`;
    }
    const key = this.currentKey;
    const attempt = async (): Promise<TurnResult> => {
      try {
        const response = await this.fetchImpl(
          `${this.baseUrl}/v1/sessions/${sessionId}/turn`,
          {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({ text, idempotency_key: key }),
          },
        );
        if (response.status === 409) {
          this.currentKey = null; // the turn was refused; the next one is new
          const detail = (await response.json()) as { detail?: string };
          throw new ConflictError(detail.detail ?? "turn rejected");
        }
        if (response.status !== 200) {
          throw new Error(`turn failed: ${response.status}`);
        }
        const result = (await response.json()) as TurnResult;
        this.currentKey = null; // resolved; release the key
        return result;
      } finally {
        this.inFlightTurn = null;
      }
    };
    this.inFlightTurn = attempt();
    return this.inFlightTurn;
  }
}

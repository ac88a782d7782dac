/** Typed client for the suggestion service; the UI's only persistence path. */

import type { NextResponse, SuggestResponse, WireSentence } from "./types.js";

export interface HealthResponse {
  status: string;
  model_version?: string;
}

export interface SubmitRejection {
  error: string;
  errors?: string[];
  warnings?: string[];
  identical?: boolean;
}

export type SubmitResult =
  | { kind: "created"; warnings: string[] }
  | { kind: "rejected"; status: number; report: SubmitRejection }
  | { kind: "network-error"; message: string };

export class ApiClient {
  constructor(private readonly base: string = "") {}

  private url(path: string): string {
    return this.base + path;
  }

  async health(): Promise<HealthResponse | null> {
    const res = await fetch(this.url("/health"));
    return res.status === 503 ? null : ((await res.json()) as HealthResponse);
  }

  /** Next unlabeled sentence, or null when the queue is empty. */
  async next(): Promise<NextResponse | null> {
    const res = await fetch(this.url("/next"));
    if (res.status === 204) return null;
    if (!res.ok) throw new Error(`GET /next failed: ${res.status}`);
    return (await res.json()) as NextResponse;
  }

  /** Model suggestion for a queued sentence; null when disabled (403). */
  async suggest(id: string): Promise<SuggestResponse | null> {
    const res = await fetch(this.url("/suggest"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ id }),
    });
    if (res.status === 403) return null;
    if (!res.ok) throw new Error(`POST /suggest failed: ${res.status}`);
    return (await res.json()) as SuggestResponse;
  }

  async submit(sentence: WireSentence): Promise<SubmitResult> {
    let res: Response;
    try {
      res = await fetch(this.url("/annotations"), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(sentence),
      });
    } catch (err) {
      return { kind: "network-error", message: String(err) };
    }
    if (res.status === 201) {
      const body = (await res.json()) as { warnings?: string[] };
      return { kind: "created", warnings: body.warnings ?? [] };
    }
    const report = (await res.json()) as SubmitRejection;
    return { kind: "rejected", status: res.status, report };
  }

  async retrain(): Promise<{ status: number }> {
    const res = await fetch(this.url("/retrain"), { method: "POST" });
    return { status: res.status };
  }
}

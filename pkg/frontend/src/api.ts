import type { CatalogEntry, Manifest, Settings, TranslateOutcome } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Client for the local translation service. Every request goes to the one
 * configured loopback origin; there is no other network destination in the
 * entire UI. */
export class ApiClient {
  constructor(
    private readonly origin: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string): string {
    return new URL(path, this.origin).toString();
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(this.url(path));
    if (!resp.ok) throw await toError(resp);
    return (await resp.json()) as T;
  }

  private async send<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchFn(this.url(path), {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!resp.ok) throw await toError(resp);
    return (await resp.json()) as T;
  }

  health(): Promise<{ version: string; ready: boolean }> {
    return this.getJson("/v1/health");
  }

  models(): Promise<Manifest[]> {
    return this.getJson("/v1/models");
  }

  catalog(): Promise<CatalogEntry[]> {
    return this.getJson("/v1/catalog");
  }

  download(id: string): Promise<{ id: string }> {
    return this.send("POST", "/v1/models/download", { id });
  }

  importArchive(path: string): Promise<{ id: string }> {
    return this.send("POST", "/v1/models/import", { path });
  }

  deleteModel(id: string): Promise<{ deleted: string }> {
    return this.send("DELETE", `/v1/models/${encodeURIComponent(id)}`);
  }

  getSettings(): Promise<Settings> {
    return this.getJson("/v1/settings");
  }

  putSettings(update: Partial<Settings>): Promise<Settings> {
    return this.send("PUT", "/v1/settings", update);
  }

  /** Translate with supersession semantics: a 409 "superseded" response is a
   * normal outcome, not an error. */
  async translate(
    model: string,
    text: string,
    session?: string,
    generation?: number,
  ): Promise<TranslateOutcome> {
    const resp = await this.fetchFn(this.url("/v1/translate"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ model, text, session, generation }),
    });
    if (resp.ok) {
      const body = (await resp.json()) as { text: string };
      return { kind: "ok", text: body.text };
    }
    const err = await parseErrorBody(resp);
    if (resp.status === 409 && err.code === "superseded") {
      return { kind: "superseded" };
    }
    return { kind: "error", code: err.code, message: err.message };
  }
}

async function parseErrorBody(resp: Response): Promise<{ code: string; message: string }> {
  try {
    const body = (await resp.json()) as { code?: string; message?: string };
    return { code: body.code ?? `http_${resp.status}`, message: body.message ?? resp.statusText };
  } catch {
    return { code: `http_${resp.status}`, message: resp.statusText };
  }
}

async function toError(resp: Response): Promise<Error> {
  const { code, message } = await parseErrorBody(resp);
  const error = new Error(`${code}: ${message}`);
  error.name = "ApiError";
  return error;
}

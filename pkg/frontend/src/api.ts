// Thin typed client over the documented service endpoints. The UI never
// transforms data itself; the engine is the single source of truth.

import type {
  ApplyResponse,
  OpRequest,
  PipelineResponse,
  PreviewResponse,
  ProvenanceDoc,
  TablePage,
  TableSummary,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let message = `HTTP ${response.status}`;
  try {
    const body = await response.json();
    const detail = body.detail ?? body.error ?? body;
    message = typeof detail === "string" ? detail : JSON.stringify(detail);
  } catch {
    // keep the status line
  }
  return new ApiError(response.status, message);
}

async function expectJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    throw await parseError(response);
  }
  return (await response.json()) as T;
}

export class Client {
  constructor(private base: string = "") {}

  private url(path: string): string {
    return `${this.base}${path}`;
  }

  async health(): Promise<{ status: string }> {
    return expectJson(await fetch(this.url("/health")));
  }

  async createSession(): Promise<string> {
    const body = await expectJson<{ session: string }>(
      await fetch(this.url("/session"), { method: "POST" }),
    );
    return body.session;
  }

  async listTables(session: string): Promise<TableSummary[]> {
    const body = await expectJson<{ tables: TableSummary[] }>(
      await fetch(this.url(`/session/${session}/tables`)),
    );
    return body.tables;
  }

  async getTablePage(
    session: string,
    handle: string,
    offset = 0,
    limit = 50,
  ): Promise<TablePage> {
    const query = `offset=${offset}&limit=${limit}`;
    return expectJson(
      await fetch(this.url(`/session/${session}/table/${handle}?${query}`)),
    );
  }

  async preview(
    session: string,
    request: OpRequest,
    limit = 10,
  ): Promise<PreviewResponse> {
    return expectJson(
      await fetch(this.url(`/session/${session}/preview`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ ...request, limit }),
      }),
    );
  }

  async apply(session: string, request: OpRequest): Promise<ApplyResponse> {
    return expectJson(
      await fetch(this.url(`/session/${session}/op`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(request),
      }),
    );
  }

  async provenance(session: string): Promise<ProvenanceDoc> {
    return expectJson(await fetch(this.url(`/session/${session}/provenance`)));
  }

  async runPipeline(session: string, source: string): Promise<PipelineResponse> {
    return expectJson(
      await fetch(this.url(`/session/${session}/pipeline`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ source }),
      }),
    );
  }

  async uploadCsv(
    session: string,
    file: File,
    handle?: string,
  ): Promise<TableSummary> {
    const form = new FormData();
    form.append("file", file);
    const query = handle ? `?handle=${encodeURIComponent(handle)}` : "";
    return expectJson(
      await fetch(this.url(`/session/${session}/upload${query}`), {
        method: "POST",
        body: form,
      }),
    );
  }
}

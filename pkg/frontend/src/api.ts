/**
 * Typed client for the assistant's /v1 HTTP API.
 *
 * The UI talks to the server through this module only; everything it renders
 * comes back from these calls. The fetch implementation is injectable so
 * tests can stub the network away entirely.
 */

export interface SelectorInfo {
  decisions: boolean[];
  raw_output: string;
  warning: boolean;
}

export interface ChunkInfo {
  chunk_id: string;
  doc_id: string;
  dataset_id: string;
  seq_no: number;
  text: string;
  char_span: [number, number];
  metadata: Record<string, unknown>;
}

export interface HitInfo {
  chunk: ChunkInfo;
  score: number | null;
}

export interface StructuredQueryInfo {
  query_text: string;
  filter_text: string;
  k: number;
}

export interface TraceInfo {
  dataset_id: string;
  mode: string;
  used_constructor: boolean;
  raw_output: string | null;
  internal_query: { query_text: string; filter_text: string; limit: number | null } | null;
  structured_query: StructuredQueryInfo | null;
  fallback: boolean;
}

export interface EvidenceSlot {
  dataset_id: string;
  display_name: string;
  activated: boolean;
  hits: HitInfo[] | null;
  trace: TraceInfo | null;
  error: string | null;
}

export interface QueryResponse {
  text: string;
  role: string;
  query: string;
  selector: SelectorInfo;
  evidence: EvidenceSlot[];
}

export interface RoleInfo {
  role: string;
  background: { knowledge: string; goals: string; requirements: string };
  actions: string[];
  example_queries: string[];
}

export interface RetrieverInfo {
  dataset_id: string;
  display_name: string;
  description: string;
  retrieval_mode: string;
  chunking: { splitter: string; size: number; overlap: number };
  chunks: number;
}

export interface HealthInfo {
  status: string;
  retrievers: number;
  roles: number;
  datasets: string[];
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export interface ApiOptions {
  baseUrl?: string;
  token?: string;
  fetchFn?: typeof fetch;
}

export class ApiClient {
  private baseUrl: string;
  private token: string | null;
  private fetchFn: typeof fetch;

  constructor(options: ApiOptions = {}) {
    // default to same-origin so the UI works behind a reverse proxy
    this.baseUrl = (options.baseUrl ?? "").replace(/\/$/, "");
    this.token = options.token ?? null;
    this.fetchFn = options.fetchFn ?? fetch.bind(globalThis);
  }

  private async request<T>(path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { Accept: "application/json" };
    if (this.token) {
      headers.Authorization = `Bearer ${this.token}`;
    }
    const init: RequestInit = { method: body === undefined ? "GET" : "POST", headers };
    if (body !== undefined) {
      headers["Content-Type"] = "application/json";
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!resp.ok) {
      throw new ApiError(resp.status, await readErrorDetail(resp));
    }
    return resp.json() as Promise<T>;
  }

  async health(): Promise<HealthInfo> {
    return this.request<HealthInfo>("/v1/health");
  }

  async roles(): Promise<RoleInfo[]> {
    const data = await this.request<{ roles: RoleInfo[] }>("/v1/roles");
    return data.roles;
  }

  async retrievers(): Promise<RetrieverInfo[]> {
    const data = await this.request<{ retrievers: RetrieverInfo[] }>("/v1/retrievers");
    return data.retrievers;
  }

  async query(role: string, query: string): Promise<QueryResponse> {
    return this.request<QueryResponse>("/v1/query", { role, query });
  }
}

async function readErrorDetail(resp: Response): Promise<string> {
  try {
    const payload = (await resp.json()) as { detail?: unknown };
    if (typeof payload.detail === "string" && payload.detail) {
      return payload.detail;
    }
  } catch {
    // non-JSON error body; fall through to the status line
  }
  return `HTTP ${resp.status}`;
}

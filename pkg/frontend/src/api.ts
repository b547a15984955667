/** Typed client for the registerdex HTTP service. */

export interface SearchRequest {
  query: string;
  k?: number;
  m?: number;
  views?: string[];
}

export interface SearchHit {
  paper_id: string;
  title: string;
  score: number;
  best_view: string | null;
  snippet: string;
}

export interface SearchResponse {
  views_used: string[];
  results: SearchHit[];
}

export interface IdentifyResponse {
  views: string[];
}

export interface HealthResponse {
  status: string;
  kind: string;
  papers: number;
}

export interface SchemaNode {
  name: string;
  description: string;
  children?: SchemaNode[];
}

export interface SchemaResponse {
  paper_type: string;
  version: string;
  root: SchemaNode;
}

export interface RegisterResponse {
  paper_id: string;
  paper_type: string;
  schema_version: string;
  contents: Record<string, string>;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`service error ${status}: ${detail}`);
    this.name = 'ApiError';
  }
}

/**
 * ApiClient wraps the service endpoints. The fetch implementation is
 * injectable so tests can replay recorded responses without a server.
 */
export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: unknown };
        if (typeof body.detail === 'string') detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
  }

  healthz(): Promise<HealthResponse> {
    return this.request<HealthResponse>('/healthz');
  }

  search(req: SearchRequest): Promise<SearchResponse> {
    return this.post<SearchResponse>('/search', req);
  }

  identify(query: string, k?: number): Promise<IdentifyResponse> {
    return this.post<IdentifyResponse>('/identify', { query, k });
  }

  schema(paperType: string): Promise<SchemaResponse> {
    return this.request<SchemaResponse>(`/schema/${encodeURIComponent(paperType)}`);
  }

  register(paperId: string): Promise<RegisterResponse> {
    return this.request<RegisterResponse>(
      `/paper/${encodeURIComponent(paperId)}/register`,
    );
  }
}

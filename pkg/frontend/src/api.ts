// Typed client for the pool-testing service. All strategy math stays on
// the server; this module only moves JSON around.

export interface SessionSnapshot {
  id: string;
  n: number;
  priors: number[];
  strategy: Record<string, unknown>;
  history: { pool: number[]; result: string }[];
  status: "running" | "complete";
  outcome: string | null;
  tests_used: number;
  next_pool: number[] | null;
  expected_remaining: number;
  remaining_tree: string | null;
}

export interface SliceResponse {
  n: number;
  plane: string;
  resolution: number;
  outside: number;
  ids: number[][];
  legend: Record<string, string>;
}

export interface SquareMapResponse {
  n: number;
  resolution: number;
  ids: number[][];
  legend: Record<string, string>;
}

export interface FrontiersResponse {
  triple_point: [number, number];
  ab: [number, number][];
  ac: [number, number][];
  bc: [number, number][];
}

export interface ZonePending {
  pending: true;
  status: string;
  progress: number;
}

export interface OptimalResponse {
  procedure: string;
  expected_length: number;
  n: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private base: string = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<{ status: number; body: any }> {
    const response = await this.fetchImpl(this.base + path, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    const text = await response.text();
    const body = text ? JSON.parse(text) : null;
    return { status: response.status, body };
  }

  private async expectOk(path: string, init?: RequestInit): Promise<any> {
    const { status, body } = await this.request(path, init);
    if (status >= 400) {
      throw new ApiError(status, body?.error ?? `request failed with ${status}`);
    }
    return body;
  }

  createSession(priors: number[], strategy: string | object): Promise<SessionSnapshot> {
    return this.expectOk("/v1/sessions", {
      method: "POST",
      body: JSON.stringify({ priors, strategy }),
    });
  }

  getSession(id: string): Promise<SessionSnapshot> {
    return this.expectOk(`/v1/sessions/${id}`);
  }

  postResult(id: string, result: "negative" | "positive", step?: number): Promise<SessionSnapshot> {
    return this.expectOk(`/v1/sessions/${id}/result`, {
      method: "POST",
      body: JSON.stringify(step === undefined ? { result } : { result, step }),
    });
  }

  deleteSession(id: string): Promise<void> {
    return this.expectOk(`/v1/sessions/${id}`, { method: "DELETE" });
  }

  optimal(priors: number[]): Promise<OptimalResponse> {
    return this.expectOk("/v1/procedures/optimal", {
      method: "POST",
      body: JSON.stringify({ priors }),
    });
  }

  async squareMap(n: number, res: number): Promise<SquareMapResponse | ZonePending> {
    const { status, body } = await this.request(`/v1/zones/${n}/map?res=${res}`);
    if (status === 202) return { pending: true, status: body.status, progress: body.progress };
    if (status >= 400) throw new ApiError(status, body?.error ?? `status ${status}`);
    return body;
  }

  async slice(
    n: number,
    plane: string,
    value: number,
    res: number,
  ): Promise<SliceResponse | ZonePending> {
    const { status, body } = await this.request(
      `/v1/zones/${n}/slice?plane=${plane}&value=${value}&res=${res}`,
    );
    if (status === 202) return { pending: true, status: body.status, progress: body.progress };
    if (status >= 400) throw new ApiError(status, body?.error ?? `status ${status}`);
    return body;
  }

  frontiers(n: number): Promise<FrontiersResponse> {
    return this.expectOk(`/v1/zones/${n}/frontiers`);
  }

  counts(n: number): Promise<{ n: number; procedures: number; naive: number; zones: number | null }> {
    return this.expectOk(`/v1/meta/counts?n=${n}`);
  }
}

export function isPending(value: unknown): value is ZonePending {
  return typeof value === "object" && value !== null && (value as any).pending === true;
}

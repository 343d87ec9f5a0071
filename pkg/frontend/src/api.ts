/** Typed client for the solver service. The UI never computes policies
 * itself: everything rendered comes back from these calls. */

export interface TaskRole {
  name: string;
  source: boolean;
  target: boolean;
}

export interface DatasetMeta {
  format_version: number;
  id: string;
  tasks: TaskRole[];
  n_sources: number;
  n_targets: number;
  orders: number[];
  edge_count: number;
  has_records: boolean;
}

export interface PolicyEntry {
  sources: string[];
  p: number;
  order: number;
}

export interface TaxonomyPayload {
  format_version: number;
  objective: number;
  sources: string[];
  policy: Record<string, PolicyEntry>;
  config: {
    budget: number;
    max_order: number | null;
    cost_mode: string;
    importance: Record<string, number>;
    label_cost: Record<string, number>;
  };
  tasks: TaskRole[];
  stats: { nodes_explored: number; origin: string };
}

export interface SolveRequest {
  budget: number;
  max_order: number;
  importance: Record<string, number>;
  costs: Record<string, number>;
  cost_mode: "nodes" | "edges";
}

export interface SignificancePayload {
  format_version: number;
  optimal_objective: number;
  sample_count: number;
  percentile_5: number | null;
  percentile_95: number | null;
  random_objectives: number[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let code = "HTTP";
  let message = `${response.status} ${response.statusText}`;
  try {
    const body = (await response.json()) as { code?: string; error?: string };
    if (body.code) code = body.code;
    if (body.error) message = body.error;
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiError(response.status, code, message);
}

export class SolverClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  async listDatasets(): Promise<DatasetMeta[]> {
    const body = await this.get<{ datasets: DatasetMeta[] }>("/datasets");
    return body.datasets;
  }

  metadata(datasetId: string): Promise<DatasetMeta> {
    return this.get<DatasetMeta>(`/datasets/${encodeURIComponent(datasetId)}`);
  }

  async solve(
    datasetId: string,
    request: SolveRequest,
    signal?: AbortSignal,
  ): Promise<TaxonomyPayload> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/datasets/${encodeURIComponent(datasetId)}/solve`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(request),
        signal,
      },
    );
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as TaxonomyPayload;
  }

  async significance(
    datasetId: string,
    request: { budget: number; max_order: number; samples: number; seed: number },
    signal?: AbortSignal,
  ): Promise<SignificancePayload> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/datasets/${encodeURIComponent(datasetId)}/significance`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(request),
        signal,
      },
    );
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as SignificancePayload;
  }
}

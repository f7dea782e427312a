import {
  ComparisonOut,
  NextOut,
  Outcome,
  RecordOut,
  TaskOut,
  TaskSummaryOut,
} from "./types";

export class ServiceError extends Error {
  constructor(
    public code: string,
    public detail: string,
    public status: number,
  ) {
    super(`${code}: ${detail}`);
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const data = await resp.json();
    if (!resp.ok) {
      throw new ServiceError(data.error ?? "unknown_error", data.detail ?? "", resp.status);
    }
    return data as T;
  }

  getTask(taskId: string): Promise<TaskOut> {
    return this.request("GET", `/tasks/${taskId}`);
  }

  nextReference(taskId: string): Promise<NextOut> {
    return this.request("GET", `/tasks/${taskId}/next`);
  }

  submitComparison(
    taskId: string,
    refId: string,
    outcome: Outcome,
    annotatorId: string,
  ): Promise<ComparisonOut> {
    return this.request("POST", `/tasks/${taskId}/comparisons`, {
      ref_id: refId,
      outcome,
      annotator_id: annotatorId,
    });
  }

  finalizeTask(taskId: string): Promise<RecordOut> {
    return this.request("POST", `/tasks/${taskId}/finalize`, {});
  }

  listOpenTasks(): Promise<{ tasks: TaskSummaryOut[] }> {
    return this.request("GET", "/tasks?status=open");
  }
}

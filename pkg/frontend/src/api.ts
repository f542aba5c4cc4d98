// Thin typed client for the review service. The fetch implementation is
// injectable so tests can run without a browser or a live server.

import type {
  BatchReport,
  CorrectionAck,
  CorrectionBody,
  LiveReport,
  TableCellsResponse,
  TableSummary,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class ReviewApiClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.base}${path}`, init);
    const body = await response.text();
    if (!response.ok) {
      let detail = body;
      try {
        detail = JSON.parse(body).detail ?? body;
      } catch {
        // keep the raw body as the detail
      }
      throw new ApiError(response.status, String(detail));
    }
    return JSON.parse(body) as T;
  }

  listTables(): Promise<TableSummary[]> {
    return this.request<TableSummary[]>("/v1/tables");
  }

  tableCells(tableId: string, flaggedOnly = false): Promise<TableCellsResponse> {
    const query = flaggedOnly ? "?flagged=true" : "";
    return this.request<TableCellsResponse>(
      `/v1/tables/${encodeURIComponent(tableId)}/cells${query}`,
    );
  }

  imageUrl(tableId: string): string {
    return `${this.base}/v1/tables/${encodeURIComponent(tableId)}/image`;
  }

  submitCorrection(
    tableId: string,
    row: number,
    col: number,
    body: CorrectionBody,
  ): Promise<CorrectionAck> {
    return this.request<CorrectionAck>(
      `/v1/tables/${encodeURIComponent(tableId)}/cells/${row},${col}/correction`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      },
    );
  }

  batchReport(): Promise<BatchReport> {
    return this.request<BatchReport>("/v1/report");
  }

  liveReport(): Promise<LiveReport> {
    return this.request<LiveReport>("/v1/report/live");
  }
}

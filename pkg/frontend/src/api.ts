// Thin fetch wrapper over the review service. The UI holds no derived
// state: every statistic shown comes straight from these endpoints.

import { AggregateReport, AuditCase, AuditRecordPayload, CaseListPage, FieldError } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public fieldErrors: FieldError[] = [],
    public retryable = false,
  ) {
    super(message);
  }
}

export interface CaseDetail extends AuditCase {
  records: AuditRecordPayload[];
}

export class ApiClient {
  constructor(private baseUrl: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await fetch(this.baseUrl + path, init);
    } catch (e) {
      throw new ApiError(0, `service unreachable: ${e}`, [], true);
    }
    const body = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      throw new ApiError(resp.status, body.detail ?? `HTTP ${resp.status}`,
        body.errors ?? [], body.retryable === true || resp.status === 503);
    }
    return body as T;
  }

  listCases(status?: string, page = 1, pageSize = 10): Promise<CaseListPage> {
    const params = new URLSearchParams({ page: String(page), page_size: String(pageSize) });
    if (status) params.set("status", status);
    return this.request<CaseListPage>(`/api/cases?${params}`);
  }

  getCase(caseId: string): Promise<CaseDetail> {
    return this.request<CaseDetail>(`/api/cases/${encodeURIComponent(caseId)}`);
  }

  submitRecord(payload: AuditRecordPayload): Promise<{ record_id: number }> {
    return this.request<{ record_id: number }>("/api/records", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  report(): Promise<AggregateReport | { n_records: 0 }> {
    return this.request<AggregateReport | { n_records: 0 }>("/api/report");
  }

  overlayUrl(relativePath: string): string {
    return `${this.baseUrl}/overlays/${relativePath}`;
  }
}

import type {
  CodebookDoc,
  CodebookSummary,
  ConceptGroup,
  Disagreement,
  Flag,
  RaterAnnotations,
  Report,
} from "./types";

/** Error carrying the server's status code and machine-readable reason. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }

  get isConflict(): boolean {
    return this.status === 409;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/**
 * Typed client for the review server. Every UI action goes through exactly
 * one of these calls; the client keeps no state beyond the rater token.
 */
export class ApiClient {
  private token: string | null = null;

  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token) headers["X-Rater-Token"] = this.token;
    const response = await this.fetchImpl(this.base + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    const payload = text ? JSON.parse(text) : {};
    if (!response.ok) {
      throw new ApiError(
        response.status,
        payload.error ?? "error",
        payload.message ?? response.statusText,
      );
    }
    return payload as T;
  }

  registerRater(name: string): Promise<{ rater: string; token: string }> {
    return this.request("POST", "/raters", { name });
  }

  listCodebooks(): Promise<CodebookSummary[]> {
    return this.request("GET", "/codebooks");
  }

  getCodebook(approach: string): Promise<CodebookDoc> {
    return this.request("GET", `/codebooks/${encodeURIComponent(approach)}`);
  }

  getAnnotations(rater: string, approach?: string): Promise<RaterAnnotations> {
    const query = approach ? `?approach=${encodeURIComponent(approach)}` : "";
    return this.request("GET", `/annotations/${encodeURIComponent(rater)}${query}`);
  }

  putAnnotation(
    rater: string,
    approach: string,
    label: string,
    flags: Flag[],
    note = "",
  ): Promise<unknown> {
    return this.request("PUT", `/annotations/${encodeURIComponent(rater)}`, {
      approach,
      label,
      flags,
      note,
    });
  }

  complete(rater: string, approach: string): Promise<unknown> {
    return this.request("POST", `/annotations/${encodeURIComponent(rater)}/complete`, {
      approach,
    });
  }

  getDisagreements(approach: string): Promise<{ disagreements: Disagreement[] }> {
    return this.request("GET", `/disagreements/${encodeURIComponent(approach)}`);
  }

  postReconciliation(
    approach: string,
    label: string,
    finalFlags: Flag[],
    note = "",
  ): Promise<unknown> {
    return this.request("POST", "/reconciliations", {
      approach,
      label,
      final_flags: finalFlags,
      note,
    });
  }

  getReport(): Promise<Report> {
    return this.request("GET", "/report");
  }

  getConceptGroup(keyword: string): Promise<ConceptGroup> {
    return this.request("GET", `/concept-groups?keyword=${encodeURIComponent(keyword)}`);
  }
}

/** Thin typed client over the wiki's JSON API.  The fetch function is
 * injectable so node-side tests can talk to a real server or a stub. */

import {
  ApiError,
  ApiErrorBody,
  CdEntry,
  EditResult,
  HistoryEntry,
  OpenIssue,
  Post,
  PostType,
  ReplyTypes,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface EditHeaders {
  author?: string;
  summary?: string;
  baseRevision?: number;
  token?: string;
}

export class WikiApi {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
    private token: string | null = null,
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  private async request(url: string, init: RequestInit = {}): Promise<Response> {
    const headers: Record<string, string> = {
      ...((init.headers as Record<string, string>) ?? {}),
    };
    if (this.token) headers["X-Auth-Token"] = this.token;
    const response = await this.fetchImpl(this.base + url, { ...init, headers });
    if (!response.ok) {
      let body: ApiErrorBody;
      try {
        body = (await response.json()) as ApiErrorBody;
      } catch {
        body = { code: `HTTP${response.status}`, detail: response.statusText };
      }
      throw new ApiError(response.status, body.code, body.detail, body.position);
    }
    return response;
  }

  async pageHtml(id: string): Promise<string> {
    const r = await this.request(`/page/${id}?format=html`);
    return r.text();
  }

  async pageSource(id: string): Promise<string> {
    const r = await this.request(`/page/${id}?format=source`);
    return r.text();
  }

  async putFragment(id: string, source: string, opts: EditHeaders = {}): Promise<EditResult> {
    const headers: Record<string, string> = { "Content-Type": "application/xml" };
    if (opts.author) headers["X-Author"] = opts.author;
    if (opts.summary) headers["X-Summary"] = opts.summary;
    if (opts.baseRevision !== undefined) headers["X-Base-Revision"] = String(opts.baseRevision);
    const r = await this.request(`/page/${id}`, { method: "PUT", body: source, headers });
    return (await r.json()) as EditResult;
  }

  async history(id: string): Promise<HistoryEntry[]> {
    const r = await this.request(`/page/${id}/history`);
    return (await r.json()) as HistoryEntry[];
  }

  async discussion(id: string): Promise<Post[]> {
    const r = await this.request(`/page/${id}/discussion`);
    return (await r.json()) as Post[];
  }

  async replyTypes(id: string, parent: string | null): Promise<PostType[]> {
    const suffix = parent ? `?parent=${encodeURIComponent(parent)}` : "";
    const r = await this.request(`/page/${id}/discussion/reply-types${suffix}`);
    return ((await r.json()) as ReplyTypes).types;
  }

  async addPost(
    id: string,
    body: {
      type: PostType;
      parent?: string | null;
      body: string;
      author?: string;
      polarity?: "support" | "object";
      decided_idea?: string;
    },
  ): Promise<{ id: string; type: PostType }> {
    const r = await this.request(`/page/${id}/discussion`, {
      method: "POST",
      body: JSON.stringify(body),
      headers: { "Content-Type": "application/json" },
    });
    return (await r.json()) as { id: string; type: PostType };
  }

  async openIssues(): Promise<OpenIssue[]> {
    const r = await this.request("/dashboard/open-issues");
    return (await r.json()) as OpenIssue[];
  }

  async cds(): Promise<CdEntry[]> {
    const r = await this.request("/cds");
    return (await r.json()) as CdEntry[];
  }

  async query(text: string): Promise<Record<string, { value: string; href?: string }>[]> {
    const r = await this.request("/query", { method: "POST", body: text });
    return ((await r.json()) as { rows: Record<string, { value: string; href?: string }>[] }).rows;
  }
}

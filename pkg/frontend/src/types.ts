/** Payload shapes of the wiki's JSON API. */

export type PostType =
  | "Issue"
  | "Idea"
  | "Position"
  | "Decision"
  | "Question"
  | "Untyped";

export interface Post {
  id: string;
  parent: string | null;
  author: string;
  timestamp: string;
  type: PostType;
  polarity: "support" | "object" | null;
  decided_idea: string | null;
  body: string;
}

export interface ReplyTypes {
  parent: string | null;
  types: PostType[];
}

export interface EditResult {
  revision: number;
  changed: boolean;
  message?: string;
}

export interface HistoryEntry {
  revision: number;
  author: string;
  timestamp: string;
  message: string;
  header: string;
  changed_paths: string[];
}

export interface OpenIssue {
  page: string;
  href: string;
}

export interface CdEntry {
  name: string;
  page: string;
  symbols: string[];
}

export interface ApiErrorBody {
  code: string;
  detail: string;
  position?: { line: number; column: number };
}

/** Raised by the client for any non-2xx response. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    readonly detail: string,
    readonly position?: { line: number; column: number },
  ) {
    super(`${code}: ${detail}`);
  }
}

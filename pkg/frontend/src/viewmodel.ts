/** Pure view-model logic: state transitions, thread shaping, and the
 * mapping of server errors to actionable messages.  Everything here is
 * DOM-free so it can be exercised in node, including against a live
 * server in the contract test. */

import { ApiError, Post, PostType } from "./types.js";

export type Mode = "view" | "edit-source" | "discuss";

export interface ViewState {
  page: string;
  mode: Mode;
  editBuffer: string | null; // present only in edit-source mode
  baseRevision: number | null;
  thread: Post[]; // server order, discuss mode
}

export function initialState(page: string): ViewState {
  return { page, mode: "view", editBuffer: null, baseRevision: null, thread: [] };
}

export function showPage(state: ViewState, page: string): ViewState {
  return { ...initialState(page) };
}

export function enterEdit(state: ViewState, source: string, revision: number): ViewState {
  return { ...state, mode: "edit-source", editBuffer: source, baseRevision: revision };
}

export function updateBuffer(state: ViewState, text: string): ViewState {
  if (state.mode !== "edit-source") throw new Error("no edit in progress");
  return { ...state, editBuffer: text };
}

export function leaveEdit(state: ViewState): ViewState {
  return { ...state, mode: "view", editBuffer: null, baseRevision: null };
}

export function enterDiscuss(state: ViewState, thread: Post[]): ViewState {
  return { ...state, mode: "discuss", editBuffer: null, baseRevision: null, thread };
}

export interface ThreadNode {
  post: Post;
  children: ThreadNode[];
}

/** Nest the flat, server-ordered post list; order is preserved at every
 * level.  Posts with a missing parent surface at the top rather than
 * vanishing. */
export function buildThreadTree(posts: Post[]): ThreadNode[] {
  const nodes = new Map<string, ThreadNode>();
  const roots: ThreadNode[] = [];
  for (const post of posts) {
    nodes.set(post.id, { post, children: [] });
  }
  for (const post of posts) {
    const node = nodes.get(post.id)!;
    const parent = post.parent ? nodes.get(post.parent) : undefined;
    if (parent) {
      parent.children.push(node);
    } else {
      roots.push(node);
    }
  }
  return roots;
}

/** Ideas in the same thread as `parent`, the candidates a Decision
 * composer must offer. */
export function ideaCandidates(posts: Post[], parentId: string): Post[] {
  const byId = new Map(posts.map((p) => [p.id, p]));
  let root = byId.get(parentId);
  while (root && root.parent) root = byId.get(root.parent);
  if (!root) return [];
  const inThread = new Set([root.id]);
  for (const p of posts) {
    if (p.parent && inThread.has(p.parent)) inThread.add(p.id);
  }
  return posts.filter((p) => inThread.has(p.id) && p.type === "Idea");
}

export interface ErrorPresentation {
  kind: "conflict" | "parse-error" | "locked" | "not-found" | "forbidden" | "other";
  message: string;
  line?: number;
  column?: number;
  offerReload: boolean;
}

/** Actionable message for a failed save or load. */
export function presentError(error: unknown): ErrorPresentation {
  if (!(error instanceof ApiError)) {
    return { kind: "other", message: String(error), offerReload: false };
  }
  switch (error.status) {
    case 409:
      return {
        kind: "conflict",
        message:
          "Someone committed a newer revision while you were editing. " +
          "Reload the fragment and redo your change.",
        offerReload: true,
      };
    case 423:
      return {
        kind: "locked",
        message: `The page is locked: ${error.detail}`,
        offerReload: false,
      };
    case 422:
      return {
        kind: "parse-error",
        message: error.detail,
        line: error.position?.line,
        column: error.position?.column,
        offerReload: false,
      };
    case 404:
      return { kind: "not-found", message: error.detail, offerReload: false };
    case 401:
    case 403:
      return { kind: "forbidden", message: error.detail, offerReload: false };
    default:
      return { kind: "other", message: error.detail, offerReload: false };
  }
}

/** 0-based index of the line a parse error points at, for the caret. */
export function caretLine(buffer: string, line: number | undefined): number | null {
  if (line === undefined || line < 1) return null;
  const total = buffer.split("\n").length;
  return Math.min(line, total) - 1;
}

export const POST_BADGES: Record<PostType, string> = {
  Issue: "issue",
  Idea: "idea",
  Position: "position",
  Decision: "decision",
  Question: "question",
  Untyped: "untyped",
};

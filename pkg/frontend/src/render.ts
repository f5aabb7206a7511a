/** HTML-string renderers.  Pure functions of their inputs so the
 * contract test can compare rendered reply buttons against the server's
 * answer without a browser. */

import { OpenIssue, Post, PostType } from "./types.js";
import { ErrorPresentation, POST_BADGES, ThreadNode, caretLine } from "./viewmodel.js";

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** One reply button per type the server allows, in the server's order. */
export function replyButtons(parent: string | null, types: PostType[]): string {
  const target = parent ? ` data-parent="${esc(parent)}"` : "";
  return types
    .map(
      (t) =>
        `<button class="reply-btn reply-${POST_BADGES[t]}" data-type="${t}"${target}>${t}</button>`,
    )
    .join("");
}

/** Labels of the buttons inside a rendered composer; the inverse the
 * contract test uses. */
export function buttonTypes(html: string): string[] {
  return [...html.matchAll(/data-type="([A-Za-z]+)"/g)].map((m) => m[1]!);
}

export function postHtml(node: ThreadNode, buttons: string): string {
  const p = node.post;
  const polarity = p.polarity ? ` <span class="polarity">${esc(p.polarity)}</span>` : "";
  const decided = p.decided_idea
    ? ` <span class="decided">decides <a href="#post-${esc(p.decided_idea)}">${esc(
        p.decided_idea,
      )}</a></span>`
    : "";
  const children = node.children.map((c) => postHtml(c, "")).join("");
  return (
    `<article class="post" id="post-${esc(p.id)}" data-post="${esc(p.id)}">` +
    `<header><span class="badge badge-${POST_BADGES[p.type]}">${p.type}</span>` +
    `${polarity}${decided} <span class="author">${esc(p.author)}</span>` +
    ` <time>${esc(p.timestamp)}</time></header>` +
    `<p class="body">${esc(p.body)}</p>` +
    `<footer class="composer" data-composer="${esc(p.id)}">${buttons}</footer>` +
    `<div class="replies">${children}</div>` +
    `</article>`
  );
}

export function threadHtml(roots: ThreadNode[], buttonsByPost: Map<string, string>): string {
  const renderNode = (node: ThreadNode): string => {
    const withButtons = { ...node, children: [] as ThreadNode[] };
    const own = postHtml(withButtons, buttonsByPost.get(node.post.id) ?? "");
    const children = node.children.map(renderNode).join("");
    return own.replace('<div class="replies"></div>', `<div class="replies">${children}</div>`);
  };
  return `<section class="thread">${roots.map(renderNode).join("")}</section>`;
}

export function notFoundHtml(page: string): string {
  return (
    `<section class="not-found"><h1>No such page</h1>` +
    `<p>There is no fragment called <code>${esc(page)}</code>.</p>` +
    `<p><a href="#/dashboard">Back to the dashboard</a></p></section>`
  );
}

export function errorPanel(err: ErrorPresentation): string {
  const reload = err.offerReload
    ? `<button class="reload" data-action="reload">Reload fragment</button>`
    : "";
  const caret =
    err.line !== undefined
      ? `<p class="caret">line ${err.line}${err.column !== undefined ? `, column ${err.column}` : ""}</p>`
      : "";
  return `<div class="error error-${err.kind}"><p>${esc(err.message)}</p>${caret}${reload}</div>`;
}

/** Source editor with an optional error caret marking one line. */
export function editorHtml(page: string, buffer: string, err?: ErrorPresentation): string {
  const lines = buffer.split("\n");
  const mark = err ? caretLine(buffer, err.line) : null;
  const gutter = lines
    .map((_, i) => `<span class="${i === mark ? "line-err" : "line"}">${i + 1}</span>`)
    .join("");
  return (
    `<section class="editor" data-page="${esc(page)}">` +
    `<div class="gutter">${gutter}</div>` +
    `<textarea class="source">${esc(buffer)}</textarea>` +
    `<input class="summary" placeholder="describe your change"/>` +
    `<button data-action="save">Save</button>` +
    `<button data-action="cancel">Cancel</button>` +
    (err ? errorPanel(err) : "") +
    `</section>`
  );
}

export function dashboardHtml(issues: OpenIssue[]): string {
  if (issues.length === 0) {
    return `<section class="dashboard"><h1>Open issues</h1><p>No open issues.</p></section>`;
  }
  const items = issues
    .map((i) => `<li><a href="#/page/${esc(i.page)}">${esc(i.page)}</a></li>`)
    .join("");
  return `<section class="dashboard"><h1>Open issues</h1><ul>${items}</ul></section>`;
}

/** Rewrites server-rendered page HTML for SPA navigation: fragment
 * links become hash routes, and unresolved symbols get a warning badge. */
export function adaptPageHtml(serverHtml: string): string {
  const main = serverHtml.match(/<main>([\s\S]*)<\/main>/)?.[1] ?? serverHtml;
  const nav = serverHtml.match(/<nav[\s\S]*?<\/nav>/)?.[0] ?? "";
  let out = nav + main;
  out = out.replaceAll('href="/page/', 'href="#/page/');
  out = out.replaceAll(
    /<(mo|mi|mn|ms)([^>]*data-unresolved="true"[^>]*)>([^<]*)<\/\1>/g,
    '<$1$2 class="unresolved" title="unknown symbol">$3</$1>',
  );
  return out;
}

export function decisionComposerHtml(parent: string, ideas: Post[]): string {
  const options = ideas
    .map((i) => `<option value="${esc(i.id)}">${esc(i.body.slice(0, 60))}</option>`)
    .join("");
  return (
    `<form class="decision-composer" data-parent="${esc(parent)}">` +
    `<select class="decided-idea" required>${options}</select>` +
    `<textarea class="decision-body" placeholder="summarise the agreed idea"></textarea>` +
    `<button data-action="post-decision">Post decision</button></form>`
  );
}

/** Browser entry point: hash router plus event wiring.  All state
 * changes go through the pure viewmodel; all data comes from the JSON
 * API. */

import { WikiApi } from "./api.js";
import { PostType } from "./types.js";
import * as render from "./render.js";
import * as vm from "./viewmodel.js";

const api = new WikiApi("");
let state: vm.ViewState = vm.initialState("");

function root(): HTMLElement {
  return document.getElementById("app")!;
}

function route(): { page: string; mode: vm.Mode } | { dashboard: true } {
  const hash = window.location.hash || "#/dashboard";
  if (hash.startsWith("#/page/")) {
    const rest = hash.slice("#/page/".length);
    if (rest.endsWith("/edit")) {
      return { page: rest.slice(0, -"/edit".length), mode: "edit-source" };
    }
    if (rest.endsWith("/discuss")) {
      return { page: rest.slice(0, -"/discuss".length), mode: "discuss" };
    }
    return { page: rest, mode: "view" };
  }
  return { dashboard: true };
}

async function renderRoute(): Promise<void> {
  const r = route();
  if ("dashboard" in r) {
    await showDashboard();
    return;
  }
  state = vm.showPage(state, r.page);
  if (r.mode === "edit-source") {
    await showEditor(r.page);
  } else if (r.mode === "discuss") {
    await showDiscussion(r.page);
  } else {
    await showView(r.page);
  }
}

async function showDashboard(): Promise<void> {
  const issues = await api.openIssues();
  const cds = await api.cds();
  const cdList = cds
    .map(
      (cd) =>
        `<li><a href="#/page/${render.esc(cd.page)}">${render.esc(cd.name)}</a>` +
        ` <small>${cd.symbols.length} symbols</small></li>`,
    )
    .join("");
  root().innerHTML =
    render.dashboardHtml(issues) +
    `<section class="cd-list"><h1>Content dictionaries</h1><ul>${cdList}</ul></section>`;
}

async function showView(page: string): Promise<void> {
  try {
    const html = await api.pageHtml(page);
    root().innerHTML =
      toolbar(page, "view") + `<div class="page-body">${render.adaptPageHtml(html)}</div>`;
  } catch (error) {
    const err = vm.presentError(error);
    root().innerHTML =
      err.kind === "not-found" ? render.notFoundHtml(page) : render.errorPanel(err);
  }
}

function toolbar(page: string, mode: vm.Mode): string {
  const tab = (m: vm.Mode, label: string, suffix: string) =>
    `<a class="tab ${m === mode ? "active" : ""}" href="#/page/${render.esc(page)}${suffix}">${label}</a>`;
  return (
    `<nav class="toolbar"><span class="page-id">${render.esc(page)}</span>` +
    tab("view", "view", "") +
    tab("edit-source", "edit", "/edit") +
    tab("discuss", "discuss", "/discuss") +
    `<a class="tab" href="#/dashboard">dashboard</a></nav>`
  );
}

async function showEditor(page: string, err?: vm.ErrorPresentation): Promise<void> {
  try {
    const source = await api.pageSource(page);
    const history = await api.history(page);
    state = vm.enterEdit(state, source, history[0]?.revision ?? 0);
    root().innerHTML = toolbar(page, "edit-source") + render.editorHtml(page, source, err);
  } catch (error) {
    root().innerHTML = render.errorPanel(vm.presentError(error));
  }
}

async function saveEdit(page: string): Promise<void> {
  const textarea = root().querySelector<HTMLTextAreaElement>(".editor .source")!;
  const summary =
    root().querySelector<HTMLInputElement>(".editor .summary")!.value || "edited";
  state = vm.updateBuffer(state, textarea.value);
  try {
    const result = await api.putFragment(page, textarea.value, {
      summary,
      baseRevision: state.baseRevision ?? undefined,
    });
    state = vm.leaveEdit(state);
    const note = result.changed
      ? `saved as r${result.revision}: ${result.message ?? ""}`
      : "no change detected, nothing committed";
    window.location.hash = `#/page/${page}`;
    await renderRoute();
    root().insertAdjacentHTML(
      "afterbegin",
      `<p class="save-note">${render.esc(note)}</p>`,
    );
  } catch (error) {
    const err = vm.presentError(error);
    // keep the buffer on screen; decorate with the error panel
    root().innerHTML =
      toolbar(page, "edit-source") + render.editorHtml(page, textarea.value, err);
  }
}

async function showDiscussion(page: string): Promise<void> {
  try {
    const posts = await api.discussion(page);
    state = vm.enterDiscuss(state, posts);
    const tree = vm.buildThreadTree(posts);
    const buttons = new Map<string, string>();
    for (const post of posts) {
      const types = await api.replyTypes(page, post.id);
      buttons.set(post.id, render.replyButtons(post.id, types));
    }
    const topTypes = await api.replyTypes(page, null);
    root().innerHTML =
      toolbar(page, "discuss") +
      `<div class="top-composer">${render.replyButtons(null, topTypes)}</div>` +
      render.threadHtml(tree, buttons);
  } catch (error) {
    const err = vm.presentError(error);
    root().innerHTML =
      err.kind === "not-found" ? render.notFoundHtml(page) : render.errorPanel(err);
  }
}

async function composeReply(page: string, parent: string | null, type: PostType): Promise<void> {
  if (type === "Decision" && parent) {
    const ideas = vm.ideaCandidates(state.thread, parent);
    const host = root().querySelector(`[data-composer="${parent}"]`)!;
    host.insertAdjacentHTML("beforeend", render.decisionComposerHtml(parent, ideas));
    return;
  }
  const body = window.prompt(`${type} reply:`) ?? "";
  if (!body) return;
  let polarity: "support" | "object" | undefined;
  if (type === "Position") {
    polarity = window.confirm("Support the idea? (cancel = object)") ? "support" : "object";
  }
  try {
    await api.addPost(page, { type, parent, body, polarity });
    await showDiscussion(page);
  } catch (error) {
    root().insertAdjacentHTML("afterbegin", render.errorPanel(vm.presentError(error)));
  }
}

async function postDecision(page: string, form: HTMLFormElement): Promise<void> {
  const parent = form.dataset.parent!;
  const idea = form.querySelector<HTMLSelectElement>(".decided-idea")!.value;
  const body = form.querySelector<HTMLTextAreaElement>(".decision-body")!.value;
  try {
    await api.addPost(page, { type: "Decision", parent, body, decided_idea: idea });
    await showDiscussion(page);
  } catch (error) {
    root().insertAdjacentHTML("afterbegin", render.errorPanel(vm.presentError(error)));
  }
}

function wireEvents(): void {
  window.addEventListener("hashchange", () => void renderRoute());
  root().addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const r = route();
    if ("dashboard" in r) return;
    if (target.matches("button[data-action=save]")) {
      void saveEdit(r.page);
    } else if (target.matches("button[data-action=cancel], button[data-action=reload]")) {
      void showEditor(r.page);
    } else if (target.matches("button.reply-btn")) {
      const type = target.dataset.type as PostType;
      void composeReply(r.page, target.dataset.parent ?? null, type);
    } else if (target.matches("button[data-action=post-decision]")) {
      event.preventDefault();
      void postDecision(r.page, target.closest("form")!);
    }
  });
}

export function start(): void {
  wireEvents();
  void renderRoute();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  start();
}

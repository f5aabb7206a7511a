/** Contract test against the real wiki service.  Boots the Python
 * server, seeds a discussion thread through the client, and checks that
 * the buttons the UI renders are exactly the server's allowed reply
 * types, and that a Decision posted through the UI clears the page from
 * the dashboard. */

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";

import { WikiApi } from "../src/api.js";
import { buttonTypes, replyButtons } from "../src/render.js";
import { ApiError } from "../src/types.js";
import { buildThreadTree, ideaCandidates } from "../src/viewmodel.js";

const PORT = 8937;
const BASE = `http://127.0.0.1:${PORT}`;
const HERE = fileURLToPath(new URL(".", import.meta.url));
const CORPUS = join(HERE, "..", "..", "src", "cdforge", "corpus");

let server: ChildProcess;
const api = new WikiApi(BASE);

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const r = await fetch(`${BASE}/cds`);
      if (r.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error("service never came up");
}

beforeAll(async () => {
  const repo = mkdtempSync(join(tmpdir(), "cdforge-contract-"));
  const imp = spawn("python3", ["-m", "cdforge.cli", "import", CORPUS, "--repo", repo], {
    stdio: "inherit",
  });
  await new Promise((resolve, reject) => {
    imp.on("exit", (code: number | null) =>
      code === 0 ? resolve(null) : reject(new Error(`import failed: ${code}`)),
    );
  });
  server = spawn(
    "python3",
    ["-m", "cdforge.cli", "serve", "--repo", repo, "--port", String(PORT)],
    { stdio: "ignore" },
  );
  await waitForServer();
}, 60_000);

afterAll(() => {
  server?.kill();
});

describe("reply-button contract", () => {
  const page = "cd:arith1+plus";

  it("buttons equal the server's allowed types for every post in a seeded thread", async () => {
    const issue = await api.addPost(page, { type: "Issue", body: "FMP unclear", author: "alice" });
    const idea = await api.addPost(page, {
      type: "Idea",
      parent: issue.id,
      body: "reword the description",
      author: "bob",
    });
    await api.addPost(page, {
      type: "Position",
      parent: idea.id,
      body: "sounds right",
      author: "carol",
      polarity: "support",
    });
    await api.addPost(page, {
      type: "Question",
      parent: issue.id,
      body: "which part is unclear?",
      author: "dave",
    });

    const posts = await api.discussion(page);
    expect(posts.length).toBe(4);
    for (const post of posts) {
      const serverTypes = await api.replyTypes(page, post.id);
      const rendered = replyButtons(post.id, serverTypes);
      expect(buttonTypes(rendered)).toEqual(serverTypes);
    }
    const topTypes = await api.replyTypes(page, null);
    expect(buttonTypes(replyButtons(null, topTypes))).toEqual(topTypes);
    expect(topTypes).toEqual(["Issue", "Question", "Untyped"]);
  });

  it("a decision posted through the UI clears the dashboard entry", async () => {
    const before = await api.openIssues();
    expect(before.map((i) => i.page)).toContain(page);

    // the Decision composer picks its Idea from the thread candidates
    const posts = await api.discussion(page);
    const issue = buildThreadTree(posts)[0]!.post;
    const candidates = ideaCandidates(posts, issue.id);
    expect(candidates.length).toBe(1);
    await api.addPost(page, {
      type: "Decision",
      parent: issue.id,
      body: "agreed: reword it",
      author: "carol",
      decided_idea: candidates[0]!.id,
    });

    const after = await api.openIssues();
    expect(after.map((i) => i.page)).not.toContain(page);

    // the served thread now shows the Decision and withdraws the button
    const serverTypes = await api.replyTypes(page, issue.id);
    expect(serverTypes).not.toContain("Decision");
  });

  it("rejected posts change nothing on the server", async () => {
    const before = await api.discussion(page);
    await expect(
      api.addPost(page, { type: "Idea", body: "idea at top level", author: "eve" }),
    ).rejects.toThrowError(ApiError);
    const after = await api.discussion(page);
    expect(after).toEqual(before);
  });

  it("browse surface serves page html with symbol links", async () => {
    const html = await api.pageHtml(page);
    expect(html).toContain('href="/page/cd:relation1+eq"');
    await expect(api.pageHtml("cd:nope")).rejects.toMatchObject({ status: 404 });
  });

  it("edit surface round-trips source and reports conflicts", async () => {
    const source = await api.pageSource("cd:transc1+sin");
    const noop = await api.putFragment("cd:transc1+sin", source, { summary: "noop" });
    expect(noop.changed).toBe(false);

    const history = await api.history("cd:transc1+sin");
    const base = history[0]!.revision;
    const edited = source.replace("the sin function", "the sine function");
    const saved = await api.putFragment("cd:transc1+sin", edited, {
      author: "Administrator",
      summary: "replaced metadata field dc:description",
      baseRevision: base,
    });
    expect(saved.changed).toBe(true);
    expect(saved.message).toBe(
      "[Administrator@SWiM] replaced metadata field dc:description\n" +
        "Actually changed fragment cd:transc1+sin",
    );

    await expect(
      api.putFragment("cd:transc1+sin", source, { summary: "stale", baseRevision: base }),
    ).rejects.toMatchObject({ status: 409 });
  });
});

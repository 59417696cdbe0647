// @vitest-environment jsdom
import { beforeEach, describe, expect, it } from "vitest";

import { RankApi } from "../src/api.js";
import { RankingApp } from "../src/app.js";
import type { KeyValueStore } from "../src/session.js";

class MemoryStore implements KeyValueStore {
  private data = new Map<string, string>();
  getItem(key: string): string | null {
    return this.data.get(key) ?? null;
  }
  setItem(key: string, value: string): void {
    this.data.set(key, value);
  }
  removeItem(key: string): void {
    this.data.delete(key);
  }
}

interface FakeServer {
  fetchFn: typeof fetch;
  posts: { url: string; body: { participant_id: string; ranking: string[] } }[];
  failPosts: boolean;
  conflictPosts: boolean;
}

function fakeServer(candidateCount = 7): FakeServer {
  const server: FakeServer = {
    posts: [],
    failPosts: false,
    conflictPosts: false,
    fetchFn: (async (input: RequestInfo | URL, init?: RequestInit) => {
      const url = String(input);
      if (init?.method === "POST") {
        if (server.failPosts) {
          throw new TypeError("network down");
        }
        const body = JSON.parse(String(init.body)) as {
          participant_id: string;
          ranking: string[];
        };
        server.posts.push({ url, body });
        if (server.conflictPosts) {
          return new Response(JSON.stringify({ error: "already submitted" }), {
            status: 409,
          });
        }
        return new Response(JSON.stringify({ submissions: server.posts.length }), {
          status: 201,
        });
      }
      if (url.includes("/sessions/missing")) {
        return new Response(JSON.stringify({ error: "session not found" }), {
          status: 404,
        });
      }
      return new Response(
        JSON.stringify({
          session_id: "s1",
          object_label: "cube",
          prompt_text: "which would you prefer?",
          candidates: Array.from({ length: candidateCount }, (_, i) => ({
            id: `c${i}`,
            image_url: `/static/s1/c${i}.png`,
          })),
        }),
        { status: 200 },
      );
    }) as typeof fetch,
  };
  return server;
}

function makeApp(server: FakeServer, store = new MemoryStore(), session = "s1") {
  const root = document.createElement("div");
  document.body.replaceChildren(root);
  const api = new RankApi("http://service.test", server.fetchFn);
  return new RankingApp(root, api, session, "p1", store);
}

function submitButton(): HTMLButtonElement {
  return document.querySelector('button[data-role="submit"]')!;
}

function rankedIds(): string[] {
  return [...document.querySelectorAll('[data-zone="ranked"] .card')].map(
    (el) => (el as HTMLElement).dataset.cardId!,
  );
}

function click(selector: string, index = 0): void {
  const el = [...document.querySelectorAll(selector)][index] as HTMLButtonElement;
  el.click();
}

describe("ranking app", () => {
  beforeEach(() => {
    document.body.replaceChildren();
  });

  it("renders 7 cards with submit disabled until all are placed", async () => {
    const server = fakeServer();
    const app = makeApp(server);
    await app.load();
    expect(document.querySelectorAll(".pool-card")).toHaveLength(7);
    expect(submitButton().disabled).toBe(true);
    for (let i = 0; i < 7; i++) {
      click('button[data-role="place"]');
    }
    expect(document.querySelectorAll(".ranked-card")).toHaveLength(7);
    expect(submitButton().disabled).toBe(false);
  });

  it("never exposes method labels in the DOM", async () => {
    const server = fakeServer();
    const app = makeApp(server);
    await app.load();
    for (let i = 0; i < 7; i++) {
      click('button[data-role="place"]');
    }
    expect(document.body.innerHTML).not.toContain("method-");
    expect(document.body.innerHTML).not.toContain("label");
  });

  it("shows an error screen for unknown sessions", async () => {
    const server = fakeServer();
    const app = makeApp(server, new MemoryStore(), "missing");
    await app.load();
    expect(document.body.textContent).toContain("Session not found");
  });

  it("submits exactly the on-screen order", async () => {
    const server = fakeServer(4);
    const app = makeApp(server);
    await app.load();
    for (let i = 0; i < 4; i++) {
      click('button[data-role="place"]');
    }
    click('button[data-role="up"]', 3); // move #4 up one
    click('button[data-role="up"]', 0); // no-op: first card's up is disabled
    const onScreen = rankedIds();
    submitButton().click();
    await Promise.resolve();
    expect(server.posts).toHaveLength(1);
    expect(server.posts[0]!.body.ranking).toEqual(onScreen);
    expect(server.posts[0]!.body.participant_id).toBe("p1");
  });

  it("reports a conflict without losing the session", async () => {
    const server = fakeServer(2);
    server.conflictPosts = true;
    const app = makeApp(server);
    await app.load();
    click('button[data-role="place"]');
    click('button[data-role="place"]');
    await app.submit();
    expect(document.body.textContent).toContain("Already submitted");
  });

  it("restores an in-progress ordering after a reload", async () => {
    const server = fakeServer(5);
    const store = new MemoryStore();
    const app = makeApp(server, store);
    await app.load();
    click('button[data-role="place"]');
    click('button[data-role="place"]');
    const before = rankedIds();
    const reloaded = makeApp(server, store);
    await reloaded.load();
    expect(rankedIds()).toEqual(before);
  });

  it("queues an offline submission and retries without duplicating", async () => {
    const server = fakeServer(2);
    const store = new MemoryStore();
    const app = makeApp(server, store);
    await app.load();
    click('button[data-role="place"]');
    click('button[data-role="place"]');
    const order = rankedIds();

    server.failPosts = true;
    await app.submit();
    expect(document.body.textContent).toContain("offline");
    expect(server.posts).toHaveLength(0);

    server.failPosts = false;
    expect(await app.flushQueue()).toBe(true);
    expect(server.posts).toHaveLength(1);
    expect(server.posts[0]!.body.ranking).toEqual(order);

    expect(await app.flushQueue()).toBe(false); // queue empty, nothing re-sent
    expect(server.posts).toHaveLength(1);
  });
});

import { describe, expect, it } from "vitest";

import type { SessionPayload } from "../src/api.js";
import {
  KeyValueStore,
  clearSubmission,
  createView,
  currentOrdering,
  enqueueSubmission,
  isComplete,
  isConsistent,
  loadDraft,
  pendingSubmission,
  placeCard,
  reorder,
  resolveParticipantId,
  saveDraft,
  unplaceCard,
} from "../src/session.js";

function payload(n = 7): SessionPayload {
  return {
    session_id: "s1",
    object_label: "cube",
    prompt_text: "which would you prefer?",
    candidates: Array.from({ length: n }, (_, i) => ({
      id: `c${i}`,
      image_url: `/static/s1/c${i}.png`,
    })),
  };
}

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

describe("session view", () => {
  it("starts with every card unranked and submit locked", () => {
    const view = createView(payload());
    expect(view.pool).toHaveLength(7);
    expect(view.ranked).toHaveLength(0);
    expect(isComplete(view)).toBe(false);
    expect(isConsistent(view)).toBe(true);
  });

  it("placing all cards completes the ordering", () => {
    let view = createView(payload(3));
    for (const id of ["c2", "c0", "c1"]) {
      view = placeCard(view, id);
    }
    expect(isComplete(view)).toBe(true);
    expect(currentOrdering(view)).toEqual(["c2", "c0", "c1"]);
  });

  it("unplacing reopens the ordering", () => {
    let view = createView(payload(2));
    view = placeCard(view, "c0");
    view = placeCard(view, "c1");
    view = unplaceCard(view, "c0");
    expect(isComplete(view)).toBe(false);
    expect(view.pool).toContain("c0");
    expect(isConsistent(view)).toBe(true);
  });

  it("moving the last card to first shifts everything down one", () => {
    let view = createView(payload(4));
    for (const id of ["c0", "c1", "c2", "c3"]) {
      view = placeCard(view, id);
    }
    view = reorder(view, "c3", 0);
    expect(currentOrdering(view)).toEqual(["c3", "c0", "c1", "c2"]);
  });

  it("reorder then reorder back restores the original ordering", () => {
    let view = createView(payload(5));
    for (let i = 0; i < 5; i++) {
      view = placeCard(view, `c${i}`);
    }
    const before = currentOrdering(view);
    view = reorder(view, "c1", 4);
    view = reorder(view, "c1", 1);
    expect(currentOrdering(view)).toEqual(before);
  });

  it("any burst of random operations keeps a consistent partition", () => {
    let view = createView(payload(6));
    const ids = [...view.cards.keys()];
    let state = 12345;
    const rand = () => {
      state = (state * 1103515245 + 12345) % 2147483648;
      return state / 2147483648;
    };
    for (let step = 0; step < 500; step++) {
      const id = ids[Math.floor(rand() * ids.length)]!;
      const op = rand();
      if (op < 0.4) {
        view = placeCard(view, id);
      } else if (op < 0.6) {
        view = unplaceCard(view, id);
      } else {
        view = reorder(view, id, Math.floor(rand() * ids.length));
      }
      expect(isConsistent(view)).toBe(true);
    }
  });

  it("clamps reorder positions to valid slots", () => {
    let view = createView(payload(3));
    for (const id of ["c0", "c1", "c2"]) {
      view = placeCard(view, id);
    }
    view = reorder(view, "c0", 99);
    expect(currentOrdering(view)).toEqual(["c1", "c2", "c0"]);
    view = reorder(view, "c0", -5);
    expect(currentOrdering(view)).toEqual(["c0", "c1", "c2"]);
  });
});

describe("local persistence", () => {
  it("round-trips an in-progress draft", () => {
    const store = new MemoryStore();
    let view = createView(payload(4));
    view = placeCard(view, "c2");
    view = placeCard(view, "c0");
    saveDraft(store, view, "p1");
    const restored = loadDraft(store, createView(payload(4)), "p1");
    expect(restored.ranked).toEqual(["c2", "c0"]);
    expect(isConsistent(restored)).toBe(true);
  });

  it("ignores drafts that no longer match the candidates", () => {
    const store = new MemoryStore();
    let old = createView(payload(2));
    old = placeCard(old, "c0");
    saveDraft(store, old, "p1");
    const fresh = loadDraft(store, createView(payload(5)), "p1");
    expect(fresh.ranked).toEqual([]);
  });

  it("resolves participant ids: url first, then a persisted random one", () => {
    const store = new MemoryStore();
    expect(resolveParticipantId(store, "?participant=alice")).toBe("alice");
    const generated = resolveParticipantId(store, "");
    expect(generated).toMatch(/^p-/);
    expect(resolveParticipantId(store, "")).toBe(generated);
  });

  it("queues and clears offline submissions", () => {
    const store = new MemoryStore();
    enqueueSubmission(store, {
      sessionId: "s1",
      participantId: "p1",
      ranking: ["c1", "c0"],
    });
    expect(pendingSubmission(store, "s1", "p1")?.ranking).toEqual(["c1", "c0"]);
    clearSubmission(store, "s1", "p1");
    expect(pendingSubmission(store, "s1", "p1")).toBeNull();
  });
});

// Ranking-session state: an ordered "ranked" list plus the pool of cards the
// participant has not placed yet. Submission unlocks only when the pool is
// empty, so every candidate has a position.

import type { CandidateCard, SessionPayload } from "./api.js";

export interface SessionView {
  sessionId: string;
  promptText: string;
  cards: Map<string, CandidateCard>;
  ranked: string[]; // best to worst
  pool: string[]; // presentation order, server-shuffled per participant
  submitted: boolean;
}

export function createView(payload: SessionPayload): SessionView {
  return {
    sessionId: payload.session_id,
    promptText: payload.prompt_text,
    cards: new Map(payload.candidates.map((c) => [c.id, c])),
    ranked: [],
    pool: payload.candidates.map((c) => c.id),
    submitted: false,
  };
}

export function isComplete(view: SessionView): boolean {
  return view.pool.length === 0 && view.ranked.length === view.cards.size;
}

/** Every card sits in exactly one of pool/ranked, with no duplicates. */
export function isConsistent(view: SessionView): boolean {
  const all = [...view.ranked, ...view.pool].sort();
  const expected = [...view.cards.keys()].sort();
  return all.length === expected.length && all.every((x, i) => x === expected[i]);
}

/** Move a pool card to the end of the ranking (next-worst position). */
export function placeCard(view: SessionView, cardId: string): SessionView {
  if (!view.pool.includes(cardId)) {
    return view;
  }
  return {
    ...view,
    pool: view.pool.filter((x) => x !== cardId),
    ranked: [...view.ranked, cardId],
  };
}

/** Send a ranked card back to the pool. */
export function unplaceCard(view: SessionView, cardId: string): SessionView {
  if (!view.ranked.includes(cardId)) {
    return view;
  }
  return {
    ...view,
    ranked: view.ranked.filter((x) => x !== cardId),
    pool: [...view.pool, cardId],
  };
}

/** Move a ranked card to a new position; everything else shifts over. */
export function reorder(view: SessionView, cardId: string, newPosition: number): SessionView {
  const from = view.ranked.indexOf(cardId);
  if (from < 0) {
    return view;
  }
  const position = Math.max(0, Math.min(view.ranked.length - 1, newPosition));
  const ranked = [...view.ranked];
  ranked.splice(from, 1);
  ranked.splice(position, 0, cardId);
  return { ...view, ranked };
}

export function currentOrdering(view: SessionView): string[] {
  return [...view.ranked];
}

// --- local persistence -----------------------------------------------------

export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

const DRAFT_PREFIX = "s3dc-rank:draft:";
const QUEUE_PREFIX = "s3dc-rank:queue:";
const PARTICIPANT_KEY = "s3dc-rank:participant";

function draftKey(sessionId: string, participantId: string): string {
  return `${DRAFT_PREFIX}${sessionId}:${participantId}`;
}

export function saveDraft(store: KeyValueStore, view: SessionView, participantId: string): void {
  store.setItem(
    draftKey(view.sessionId, participantId),
    JSON.stringify({ ranked: view.ranked, pool: view.pool }),
  );
}

/** Restore an in-progress ordering; ignored if it no longer matches the cards. */
export function loadDraft(
  store: KeyValueStore,
  view: SessionView,
  participantId: string,
): SessionView {
  const raw = store.getItem(draftKey(view.sessionId, participantId));
  if (raw === null) {
    return view;
  }
  try {
    const draft = JSON.parse(raw) as { ranked: string[]; pool: string[] };
    const restored = { ...view, ranked: draft.ranked, pool: draft.pool };
    return isConsistent(restored) ? restored : view;
  } catch {
    return view;
  }
}

export function clearDraft(store: KeyValueStore, sessionId: string, participantId: string): void {
  store.removeItem(draftKey(sessionId, participantId));
}

/** Participant id from the URL (?participant=) or a locally persisted random one. */
export function resolveParticipantId(store: KeyValueStore, search: string): string {
  const fromUrl = new URLSearchParams(search).get("participant");
  if (fromUrl) {
    return fromUrl;
  }
  const existing = store.getItem(PARTICIPANT_KEY);
  if (existing) {
    return existing;
  }
  const generated = `p-${Math.random().toString(36).slice(2, 10)}`;
  store.setItem(PARTICIPANT_KEY, generated);
  return generated;
}

// --- offline submission queue ----------------------------------------------

export interface QueuedSubmission {
  sessionId: string;
  participantId: string;
  ranking: string[];
}

function queueKey(sessionId: string, participantId: string): string {
  return `${QUEUE_PREFIX}${sessionId}:${participantId}`;
}

export function enqueueSubmission(store: KeyValueStore, item: QueuedSubmission): void {
  store.setItem(queueKey(item.sessionId, item.participantId), JSON.stringify(item));
}

export function pendingSubmission(
  store: KeyValueStore,
  sessionId: string,
  participantId: string,
): QueuedSubmission | null {
  const raw = store.getItem(queueKey(sessionId, participantId));
  return raw === null ? null : (JSON.parse(raw) as QueuedSubmission);
}

export function clearSubmission(
  store: KeyValueStore,
  sessionId: string,
  participantId: string,
): void {
  store.removeItem(queueKey(sessionId, participantId));
}

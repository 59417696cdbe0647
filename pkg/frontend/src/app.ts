// DOM layer: renders the session, drives reordering, and submits the ranking.

import { RankApi, SessionNotFoundError } from "./api.js";
import {
  KeyValueStore,
  SessionView,
  clearDraft,
  clearSubmission,
  createView,
  currentOrdering,
  enqueueSubmission,
  isComplete,
  loadDraft,
  pendingSubmission,
  placeCard,
  reorder,
  saveDraft,
  unplaceCard,
} from "./session.js";

export class RankingApp {
  private view: SessionView | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: RankApi,
    private readonly sessionId: string,
    private readonly participantId: string,
    private readonly store: KeyValueStore,
  ) {}

  async load(): Promise<void> {
    try {
      const payload = await this.api.fetchSession(this.sessionId, this.participantId);
      this.view = loadDraft(this.store, createView(payload), this.participantId);
      this.render();
    } catch (err) {
      if (err instanceof SessionNotFoundError) {
        this.renderMessage("Session not found", "Check the link you were given.");
      } else {
        this.renderMessage("Could not reach the ranking service", String(err));
      }
    }
  }

  getView(): SessionView {
    if (this.view === null) {
      throw new Error("session not loaded");
    }
    return this.view;
  }

  private update(next: SessionView): void {
    this.view = next;
    saveDraft(this.store, next, this.participantId);
    this.render();
  }

  place(cardId: string): void {
    this.update(placeCard(this.getView(), cardId));
  }

  unplace(cardId: string): void {
    this.update(unplaceCard(this.getView(), cardId));
  }

  move(cardId: string, newPosition: number): void {
    this.update(reorder(this.getView(), cardId, newPosition));
  }

  async submit(): Promise<void> {
    const view = this.getView();
    if (!isComplete(view) || view.submitted) {
      return;
    }
    const ranking = currentOrdering(view);
    try {
      const outcome = await this.api.submitRanking(
        this.sessionId, this.participantId, ranking,
      );
      clearDraft(this.store, this.sessionId, this.participantId);
      clearSubmission(this.store, this.sessionId, this.participantId);
      this.view = { ...view, submitted: true };
      if (outcome.status === "accepted") {
        this.renderMessage(
          "Ranking submitted",
          `You are submission #${outcome.submissions}. Thank you!`,
        );
      } else {
        this.renderMessage(
          "Already submitted",
          "This session already has a ranking from you; the first one counts.",
        );
      }
    } catch {
      // transport failure: queue locally, nothing is lost
      enqueueSubmission(this.store, {
        sessionId: this.sessionId,
        participantId: this.participantId,
        ranking,
      });
      this.renderMessage(
        "You appear to be offline",
        "Your ranking is saved on this device. Reopen this page to retry.",
        true,
      );
    }
  }

  /** Retry a queued submission; the service's conflict reply makes this idempotent. */
  async flushQueue(): Promise<boolean> {
    const pending = pendingSubmission(this.store, this.sessionId, this.participantId);
    if (pending === null) {
      return false;
    }
    const outcome = await this.api.submitRanking(
      pending.sessionId, pending.participantId, pending.ranking,
    );
    clearSubmission(this.store, this.sessionId, this.participantId);
    clearDraft(this.store, this.sessionId, this.participantId);
    if (this.view !== null) {
      this.view = { ...this.view, submitted: true };
    }
    this.renderMessage(
      outcome.status === "accepted" ? "Ranking submitted" : "Already submitted",
      "Your queued ranking has been delivered.",
    );
    return true;
  }

  private renderMessage(title: string, detail: string, retry = false): void {
    this.root.replaceChildren();
    const head = document.createElement("h2");
    head.textContent = title;
    const body = document.createElement("p");
    body.textContent = detail;
    this.root.append(head, body);
    if (retry) {
      const button = document.createElement("button");
      button.textContent = "Retry now";
      button.dataset.role = "retry";
      button.addEventListener("click", () => void this.flushQueue().catch(() => {}));
      this.root.append(button);
    }
  }

  private cardElement(cardId: string, position: number | null): HTMLElement {
    const view = this.getView();
    const card = view.cards.get(cardId)!;
    const item = document.createElement("li");
    item.dataset.cardId = cardId;
    item.className = position === null ? "card pool-card" : "card ranked-card";

    const img = document.createElement("img");
    img.src = this.api.imageUrl(card);
    img.alt = `candidate ${position === null ? "" : position + 1}`.trim();
    img.draggable = false;
    item.append(img);

    if (position === null) {
      const add = document.createElement("button");
      add.textContent = "Rank next";
      add.dataset.role = "place";
      add.addEventListener("click", () => this.place(cardId));
      item.append(add);
      return item;
    }

    const badge = document.createElement("span");
    badge.className = "position";
    badge.textContent = `#${position + 1}`;
    const up = document.createElement("button");
    up.textContent = "▲";
    up.dataset.role = "up";
    up.disabled = position === 0;
    up.addEventListener("click", () => this.move(cardId, position - 1));
    const down = document.createElement("button");
    down.textContent = "▼";
    down.dataset.role = "down";
    down.disabled = position === this.getView().ranked.length - 1;
    down.addEventListener("click", () => this.move(cardId, position + 1));
    const remove = document.createElement("button");
    remove.textContent = "Remove";
    remove.dataset.role = "unplace";
    remove.addEventListener("click", () => this.unplace(cardId));
    item.append(badge, up, down, remove);
    return item;
  }

  render(): void {
    const view = this.getView();
    this.root.replaceChildren();

    const prompt = document.createElement("p");
    prompt.className = "prompt";
    prompt.textContent = view.promptText;

    const rankedHead = document.createElement("h2");
    rankedHead.textContent = "Your ranking (best first)";
    const ranked = document.createElement("ol");
    ranked.dataset.zone = "ranked";
    view.ranked.forEach((id, i) => ranked.append(this.cardElement(id, i)));

    const poolHead = document.createElement("h2");
    poolHead.textContent = "Not yet ranked";
    const pool = document.createElement("ul");
    pool.dataset.zone = "pool";
    for (const id of view.pool) {
      pool.append(this.cardElement(id, null));
    }

    const submit = document.createElement("button");
    submit.textContent = "Submit ranking";
    submit.dataset.role = "submit";
    submit.disabled = !isComplete(view) || view.submitted;
    submit.addEventListener("click", () => void this.submit());

    this.root.append(prompt, rankedHead, ranked, poolHead, pool, submit);
  }
}

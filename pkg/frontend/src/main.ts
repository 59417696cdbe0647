// Browser entry point: /index.html?session=<id>[&participant=<id>][&api=<base>]

import { RankApi } from "./api.js";
import { RankingApp } from "./app.js";
import { resolveParticipantId } from "./session.js";

function start(): void {
  const params = new URLSearchParams(window.location.search);
  const sessionId = params.get("session");
  const apiBase = params.get("api") ?? "http://127.0.0.1:8765";
  const root = document.getElementById("app");
  if (root === null) {
    return;
  }
  if (sessionId === null) {
    root.textContent = "Missing ?session= parameter.";
    return;
  }
  const participantId = resolveParticipantId(window.localStorage, window.location.search);
  const app = new RankingApp(
    root, new RankApi(apiBase), sessionId, participantId, window.localStorage,
  );
  void app
    .flushQueue()
    .catch(() => {})
    .then(() => app.load());
}

start();

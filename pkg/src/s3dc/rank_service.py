"""HTTP service for human ranking sessions.

Stores each session as a manifest plus an append-only JSONL journal of
submissions, so results are crash-safe and auditable. Participant-facing
payloads never contain method labels; candidate order is shuffled per
participant with a seed derived from (session_id, participant_id) to counter
position bias.

Endpoints:
    POST /sessions                    create a session (experimenter)
    GET  /sessions/{id}?participant=  anonymized candidates + prompt
    POST /sessions/{id}/rankings      submit one best-to-worst ranking
    GET  /sessions/{id}/results       per-method mean ranks (experimenter)
    GET  /static/{id}/{file}          candidate render images
"""

from __future__ import annotations

import base64
import hashlib
import json
import random
import re
import threading
import time
import uuid
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .errors import ConflictError, DomainError
from .evalkit import mean_rank

RANKING_PROMPT = (
    "In a virtual world, which of the compressed objects would you prefer?"
)

_SESSION_ID_RE = re.compile(r"[0-9a-f]{32}\Z")
_IMAGE_FILE_RE = re.compile(r"c\d+\.png\Z")


@dataclass(frozen=True)
class Submission:
    participant_id: str
    ranking: tuple[int, ...]  # ranking[position] = canonical candidate index
    submitted_at: float


class RankStore:
    """Filesystem-backed session store with a single-writer journal."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    def _session_dir(self, session_id: str) -> Path:
        if not _SESSION_ID_RE.match(session_id):
            raise KeyError(session_id)
        path = self.data_dir / session_id
        if not path.is_dir():
            raise KeyError(session_id)
        return path

    def create_session(
        self,
        object_label: str,
        candidates: list[tuple[str, bytes]],
        prompt_text: str = RANKING_PROMPT,
    ) -> str:
        """Persist a session; candidates are (method label, PNG bytes) pairs."""
        if len(candidates) < 2:
            raise DomainError("a session needs at least 2 candidates")
        labels = [label for label, _ in candidates]
        if len(set(labels)) != len(labels):
            raise DomainError("candidate labels must be unique")
        session_id = uuid.uuid4().hex
        session_dir = self.data_dir / session_id
        session_dir.mkdir()
        entries = []
        for i, (label, image) in enumerate(candidates):
            anon = f"c{i}"
            (session_dir / f"{anon}.png").write_bytes(image)
            entries.append({"label": label, "anon_id": anon, "image_file": f"{anon}.png"})
        manifest = {
            "session_id": session_id,
            "object_label": object_label,
            "prompt_text": prompt_text,
            "candidates": entries,
            "presentation_order": "sha256(session_id:participant_id)",
            "created_at": time.time(),
        }
        (session_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
        return session_id

    def manifest(self, session_id: str) -> dict:
        return json.loads((self._session_dir(session_id) / "manifest.json").read_text())

    def image_path(self, session_id: str, filename: str) -> Path:
        if not _IMAGE_FILE_RE.match(filename):
            raise KeyError(filename)
        path = self._session_dir(session_id) / filename
        if not path.is_file():
            raise KeyError(filename)
        return path

    def participant_view(self, session_id: str, participant_id: str) -> dict:
        """Anonymized session payload, shuffled deterministically per participant."""
        manifest = self.manifest(session_id)
        cards = [
            {"id": c["anon_id"], "image_url": f"/static/{session_id}/{c['image_file']}"}
            for c in manifest["candidates"]
        ]
        seed = hashlib.sha256(f"{session_id}:{participant_id}".encode()).digest()
        random.Random(seed).shuffle(cards)
        return {
            "session_id": session_id,
            "object_label": manifest["object_label"],
            "prompt_text": manifest["prompt_text"],
            "candidates": cards,
        }

    def submissions(self, session_id: str) -> list[Submission]:
        journal = self._session_dir(session_id) / "rankings.jsonl"
        found: list[Submission] = []
        if journal.exists():
            for line in journal.read_text().splitlines():
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError:
                    continue  # torn tail write; the journal is append-only
                found.append(Submission(
                    participant_id=rec["participant_id"],
                    ranking=tuple(rec["ranking"]),
                    submitted_at=rec["submitted_at"],
                ))
        return found

    def submit_ranking(
        self, session_id: str, participant_id: str, ranking: list
    ) -> int:
        """Store one ranking; returns the total submission count.

        ``ranking`` lists candidates best to worst, either as anonymous ids or
        canonical indices. A second submission from the same participant is a
        conflict.
        """
        manifest = self.manifest(session_id)
        count = len(manifest["candidates"])
        anon_to_index = {c["anon_id"]: i for i, c in enumerate(manifest["candidates"])}
        if not participant_id or not isinstance(participant_id, str):
            raise DomainError("participant_id must be a nonempty string")
        canonical = []
        for item in ranking:
            if isinstance(item, str):
                if item not in anon_to_index:
                    raise DomainError(f"unknown candidate id {item!r}")
                canonical.append(anon_to_index[item])
            elif isinstance(item, int) and not isinstance(item, bool):
                canonical.append(item)
            else:
                raise DomainError(f"bad ranking entry {item!r}")
        if sorted(canonical) != list(range(count)):
            raise DomainError(
                f"ranking must be a permutation of the {count} candidates"
            )
        with self._write_lock:
            if any(s.participant_id == participant_id
                   for s in self.submissions(session_id)):
                raise ConflictError(
                    f"participant {participant_id!r} already submitted"
                )
            journal = self._session_dir(session_id) / "rankings.jsonl"
            record = json.dumps({
                "participant_id": participant_id,
                "ranking": canonical,
                "submitted_at": time.time(),
            })
            with open(journal, "a") as fh:
                fh.write(record + "\n")
                fh.flush()
            return len(self.submissions(session_id))

    def session_results(self, session_id: str) -> dict:
        """Per-method mean ranks (labels revealed); exactly evalkit.mean_rank."""
        manifest = self.manifest(session_id)
        subs = self.submissions(session_id)
        if not subs:
            raise DomainError("no submissions yet")
        ranks = mean_rank([list(s.ranking) for s in subs])
        labels = [c["label"] for c in manifest["candidates"]]
        return {
            "session_id": session_id,
            "submissions": len(subs),
            "mean_ranks": {label: ranks[i] for i, label in enumerate(labels)},
        }


class _Handler(BaseHTTPRequestHandler):
    store: RankStore  # injected by make_server

    def log_message(self, *args):  # tests run many requests; stay quiet
        pass

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        try:
            return json.loads(self.rfile.read(length))
        except json.JSONDecodeError as exc:
            raise DomainError(f"request body is not JSON: {exc}") from exc

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    def do_GET(self):
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        try:
            if len(parts) == 3 and parts[0] == "static":
                data = self.store.image_path(parts[1], parts[2]).read_bytes()
                self.send_response(200)
                self.send_header("Content-Type", "image/png")
                self.send_header("Content-Length", str(len(data)))
                self.send_header("Access-Control-Allow-Origin", "*")
                self.end_headers()
                self.wfile.write(data)
            elif len(parts) == 2 and parts[0] == "sessions":
                participant = parse_qs(url.query).get("participant", ["anonymous"])[0]
                self._send_json(200, self.store.participant_view(parts[1], participant))
            elif len(parts) == 3 and parts[0] == "sessions" and parts[2] == "results":
                self._send_json(200, self.store.session_results(parts[1]))
            else:
                self._send_json(404, {"error": "no such route"})
        except KeyError:
            self._send_json(404, {"error": "session not found"})
        except DomainError as exc:
            self._send_json(422, {"error": str(exc)})

    def do_POST(self):
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        try:
            if parts == ["sessions"]:
                body = self._read_json()
                try:
                    candidates = [
                        (c["label"], base64.b64decode(c["image_b64"]))
                        for c in body.get("candidates", [])
                    ]
                except (KeyError, TypeError, ValueError) as exc:
                    raise DomainError(f"bad candidate entry: {exc}") from exc
                session_id = self.store.create_session(
                    body.get("object_label", ""),
                    candidates,
                    body.get("prompt_text", RANKING_PROMPT),
                )
                self._send_json(201, {"session_id": session_id})
            elif len(parts) == 3 and parts[0] == "sessions" and parts[2] == "rankings":
                body = self._read_json()
                count = self.store.submit_ranking(
                    parts[1], body.get("participant_id", ""), body.get("ranking", [])
                )
                self._send_json(201, {"submissions": count})
            else:
                self._send_json(404, {"error": "no such route"})
        except KeyError as exc:
            self._send_json(404, {"error": f"session not found: {exc}"})
        except ConflictError as exc:
            self._send_json(409, {"error": str(exc)})
        except DomainError as exc:
            self._send_json(422, {"error": str(exc)})


def make_server(data_dir: str | Path, port: int = 0,
                host: str = "127.0.0.1") -> ThreadingHTTPServer:
    """Build (but do not start) the ranking HTTP server."""
    store = RankStore(data_dir)
    handler = type("BoundHandler", (_Handler,), {"store": store})
    return ThreadingHTTPServer((host, port), handler)


def serve(data_dir: str | Path, port: int, host: str = "127.0.0.1") -> None:
    server = make_server(data_dir, port, host)
    print(f"rank service listening on http://{host}:{server.server_address[1]} "
          f"(data: {data_dir})", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()

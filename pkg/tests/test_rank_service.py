import base64
import json
import threading

import numpy as np
import pytest
import requests

from s3dc.backends import encode_png
from s3dc.errors import ConflictError, DomainError
from s3dc.evalkit import mean_rank
from s3dc.rank_service import RANKING_PROMPT, RankStore, make_server
from s3dc.render import ViewImage


def _png(shade):
    return encode_png(
        ViewImage(pixels=np.full((16, 16, 3), shade, np.uint8), camera_tag="external")
    )


def _candidates(n):
    return [(f"method-{i}", _png(i * 20)) for i in range(n)]


@pytest.fixture()
def store(tmp_path):
    return RankStore(tmp_path / "rank-data")


def test_create_session_validations(store):
    with pytest.raises(DomainError, match="at least 2"):
        store.create_session("cube", _candidates(1))
    with pytest.raises(DomainError, match="unique"):
        store.create_session("cube", [("same", _png(0)), ("same", _png(1))])


def test_create_session_distinct_ids(store):
    a = store.create_session("cube", _candidates(3))
    b = store.create_session("cube", _candidates(3))
    assert a != b


def test_participant_payload_hides_labels(store):
    sid = store.create_session("cube", _candidates(7))
    payload = json.dumps(store.participant_view(sid, "p1"))
    assert "method-" not in payload
    assert RANKING_PROMPT in payload


def test_participant_shuffle_is_deterministic(store):
    sid = store.create_session("cube", _candidates(7))
    a = store.participant_view(sid, "p1")
    b = store.participant_view(sid, "p1")
    c = store.participant_view(sid, "p2")
    assert a == b
    assert [x["id"] for x in a["candidates"]] != [x["id"] for x in c["candidates"]]


def test_submit_and_results_match_mean_rank(store):
    sid = store.create_session("cube", _candidates(3))
    rankings = [[0, 1, 2], [0, 2, 1], [1, 0, 2]]
    for i, ranking in enumerate(rankings):
        store.submit_ranking(sid, f"p{i}", ranking)
    results = store.session_results(sid)
    expected = mean_rank(rankings)
    assert results["mean_ranks"] == {
        "method-0": expected[0],
        "method-1": expected[1],
        "method-2": expected[2],
    }
    assert results["submissions"] == 3


def test_submit_accepts_anon_ids(store):
    sid = store.create_session("cube", _candidates(3))
    store.submit_ranking(sid, "p1", ["c2", "c0", "c1"])
    subs = store.submissions(sid)
    assert subs[0].ranking == (2, 0, 1)


def test_submit_validations(store):
    sid = store.create_session("cube", _candidates(3))
    with pytest.raises(DomainError, match="permutation"):
        store.submit_ranking(sid, "p1", [0, 1])
    with pytest.raises(DomainError, match="permutation"):
        store.submit_ranking(sid, "p1", [0, 1, 1])
    with pytest.raises(DomainError, match="unknown candidate"):
        store.submit_ranking(sid, "p1", ["c0", "c1", "zz"])
    store.submit_ranking(sid, "p1", [0, 1, 2])
    with pytest.raises(ConflictError):
        store.submit_ranking(sid, "p1", [2, 1, 0])


def test_results_require_submissions(store):
    sid = store.create_session("cube", _candidates(2))
    with pytest.raises(DomainError, match="no submissions"):
        store.session_results(sid)


def test_submissions_survive_reopen(tmp_path):
    store = RankStore(tmp_path / "d")
    sid = store.create_session("cube", _candidates(2))
    store.submit_ranking(sid, "p1", [1, 0])
    reopened = RankStore(tmp_path / "d")
    assert reopened.submissions(sid)[0].ranking == (1, 0)
    assert reopened.session_results(sid)["mean_ranks"]["method-1"] == 0.0


def test_unknown_session_raises_keyerror(store):
    with pytest.raises(KeyError):
        store.manifest("0" * 32)
    with pytest.raises(KeyError):
        store.manifest("../escape")


@pytest.fixture()
def live_server(tmp_path):
    server = make_server(tmp_path / "data", 0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    server.server_close()


def _create_http_session(base, n=7):
    body = {
        "object_label": "cube",
        "candidates": [
            {"label": f"method-{i}", "image_b64": base64.b64encode(_png(i)).decode()}
            for i in range(n)
        ],
    }
    resp = requests.post(f"{base}/sessions", json=body, timeout=5)
    assert resp.status_code == 201
    return resp.json()["session_id"]


def test_http_full_loop(live_server):
    sid = _create_http_session(live_server, n=7)
    view = requests.get(
        f"{live_server}/sessions/{sid}", params={"participant": "p1"}, timeout=5
    ).json()
    assert len(view["candidates"]) == 7
    assert "method-" not in json.dumps(view)
    assert view["prompt_text"] == RANKING_PROMPT

    image = requests.get(live_server + view["candidates"][0]["image_url"], timeout=5)
    assert image.status_code == 200
    assert image.content.startswith(b"\x89PNG")

    order = [c["id"] for c in view["candidates"]]
    resp = requests.post(
        f"{live_server}/sessions/{sid}/rankings",
        json={"participant_id": "p1", "ranking": order},
        timeout=5,
    )
    assert resp.status_code == 201
    assert resp.json()["submissions"] == 1

    again = requests.post(
        f"{live_server}/sessions/{sid}/rankings",
        json={"participant_id": "p1", "ranking": order},
        timeout=5,
    )
    assert again.status_code == 409

    bad = requests.post(
        f"{live_server}/sessions/{sid}/rankings",
        json={"participant_id": "p2", "ranking": order[:-1]},
        timeout=5,
    )
    assert bad.status_code == 422

    results = requests.get(f"{live_server}/sessions/{sid}/results", timeout=5).json()
    assert results["submissions"] == 1
    assert set(results["mean_ranks"]) == {f"method-{i}" for i in range(7)}


def test_http_unknown_session_404(live_server):
    resp = requests.get(f"{live_server}/sessions/{'0' * 32}", timeout=5)
    assert resp.status_code == 404
    resp = requests.get(f"{live_server}/nonsense", timeout=5)
    assert resp.status_code == 404


def test_http_concurrent_submissions_all_persist(live_server):
    sid = _create_http_session(live_server, n=4)
    rng = np.random.default_rng(0)
    per_participant = {f"user-{i}": rng.permutation(4).tolist() for i in range(100)}
    failures = []

    def submit(pid, ranking):
        resp = requests.post(
            f"{live_server}/sessions/{sid}/rankings",
            json={"participant_id": pid, "ranking": ranking},
            timeout=10,
        )
        if resp.status_code != 201:
            failures.append((pid, resp.status_code))

    threads = [
        threading.Thread(target=submit, args=item) for item in per_participant.items()
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert failures == []
    results = requests.get(f"{live_server}/sessions/{sid}/results", timeout=5).json()
    assert results["submissions"] == 100
    expected = mean_rank(list(per_participant.values()))
    assert results["mean_ranks"][f"method-{int(np.argmin(expected))}"] == min(expected)

from __future__ import annotations

import threading

import pytest
import requests

from memgov.embedding import HashingEmbedder
from memgov.server import (
    BrowseRequest,
    SearchRequest,
    ToolService,
    make_http_server,
)
from memgov.store import MemoryStore

from conftest import make_card

RESOLUTION_KEYS = {"root_cause", "fix_strategy", "patch_digest", "verification", "resolution"}


def build_service(n=5):
    store = MemoryStore(HashingEmbedder())
    cards = []
    for i in range(n):
        card = make_card(
            issue=i + 1,
            pr=100 + i,
            summary=f"worker pool deadlock variant {chr(97 + i)}",
            signals=tuple(f"token{i} {j}" for j in range(11)),
        )
        store.index_card(card)
        cards.append(card)
    return ToolService(store), cards


@pytest.fixture
def live():
    service, cards = build_service()
    server = make_http_server(service)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    yield base, service, cards
    server.shutdown()
    server.server_close()


def deep_keys(obj):
    keys = set()
    if isinstance(obj, dict):
        for key, value in obj.items():
            keys.add(key)
            keys |= deep_keys(value)
    elif isinstance(obj, list):
        for item in obj:
            keys |= deep_keys(item)
    return keys


def test_health(live):
    base, _service, cards = live
    body = requests.get(f"{base}/v1/health").json()
    assert body == {"status": "ok", "card_count": len(cards), "dimension": 256}


def test_search_returns_previews_only(live):
    base, _service, _cards = live
    resp = requests.post(f"{base}/v1/search", json={"query": "worker pool deadlock"})
    assert resp.status_code == 200
    body = resp.json()
    assert len(body["hits"]) == 5
    sims = [h["similarity"] for h in body["hits"]]
    assert sims == sorted(sims, reverse=True)
    assert not (deep_keys(body) & RESOLUTION_KEYS)
    first = body["hits"][0]
    assert set(first) == {"card_id", "similarity", "preview"}
    assert set(first["preview"]) == {"problem_summary", "signals"}


def test_search_is_deterministic(live):
    base, _service, _cards = live
    payload = {"query": "worker pool deadlock", "top_k": 3}
    a = requests.post(f"{base}/v1/search", json=payload).content
    b = requests.post(f"{base}/v1/search", json=payload).content
    assert a == b


def test_search_rejects_bad_top_k(live):
    base, _service, _cards = live
    resp = requests.post(f"{base}/v1/search", json={"query": "x", "top_k": 0})
    assert resp.status_code == 400
    assert resp.json()["error"]["code"] == "invalid_request"


def test_search_unembeddable_query_is_client_error(live):
    base, _service, _cards = live
    resp = requests.post(f"{base}/v1/search", json={"query": "!!!"})
    assert resp.status_code == 400
    assert resp.json()["error"]["code"] == "unembeddable_query"


def test_browse_returns_full_card(live):
    base, _service, cards = live
    resp = requests.post(f"{base}/v1/browse", json={"card_id": cards[2].card_id})
    assert resp.status_code == 200
    body = resp.json()
    assert body["card_id"] == cards[2].card_id
    assert body["resolution"]["root_cause"] == cards[2].resolution.root_cause


def test_browse_unknown_id_is_404(live):
    base, _service, _cards = live
    resp = requests.post(f"{base}/v1/browse", json={"card_id": "missing"})
    assert resp.status_code == 404
    assert resp.json()["error"]["code"] == "not_found"


def test_browse_is_immutable(live):
    base, _service, cards = live
    payload = {"card_id": cards[0].card_id}
    a = requests.post(f"{base}/v1/browse", json=payload).content
    b = requests.post(f"{base}/v1/browse", json=payload).content
    assert a == b


def test_unknown_path_and_bad_json_envelopes(live):
    base, _service, _cards = live
    resp = requests.post(f"{base}/v1/nope", json={})
    assert resp.status_code == 404 and "error" in resp.json()
    resp = requests.post(
        f"{base}/v1/search", data="{", headers={"Content-Type": "application/json"}
    )
    assert resp.status_code == 400
    assert resp.json()["error"]["code"] == "invalid_json"


def test_session_flow_over_http(live):
    base, _service, cards = live
    session_id = requests.post(f"{base}/v1/session", json={}).json()["session_id"]
    requests.post(f"{base}/v1/search", json={"query": "deadlock", "session_id": session_id})
    requests.post(
        f"{base}/v1/browse", json={"card_id": cards[0].card_id, "session_id": session_id}
    )
    log = requests.get(f"{base}/v1/session/{session_id}").json()
    assert [r["kind"] for r in log["rounds"]] == ["search", "browse"]
    timestamps = [r["timestamp"] for r in log["rounds"]]
    assert timestamps == sorted(timestamps)

    brief = requests.post(
        f"{base}/v1/transfer_brief",
        json={"session_id": session_id, "card_ids": [cards[0].card_id]},
    ).json()
    assert brief["root_cause_pattern"] == cards[0].resolution.root_cause
    assert brief["modification_logic"] == cards[0].resolution.fix_strategy
    assert brief["validation_strategy"] == cards[0].resolution.verification
    assert brief["source_card_ids"] == [cards[0].card_id]


def test_transfer_brief_requires_browsed_cards(live):
    base, _service, cards = live
    session_id = requests.post(f"{base}/v1/session", json={}).json()["session_id"]
    resp = requests.post(
        f"{base}/v1/transfer_brief",
        json={"session_id": session_id, "card_ids": [cards[0].card_id]},
    )
    assert resp.status_code == 409
    assert resp.json()["error"]["code"] == "card_not_browsed"


def test_transfer_brief_unknown_session(live):
    base, _service, _cards = live
    resp = requests.post(
        f"{base}/v1/transfer_brief", json={"session_id": "f" * 32, "card_ids": []}
    )
    assert resp.status_code == 404


def test_store_not_loaded_is_503():
    service = ToolService(None)
    server = make_http_server(service)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    try:
        resp = requests.post(f"{base}/v1/search", json={"query": "x"})
        assert resp.status_code == 503
        assert resp.json()["error"]["code"] == "store_not_loaded"
    finally:
        server.shutdown()
        server.server_close()


def test_brief_concatenates_in_browse_order():
    service, cards = build_service()
    session_id = service.sessions.create()
    for card in (cards[3], cards[1]):
        service.handle_browse(BrowseRequest(card_id=card.card_id, session_id=session_id))
    brief = service.assemble_transfer_brief(
        session_id, [cards[1].card_id, cards[3].card_id]
    )
    assert brief.source_card_ids == (cards[3].card_id, cards[1].card_id)
    assert brief.root_cause_pattern == (
        cards[3].resolution.root_cause + "\n\n" + cards[1].resolution.root_cause
    )


def test_session_rounds_are_append_only_under_concurrency():
    service, _cards = build_service()
    session_id = service.sessions.create()

    def worker(i):
        for _ in range(25):
            service.handle_search(
                SearchRequest(query=f"deadlock {i}", top_k=2, session_id=session_id)
            )

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    log = service.sessions.get(session_id)
    assert len(log.rounds) == 100
    timestamps = [r.timestamp for r in log.rounds]
    assert timestamps == sorted(timestamps)


def test_search_request_validation():
    with pytest.raises(Exception):
        SearchRequest(query="x", top_k=0)
    with pytest.raises(Exception):
        BrowseRequest(card_id="")

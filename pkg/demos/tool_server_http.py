"""
The HTTP tool API
=================

Agent clients talk to the memory over JSON-over-HTTP: POST /v1/search and
POST /v1/browse mirror the in-process primitives, sessions live under
/v1/session, and /v1/transfer_brief assembles browsed evidence. This demo
starts a server on a free port and drives it with plain HTTP calls.
"""

import json
import threading

import requests

from memgov.cards import CardSource, ExperienceCard, IndexLayer, ResolutionLayer
from memgov.embedding import HashingEmbedder
from memgov.server import ToolService, make_http_server
from memgov.store import MemoryStore

store = MemoryStore(HashingEmbedder())
for i, (summary, cause) in enumerate(
    [
        ("socket leak under connection churn", "close() skipped on the error path"),
        ("stale cache served after invalidation", "eviction raced the refill"),
        ("integer overflow in histogram bucketing", "bucket width computed in 32 bits"),
    ],
    start=1,
):
    store.index_card(
        ExperienceCard(
            card_id=f"http-{i}",
            source=CardSource("demo/http", i, i),
            index=IndexLayer(
                problem_summary=summary,
                signals=tuple(f"{summary.split()[0]} sig {j}" for j in range(10)),
            ),
            resolution=ResolutionLayer(
                root_cause=cause,
                fix_strategy="narrowest change that removes the hazard",
                patch_digest="AREA: src/core.py\nCHUNK: a\nCHUNK: b\nCHUNK: c",
                verification="targeted regression test",
            ),
        )
    )

server = make_http_server(ToolService(store))
thread = threading.Thread(target=server.serve_forever)
thread.start()
base = f"http://127.0.0.1:{server.server_address[1]}"
print(f"serving on {base}\n")

try:
    health = requests.get(f"{base}/v1/health").json()
    print(f"GET /v1/health -> {health}")

    session = requests.post(f"{base}/v1/session", json={}).json()["session_id"]
    print(f"POST /v1/session -> {session}")

    search = requests.post(
        f"{base}/v1/search",
        json={"query": "socket leak on reconnect", "top_k": 2, "session_id": session},
    ).json()
    print("POST /v1/search ->")
    print(json.dumps(search, indent=2))

    top_id = search["hits"][0]["card_id"]
    browse = requests.post(
        f"{base}/v1/browse", json={"card_id": top_id, "session_id": session}
    ).json()
    print(f"POST /v1/browse {top_id} -> root_cause: {browse['resolution']['root_cause']}")

    brief = requests.post(
        f"{base}/v1/transfer_brief", json={"session_id": session, "card_ids": [top_id]}
    ).json()
    print(f"POST /v1/transfer_brief -> {json.dumps(brief, indent=2)}")

    missing = requests.post(f"{base}/v1/browse", json={"card_id": "nope"})
    print(f"\nerror envelope for an unknown card ({missing.status_code}): {missing.json()}")
finally:
    server.shutdown()
    server.server_close()
    thread.join()
    print("\nserver shut down cleanly")

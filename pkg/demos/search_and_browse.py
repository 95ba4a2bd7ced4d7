"""
Searching, browsing, and transfer briefs
========================================

The memory exposes two primitives: searching returns ranked index-layer
previews (never repair details); browsing returns one full card. A session
tracks what was browsed so a transfer brief can be assembled from it.
"""

from memgov.cards import CardSource, ExperienceCard, IndexLayer, ResolutionLayer
from memgov.embedding import HashingEmbedder
from memgov.server import BrowseRequest, SearchRequest, ToolService
from memgov.store import MemoryStore


def card(i, summary, signals, cause, strategy, verification):
    return ExperienceCard(
        card_id=f"demo-{i:02d}",
        source=CardSource("demo/corpus", i, 100 + i),
        index=IndexLayer(problem_summary=summary, signals=tuple(signals)),
        resolution=ResolutionLayer(
            root_cause=cause,
            fix_strategy=strategy,
            patch_digest="AREA: src/app.py\nCHUNK: guard added\nCHUNK: state reset\nCHUNK: docs",
            verification=verification,
        ),
    )


store = MemoryStore(HashingEmbedder())
store.index_card(
    card(
        1,
        "off-by-one when paginating search results",
        [f"pagination {t}" for t in "cursor offset window index bounds slice page limit stride gap".split()],
        "page cursor advanced before the final partial page was emitted",
        "emit the partial page first, then advance the cursor",
        "regression test over 1..3 page corpora",
    )
)
store.index_card(
    card(
        2,
        "timezone drift in scheduled job timestamps",
        [f"timezone {t}" for t in "drift utc offset dst clock skew cron schedule stamp local".split()],
        "naive datetimes mixed with aware ones at the scheduler boundary",
        "normalize to UTC on ingest and localize only for display",
        "unit tests across DST transitions",
    )
)
store.index_card(
    card(
        3,
        "crash parsing empty configuration file",
        [f"config {t}" for t in "empty parse crash missing default loader file startup toml fallback".split()],
        "loader assumed at least one section and indexed into an empty list",
        "treat an empty file as the default configuration",
        "reproduce with a 0-byte config, assert clean startup",
    )
)

service = ToolService(store)
session_id = service.sessions.create()
print(f"session: {session_id}\n")

# Search returns previews only: summaries and signals, never resolutions.
hits = service.handle_search(
    SearchRequest(query="crash on empty config at startup", top_k=3, session_id=session_id)
)
print("search 'crash on empty config at startup':")
for hit in hits:
    print(f"  {hit.similarity:.3f}  {hit.card_id}  {hit.preview.problem_summary}")

# Browsing is the only way to read the resolution layer.
top = hits[0]
full = service.handle_browse(BrowseRequest(card_id=top.card_id, session_id=session_id))
print(f"\nbrowsed {full.card_id}:")
print(f"  root cause:   {full.resolution.root_cause}")
print(f"  fix strategy: {full.resolution.fix_strategy}")

# The brief stitches browsed evidence into cause -> change -> validation.
brief = service.assemble_transfer_brief(session_id, [top.card_id])
print("\ntransfer brief:")
print(f"  root cause pattern:  {brief.root_cause_pattern}")
print(f"  modification logic:  {brief.modification_logic}")
print(f"  validation strategy: {brief.validation_strategy}")

log = service.sessions.get(session_id)
print(f"\nsession recorded {len(log.rounds)} rounds:")
for r in log.rounds:
    print(f"  {r.kind:6s} {r.request}")

"""
Repository scoring and top-M selection
======================================

Repositories are ranked by a weighted sum of log(1 + stars),
log(1 + issues), and log(1 + pulls): popularity balanced against
maintenance intensity. The log base only rescales scores, so the ranking
is base-invariant -- shown at the end.
"""

import math

from memgov.ingestion import RepoStats
from memgov.selection import SelectionConfig, score_repository, select_top_m

FLEET = [
    RepoStats("metrics/dashboard", stars=48_000, issues=310, pulls=120),
    RepoStats("tools/linter", stars=9_400, issues=2_800, pulls=1_900),
    RepoStats("infra/queue", stars=15_000, issues=1_200, pulls=640),
    RepoStats("apps/notebook", stars=51_000, issues=95, pulls=30),
    RepoStats("libs/codec", stars=2_100, issues=3_400, pulls=2_700),
    RepoStats("forks/toy", stars=160, issues=2, pulls=1),
]

cfg = SelectionConfig(top_m=4)
print("score breakdown (equal weights):")
for stats in FLEET:
    score = score_repository(stats, cfg).score
    parts = (math.log1p(stats.stars), math.log1p(stats.issues), math.log1p(stats.pulls))
    print(
        f"  {stats.repo:18s} stars={parts[0]:6.2f} issues={parts[1]:6.2f} "
        f"pulls={parts[2]:6.2f} -> {score:7.3f}"
    )

print(f"\ntop {cfg.top_m}:")
for rank, scored in enumerate(select_top_m(FLEET, cfg), 1):
    print(f"  {rank}. {scored.repo:18s} {scored.score:7.3f}")

# Stars alone would favor apps/notebook; maintenance pulls tools/linter up.
stars_only = select_top_m(FLEET, SelectionConfig(lambda_i=0.0, lambda_p=0.0, top_m=4))
print("\nstars-only ranking for contrast:")
for rank, scored in enumerate(stars_only, 1):
    print(f"  {rank}. {scored.repo:18s} {scored.score:7.3f}")

print("\nranking invariance across log bases:")
for base in (2.0, math.e, 10.0):
    ranked = select_top_m(FLEET, SelectionConfig(top_m=4, log_base=base))
    print(f"  base {base:>5.2f}: {[r.repo for r in ranked]}")

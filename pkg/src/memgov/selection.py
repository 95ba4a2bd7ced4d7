"""Repository scoring and top-M selection.

A repository's score balances popularity (stars) against maintenance
intensity (issues and pull requests):

    score = lambda_s * log(1 + stars)
          + lambda_i * log(1 + issues)
          + lambda_p * log(1 + pulls)

The natural logarithm is the default; any fixed base only rescales scores
uniformly and cannot change the ranking, so ``log_base`` exists purely to
let callers assert that invariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError
from .ingestion import RepoStats

DEFAULT_TOP_M = 50


@dataclass(frozen=True)
class SelectionConfig:
    lambda_s: float = 1.0
    lambda_i: float = 1.0
    lambda_p: float = 1.0
    top_m: int = DEFAULT_TOP_M
    log_base: float = math.e

    def __post_init__(self) -> None:
        if self.lambda_s < 0 or self.lambda_i < 0 or self.lambda_p < 0:
            raise ConfigError("selection weights must be non-negative")
        if self.lambda_s == self.lambda_i == self.lambda_p == 0:
            raise ConfigError("at least one selection weight must be positive")
        if self.top_m < 1:
            raise ConfigError("top_m must be >= 1")
        if not self.log_base > 1:
            raise ConfigError("log_base must be > 1")


@dataclass(frozen=True)
class RepoScore:
    repo: str
    score: float


def score_repository(stats: RepoStats, cfg: SelectionConfig) -> RepoScore:
    """Score one repository; log1p keeps zero counts at exactly 0."""
    score = (
        cfg.lambda_s * math.log1p(stats.stars)
        + cfg.lambda_i * math.log1p(stats.issues)
        + cfg.lambda_p * math.log1p(stats.pulls)
    )
    if cfg.log_base != math.e:
        score /= math.log(cfg.log_base)
    return RepoScore(repo=stats.repo, score=score)


def select_top_m(all_stats: list[RepoStats], cfg: SelectionConfig) -> list[RepoScore]:
    """Rank repositories by descending score, truncated to min(M, |input|).

    Ties break by repo slug ascending so pipelines are reproducible
    regardless of input order.
    """
    scored = [score_repository(s, cfg) for s in all_stats]
    scored.sort(key=lambda r: (-r.score, r.repo))
    return scored[: cfg.top_m]

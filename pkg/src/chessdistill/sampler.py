"""Theme-balanced, random and hard puzzle sampling.

Randomness comes from :class:`SeededDraw`: MT19937 (``random.Random``) used
only through ``getrandbits`` with rejection sampling and a partial
Fisher-Yates shuffle, so a given seed selects the same items on every
platform and Python version.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

STRATEGIES = ("balanced", "random", "hard")


class SamplerError(ValueError):
    code = "SamplerError"


class EmptyDataset(SamplerError):
    code = "EmptyDataset"


class InsufficientPopulation(SamplerError):
    code = "InsufficientPopulation"


class SeededDraw:
    def __init__(self, seed: int):
        self._rng = random.Random(seed & 0xFFFFFFFFFFFFFFFF)

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        if n <= 0:
            raise ValueError("n must be positive")
        bits = n.bit_length()
        while True:
            r = self._rng.getrandbits(bits)
            if r < n:
                return r

    def sample(self, items: Sequence, k: int) -> list:
        """``k`` items uniformly without replacement, in draw order."""
        pool = list(items)
        if k > len(pool):
            raise ValueError("sample larger than population")
        for i in range(k):
            j = i + self.below(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]


@dataclass(frozen=True)
class SamplerConfig:
    strategy: str = "balanced"
    K: int = 50
    M: int = 800
    n: int = 0
    seed: int = 0
    exclude_ids: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.strategy == "balanced" and self.K < 1:
            raise ValueError("K must be >= 1")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.strategy != "balanced" and self.n < 1:
            raise ValueError("n must be >= 1 for random/hard sampling")


def _eligible(puzzles, exclude_ids) -> list:
    seen = set(exclude_ids)
    out = []
    for p in puzzles:
        if p.id not in seen:
            seen.add(p.id)
            out.append(p)
    return out


def rare_themes(counts: Counter, k: int) -> list:
    """The ``k`` least frequent themes, ascending by count then name."""
    return sorted(counts, key=lambda t: (counts[t], t))[:k]


def sample_balanced(puzzles, cfg: SamplerConfig) -> list:
    """Rarest-theme-first balanced sampling.

    Frequencies are computed over the eligible pool (input minus
    ``exclude_ids``, first occurrence of each id). Each of the ``K`` rarest
    themes, in ascending frequency, draws ``min(M, available)`` of its
    not-yet-selected puzzles. Output is the concatenation of the draws.
    """
    pool = _eligible(puzzles, cfg.exclude_ids)
    if not pool:
        raise EmptyDataset("no eligible puzzles")
    counts: Counter = Counter()
    by_theme: dict = {}
    for p in pool:
        for t in p.themes:
            counts[t] += 1
            by_theme.setdefault(t, []).append(p)
    draw = SeededDraw(cfg.seed)
    selected: set = set()
    out = []
    for theme in rare_themes(counts, cfg.K):
        candidates = [p for p in by_theme[theme] if p.id not in selected]
        picked = draw.sample(candidates, min(cfg.M, len(candidates)))
        selected.update(p.id for p in picked)
        out.extend(picked)
    return out


def sample_random(puzzles, cfg: SamplerConfig) -> list:
    pool = _eligible(puzzles, cfg.exclude_ids)
    if cfg.n > len(pool):
        raise InsufficientPopulation(f"need {cfg.n}, only {len(pool)} eligible")
    return SeededDraw(cfg.seed).sample(pool, cfg.n)


def sample_hard(puzzles, cfg: SamplerConfig) -> list:
    pool = _eligible(puzzles, cfg.exclude_ids)
    if cfg.n > len(pool):
        raise InsufficientPopulation(f"need {cfg.n}, only {len(pool)} eligible")
    return sorted(pool, key=lambda p: (-p.rating, p.id))[:cfg.n]


def sample(puzzles, cfg: SamplerConfig) -> list:
    fn = {"balanced": sample_balanced, "random": sample_random, "hard": sample_hard}[cfg.strategy]
    return fn(puzzles, cfg)

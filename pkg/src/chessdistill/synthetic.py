"""Synthetic puzzles from seeded random playouts, for tests and offline demos.

The positions are real and every move is legal, but the "solutions" are
arbitrary legal moves and the theme tags are assigned, not detected.
"""

from __future__ import annotations

from .chess import STARTING_FEN, apply_move, format_fen, legal_moves, parse_fen
from .datasets import Puzzle, make_puzzle
from .evaluation import THEME_SPLIT_THEMES
from .sampler import SeededDraw

EXTRA_THEMES = ("endgame", "middlegame", "short", "long", "crushing", "advantage", "mate", "oneMove")


def random_position_line(draw: SeededDraw, min_plies: int = 4, max_plies: int = 40):
    """``(pre_position, setup_move, position)`` where ``position`` has a legal move."""
    while True:
        pos = parse_fen(STARTING_FEN)
        history = []
        target = min_plies + draw.below(max_plies - min_plies + 1)
        for _ in range(target):
            moves = legal_moves(pos)
            if not moves:
                break
            move = moves[draw.below(len(moves))]
            history.append((pos, move))
            pos = apply_move(pos, move)
        if history and legal_moves(pos):
            pre, setup = history[-1]
            return pre, setup, pos


def random_puzzles(
    n: int,
    seed: int = 0,
    themes=THEME_SPLIT_THEMES + EXTRA_THEMES,
    rating_range: tuple = (400, 3000),
    max_themes: int = 3,
    prefix: str = "syn",
) -> list:
    """``n`` valid puzzles with distinct positions.

    Puzzle ``i`` always carries ``themes[i % len(themes)]``.
    """
    draw = SeededDraw(seed)
    lo, hi = rating_range
    out = []
    seen: set = set()
    for i in range(n):
        while True:
            pre, setup, pos = random_position_line(draw)
            if format_fen(pos) not in seen:
                seen.add(format_fen(pos))
                break
        moves = legal_moves(pos)
        solution = moves[draw.below(len(moves))]
        line = [setup.uci(), solution.uci()]
        after = apply_move(pos, solution)
        replies = legal_moves(after)
        if replies:
            line.append(replies[draw.below(len(replies))].uci())
        tags = {themes[i % len(themes)]}
        for _ in range(draw.below(max_themes)):
            tags.add(themes[draw.below(len(themes))])
        rating = lo + draw.below(hi - lo + 1)
        pid = f"{prefix}{i:06d}"
        out.append(make_puzzle(pid, format_fen(pre), " ".join(line), rating, " ".join(sorted(tags)),
                               f"https://example.invalid/{pid}"))
    return out


def level_spread_puzzles(per_band: int, seed: int = 0, bands=((400, 1099), (1100, 1699), (1700, 2299), (2300, 3000)), **kw) -> list:
    """Puzzles with ratings spread evenly across the given rating bands."""
    out: list = []
    for b, (lo, hi) in enumerate(bands):
        out.extend(random_puzzles(per_band, seed + b, rating_range=(lo, hi), prefix=f"lvl{b}-", **kw))
    return out


__all__ = ["EXTRA_THEMES", "Puzzle", "level_spread_puzzles", "random_position_line", "random_puzzles"]

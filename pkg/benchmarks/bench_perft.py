"""Compare the compiled and pure-Python move-generation kernels on perft.

    python benchmarks/bench_perft.py [--depth N] [--repeat R]

Both kernels are imported directly, so the environment switch that picks
the default backend does not matter here.
"""

import argparse
import statistics
import time

from chessdistill.chess import STARTING_FEN, parse_fen
from chessdistill.chess import _kernel_py

try:
    from chessdistill.chess import _kernel as _kernel_c
except ImportError:
    _kernel_c = None

POSITIONS = {
    "start": STARTING_FEN,
    "kiwipete": "r3k2r/p1ppqpb1/bn2pnp1/3PN3/1p2P3/2N2Q1p/PPPBBPPP/R3K2R w KQkq - 0 1",
    "endgame": "8/2p5/3p4/KP5r/1R3p1k/8/4P1P1/8 w - - 0 1",
}


def raw(fen):
    p = parse_fen(fen)
    return list(p.board), p.turn.value == "w", p.castling, p.en_passant.index if p.en_passant else -1


def timed(kernel, args, depth, repeat):
    runs, nodes = [], 0
    for _ in range(repeat):
        t0 = time.perf_counter()
        nodes = kernel.perft(*args, depth)
        runs.append(time.perf_counter() - t0)
    return nodes, statistics.median(runs)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--depth", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _kernel_c is None:
        print("compiled kernel not built; only the Python kernel is timed")
    print(f"{'position':<10} {'nodes':>10} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    for name, fen in POSITIONS.items():
        pos = raw(fen)
        nodes, t_py = timed(_kernel_py, pos, args.depth, args.repeat)
        if _kernel_c is None:
            print(f"{name:<10} {nodes:>10,} {t_py:>10.3f} {'-':>10} {'-':>8}")
            continue
        nodes_c, t_c = timed(_kernel_c, pos, args.depth, args.repeat)
        assert nodes_c == nodes, f"{name}: kernels disagree ({nodes_c} vs {nodes})"
        print(f"{name:<10} {nodes:>10,} {t_py:>10.3f} {t_c:>10.3f} {t_py / t_c:>7.1f}x")


if __name__ == "__main__":
    main()

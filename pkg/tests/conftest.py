import os
import shutil
import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).resolve().parent
ROOT = TESTS.parent
sys.path.insert(0, str(TESTS))

EXAMPLE_FEN = "2kr3r/ppp2Npp/2nbp3/6N1/2PP2n1/4B2q/PP2BP2/R2Q1RK1 b - - 2 15"


def find_engine():
    """A UCI engine from CHESSDISTILL_ENGINE, the bundled install, or PATH."""
    env = os.environ.get("CHESSDISTILL_ENGINE")
    if env:
        return env
    local = ROOT / ".engine" / "stockfish"
    if local.exists():
        return str(local)
    return shutil.which("stockfish")


@pytest.fixture(scope="session")
def engine_path():
    path = find_engine()
    if not path:
        pytest.skip("no UCI engine available (run scripts/install_engine.sh)")
    return path


@pytest.fixture
def fake_engine():
    """Factory for EngineConfig pointing at the scripted fake engine."""
    from chessdistill.engine import EngineConfig

    def make(mode="normal", **kw):
        kw.setdefault("handshake_timeout", 5.0)
        kw.setdefault("per_position_timeout", 5.0)
        return EngineConfig(sys.executable, engine_args=(str(TESTS / "fake_engine.py"), mode), **kw)

    return make

# white's last move e5f7 leads into the example position; the tags are illustrative
EXAMPLE_PRE_FEN = "2kr3r/ppp3pp/2nbp3/4N1N1/2PP2n1/4B2q/PP2BP2/R2Q1RK1 w - - 1 15"
EXAMPLE_THEMES = "kingsideAttack mate mateIn1 oneMove short"


def example_puzzle(themes=EXAMPLE_THEMES, moves="e5f7 h3h2"):
    from chessdistill.datasets import make_puzzle

    return make_puzzle("EX001", EXAMPLE_PRE_FEN, moves, 1512, themes, "https://lichess.org/training/EX001")


def example_analysis():
    from chessdistill.chess import Move, parse_fen
    from chessdistill.engine import Analysis, PvLine, Score

    lines = (
        PvLine(1, (Move.from_uci("h3h2"),), Score(mate=1)),
        PvLine(2, tuple(map(Move.from_uci, ("g4e3", "f2e3", "h3e3"))), Score(cp=650)),
        PvLine(3, tuple(map(Move.from_uci, ("d6h2", "g1h1", "h2g3"))), Score(cp=420)),
    )
    return Analysis(parse_fen(EXAMPLE_FEN), 24, lines)


@pytest.fixture
def puzzle():
    return example_puzzle()


@pytest.fixture
def analysis():
    return example_analysis()


@pytest.fixture(scope="session")
def eval_population():
    """Synthetic pool large enough for the full 20x25 + 4x100 protocol."""
    from chessdistill.synthetic import random_puzzles

    return random_puzzles(1500, seed=2024)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS):
            terminalreporter.write_line(line)

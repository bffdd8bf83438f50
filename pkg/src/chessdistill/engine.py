"""UCI engine client used as the master system.

One :class:`EngineSession` wraps one engine process and carries exactly one
search at a time; :class:`EnginePool` hands sessions out to worker threads.
"""

from __future__ import annotations

import logging
import queue
import subprocess
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .chess import IllegalMove, InvalidMoveText, Move, Position, apply_move, format_fen, legal_moves

log = logging.getLogger(__name__)


class EngineError(RuntimeError):
    code = "EngineError"


class SpawnFailure(EngineError):
    code = "SpawnFailure"


class HandshakeTimeout(EngineError):
    code = "HandshakeTimeout"


class UnsupportedOption(EngineError):
    code = "UnsupportedOption"


class EngineCrashed(EngineError):
    code = "EngineCrashed"


class AnalysisTimeout(EngineError):
    code = "AnalysisTimeout"


class ProtocolParseError(EngineError):
    code = "ProtocolParseError"


@dataclass(frozen=True)
class EngineConfig:
    executable_path: str
    depth: int = 24
    multipv_k: int = 1
    threads: int = 1
    hash_mb: int = 16
    per_position_timeout: float = 300.0
    handshake_timeout: float = 30.0
    engine_args: tuple = ()

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.multipv_k < 1:
            raise ValueError("multipv_k must be >= 1")
        if self.threads < 1 or self.hash_mb < 1:
            raise ValueError("threads and hash_mb must be >= 1")
        if self.per_position_timeout <= 0 or self.handshake_timeout <= 0:
            raise ValueError("timeouts must be positive")


class Score(NamedTuple):
    """Engine score from the mover's perspective: centipawns or mate-in."""

    cp: Optional[int] = None
    mate: Optional[int] = None

    def __str__(self) -> str:
        return f"mate {self.mate}" if self.mate is not None else f"cp {self.cp}"

    @classmethod
    def parse(cls, text: str) -> "Score":
        kind, value = text.split()
        return cls(mate=int(value)) if kind == "mate" else cls(cp=int(value))


@dataclass(frozen=True)
class PvLine:
    rank: int
    moves: tuple
    score: Score

    def to_dict(self) -> dict:
        return {"rank": self.rank, "moves": [m.uci() for m in self.moves], "score": str(self.score)}

    @classmethod
    def from_dict(cls, data: dict) -> "PvLine":
        return cls(data["rank"], tuple(Move.from_uci(m) for m in data["moves"]), Score.parse(data["score"]))


@dataclass(frozen=True)
class Analysis:
    position: Position
    depth_reached: int
    lines: tuple
    solution_mismatch: bool = False

    @property
    def best_move(self) -> Move:
        return self.lines[0].moves[0]

    def to_dict(self) -> dict:
        return {
            "fen": format_fen(self.position),
            "depth_reached": self.depth_reached,
            "lines": [line.to_dict() for line in self.lines],
            "solution_mismatch": self.solution_mismatch,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Analysis":
        from .chess import parse_fen

        return cls(
            position=parse_fen(data["fen"]),
            depth_reached=data["depth_reached"],
            lines=tuple(PvLine.from_dict(d) for d in data["lines"]),
            solution_mismatch=data.get("solution_mismatch", False),
        )


@dataclass
class InfoLine:
    depth: int
    multipv: int
    score: Optional[Score]
    bound: bool
    pv: list = field(default_factory=list)


_SKIP_ARITY = {
    "seldepth": 1, "time": 1, "nodes": 1, "nps": 1, "hashfull": 1, "tbhits": 1,
    "sbhits": 1, "cpuload": 1, "currmovenumber": 1, "currmove": 1, "wdl": 3,
}


def parse_info(line: str) -> Optional[InfoLine]:
    """Parse an ``info`` line carrying a PV; other info lines return None."""
    tokens = line.split()
    if not tokens or tokens[0] != "info" or "pv" not in tokens:
        return None
    depth = multipv = None
    score = None
    bound = False
    pv: list = []
    i = 1
    try:
        while i < len(tokens):
            tok = tokens[i]
            if tok == "depth":
                depth = int(tokens[i + 1])
                i += 2
            elif tok == "multipv":
                multipv = int(tokens[i + 1])
                i += 2
            elif tok == "score":
                kind, value = tokens[i + 1], int(tokens[i + 2])
                if kind not in ("cp", "mate"):
                    raise ProtocolParseError(f"unknown score kind in {line!r}")
                score = Score(mate=value) if kind == "mate" else Score(cp=value)
                i += 3
                if i < len(tokens) and tokens[i] in ("lowerbound", "upperbound"):
                    bound = True
                    i += 1
            elif tok == "pv":
                pv = [Move.from_uci(t) for t in tokens[i + 1:]]
                break
            elif tok == "string":
                return None
            elif tok in _SKIP_ARITY:
                i += 1 + _SKIP_ARITY[tok]
            else:
                i += 1
    except (IndexError, ValueError, InvalidMoveText) as exc:
        raise ProtocolParseError(f"malformed info line {line!r}: {exc}") from None
    if depth is None or not pv:
        raise ProtocolParseError(f"info line without depth or pv: {line!r}")
    return InfoLine(depth, multipv or 1, score, bound, pv)


def collect_lines(infos: list, bestmove: Move, k: int) -> tuple:
    """Reduce iterative-deepening output to the final block per rank.

    Keeps the deepest depth that reported rank 1 and, at that depth, the last
    non-bound line of each rank; ranks are cut at the first gap.
    """
    by_depth: dict = {}
    for info in infos:
        if info.bound or info.score is None or info.multipv > k:
            continue
        by_depth.setdefault(info.depth, {})[info.multipv] = info
    depths = [d for d, ranks in by_depth.items() if 1 in ranks]
    if not depths:
        raise ProtocolParseError("engine reported no complete principal variation")
    depth = max(depths)
    ranks = by_depth[depth]
    lines = []
    for rank in range(1, k + 1):
        if rank not in ranks:
            break
        info = ranks[rank]
        lines.append(PvLine(rank, tuple(info.pv), info.score))
    if lines[0].moves[0] != bestmove:
        raise ProtocolParseError(f"bestmove {bestmove.uci()} differs from PV head {lines[0].moves[0].uci()}")
    return depth, tuple(lines)


class EngineSession:
    """A live UCI conversation with one engine process."""

    def __init__(self, cfg: EngineConfig):
        self.cfg = cfg
        self.options: set = set()
        self.name = ""
        self._multipv = None
        self._lines: queue.Queue = queue.Queue()
        try:
            self._proc = subprocess.Popen(
                [cfg.executable_path, *cfg.engine_args],
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise SpawnFailure(f"{cfg.executable_path}: {exc}") from None
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        try:
            self._handshake()
        except BaseException:
            self.close()
            raise

    def _pump(self):
        for line in self._proc.stdout:
            self._lines.put(line.rstrip("\r\n"))
        self._lines.put(None)

    def _send(self, command: str):
        try:
            self._proc.stdin.write(command + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError, ValueError):
            raise EngineCrashed(f"cannot write {command!r}: engine gone") from None

    def _read(self, deadline: float, timeout_exc):
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise timeout_exc
        try:
            line = self._lines.get(timeout=remaining)
        except queue.Empty:
            raise timeout_exc from None
        if line is None:
            raise EngineCrashed(f"engine exited with code {self._proc.poll()}")
        return line

    def _wait_for(self, token: str, timeout: float, exc_type):
        deadline = time.monotonic() + timeout
        while True:
            line = self._read(deadline, exc_type(f"no {token!r} within {timeout}s"))
            if line.strip() == token:
                return

    def _handshake(self):
        cfg = self.cfg
        deadline = time.monotonic() + cfg.handshake_timeout
        self._send("uci")
        while True:
            line = self._read(deadline, HandshakeTimeout(f"no 'uciok' within {cfg.handshake_timeout}s"))
            if line.startswith("id name "):
                self.name = line[8:].strip()
            elif line.startswith("option name "):
                rest = line[12:]
                self.options.add(rest.split(" type ")[0].strip().lower())
            elif line.strip() == "uciok":
                break
        for name, value in (("Threads", cfg.threads), ("Hash", cfg.hash_mb), ("MultiPV", cfg.multipv_k)):
            self.set_option(name, value)
        self._multipv = cfg.multipv_k
        self._send("isready")
        self._wait_for("readyok", cfg.handshake_timeout, HandshakeTimeout)

    def set_option(self, name: str, value):
        if name.lower() not in self.options:
            raise UnsupportedOption(name)
        self._send(f"setoption name {name} value {value}")

    def analyze(self, position: Position, depth: Optional[int] = None, k: Optional[int] = None) -> Analysis:
        depth = depth or self.cfg.depth
        k = k or self.cfg.multipv_k
        if not legal_moves(position):
            raise ValueError("position has no legal moves")
        if k != self._multipv:
            self.set_option("MultiPV", k)
            self._multipv = k
        timeout = self.cfg.per_position_timeout
        self._send("ucinewgame")
        self._send("isready")
        self._wait_for("readyok", timeout, AnalysisTimeout)
        self._send(f"position fen {format_fen(position)}")
        self._send(f"go depth {depth}")
        deadline = time.monotonic() + timeout
        infos = []
        while True:
            try:
                line = self._read(deadline, AnalysisTimeout(f"no bestmove within {timeout}s"))
            except AnalysisTimeout:
                self._abort_search()
                raise
            if line.startswith("info"):
                info = parse_info(line)
                if info is not None:
                    infos.append(info)
            elif line.startswith("bestmove"):
                parts = line.split()
                if len(parts) < 2:
                    raise ProtocolParseError(f"malformed bestmove line {line!r}")
                try:
                    best = Move.from_uci(parts[1])
                except InvalidMoveText:
                    raise ProtocolParseError(f"malformed bestmove line {line!r}") from None
                break
        depth_reached, lines = collect_lines(infos, best, k)
        for pv_line in lines:
            pos = position
            try:
                for move in pv_line.moves:
                    pos = apply_move(pos, move)
            except IllegalMove as exc:
                raise ProtocolParseError(f"PV rank {pv_line.rank} not legal: {exc}") from None
        return Analysis(position, depth_reached, lines)

    def _abort_search(self):
        try:
            self._send("stop")
            self._wait_for_prefix("bestmove", 5.0)
        except EngineError:
            pass

    def _wait_for_prefix(self, prefix: str, timeout: float):
        deadline = time.monotonic() + timeout
        while True:
            if self._read(deadline, AnalysisTimeout(prefix)).startswith(prefix):
                return

    @property
    def alive(self) -> bool:
        return self._proc.poll() is None

    def close(self):
        if self._proc.poll() is None:
            try:
                self._send("quit")
            except EngineError:
                pass
            try:
                self._proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        for stream in (self._proc.stdin, self._proc.stdout):
            try:
                stream.close()
            except (OSError, ValueError):
                pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def start(cfg: EngineConfig) -> EngineSession:
    """Spawn the engine and complete the ``uci``/``isready`` handshake."""
    return EngineSession(cfg)


def master_solution(session: EngineSession, puzzle, cfg: Optional[EngineConfig] = None) -> Analysis:
    """Analyse a puzzle and flag disagreement with the dataset solution.

    A mismatch is not an error: the analysis is returned with
    ``solution_mismatch`` set and a warning is logged.
    """
    cfg = cfg or session.cfg
    analysis = session.analyze(puzzle.position, cfg.depth, cfg.multipv_k)
    if analysis.best_move != puzzle.solution:
        log.warning(
            "SolutionMismatch on puzzle %s: engine %s, dataset %s",
            puzzle.id, analysis.best_move.uci(), puzzle.solution.uci(),
        )
        analysis = Analysis(analysis.position, analysis.depth_reached, analysis.lines, solution_mismatch=True)
    return analysis


class EnginePool:
    """Fixed set of sessions handed out under mutual exclusion."""

    def __init__(self, cfg: EngineConfig, size: int = 1):
        if size < 1:
            raise ValueError("pool size must be >= 1")
        self.cfg = cfg
        self.size = size
        self._free: queue.Queue = queue.Queue()
        self._all = []
        try:
            for _ in range(size):
                session = start(cfg)
                self._all.append(session)
                self._free.put(session)
        except BaseException:
            self.close()
            raise

    @contextmanager
    def session(self):
        s = self._free.get()
        try:
            if not s.alive:
                s.close()
                self._all.remove(s)
                s = start(self.cfg)
                self._all.append(s)
            yield s
        finally:
            self._free.put(s)

    def map_master_solutions(self, puzzles) -> list:
        """``(puzzle, analysis or exception)`` pairs in input order."""

        def work(puzzle):
            with self.session() as s:
                try:
                    return puzzle, master_solution(s, puzzle, self.cfg)
                except EngineError as exc:
                    return puzzle, exc

        with ThreadPoolExecutor(max_workers=self.size) as ex:
            return list(ex.map(work, puzzles))

    def close(self):
        for s in self._all:
            s.close()
        self._all.clear()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

"""Verifiable move reward: a pure scorer plus a batch HTTP service."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional, Union

from .chess import InvalidMoveText, Move
from .validator import NoMarker, UnparseableMove, extract_final_answer

log = logging.getLogger(__name__)

REASONS = ("exact_match", "partial_source", "partial_dest", "wrong_move", "no_marker", "unparseable")
MAX_BODY_BYTES = 256 * 1024 * 1024


@dataclass(frozen=True)
class RewardConfig:
    eta: float = 0.0
    require_marker: bool = True

    def __post_init__(self):
        if not 0.0 <= self.eta < 1.0:
            raise ValueError(f"eta must lie in [0, 1), got {self.eta}")


@dataclass(frozen=True)
class RewardOutcome:
    reward: float
    reason: str
    predicted: Optional[str] = None
    legal: Optional[bool] = None

    def to_dict(self) -> dict:
        out = {"reward": self.reward, "reason": self.reason}
        if self.legal is not None:
            out["legal"] = self.legal
        return out


def _bare_move(text: str) -> Move:
    # used when require_marker is off: the last whitespace token is the answer
    tokens = text.split()
    if not tokens:
        raise NoMarker("empty completion")
    try:
        return Move.from_uci(tokens[-1].rstrip(".,;:!?*`)\"'"))
    except InvalidMoveText:
        raise UnparseableMove(tokens[-1]) from None


def score(completion: str, expected: Union[Move, str], cfg: RewardConfig = RewardConfig(), position=None) -> RewardOutcome:
    """Reward of one completion against the expected first move.

    Exact normalized-UCI match earns 1. With ``eta > 0`` a shared source
    square earns ``eta`` (checked first), then a shared destination square.
    Passing ``position`` only annotates whether the prediction is legal there.
    """
    if isinstance(expected, str):
        expected = Move.from_uci(expected)
    try:
        predicted = extract_final_answer(completion)
    except NoMarker:
        if cfg.require_marker:
            return RewardOutcome(0.0, "no_marker")
        try:
            predicted = _bare_move(completion)
        except NoMarker:
            return RewardOutcome(0.0, "no_marker")
        except UnparseableMove:
            return RewardOutcome(0.0, "unparseable")
    except UnparseableMove:
        return RewardOutcome(0.0, "unparseable")

    legal = None
    if position is not None:
        from .chess import is_legal

        legal = is_legal(position, predicted)
    uci = predicted.uci()
    if predicted == expected:
        return RewardOutcome(1.0, "exact_match", uci, legal)
    if cfg.eta > 0 and predicted.from_square == expected.from_square:
        return RewardOutcome(cfg.eta, "partial_source", uci, legal)
    if cfg.eta > 0 and predicted.to_square == expected.to_square:
        return RewardOutcome(cfg.eta, "partial_dest", uci, legal)
    return RewardOutcome(0.0, "wrong_move", uci, legal)


def score_batch(items: list, cfg: RewardConfig) -> tuple:
    """Score request items; returns ``(results, any_invalid)`` in input order."""
    results = []
    bad = False
    for item in items:
        if not isinstance(item, dict):
            results.append({"error": "invalid_item"})
            bad = True
            continue
        completion, expected = item.get("completion"), item.get("expected")
        if not isinstance(completion, str):
            results.append({"error": "invalid_completion"})
            bad = True
            continue
        try:
            move = Move.from_uci(expected) if isinstance(expected, str) else None
        except InvalidMoveText:
            move = None
        if move is None:
            results.append({"error": "invalid_expected"})
            bad = True
            continue
        results.append(score(completion, move, cfg).to_dict())
    return results, bad


class _Handler(BaseHTTPRequestHandler):
    server_version = "chessdistill-reward"
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        log.debug("%s " + fmt, self.address_string(), *args)

    def _reply(self, status: int, payload: dict):
        body = json.dumps(payload, separators=(",", ":")).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/healthz":
            self._reply(200, {"status": "ok"})
        else:
            self._reply(404, {"error": "not_found"})

    def do_POST(self):
        if self.path != "/v1/reward":
            self._reply(404, {"error": "not_found"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
        except ValueError:
            length = -1
        if length < 0 or length > MAX_BODY_BYTES:
            self._reply(400, {"error": "bad_content_length"})
            return
        raw = self.rfile.read(length)
        try:
            payload = json.loads(raw)
        except (UnicodeDecodeError, json.JSONDecodeError):
            self._reply(400, {"error": "malformed_json"})
            return
        items = payload.get("items") if isinstance(payload, dict) else None
        if not isinstance(items, list):
            self._reply(400, {"error": "missing_items"})
            return
        results, bad = score_batch(items, self.server.reward_cfg)
        self._reply(400 if bad else 200, {"results": results})


class RewardServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, addr, cfg: RewardConfig):
        super().__init__(addr, _Handler)
        self.reward_cfg = cfg

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"


def serve(addr, cfg: RewardConfig = RewardConfig()) -> RewardServer:
    """Bind the reward service; call ``serve_forever`` on the result to run it."""
    return RewardServer(addr, cfg)

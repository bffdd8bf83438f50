"""Layered pipeline configuration: flags > environment > YAML file > defaults.

Keys form a two-level tree (``section.key``). Environment overrides use
``CHESSDISTILL_<SECTION>__<KEY>``, e.g. ``CHESSDISTILL_ENGINE__DEPTH=20``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

import yaml

from . import __version__
from .engine import EngineConfig
from .evaluation import LevelBands
from .prompts import VARIANTS, PromptVariant
from .reward import RewardConfig
from .sampler import SamplerConfig
from .teacher import RetryPolicy, TeacherConfig
from .validator import ValidatorConfig

ENV_PREFIX = "CHESSDISTILL_"

DEFAULTS: dict = {
    "paths": {"csv": "", "work_dir": "work"},
    "engine": {
        "path": "stockfish", "depth": 24, "multipv_k": 1, "threads": 1, "hash_mb": 16,
        "per_position_timeout": 300.0, "handshake_timeout": 30.0, "pool_size": 1,
    },
    "sampler": {"strategy": "balanced", "K": 50, "M": 800, "n": 0, "seed": 0, "allow_reuse": False},
    "teacher": {
        "base_url": "https://openrouter.ai/api/v1", "model_name": "google/gemini-3-flash-preview",
        "api_key_env": "OPENROUTER_API_KEY", "temperature": 0.7, "max_output_tokens": 2048,
        "max_concurrency": 8, "max_attempts": 5, "base_backoff": 1.0, "jitter": 0.25,
        "request_timeout": 120.0, "cache_dir": "",
    },
    "prompt": {"variant": "best_move", "multipv_k": 3},
    "validator": {"min_sentences": 4, "max_sentences": 10, "mate_in_one_min_sentences": 2},
    "reward": {"eta": 0.0, "require_marker": True, "host": "127.0.0.1", "port": 8088},
    "eval": {
        "seed": 0, "intermediate_from": 1100, "advanced_from": 1700, "expert_from": 2300,
        "base_url": "", "model_name": "", "api_key_env": "OPENROUTER_API_KEY", "max_concurrency": 8,
    },
}

SECRET_HINTS = ("key", "token", "secret", "password")


class ConfigError(ValueError):
    code = "ConfigError"


class ConfigParse(ConfigError):
    code = "ConfigParse"


class UnknownKey(ConfigError):
    code = "UnknownKey"

    def __init__(self, key: str, source: str):
        super().__init__(f"unknown config key {key!r} (from {source})")
        self.key = key


def _coerce(key: str, default, value):
    if isinstance(value, str) and not isinstance(default, str):
        if isinstance(default, bool):
            low = value.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ConfigParse(f"{key}: expected a boolean, got {value!r}")
        try:
            return type(default)(value)
        except ValueError:
            raise ConfigParse(f"{key}: expected {type(default).__name__}, got {value!r}") from None
    if isinstance(default, bool) != isinstance(value, bool):
        raise ConfigParse(f"{key}: expected {type(default).__name__}, got {value!r}")
    if isinstance(default, float) and isinstance(value, int):
        return float(value)
    if not isinstance(value, type(default)):
        raise ConfigParse(f"{key}: expected {type(default).__name__}, got {value!r}")
    return value


def _apply(tree: dict, key: str, value, source: str):
    section, _, name = key.partition(".")
    if section not in DEFAULTS or name not in DEFAULTS[section]:
        raise UnknownKey(key, source)
    tree[section][name] = _coerce(key, DEFAULTS[section][name], value)


def _file_layer(path) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigParse(f"cannot read {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigParse(f"{path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigParse(f"{path}: top level must be a mapping")
    flat = {}
    for section, body in data.items():
        if not isinstance(body, dict):
            raise UnknownKey(str(section), str(path)) if section not in DEFAULTS else ConfigParse(f"{section} must be a mapping")
        for name, value in body.items():
            flat[f"{section}.{name}"] = value
    return flat


def _env_layer(env: Mapping) -> dict:
    flat = {}
    for var, value in env.items():
        if var.startswith(ENV_PREFIX) and "__" in var:
            section, _, name = var[len(ENV_PREFIX):].partition("__")
            section = section.lower()
            match = next((k for k in DEFAULTS.get(section, {}) if k.lower() == name.lower()), name.lower())
            flat[f"{section}.{match}"] = value
    return flat


@dataclass(frozen=True)
class PipelineConfig:
    tree: dict

    def __getitem__(self, section: str) -> dict:
        return self.tree[section]

    @property
    def work_dir(self) -> Path:
        return Path(self.tree["paths"]["work_dir"])

    def engine(self) -> EngineConfig:
        e = self.tree["engine"]
        return EngineConfig(
            executable_path=e["path"], depth=e["depth"], multipv_k=e["multipv_k"], threads=e["threads"],
            hash_mb=e["hash_mb"], per_position_timeout=e["per_position_timeout"], handshake_timeout=e["handshake_timeout"],
        )

    def sampler(self, exclude_ids=frozenset()) -> SamplerConfig:
        s = self.tree["sampler"]
        return SamplerConfig(s["strategy"], s["K"], s["M"], s["n"], s["seed"], frozenset(exclude_ids))

    def _sampler_check(self):
        # random/hard need n, but n may legitimately arrive later as a flag
        s = self.tree["sampler"]
        if s["strategy"] == "balanced" or s["n"] >= 1:
            self.sampler()

    def teacher(self) -> TeacherConfig:
        t = self.tree["teacher"]
        return TeacherConfig(
            base_url=t["base_url"], model_name=t["model_name"], api_key_env=t["api_key_env"],
            temperature=t["temperature"], max_output_tokens=t["max_output_tokens"], max_concurrency=t["max_concurrency"],
            retry=RetryPolicy(t["max_attempts"], t["base_backoff"], t["jitter"]),
            cache_dir=t["cache_dir"] or str(self.work_dir / "cache"), request_timeout=t["request_timeout"],
        )

    def eval_endpoint(self) -> TeacherConfig:
        t, e = self.teacher(), self.tree["eval"]
        return TeacherConfig(
            base_url=e["base_url"] or t.base_url, model_name=e["model_name"] or t.model_name,
            api_key_env=e["api_key_env"], temperature=0.0, max_output_tokens=t.max_output_tokens,
            max_concurrency=e["max_concurrency"], retry=t.retry, request_timeout=t.request_timeout,
        )

    def variant(self) -> PromptVariant:
        name = self.tree["prompt"]["variant"]
        if name not in VARIANTS:
            raise ConfigParse(f"prompt.variant must be one of {sorted(VARIANTS)}, got {name!r}")
        return VARIANTS[name]

    def validator(self) -> ValidatorConfig:
        return ValidatorConfig(**self.tree["validator"])

    def reward(self) -> RewardConfig:
        r = self.tree["reward"]
        return RewardConfig(r["eta"], r["require_marker"])

    def bands(self) -> LevelBands:
        e = self.tree["eval"]
        return LevelBands(e["intermediate_from"], e["advanced_from"], e["expert_from"])

    def redacted(self) -> dict:
        out = copy.deepcopy(self.tree)
        for section in out.values():
            for name in section:
                if any(h in name.lower() for h in SECRET_HINTS) and not name.endswith("_env"):
                    section[name] = "***"
        return out

    def digest(self, sections=None) -> str:
        """Hash of the resolved configuration, optionally restricted to ``sections``."""
        tree = self.redacted()
        if sections is not None:
            tree = {k: tree[k] for k in sorted(sections)}
        blob = json.dumps(tree, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(f"{__version__}\n{blob}".encode()).hexdigest()

    def dump(self) -> str:
        return yaml.safe_dump(self.redacted(), sort_keys=True)


def load_config(file: Optional[str] = None, env: Optional[Mapping] = None, flags: Optional[Mapping] = None) -> PipelineConfig:
    """Resolve configuration; every layer is validated before any work starts."""
    tree = copy.deepcopy(DEFAULTS)
    layers = []
    if file:
        layers.append((_file_layer(file), str(file)))
    layers.append((_env_layer(os.environ if env is None else env), "environment"))
    layers.append((dict(flags or {}), "flags"))
    for layer, source in layers:
        for key, value in layer.items():
            if value is not None:
                _apply(tree, key, value, source)
    cfg = PipelineConfig(tree)
    try:
        for build in (cfg.engine, cfg._sampler_check, cfg.teacher, cfg.variant, cfg.validator, cfg.reward, cfg.bands):
            build()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigParse(str(exc)) from None
    return cfg


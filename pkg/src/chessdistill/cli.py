"""``chessdistill`` command line: ingest, analyze, sample, distill, validate, emit, eval, serve.

Every stage reads the previous stage's files from the work directory and
writes its own, each with a ``.meta.json`` sidecar holding the toolkit
version, the hash of the configuration sections the stage depends on and
the hashes of its inputs. A stage whose sidecar matches is skipped.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Optional

from . import __version__
from .chess import InvalidMoveText, Move
from .config import ConfigError, PipelineConfig, load_config
from .datasets import (
    DatasetError,
    Puzzle,
    dataset_stats,
    emit_rlvr,
    emit_sft,
    ingest_csv,
    read_jsonl,
    rlvr_record,
    sft_record,
    stats_report,
    write_jsonl,
)
from .engine import Analysis, EngineError, EnginePool
from .evaluation import EvalError, build_test_splits, evaluate, render_report, rescore, write_report
from .prompts import VARIANTS
from .reward import score, serve
from .sampler import SamplerError, sample
from .teacher import AuthConfigMissing, DistillationRecord, TeacherError, batch_distill
from .validator import validate_trace

log = logging.getLogger("chessdistill")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_UPSTREAM = 0, 1, 2, 3


class DataError(RuntimeError):
    """Missing or inconsistent stage artifacts."""


# ---------------------------------------------------------------- artifacts

def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def fingerprint(cfg: PipelineConfig, stage: str, sections, inputs, extra=None) -> dict:
    return {
        "toolkit_version": __version__,
        "stage": stage,
        "config_hash": cfg.digest(sections),
        "inputs": {str(p): file_sha256(p) for p in inputs},
        "extra": extra or {},
    }


def up_to_date(out, fp: dict) -> bool:
    out, meta = Path(out), meta_path(out)
    if not out.exists() or not meta.exists():
        return False
    try:
        recorded = json.loads(meta.read_text())
    except ValueError:
        return False
    return recorded.get("fingerprint") == fp and recorded.get("output_sha256") == file_sha256(out)


def seal(out, fp: dict) -> None:
    meta_path(out).write_text(
        json.dumps({"fingerprint": fp, "output_sha256": file_sha256(out)}, indent=2, sort_keys=True) + "\n"
    )


def require(path) -> Path:
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing input {path}; run the earlier stage first")
    return path


def load_puzzles(work: Path) -> list:
    return [Puzzle.from_dict(d) for d in read_jsonl(require(work / "puzzles.jsonl"))]


def read_ids(path) -> list:
    return [line.strip() for line in Path(path).read_text().splitlines() if line.strip()]


def write_ids(ids, path) -> None:
    Path(path).write_text("".join(f"{i}\n" for i in ids))


def load_analyses(path) -> dict:
    if not Path(path).exists():
        return {}
    return {row["puzzle_id"]: row for row in read_jsonl(path)}


# ---------------------------------------------------------------- stages

def cmd_ingest(cfg: PipelineConfig, args) -> int:
    csv_path = args.csv or cfg["paths"]["csv"]
    if not csv_path:
        raise ConfigError("ingest needs --csv or paths.csv")
    work = cfg.work_dir
    work.mkdir(parents=True, exist_ok=True)
    out = work / "puzzles.jsonl"
    fp = fingerprint(cfg, "ingest", [], [csv_path])
    if up_to_date(out, fp):
        log.info("ingest: %s is up to date", out)
        return EXIT_OK
    rejections: list = []
    puzzles = ingest_csv(csv_path, rejections)
    write_jsonl((p.to_dict() for p in puzzles), out)
    write_jsonl((r.to_dict() for r in rejections), work / "rejections.jsonl")
    seal(out, fp)
    log.info("ingest: %d puzzles accepted, %d rows rejected", len(puzzles), len(rejections))
    return EXIT_OK


def _analysis_k(cfg: PipelineConfig) -> int:
    if cfg.variant().pv_mode == "multi_pv":
        return cfg["prompt"]["multipv_k"]
    return cfg["engine"]["multipv_k"]


def cmd_analyze(cfg: PipelineConfig, args) -> int:
    work = cfg.work_dir
    puzzles = load_puzzles(work)
    if args.ids:
        wanted = set(read_ids(args.ids))
        puzzles = [p for p in puzzles if p.id in wanted]
    engine_cfg = cfg.engine()
    k = _analysis_k(cfg)
    out = work / "analyses.jsonl"
    done = load_analyses(out)
    todo = [
        p for p in puzzles
        if not (p.id in done and done[p.id]["depth"] == engine_cfg.depth and done[p.id]["k"] >= k
                and done[p.id]["analysis"]["fen"] == p.fen)
    ]
    log.info("analyze: %d puzzles, %d already done", len(puzzles), len(puzzles) - len(todo))
    if not todo:
        return EXIT_OK
    from dataclasses import replace

    engine_cfg = replace(engine_cfg, multipv_k=k)
    failures = 0
    chunk = max(1, cfg["engine"]["pool_size"]) * 8
    with EnginePool(engine_cfg, cfg["engine"]["pool_size"]) as pool, open(out, "a", encoding="utf-8") as fh:
        for start in range(0, len(todo), chunk):
            for puzzle, result in pool.map_master_solutions(todo[start:start + chunk]):
                if isinstance(result, Exception):
                    failures += 1
                    log.error("analyze %s: %s %s", puzzle.id, result.code, result)
                    continue
                fh.write(json.dumps({"puzzle_id": puzzle.id, "depth": engine_cfg.depth, "k": k,
                                     "analysis": result.to_dict()}) + "\n")
            fh.flush()
    log.info("analyze: %d analysed, %d failed", len(todo) - failures, failures)
    return EXIT_UPSTREAM if failures else EXIT_OK


def _sample_names(work: Path) -> dict:
    return {p.name[len("sample_"):-len(".ids")]: p for p in sorted(work.glob("sample_*.ids"))}


def cmd_sample(cfg: PipelineConfig, args) -> int:
    work = cfg.work_dir
    puzzles = load_puzzles(work)
    exclude: set = set()
    for path in args.exclude or []:
        exclude.update(read_ids(path))
    sft_ids = work / "sample_sft.ids"
    if args.name != "sft" and not cfg["sampler"]["allow_reuse"] and sft_ids.exists():
        # every other set is drawn disjoint from the SFT set
        exclude.update(read_ids(sft_ids))
    scfg = cfg.sampler(exclude)
    out = work / f"sample_{args.name}.ids"
    inputs = [work / "puzzles.jsonl", *(args.exclude or [])]
    if args.name != "sft" and not cfg["sampler"]["allow_reuse"] and sft_ids.exists():
        inputs.append(sft_ids)
    fp = fingerprint(cfg, "sample", ["sampler"], inputs, {"name": args.name})
    if up_to_date(out, fp):
        log.info("sample: %s is up to date", out)
        print(Path(str(out) + ".stats.txt").read_text(), end="")
        return EXIT_OK
    chosen = sample(puzzles, scfg)
    write_ids((p.id for p in chosen), out)
    report = stats_report(chosen, label=args.name.upper())
    Path(str(out) + ".stats.txt").write_text(report)
    seal(out, fp)
    print(report, end="")
    log.info("sample: %d puzzles -> %s", len(chosen), out)
    return EXIT_OK


def _puzzles_by_ids(work: Path, name: str) -> list:
    ids = read_ids(require(work / f"sample_{name}.ids"))
    by_id = {p.id: p for p in load_puzzles(work)}
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise DataError(f"{len(missing)} sampled ids not in puzzles.jsonl (first: {missing[0]})")
    return [by_id[i] for i in ids]


def cmd_distill(cfg: PipelineConfig, args) -> int:
    work = cfg.work_dir
    variant_name = cfg["prompt"]["variant"]
    variant = cfg.variant()
    tcfg = cfg.teacher()
    tcfg.api_key()
    puzzles = _puzzles_by_ids(work, args.name)
    if args.limit:
        puzzles = puzzles[:args.limit]
    analyses = {pid: Analysis.from_dict(row["analysis"]) for pid, row in load_analyses(work / "analyses.jsonl").items()}
    result = batch_distill(tcfg, puzzles, analyses, variant)
    out = work / f"distill_{variant_name}.jsonl"
    write_jsonl((r.to_dict() for r in result.records), out)
    write_jsonl((e.to_dict() for e in result.errors), work / f"distill_{variant_name}.errors.jsonl")
    log.info("distill: %d records, %d failures, %d network calls", len(result.records), result.failures, result.network_calls)
    print(f"records={len(result.records)} failures={result.failures} network_calls={result.network_calls}")
    if result.errors and not result.records:
        return EXIT_UPSTREAM
    return EXIT_OK


def cmd_validate(cfg: PipelineConfig, args) -> int:
    work = cfg.work_dir
    variant_name = cfg["prompt"]["variant"]
    src = require(work / f"distill_{variant_name}.jsonl")
    out = work / f"validation_{variant_name}.jsonl"
    fp = fingerprint(cfg, "validate", ["validator"], [src, work / "puzzles.jsonl"])
    if up_to_date(out, fp):
        log.info("validate: %s is up to date", out)
        return EXIT_OK
    by_id = {p.id: p for p in load_puzzles(work)}
    analyses = load_analyses(work / "analyses.jsonl")
    vcfg = cfg.validator()
    rows, accepted = [], 0
    for rec in map(DistillationRecord.from_dict, read_jsonl(src)):
        puzzle = by_id.get(rec.puzzle_id)
        if puzzle is None:
            raise DataError(f"distilled puzzle {rec.puzzle_id} not in puzzles.jsonl")
        analysis = Analysis.from_dict(analyses[rec.puzzle_id]["analysis"]) if rec.puzzle_id in analyses else None
        report = validate_trace(rec.trace, puzzle, puzzle.solution, analysis, vcfg)
        accepted += report.accepted
        rows.append(report.to_dict())
    write_jsonl(rows, out)
    seal(out, fp)
    log.info("validate: %d traces, %d accepted, %d rejected", len(rows), accepted, len(rows) - accepted)
    print(f"accepted={accepted} rejected={len(rows) - accepted}")
    return EXIT_OK


def cmd_emit(cfg: PipelineConfig, args) -> int:
    work = cfg.work_dir
    analyses = load_analyses(work / "analyses.jsonl")
    if args.kind == "sft":
        variant_name = cfg["prompt"]["variant"]
        src = require(work / f"distill_{variant_name}.jsonl")
        verdicts = require(work / f"validation_{variant_name}.jsonl")
        inputs = [src, verdicts, work / "puzzles.jsonl"]
    else:
        inputs = [require(work / f"sample_{args.name}.ids"), work / "puzzles.jsonl"]
    out = Path(args.out) if args.out else work / f"{args.kind}.jsonl"
    fp = fingerprint(cfg, "emit", ["prompt", "sampler"], inputs,
                     {"kind": args.kind, "include_mismatch": args.include_mismatch, "name": args.name})
    if up_to_date(out, fp):
        log.info("emit: %s is up to date", out)
        return EXIT_OK
    if args.kind == "sft":
        by_id = {p.id: p for p in load_puzzles(work)}
        ok = {r["puzzle_id"] for r in read_jsonl(verdicts) if r["verdict"] == "accepted"}
        records, skipped = [], 0
        for rec in map(DistillationRecord.from_dict, read_jsonl(src)):
            if rec.puzzle_id not in ok:
                continue
            flagged = analyses.get(rec.puzzle_id, {}).get("analysis", {}).get("solution_mismatch", False)
            if flagged and not args.include_mismatch:
                skipped += 1
                continue
            records.append(sft_record(by_id[rec.puzzle_id], rec.trace, rec.teacher_model))
        emit_sft(records, out)
        log.info("emit: %d SFT records (%d engine-mismatch skipped)", len(records), skipped)
    else:
        records = [rlvr_record(p) for p in _puzzles_by_ids(work, args.name)]
        emit_rlvr(records, out)
        log.info("emit: %d RLVR records", len(records))
    _check_disjoint(cfg, work)
    seal(out, fp)
    return EXIT_OK


def _check_disjoint(cfg: PipelineConfig, work: Path) -> None:
    sft, rlvr = work / "sft.jsonl", work / "rlvr.jsonl"
    if cfg["sampler"]["allow_reuse"] or not (sft.exists() and rlvr.exists()):
        return
    overlap = {r["puzzle_id"] for r in read_jsonl(sft)} & {r["puzzle_id"] for r in read_jsonl(rlvr)}
    if overlap:
        raise DataError(f"SFT and RLVR sets share {len(overlap)} puzzles (set sampler.allow_reuse to permit)")


def _training_ids(work: Path) -> set:
    ids: set = set()
    for path in _sample_names(work).values():
        ids.update(read_ids(path))
    return ids


def cmd_eval(cfg: PipelineConfig, args) -> int:
    work = cfg.work_dir
    out = Path(args.out) if args.out else work / "eval"
    rcfg = cfg.reward()
    if args.rescore:
        report = rescore(require(out / "items.jsonl"), rcfg, model=cfg.eval_endpoint().model_name)
        write_report(report, out)
        print(render_report(report), end="")
        return EXIT_OK
    endpoint = cfg.eval_endpoint()
    endpoint.api_key()
    puzzles = load_puzzles(work)
    splits = build_test_splits(puzzles, _training_ids(work), cfg["eval"]["seed"], cfg.bands())
    out.mkdir(parents=True, exist_ok=True)
    (out / "splits.json").write_text(json.dumps([s.to_dict() for s in splits], indent=1) + "\n")
    report = evaluate(endpoint, splits, rcfg, out_dir=out)
    print(render_report(report), end="")
    return EXIT_OK


def cmd_stats(cfg: PipelineConfig, args) -> int:
    work = cfg.work_dir
    puzzles = load_puzzles(work)
    label = "All"
    if args.ids:
        wanted = set(read_ids(args.ids))
        puzzles = [p for p in puzzles if p.id in wanted]
        label = Path(args.ids).stem
    print(stats_report(puzzles, label=label), end="")
    if args.json:
        print(json.dumps(dataset_stats(puzzles).to_dict(), indent=2))
    return EXIT_OK


def cmd_reward_serve(cfg: PipelineConfig, args) -> int:
    r = cfg["reward"]
    server = serve((r["host"], r["port"]), cfg.reward())
    log.info("reward service listening on %s (eta=%g)", server.url, cfg.reward().eta)
    print(server.url, flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def _completion_from_line(line: str) -> str:
    # JSON string literals let a completion carry newlines on one line
    if line.startswith('"'):
        try:
            value = json.loads(line)
            if isinstance(value, str):
                return value
        except ValueError:
            pass
    return line


def cmd_reward(cfg: PipelineConfig, args) -> int:
    try:
        expected = Move.from_uci(args.expected)
    except InvalidMoveText:
        raise ConfigError(f"--expected {args.expected!r} is not a UCI move") from None
    rcfg = cfg.reward()
    for line in sys.stdin:
        outcome = score(_completion_from_line(line.rstrip("\r\n")), expected, rcfg)
        sys.stdout.write(f"{outcome.reward:g}\t{outcome.reason}\n")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chessdistill", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"chessdistill {__version__}")
    parser.add_argument("--config", help="YAML configuration file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    parser.add_argument("--work-dir", help="stage artifact directory (paths.work_dir)")
    parser.add_argument("--print-config", action="store_true", help="echo the resolved config to stderr")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a Lichess puzzle CSV")
    p.add_argument("--csv")

    p = sub.add_parser("analyze", help="engine analysis of puzzles")
    p.add_argument("--ids")
    p.add_argument("--engine", dest="engine.path")
    p.add_argument("--depth", dest="engine.depth")
    p.add_argument("--multipv", dest="engine.multipv_k")
    p.add_argument("--pool", dest="engine.pool_size")
    p.add_argument("--variant", dest="prompt.variant", choices=sorted(VARIANTS))

    p = sub.add_parser("sample", help="draw a training set")
    p.add_argument("--strategy", dest="sampler.strategy", choices=("balanced", "random", "hard"))
    p.add_argument("--K", dest="sampler.K")
    p.add_argument("--M", dest="sampler.M")
    p.add_argument("--n", dest="sampler.n")
    p.add_argument("--seed", dest="sampler.seed")
    p.add_argument("--name", default="sft")
    p.add_argument("--exclude", action="append", help="file of ids to exclude")
    p.add_argument("--allow-reuse", dest="sampler.allow_reuse", action="store_const", const=True)

    p = sub.add_parser("distill", help="query the teacher for traces")
    p.add_argument("--variant", dest="prompt.variant", choices=sorted(VARIANTS))
    p.add_argument("--name", default="sft")
    p.add_argument("--limit", type=int)
    p.add_argument("--teacher-url", dest="teacher.base_url")
    p.add_argument("--model", dest="teacher.model_name")

    p = sub.add_parser("validate", help="check teacher traces")
    p.add_argument("--variant", dest="prompt.variant", choices=sorted(VARIANTS))

    p = sub.add_parser("emit", help="write SFT or RLVR JSONL")
    p.add_argument("--kind", choices=("sft", "rlvr"), required=True)
    p.add_argument("--variant", dest="prompt.variant", choices=sorted(VARIANTS))
    p.add_argument("--name", default="rlvr", help="sample name for RLVR emission")
    p.add_argument("--out")
    p.add_argument("--include-mismatch", action="store_true")
    p.add_argument("--allow-reuse", dest="sampler.allow_reuse", action="store_const", const=True)

    p = sub.add_parser("eval", help="run the 900-puzzle evaluation")
    p.add_argument("--endpoint", dest="eval.base_url")
    p.add_argument("--model", dest="eval.model_name")
    p.add_argument("--seed", dest="eval.seed")
    p.add_argument("--eta", dest="reward.eta")
    p.add_argument("--out")
    p.add_argument("--rescore", action="store_true", help="rescore persisted items.jsonl")

    p = sub.add_parser("reward-serve", help="serve POST /v1/reward")
    p.add_argument("--host", dest="reward.host")
    p.add_argument("--port", dest="reward.port")
    p.add_argument("--eta", dest="reward.eta")

    p = sub.add_parser("reward", help="score stdin completions, one per line")
    p.add_argument("--expected", required=True)
    p.add_argument("--eta", dest="reward.eta")

    p = sub.add_parser("stats", help="dataset statistics table")
    p.add_argument("--ids")
    p.add_argument("--json", action="store_true")
    return parser


COMMANDS = {
    "ingest": cmd_ingest, "analyze": cmd_analyze, "sample": cmd_sample, "distill": cmd_distill,
    "validate": cmd_validate, "emit": cmd_emit, "eval": cmd_eval, "reward-serve": cmd_reward_serve,
    "reward": cmd_reward, "stats": cmd_stats,
}


def _flag_overrides(args) -> dict:
    flags = {k: v for k, v in vars(args).items() if "." in k and v is not None}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        flags[key.strip()] = value
    if args.work_dir:
        flags["paths.work_dir"] = args.work_dir
    return flags


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = load_config(args.config, flags=_flag_overrides(args))
        if args.print_config:
            sys.stderr.write(cfg.dump())
        log.info("config %s (toolkit %s)", cfg.digest()[:12], __version__)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, AuthConfigMissing) as exc:
        log.error("%s: %s", getattr(exc, "code", "ConfigError"), exc)
        return EXIT_CONFIG
    except (DatasetError, SamplerError, DataError, EvalError) as exc:
        if isinstance(exc, EvalError) and exc.code == "AbortedRun":
            log.error("AbortedRun: %s", exc)
            return EXIT_UPSTREAM
        log.error("%s: %s", getattr(exc, "code", "DataError"), exc)
        return EXIT_DATA
    except (EngineError, TeacherError) as exc:
        log.error("%s: %s", exc.code, exc)
        return EXIT_UPSTREAM


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point wiring the pipeline end to end.

Subcommands: generate, build-sft, build-dpo, eval, loss, agree. Settings
resolve as flags > config file > environment > defaults; the fully
resolved configuration (secrets redacted) is printed to stderr before any
work starts, and every subcommand honors --dry-run. Exit codes: 0 on
success, 1 on data errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .answers import EquivConfig
from .dataset import (
    FilterAppliesTo,
    FilterLevel,
    FilterPolicy,
    UnknownProblemId,
    build_dpo_pairs,
    build_sft_dataset,
    sft_problem_id,
    pair_problem_id,
    split_train_val,
    tir_prompt,
)
from .evaluation import (
    EvalError,
    Report,
    agreement_rate,
    compute_metrics,
    evaluate_completion,
    load_benchmark,
    load_labels,
    render_report,
)
from .losses import DPOInputs, NonFiniteInputError, TokenLogprobs, dpo_loss, sft_nll
from .parsing import ParseError, extract_json_payload, parse_teacher_record
from .sandbox import ExecLimits
from .schema import (
    pair_to_dict,
    problem_from_dict,
    read_jsonl,
    record_from_dict,
    record_to_dict,
    sft_example_to_dict,
    write_jsonl,
)
from .teacher import (
    CacheStore,
    EndpointConfig,
    TeacherClient,
    TeacherClientError,
    api_key_from_env,
)

DATA_ERRORS = (
    TeacherClientError,
    ParseError,
    EvalError,
    UnknownProblemId,
    NonFiniteInputError,
    OSError,
    ValueError,
    KeyError,
)


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _pick(flag, file_val, env_val=None, default=None):
    for candidate in (flag, file_val, env_val):
        if candidate is not None:
            return candidate
    return default


def _resolve_endpoint(args, cfg_file: dict) -> EndpointConfig:
    section = cfg_file.get("endpoint", {})
    key = _pick(getattr(args, "api_key", None), section.get("api_key"), api_key_from_env() or None, "")
    return EndpointConfig(
        base_url=_pick(getattr(args, "endpoint", None), section.get("base_url")),
        model_name=_pick(getattr(args, "model", None), section.get("model"), default="teacher"),
        api_key=key,
        max_concurrency=int(_pick(getattr(args, "max_concurrency", None), section.get("max_concurrency"), default=4)),
        timeout_s=float(_pick(getattr(args, "request_timeout", None), section.get("timeout_s"), default=60.0)),
        max_retries=int(_pick(getattr(args, "max_retries", None), section.get("max_retries"), default=3)),
        temperature=float(_pick(getattr(args, "temperature", None), section.get("temperature"), default=0.0)),
        backoff_base_s=float(_pick(getattr(args, "backoff_base", None), section.get("backoff_base_s"), default=0.5)),
    )


def _resolve_limits(args, cfg_file: dict) -> ExecLimits:
    section = cfg_file.get("exec", {})
    return ExecLimits(
        wall_s=float(_pick(getattr(args, "exec_timeout", None), section.get("timeout_s"), default=10.0)),
        mem_mb=int(_pick(getattr(args, "exec_mem_mb", None), section.get("mem_mb"), default=512)),
        stdout_cap_bytes=int(_pick(None, section.get("stdout_cap_bytes"), default=65536)),
        allow_network=bool(_pick(None, section.get("allow_network"), default=False)),
    )


def _resolve_equiv(args, cfg_file: dict) -> EquivConfig:
    section = cfg_file.get("equiv", {})
    return EquivConfig(
        rel_tol=float(_pick(getattr(args, "rel_tol", None), section.get("rel_tol"), default=1e-6)),
        integer_mode=bool(_pick(getattr(args, "integer_mode", None) or None, section.get("integer_mode"), default=False)),
    )


def _resolve_policy(args, cfg_file: dict) -> FilterPolicy:
    section = cfg_file.get("filter", {})
    return FilterPolicy(
        level=FilterLevel(_pick(getattr(args, "filter", None), section.get("level"), default="exec_ok")),
        applies_to=FilterAppliesTo(_pick(getattr(args, "filter_applies", None), section.get("applies_to"), default="chosen_only")),
    )


def _resolve_interpreter(args, cfg_file: dict) -> str:
    return _pick(getattr(args, "interpreter", None), cfg_file.get("exec", {}).get("interpreter"), default="python3")


def _print_config(plan: dict, dry_run: bool) -> None:
    redacted = json.loads(json.dumps(plan))
    endpoint = redacted.get("endpoint")
    if isinstance(endpoint, dict) and endpoint.get("api_key"):
        endpoint["api_key"] = "***"
    line = json.dumps(redacted, indent=2, sort_keys=True)
    if dry_run:
        print(line)
    else:
        print(f"resolved config: {line}", file=sys.stderr)


def _config_hash(plan: dict) -> str:
    scrubbed = json.loads(json.dumps(plan))
    if isinstance(scrubbed.get("endpoint"), dict):
        scrubbed["endpoint"].pop("api_key", None)
    return hashlib.sha256(json.dumps(scrubbed, sort_keys=True).encode()).hexdigest()[:12]


def _endpoint_plan(cfg: EndpointConfig) -> dict:
    return {
        "base_url": cfg.base_url,
        "model": cfg.model_name,
        "api_key": cfg.api_key,
        "max_concurrency": cfg.max_concurrency,
        "timeout_s": cfg.timeout_s,
        "max_retries": cfg.max_retries,
        "temperature": cfg.temperature,
    }


def _load_problems(path: str) -> dict:
    problems = {}
    for row in read_jsonl(path):
        problem = problem_from_dict(row)
        if problem.id in problems:
            raise ValueError(f"duplicate problem id {problem.id!r} in {path}")
        problems[problem.id] = problem
    return problems


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg_file = _load_config_file(args.config)
    endpoint = _resolve_endpoint(args, cfg_file)
    cache_dir = _pick(args.cache_dir, cfg_file.get("cache_dir"), default="tirforge-cache")
    plan = {
        "command": "generate",
        "endpoint": _endpoint_plan(endpoint),
        "problems": args.problems,
        "out": args.out,
        "cache_dir": cache_dir,
        "workers": args.workers,
    }
    _print_config(plan, args.dry_run)
    if args.dry_run:
        return 0

    problems = list(_load_problems(args.problems).values())
    client = TeacherClient(endpoint, CacheStore(cache_dir))

    def fetch(problem):
        raw = client.request_solution(problem)
        return parse_teacher_record(extract_json_payload(raw), problem.id)

    records = []
    rejects = 0
    workers = max(1, args.workers or endpoint.max_concurrency)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [(p, pool.submit(fetch, p)) for p in problems]
        for problem, future in futures:
            try:
                records.append(future.result())
            except ParseError as exc:
                rejects += 1
                print(f"skipping {problem.id}: {exc}", file=sys.stderr)

    write_jsonl(args.out, (record_to_dict(r) for r in records))
    print(
        f"generate: {len(records)} records written to {args.out} "
        f"({rejects} rejected, {client.stats.cache_hits} cache hits, "
        f"{client.stats.retries} retries)",
        file=sys.stderr,
    )
    if problems and not records:
        print("generate: no teacher reply could be parsed", file=sys.stderr)
        return 1
    return 0


def _cmd_build(args, kind: str) -> int:
    cfg_file = _load_config_file(args.config)
    limits = _resolve_limits(args, cfg_file)
    equiv = _resolve_equiv(args, cfg_file)
    policy = _resolve_policy(args, cfg_file)
    interpreter = _resolve_interpreter(args, cfg_file)
    seed = _pick(args.seed, cfg_file.get("seed"))
    ratio = float(_pick(args.split_ratio, cfg_file.get("split_ratio"), default=0.9))
    plan = {
        "command": kind,
        "records": args.records,
        "problems": args.problems,
        "out_dir": args.out_dir,
        "filter_policy": policy.as_dict(),
        "split_ratio": ratio,
        "seed": seed,
        "interpreter": interpreter,
        "exec_limits": {"wall_s": limits.wall_s, "mem_mb": limits.mem_mb},
        "workers": args.workers,
    }
    _print_config(plan, args.dry_run)
    if args.dry_run:
        return 0

    problems = _load_problems(args.problems)
    records = [record_from_dict(row) for row in read_jsonl(args.records)]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = max(1, args.workers or 4)

    if kind == "build-sft":
        examples = build_sft_dataset(records, problems, policy, limits, equiv, interpreter, workers)
        train, val = split_train_val(examples, ratio, seed, group_key=sft_problem_id)
        stem, to_dict = "sft", sft_example_to_dict
        rows, train_rows, val_rows = examples, train, val
        kept = len(examples) // 2
    else:
        pairs = build_dpo_pairs(records, problems, policy, limits, equiv, interpreter, workers)
        train, val = split_train_val(pairs, ratio, seed, group_key=pair_problem_id)
        stem, to_dict = "dpo", pair_to_dict
        rows, train_rows, val_rows = pairs, train, val
        kept = len(pairs)

    write_jsonl(out_dir / f"{stem}.jsonl", (to_dict(r) for r in rows))
    write_jsonl(out_dir / f"{stem}.train.jsonl", (to_dict(r) for r in train_rows))
    write_jsonl(out_dir / f"{stem}.val.jsonl", (to_dict(r) for r in val_rows))
    manifest = {
        "tool": "tirforge",
        "versions": {"tirforge": __version__, "python": platform.python_version()},
        "command": kind,
        "counts": {
            "records": len(records),
            "kept_records": kept,
            "rows": len(rows),
            "train": len(train_rows),
            "val": len(val_rows),
        },
        "filter_policy": policy.as_dict(),
        "split_ratio": ratio,
        "seed": seed,
        "interpreter": interpreter,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"{kind}: {len(rows)} rows ({len(train_rows)} train / {len(val_rows)} val) "
        f"from {len(records)} records -> {out_dir}",
        file=sys.stderr,
    )
    return 0


def cmd_build_sft(args) -> int:
    return _cmd_build(args, "build-sft")


def cmd_build_dpo(args) -> int:
    return _cmd_build(args, "build-dpo")


def cmd_eval(args) -> int:
    cfg_file = _load_config_file(args.config)
    endpoint = _resolve_endpoint(args, cfg_file)
    limits = _resolve_limits(args, cfg_file)
    equiv = _resolve_equiv(args, cfg_file)
    interpreter = _resolve_interpreter(args, cfg_file)
    plan = {
        "command": "eval",
        "endpoint": _endpoint_plan(endpoint),
        "benchmarks": args.benchmark,
        "out": args.out,
        "md": args.md,
        "exec_limits": {"wall_s": limits.wall_s, "mem_mb": limits.mem_mb},
        "rel_tol": equiv.rel_tol,
        "interpreter": interpreter,
        "workers": args.workers,
    }
    _print_config(plan, args.dry_run)
    if args.dry_run:
        return 0

    cache = CacheStore(args.cache_dir) if args.cache_dir else None
    client = TeacherClient(endpoint, cache)
    workers = max(1, args.workers or endpoint.max_concurrency)

    rows = []
    all_outcomes = []
    for benchmark_path in args.benchmark:
        problems = load_benchmark(benchmark_path)

        def score(problem):
            completion = client.completion(tir_prompt(problem.problem))
            return evaluate_completion(problem, completion, limits, equiv, interpreter)

        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(score, problems))
        benchmark = problems[0].benchmark if problems else Path(benchmark_path).stem
        all_outcomes.extend((benchmark, o) for o in outcomes)
        rows.append((benchmark, compute_metrics(outcomes)))

    report = Report(
        model=endpoint.model_name,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        config_hash=_config_hash(plan),
        rows=tuple(rows),
    )
    markdown, twin = render_report(report)
    if args.md:
        Path(args.md).write_text(markdown, encoding="utf-8")
    if args.out:
        Path(args.out).write_text(twin, encoding="utf-8")
    if args.outcomes:
        # Raw per-problem booleans, so stricter metric readings can be
        # recomputed without re-running the models.
        write_jsonl(
            args.outcomes,
            (
                {
                    "benchmark": benchmark,
                    "problem_id": o.problem_id,
                    "has_code": o.has_code,
                    "code_executed": o.code_executed,
                    "answer_correct": o.answer_correct,
                }
                for benchmark, o in all_outcomes
            ),
        )
    if not args.md and not args.out:
        print(markdown, end="")
    return 0


def cmd_loss(args) -> int:
    plan = {"command": "loss", "in": args.infile, "beta": args.beta, "tol": args.tol}
    _print_config(plan, args.dry_run)
    if args.dry_run:
        return 0
    text = Path(args.infile).read_text(encoding="utf-8").strip()
    if not text:
        raise ValueError(f"{args.infile} is empty")
    if text.startswith("["):
        rows = json.loads(text)
    else:
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]

    mismatches = 0
    for i, row in enumerate(rows):
        if "lp" in row:
            computed = sft_nll(TokenLogprobs(row["lp"]))
        else:
            computed = dpo_loss(
                DPOInputs(
                    lp_policy_w=float(row["lp_policy_w"]),
                    lp_policy_l=float(row["lp_policy_l"]),
                    lp_ref_w=float(row["lp_ref_w"]),
                    lp_ref_l=float(row["lp_ref_l"]),
                    beta=float(row.get("beta", args.beta)),
                )
            )
        print(f"{computed:.12g}")
        if args.tol is not None and "loss" in row:
            if abs(computed - float(row["loss"])) > args.tol:
                mismatches += 1
                print(
                    f"row {i}: logged loss {row['loss']} differs from "
                    f"reference {computed:.12g} by more than {args.tol}",
                    file=sys.stderr,
                )
    if mismatches:
        print(f"loss: {mismatches}/{len(rows)} rows exceed tolerance", file=sys.stderr)
        return 1
    return 0


def cmd_agree(args) -> int:
    plan = {"command": "agree", "a": args.a, "b": args.b}
    _print_config(plan, args.dry_run)
    if args.dry_run:
        return 0
    rate = agreement_rate(load_labels(args.a), load_labels(args.b))
    print(f"{rate:g}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tirforge",
        description="Pattern-aware tool-integrated-reasoning data pipeline and evaluation harness.",
    )
    parser.add_argument("--version", action="version", version=f"tirforge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file (flags override it)")
    common.add_argument("--seed", type=int, default=None, help="seed for all randomness")
    common.add_argument("--workers", type=int, default=None, help="worker pool size")
    common.add_argument("--dry-run", action="store_true", help="print the resolved plan and exit")

    client_flags = argparse.ArgumentParser(add_help=False)
    client_flags.add_argument("--endpoint", help="chat-completions base URL")
    client_flags.add_argument("--model", help="model name sent in requests")
    client_flags.add_argument("--api-key", help="API key (overrides TIRFORGE_API_KEY)")
    client_flags.add_argument("--max-concurrency", type=int, help="max in-flight requests")
    client_flags.add_argument("--request-timeout", type=float, help="HTTP timeout seconds")
    client_flags.add_argument("--max-retries", type=int, help="retries on 429/5xx/timeouts")
    client_flags.add_argument("--temperature", type=float, help="sampling temperature")
    client_flags.add_argument("--backoff-base", type=float, help="base retry delay seconds")
    client_flags.add_argument("--cache-dir", default=None, help="response cache directory")

    exec_flags = argparse.ArgumentParser(add_help=False)
    exec_flags.add_argument("--interpreter", help="tool interpreter binary (default python3)")
    exec_flags.add_argument("--exec-timeout", type=float, help="per-snippet wall clock seconds")
    exec_flags.add_argument("--exec-mem-mb", type=int, help="per-snippet address-space cap")
    exec_flags.add_argument("--rel-tol", type=float, help="relative tolerance for answers")
    exec_flags.add_argument("--integer-mode", action="store_true", help="compare answers as integers")

    p = sub.add_parser("generate", parents=[common, client_flags],
                       help="query the teacher for dual-pattern records")
    p.add_argument("--problems", required=True, help="problems JSONL")
    p.add_argument("--out", required=True, help="output records JSONL")
    p.set_defaults(func=cmd_generate)

    for name, fn in (("build-sft", cmd_build_sft), ("build-dpo", cmd_build_dpo)):
        p = sub.add_parser(name, parents=[common, exec_flags],
                           help=f"emit the {name.split('-')[1]} dataset from teacher records")
        p.add_argument("--records", required=True, help="teacher records JSONL")
        p.add_argument("--problems", required=True, help="problems JSONL")
        p.add_argument("--out-dir", required=True, help="output directory")
        p.add_argument("--filter", choices=[lvl.value for lvl in FilterLevel], default=None)
        p.add_argument("--filter-applies", choices=[a.value for a in FilterAppliesTo], default=None)
        p.add_argument("--split-ratio", type=float, default=None, help="train fraction (default 0.9)")
        p.set_defaults(func=fn)

    p = sub.add_parser("eval", parents=[common, client_flags, exec_flags],
                       help="run a candidate model over benchmarks and score it")
    p.add_argument("--benchmark", action="append", required=True, help="benchmark JSONL (repeatable)")
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--md", help="write the markdown report here")
    p.add_argument("--outcomes", help="write raw per-problem outcome booleans here (JSONL)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("loss", parents=[common],
                       help="recompute reference losses from logged log-prob records")
    p.add_argument("--in", dest="infile", required=True, help="JSON array or JSONL of records")
    p.add_argument("--beta", type=float, default=0.1, help="beta when a row omits it")
    p.add_argument("--tol", type=float, default=None,
                   help="fail if a row's logged loss differs more than this")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("agree", parents=[common],
                       help="agreement rate between two pattern-label files")
    p.add_argument("--a", required=True, help="first labels JSONL")
    p.add_argument("--b", required=True, help="second labels JSONL")
    p.set_defaults(func=cmd_agree)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DATA_ERRORS as exc:
        print(f"tirforge {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""``fsmscg`` command line.

Exit codes: 0 success, 1 domain failure (invalid FSM, failed run, tool or
backend failure), 2 usage error. Data goes to stdout, logs to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import dataset
from .config import PipelineConfig, load_config
from .fsm import FsmError, parse_fsm
from .gateway import ConfigError, GatewayError, Session, make_backend
from .pipeline import SUCCESS, Pipeline, synthetic_failure
from .prompts import PromptForge
from .scoring import aggregate, format_table, score_contract
from .toolchain import NoSatisfyingVersion, Toolchain, ToolchainConfig, ToolError
from .validate import ValidatorConfig, validate

log = logging.getLogger("fsmscg")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _emit(args, data, text: str) -> None:
    if args.json:
        sys.stdout.write(json.dumps(data, indent=2, ensure_ascii=False) + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _config(args) -> PipelineConfig:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc
    if getattr(args, "out", None):
        cfg = cfg.replace(artifact_root=Path(args.out))
    return cfg


def read_requirements(path: Path) -> list[str]:
    """JSON list of strings for ``.json`` files, else one requirement per non-empty line."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    if path.suffix == ".json":
        data = json.loads(text)
        if not isinstance(data, list) or not all(isinstance(r, str) for r in data):
            raise UsageError(f"{path} must hold a JSON list of strings")
        return [r for r in data if r.strip()]
    return [line.strip() for line in text.splitlines() if line.strip()]


# ------------------------------------------------------------ commands


def cmd_check_fsm(args) -> int:
    path = Path(args.path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    try:
        fsm = parse_fsm(raw)
    except FsmError as exc:
        _emit(args, {"passed": False, "error": str(exc)}, f"FAIL: {exc}")
        return EXIT_FAIL
    report = validate(fsm, ValidatorConfig(args.cycle_rule, args.trigger_namespace))
    if args.report:
        Path(args.report).write_text(report.to_json(), encoding="utf-8")
    _emit(args, report.to_dict(), report.summary())
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_generate(args) -> int:
    if args.requirement is not None:
        requirements = [args.requirement]
    else:
        requirements = read_requirements(Path(args.requirements))
    if not requirements or not all(r.strip() for r in requirements):
        raise UsageError("no requirement given")
    pipeline = Pipeline(_config(args))
    records = [pipeline.run(req) for req in requirements]
    rows = [{"run_id": r.run_id, "status": r.status, "error": r.error} for r in records]
    text = "\n".join(f"{r.run_id}  {r.status}" + (f"  ({r.error})" if r.error else "") for r in records)
    _emit(args, rows, text)
    return EXIT_OK if all(r.status == SUCCESS for r in records) else EXIT_FAIL


def cmd_score(args) -> int:
    contracts = Path(args.contracts)
    if not contracts.is_dir():
        raise UsageError(f"{contracts} is not a directory")
    files = sorted(contracts.glob("*.sol"))
    if not files:
        raise UsageError(f"no .sol files in {contracts}")
    count_informational = False
    if args.fixtures:
        tool_cfg = ToolchainConfig(mode="playback", fixtures_dir=Path(args.fixtures))
    elif args.config:
        cfg = _config(args)
        tool_cfg, count_informational = cfg.toolchain, cfg.count_informational
    else:
        tool_cfg = ToolchainConfig()
    tools = Toolchain(tool_cfg)
    per_file = []
    try:
        for path in files:
            source = path.read_text(encoding="utf-8")
            try:
                version = tools.select_version(source)
            except NoSatisfyingVersion as exc:
                per_file.append((path.name, score_contract(synthetic_failure(str(exc)), None, count_informational)))
                continue
            compiled = tools.compile(source, version)
            analysis = tools.analyze(source, version) if compiled.success else None
            per_file.append((path.name, score_contract(compiled, analysis, count_informational)))
    except ToolError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_FAIL
    summary = aggregate([s for _, s in per_file])
    lines = [f"{name}: compiled={s.compiled} vrs={s.vrs:.4f} high={s.has_high}" for name, s in per_file]
    _emit(
        args,
        {"summary": summary.to_dict(), "contracts": {name: s.to_dict() for name, s in per_file}},
        "\n".join(lines) + "\n\n" + format_table({contracts.name or "contracts": summary}),
    )
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    requirements = read_requirements(Path(args.requirements))
    if not requirements:
        raise UsageError("requirements file is empty")
    result = Pipeline(_config(args)).evaluate_batch(requirements, args.samples)
    if any(r.status == "tool_error" for r in result.records):
        log.error("toolchain failure during benchmark")
        _emit(args, {"summary": result.summary.to_dict()}, format_table({args.label: result.summary}))
        return EXIT_FAIL
    statuses = {r.run_id: r.status for r in result.records}
    _emit(args, {"summary": result.summary.to_dict(), "runs": statuses}, format_table({args.label: result.summary}))
    return EXIT_OK


def _parse_subsets(raw: list[str]) -> tuple[list[str], bool]:
    names = [n.strip().lower() for chunk in raw for n in chunk.split(",") if n.strip()]
    bad = [n for n in names if n not in dataset.SUBSETS and n != "a2c"]
    if bad:
        raise UsageError(f"unknown subset(s) {', '.join(bad)}; choose from {', '.join(dataset.SUBSETS)}, a2c")
    return [n for n in names if n != "a2c"], "a2c" in names


def cmd_dataset_build(args) -> int:
    subsets, include_a2c = _parse_subsets(args.subsets or list(dataset.SUBSETS))
    corpus = Path(args.corpus)
    if not corpus.is_dir():
        raise UsageError(f"{corpus} is not a directory")
    cfg = _config(args)
    try:
        backend = make_backend(cfg.backend)
        counts = dataset.build_dataset(
            corpus,
            Path(args.out),
            subsets,
            lambda source: Session(backend=backend, config=cfg.backend, tag=source),
            threshold=args.threshold,
            forge=PromptForge(cfg.template_dir, cfg.prompt_budget),
            validator=cfg.validator,
            min_quality=args.min_quality,
            include_a2c=include_a2c,
        )
    except GatewayError as exc:
        log.error("backend failure: %s", exc)
        return EXIT_FAIL
    _emit(args, counts, "\n".join(f"{name}.jsonl: {n}" for name, n in counts.items()))
    return EXIT_OK


def cmd_dataset_a2c(args) -> int:
    corpus = Path(args.corpus)
    if not corpus.is_dir():
        raise UsageError(f"{corpus} is not a directory")
    n = dataset.build_a2c(corpus, Path(args.out), args.threshold)
    _emit(args, {"a2c": n}, f"a2c.jsonl: {n}")
    return EXIT_OK


# -------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="fsmscg", description="FSM-guided smart contract generation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-fsm", parents=[common], help="validate a SmartFSM document")
    p.add_argument("path")
    p.add_argument("--report", help="write the CheckReport JSON here")
    p.add_argument("--cycle-rule", choices=("error", "warn", "off"), default="error")
    p.add_argument("--trigger-namespace", choices=("functions", "events", "both"), default="both")
    p.set_defaults(func=cmd_check_fsm)

    p = sub.add_parser("generate", parents=[common], help="run the generation pipeline")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--requirement")
    src.add_argument("--requirements", help="file with one requirement per line, or a JSON list")
    p.add_argument("--config")
    p.add_argument("--out", help="artifact root (overrides the config)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("score", parents=[common], help="compile, analyze and score existing contracts")
    p.add_argument("--contracts", required=True)
    p.add_argument("--fixtures", help="replay recorded tool outputs from this directory")
    p.add_argument("--config")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("bench", parents=[common], help="evaluate a requirement batch")
    p.add_argument("--requirements", required=True)
    p.add_argument("--samples", type=int, default=3)
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--label", default="FSM-SCG")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("dataset", help="build fine-tuning datasets")
    dsub = p.add_subparsers(dest="dataset_command", required=True)
    b = dsub.add_parser("build", parents=[common])
    b.add_argument("--corpus", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--subsets", action="append", help="comma-separated: r2f2c,r2f,f2c,c2f,r2c,a2c")
    b.add_argument("--config")
    b.add_argument("--threshold", type=float, default=dataset.DEFAULT_THRESHOLD)
    b.add_argument("--min-quality", type=float)
    b.set_defaults(func=cmd_dataset_build)
    a = dsub.add_parser("a2c", parents=[common])
    a.add_argument("--corpus", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--threshold", type=float, default=dataset.DEFAULT_THRESHOLD)
    a.set_defaults(func=cmd_dataset_a2c)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"fsmscg: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

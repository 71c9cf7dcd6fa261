"""End-to-end generation: requirement -> validated FSM -> contract -> refined contract.

A run is a small state machine. The FSM stage retries until the validator
passes (bounded by ``max_fsm_attempts``); the contract stage then compiles
first and analyzes second, spending one compile or security feedback round
per regeneration until both checks pass or the round budgets run out.
"""
from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .config import PipelineConfig
from .fsm import ContractViolation, FsmError, SmartFsm, fsm_to_dict, parse_fsm, serialize_fsm
from .gateway import Backend, GatewayError, NoPayloadFound, Session, extract_code_payload, extract_fsm_payload, make_backend
from .prompts import COMPILE_FEEDBACK, SECURITY_FEEDBACK, PromptForge
from .scoring import (
    NOT_COMPILED,
    SEVERITY_RANK,
    ContractScore,
    EmptyBatch,
    MetricsSummary,
    aggregate,
    counted_findings,
    score_contract,
)
from .toolchain import (
    AnalysisResult,
    CompileIssue,
    CompileResult,
    NoSatisfyingVersion,
    Toolchain,
    ToolError,
)
from .validate import CheckReport, validate

log = logging.getLogger(__name__)

SUCCESS = "success"
FSM_FAILED = "fsm_failed"
EXHAUSTED = "exhausted"
BACKEND_ERROR = "backend_error"
TOOL_ERROR = "tool_error"


class FsmGenerationFailed(Exception):
    def __init__(self, attempts: int, report: CheckReport | None, reason: str):
        super().__init__(f"no valid FSM after {attempts} attempt(s): {reason}")
        self.attempts = attempts
        self.report = report
        self.reason = reason


@dataclass
class FsmOutcome:
    fsm: SmartFsm
    attempts: int
    raw_reply: str
    report: CheckReport


@dataclass
class Iteration:
    index: int
    feedback_kind: str | None
    reply: str
    code: str | None
    compile: CompileResult
    analysis: AnalysisResult | None = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "feedback_kind": self.feedback_kind,
            "code": self.code,
            "compile": self.compile.to_dict(),
            "analysis": self.analysis.to_dict() if self.analysis else None,
        }


@dataclass
class RefinementOutcome:
    status: str
    code: str | None
    iterations: list[Iteration]


@dataclass
class RunRecord:
    run_id: str
    requirement: str
    status: str
    fsm: SmartFsm | None = None
    fsm_raw_reply: str | None = None
    fsm_attempts: int = 0
    iterations: list[Iteration] = field(default_factory=list)
    final_contract: str | None = None
    score: ContractScore = NOT_COMPILED
    error: str | None = None
    transcript: list[dict] = field(default_factory=list)
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        """Report form. Wall time is left out so reports are reproducible."""
        return {
            "run_id": self.run_id,
            "requirement": self.requirement,
            "status": self.status,
            "error": self.error,
            "fsm_attempts": self.fsm_attempts,
            "fsm": fsm_to_dict(self.fsm) if self.fsm else None,
            "fsm_raw_reply": self.fsm_raw_reply,
            "iterations": [it.to_dict() for it in self.iterations],
            "final_contract": self.final_contract,
            "score": self.score.to_dict(),
        }


@dataclass
class BatchResult:
    summary: MetricsSummary
    records: list[RunRecord]


def default_run_id(requirement: str) -> str:
    return hashlib.sha256(requirement.encode("utf-8")).hexdigest()[:12]


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def synthetic_failure(message: str) -> CompileResult:
    """A failed compile for sources that never reached the compiler."""
    return CompileResult(success=False, issues=(CompileIssue("error", message, formatted_message=message),), compiler_version="none")


class Pipeline:
    def __init__(self, config: PipelineConfig, toolchain: Toolchain | None = None, backend: Backend | None = None):
        self.config = config
        self.toolchain = toolchain or Toolchain(config.toolchain)
        self.forge = PromptForge(config.template_dir, config.prompt_budget)
        self._backend = backend
        self._lock = threading.Lock()

    # sessions -------------------------------------------------------------

    def backend(self) -> Backend:
        with self._lock:
            if self._backend is None:
                self._backend = make_backend(self.config.backend)
            return self._backend

    def open_session(self, tag: str = "") -> Session:
        return Session(backend=self.backend(), config=self.config.backend, tag=tag)

    # FSM stage ------------------------------------------------------------

    def generate_fsm(self, session: Session, requirement: str) -> FsmOutcome:
        feedback: list[str] = []
        report: CheckReport | None = None
        reason = ""
        for attempt in range(1, self.config.max_fsm_attempts + 1):
            reply = session.send(self.forge.build_r2f(requirement, feedback))
            try:
                with warnings.catch_warnings(record=True) as caught:
                    warnings.simplefilter("always")
                    fsm = parse_fsm(extract_fsm_payload(reply))
                for w in caught:
                    log.info("fsm attempt %d: %s", attempt, w.message)
            except (NoPayloadFound, FsmError, ContractViolation) as exc:
                reason = f"{type(exc).__name__}: {exc}"
                feedback = [f"the reply could not be read as an FSM document ({reason})"]
                report = None
                continue
            report = validate(fsm, self.config.validator)
            if report.passed:
                return FsmOutcome(fsm, attempt, reply, report)
            reason = ", ".join(v.code for v in report.errors())
            feedback = [f"{v.code}: {v.message}" for v in report.errors()]
        raise FsmGenerationFailed(self.config.max_fsm_attempts, report, reason)

    # contract stage -------------------------------------------------------

    def _blocking(self, analysis: AnalysisResult):
        threshold = SEVERITY_RANK[self.config.security_threshold]
        counted = counted_findings(analysis.findings, self.config.count_informational)
        return counted, [f for f in counted if SEVERITY_RANK[f.severity] >= threshold]

    def _check(self, reply: str) -> tuple[str | None, CompileResult, str | None]:
        try:
            code = extract_code_payload(reply)
        except NoPayloadFound:
            return None, synthetic_failure("The reply contained no Solidity source code."), None
        try:
            version = self.toolchain.select_version(code)
        except NoSatisfyingVersion as exc:
            return code, synthetic_failure(str(exc)), None
        return code, self.toolchain.compile(code, version), version

    def refine_contract(
        self, session: Session, fsm: SmartFsm | None = None, iterations: list[Iteration] | None = None
    ) -> RefinementOutcome:
        """Generate and repair the contract. Iterations are appended to *iterations* as they happen."""
        fsm_text = serialize_fsm(fsm).decode("utf-8") if fsm is not None and self.config.fresh_session_per_stage else None
        prompt = self.forge.build_f2c(fsm_text)
        compile_left = self.config.compile_rounds
        security_left = self.config.security_rounds
        kind: str | None = None
        iterations = [] if iterations is None else iterations
        while True:
            reply = session.send(prompt)
            code, compiled, version = self._check(reply)
            it = Iteration(len(iterations) + 1, kind, reply, code, compiled)
            iterations.append(it)
            if not compiled.success:
                if compile_left == 0:
                    return RefinementOutcome(EXHAUSTED, code, iterations)
                compile_left -= 1
                kind = COMPILE_FEEDBACK
                prompt = self.forge.build_compile_feedback(compiled.errors)
                continue
            it.analysis = self.toolchain.analyze(code, version)
            counted, blocking = self._blocking(it.analysis)
            if not blocking:
                return RefinementOutcome(SUCCESS, code, iterations)
            if security_left == 0:
                return RefinementOutcome(EXHAUSTED, code, iterations)
            security_left -= 1
            kind = SECURITY_FEEDBACK
            prompt = self.forge.build_security_feedback(counted)

    # whole run ------------------------------------------------------------

    def run(self, requirement: str, run_id: str | None = None) -> RunRecord:
        run_id = run_id or default_run_id(requirement)
        record = RunRecord(run_id=run_id, requirement=requirement, status=BACKEND_ERROR)
        start = time.perf_counter()
        sessions: list[Session] = []
        try:
            session = self.open_session(tag=run_id)
            sessions.append(session)
            try:
                outcome = self.generate_fsm(session, requirement)
            except FsmGenerationFailed as exc:
                record.status, record.fsm_attempts, record.error = FSM_FAILED, exc.attempts, str(exc)
                return record
            record.fsm, record.fsm_raw_reply, record.fsm_attempts = outcome.fsm, outcome.raw_reply, outcome.attempts
            if self.config.fresh_session_per_stage:
                session = self.open_session(tag=run_id)
                sessions.append(session)
            # record.iterations keeps the partial history if a later send fails
            result = self.refine_contract(session, outcome.fsm, record.iterations)
            record.status = result.status
            record.final_contract = result.code
            last = result.iterations[-1]
            record.score = score_contract(last.compile, last.analysis, self.config.count_informational)
        except GatewayError as exc:
            record.status, record.error = BACKEND_ERROR, f"{type(exc).__name__}: {exc}"
            record.final_contract, record.score = None, NOT_COMPILED
        except ToolError as exc:
            record.status, record.error = TOOL_ERROR, f"{type(exc).__name__}: {exc}"
            record.final_contract, record.score = None, NOT_COMPILED
        finally:
            record.transcript = [turn for s in sessions for turn in s.transcript()]
            record.wall_time = time.perf_counter() - start
            self.persist(record)
        return record

    def persist(self, record: RunRecord) -> Path:
        run_dir = self.config.artifact_root / "runs" / record.run_id
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "requirement.txt").write_text(record.requirement, encoding="utf-8")
        if record.fsm is not None:
            (run_dir / "fsm.json").write_bytes(serialize_fsm(record.fsm))
        (run_dir / "transcript.json").write_text(_dump(record.transcript), encoding="utf-8")
        for it in record.iterations:
            it_dir = run_dir / "iterations" / str(it.index)
            it_dir.mkdir(parents=True, exist_ok=True)
            if it.code is not None:
                (it_dir / "contract.sol").write_text(it.code, encoding="utf-8")
            (it_dir / "compile.json").write_text(_dump(it.compile.to_dict()), encoding="utf-8")
            if it.analysis is not None:
                (it_dir / "analysis.json").write_text(_dump(it.analysis.to_dict()), encoding="utf-8")
        (run_dir / "report.json").write_text(_dump(record.to_dict()), encoding="utf-8")
        (run_dir / "timing.json").write_text(_dump({"wall_time_seconds": record.wall_time}), encoding="utf-8")
        return run_dir

    # batches --------------------------------------------------------------

    def evaluate_batch(self, requirements: Sequence[str], samples: int = 3) -> BatchResult:
        if not requirements:
            raise EmptyBatch("no requirements given")
        if samples < 1:
            raise ValueError("samples must be >= 1")
        jobs = [(req, f"q{i:03d}-s{j}") for i, req in enumerate(requirements) for j in range(samples)]
        if self.config.parallel_runs == 1:
            records = [self.run(req, run_id) for req, run_id in jobs]
        else:
            with ThreadPoolExecutor(max_workers=self.config.parallel_runs) as pool:
                records = list(pool.map(lambda job: self.run(*job), jobs))
        summary = aggregate([r.score for r in records])
        self.config.artifact_root.mkdir(parents=True, exist_ok=True)
        (self.config.artifact_root / "summary.json").write_text(
            _dump({"summary": summary.to_dict(), "runs": [{"run_id": r.run_id, "status": r.status} for r in records]}),
            encoding="utf-8",
        )
        return BatchResult(summary, records)


def rescore_run(run_dir: Path, count_informational: bool = False) -> ContractScore:
    """Recompute a run's score from its persisted iteration artifacts alone."""
    run_dir = Path(run_dir)
    report = json.loads((run_dir / "report.json").read_text(encoding="utf-8"))
    if report["status"] in (FSM_FAILED, BACKEND_ERROR, TOOL_ERROR) or not report["iterations"]:
        return NOT_COMPILED
    last = run_dir / "iterations" / str(report["iterations"][-1]["index"])
    compiled = CompileResult.from_dict(json.loads((last / "compile.json").read_text(encoding="utf-8")))
    analysis_path = last / "analysis.json"
    analysis = AnalysisResult.from_dict(json.loads(analysis_path.read_text(encoding="utf-8"))) if analysis_path.exists() else None
    return score_contract(compiled, analysis, count_informational)


def run(requirement: str, config: PipelineConfig) -> RunRecord:
    return Pipeline(config).run(requirement)


def evaluate_batch(requirements: Sequence[str], samples: int, config: PipelineConfig) -> BatchResult:
    return Pipeline(config).evaluate_batch(requirements, samples)

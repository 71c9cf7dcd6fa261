"""Typed adapters around the Solidity compiler and a Slither-compatible analyzer.

Both tools are spoken to through their JSON interfaces: the compiler through
``--standard-json`` and the analyzer through ``--json -``. A fixture
directory lets every result be recorded once and replayed without any
installed toolchain; recordings are keyed by the SHA-256 of the source text.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import shutil
import stat
import subprocess
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Literal, Sequence

import semantic_version

from ._solcjs_shim import run_to_file
from ._solidity import strip_comments

log = logging.getLogger(__name__)

SEVERITIES = ("high", "medium", "low", "informational", "optimization")
CONFIDENCES = ("high", "medium", "low")

SOURCE_NAME = "contract.sol"


class ToolError(Exception):
    """Base class for compiler/analyzer invocation failures."""


class ToolNotFound(ToolError):
    pass


class FixtureMissing(ToolNotFound):
    """Playback mode found no recording for the requested source."""


class ToolTimeout(ToolError):
    pass


class ToolCrashed(ToolError):
    pass


class AnalyzerParseError(ToolError):
    pass


class NoSatisfyingVersion(ToolError):
    pass


# ------------------------------------------------------------------ types


@dataclass(frozen=True)
class SourceLocation:
    file: str
    start: int
    end: int


@dataclass(frozen=True)
class CompileIssue:
    severity: Literal["error", "warning"]
    message: str
    error_code: str | None = None
    location: SourceLocation | None = None
    formatted_message: str = ""
    error_type: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "CompileIssue":
        loc = d.get("location")
        return cls(
            severity=d["severity"],
            message=d["message"],
            error_code=d.get("error_code"),
            location=SourceLocation(**loc) if loc else None,
            formatted_message=d.get("formatted_message", ""),
            error_type=d.get("error_type"),
        )


@dataclass(frozen=True)
class CompileResult:
    success: bool
    issues: tuple[CompileIssue, ...]
    compiler_version: str
    has_bytecode: bool | None = None

    def __post_init__(self):
        object.__setattr__(self, "issues", tuple(self.issues))
        if self.success != (not self.errors):
            raise ValueError("success must equal 'no error-severity issue'")

    @property
    def errors(self) -> list[CompileIssue]:
        return [i for i in self.issues if i.severity == "error"]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CompileResult":
        return cls(
            success=d["success"],
            issues=tuple(CompileIssue.from_dict(i) for i in d["issues"]),
            compiler_version=d["compiler_version"],
            has_bytecode=d.get("has_bytecode"),
        )


@dataclass(frozen=True)
class FindingLocation:
    file: str | None = None
    lines: tuple[int, ...] = ()
    function: str | None = None


@dataclass(frozen=True)
class Finding:
    check: str
    severity: str
    confidence: str
    description: str = ""
    location: FindingLocation | None = None

    def __post_init__(self):
        if self.severity not in SEVERITIES:
            raise ValueError(f"unknown severity {self.severity!r}")
        if self.confidence not in CONFIDENCES:
            raise ValueError(f"unknown confidence {self.confidence!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "Finding":
        loc = d.get("location")
        if loc:
            loc = FindingLocation(file=loc.get("file"), lines=tuple(loc.get("lines", ())), function=loc.get("function"))
        return cls(d["check"], d["severity"], d["confidence"], d.get("description", ""), loc)


@dataclass(frozen=True)
class AnalysisResult:
    findings: tuple[Finding, ...]
    analyzer_version: str
    ran: bool = True

    def __post_init__(self):
        object.__setattr__(self, "findings", tuple(self.findings))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisResult":
        return cls(
            findings=tuple(Finding.from_dict(f) for f in d["findings"]),
            analyzer_version=d["analyzer_version"],
            ran=d.get("ran", True),
        )


# -------------------------------------------------------- version select

_PRAGMA_RE = re.compile(r"pragma\s+solidity\s+([^;]+);")


def pragma_constraint(source: str) -> str | None:
    m = _PRAGMA_RE.search(strip_comments(source))
    return m.group(1).strip() if m else None


def select_compiler_version(source: str, available: Sequence[str], default: str = "0.8.24") -> str:
    """Lowest available version satisfying the first ``pragma solidity``.

    Without a pragma the configured *default* is returned.
    """
    if not available:
        raise ValueError("available versions must be non-empty")
    constraint = pragma_constraint(source)
    if constraint is None:
        return default
    try:
        # Solidity allows "0.8.0 - 0.8.9" and "||" just like npm.
        spec = semantic_version.NpmSpec(" ".join(constraint.split()))
    except ValueError as exc:
        raise NoSatisfyingVersion(f"cannot parse pragma {constraint!r}: {exc}") from exc
    matching = [v for v in (semantic_version.Version(a) for a in available) if v in spec]
    if not matching:
        raise NoSatisfyingVersion(f"no available compiler satisfies {constraint!r} (have {', '.join(available)})")
    return str(min(matching))


# ------------------------------------------------------- output mapping


def standard_json_input(source: str, full_output: bool = False) -> dict:
    if full_output:
        selection = {
            "*": {"*": ["abi", "evm.bytecode", "evm.deployedBytecode", "evm.methodIdentifiers", "userdoc", "devdoc"], "": ["ast"]}
        }
    else:
        selection = {"*": {"*": ["evm.bytecode.object"]}}
    return {
        "language": "Solidity",
        "sources": {SOURCE_NAME: {"content": source}},
        "settings": {"outputSelection": selection},
    }


def parse_compiler_output(output: dict, version: str) -> CompileResult:
    """Map a standard-JSON compiler output object to a :class:`CompileResult`."""
    issues = []
    for err in output.get("errors", []):
        loc = err.get("sourceLocation")
        issues.append(
            CompileIssue(
                severity="error" if err.get("severity") == "error" else "warning",
                message=err.get("message", ""),
                error_code=err.get("errorCode"),
                location=SourceLocation(loc.get("file", ""), int(loc.get("start", -1)), int(loc.get("end", -1))) if loc else None,
                formatted_message=err.get("formattedMessage", ""),
                error_type=err.get("type"),
            )
        )
    has_bytecode = None
    contracts = output.get("contracts")
    if contracts is not None:
        has_bytecode = any(
            c.get("evm", {}).get("bytecode", {}).get("object") for unit in contracts.values() for c in unit.values()
        )
    success = not any(i.severity == "error" for i in issues)
    return CompileResult(success=success, issues=tuple(issues), compiler_version=version, has_bytecode=has_bytecode)


def _level(value: Any, allowed: tuple[str, ...], what: str) -> str:
    if not isinstance(value, str) or value.lower() not in allowed:
        raise AnalyzerParseError(f"unknown analyzer {what} {value!r}")
    return value.lower()


def _finding_location(elements: list) -> FindingLocation | None:
    if not elements:
        return None
    first = elements[0].get("source_mapping", {}) or {}
    function = next((e.get("name") for e in elements if e.get("type") == "function"), None)
    if function is None:
        # Nodes carry their enclosing function in type_specific_fields.
        for e in elements:
            parent = (e.get("type_specific_fields") or {}).get("parent") or {}
            if parent.get("type") == "function":
                function = parent.get("name")
                break
    return FindingLocation(
        file=first.get("filename_short") or first.get("filename_relative"),
        lines=tuple(first.get("lines", ())),
        function=function,
    )


def parse_analyzer_output(output: Any, version: str) -> AnalysisResult:
    """Map Slither ``--json`` output to an :class:`AnalysisResult`.

    Unknown impact/confidence strings raise :class:`AnalyzerParseError`;
    nothing is silently defaulted.
    """
    if not isinstance(output, dict) or "success" not in output:
        raise AnalyzerParseError("analyzer output is not a result object")
    if not output["success"]:
        raise ToolCrashed(f"analyzer reported failure: {output.get('error')}")
    results = output.get("results") or {}
    detectors = results.get("detectors", [])
    if not isinstance(detectors, list):
        raise AnalyzerParseError("results.detectors must be a list")
    findings = []
    for det in detectors:
        try:
            check = det["check"]
            impact = det["impact"]
            confidence = det["confidence"]
        except (KeyError, TypeError) as exc:
            raise AnalyzerParseError(f"detector entry missing field: {exc}") from exc
        findings.append(
            Finding(
                check=check,
                severity=_level(impact, SEVERITIES, "impact"),
                confidence=_level(confidence, CONFIDENCES, "confidence"),
                description=(det.get("description") or "").strip(),
                location=_finding_location(det.get("elements") or []),
            )
        )
    return AnalysisResult(findings=tuple(findings), analyzer_version=version, ran=True)


# ------------------------------------------------------------- runtime


def source_key(source: str) -> str:
    return hashlib.sha256(source.encode("utf-8")).hexdigest()


def _load_json_stdout(stdout: str) -> Any:
    """Parse tool stdout, tolerating banner lines printed before the JSON."""
    try:
        return json.loads(stdout)
    except json.JSONDecodeError:
        start = stdout.find("\n{")
        if start < 0:
            raise
        return json.loads(stdout[start + 1 :])


_VERSION_RE = re.compile(r"(\d+\.\d+\.\d+)")


_PROBE_TIMEOUT = 10


@dataclass
class ToolchainConfig:
    mode: Literal["live", "playback", "record"] = "live"
    fixtures_dir: Path | None = None
    solc_path: str | None = None
    slither_path: str | None = None
    available_versions: list[str] = field(default_factory=list)
    default_version: str = "0.8.24"
    compile_timeout: float = 60.0
    analyze_timeout: float = 120.0

    def __post_init__(self):
        if self.mode not in ("live", "playback", "record"):
            raise ValueError(f"toolchain mode must be live|playback|record, got {self.mode!r}")
        if self.mode != "live" and self.fixtures_dir is None:
            raise ValueError(f"toolchain mode {self.mode!r} needs fixtures_dir")
        if self.fixtures_dir is not None:
            self.fixtures_dir = Path(self.fixtures_dir)


class Toolchain:
    """Compiler + analyzer front end. Stateless apart from cached version probes."""

    def __init__(self, config: ToolchainConfig | None = None):
        self.config = config or ToolchainConfig()
        self._versions: dict[str, str] = {}

    # binary discovery -----------------------------------------------------

    def solc_binary(self) -> str:
        path = self.config.solc_path or os.environ.get("FSMSCG_SOLC_PATH")
        if path:
            if not shutil.which(path):
                raise ToolNotFound(f"compiler not found at {path}")
            return shutil.which(path)
        # A solc-select shim with nothing installed is on PATH but cannot run.
        for name in ("solc", "solcjs"):
            found = shutil.which(name)
            if not found:
                continue
            try:
                self._probe_version(found)
            except ToolError:
                log.debug("skipping unusable compiler %s", found)
                continue
            return found
        raise ToolNotFound("no working Solidity compiler found (set FSMSCG_SOLC_PATH)")

    def slither_binary(self) -> str:
        path = self.config.slither_path or os.environ.get("FSMSCG_SLITHER_PATH") or "slither"
        found = shutil.which(path)
        if not found:
            raise ToolNotFound(f"analyzer not found: {path} (set FSMSCG_SLITHER_PATH)")
        return found

    def _probe_version(self, binary: str) -> str:
        if binary not in self._versions:
            try:
                proc = subprocess.run([binary, "--version"], capture_output=True, text=True, timeout=_PROBE_TIMEOUT)
            except subprocess.TimeoutExpired as exc:
                raise ToolTimeout(f"{binary} --version did not answer within {_PROBE_TIMEOUT}s") from exc
            except OSError as exc:
                raise ToolNotFound(str(exc)) from exc
            m = _VERSION_RE.search(proc.stdout + proc.stderr)
            if not m:
                raise ToolCrashed(f"cannot read version from {binary} --version")
            self._versions[binary] = m.group(1)
        return self._versions[binary]

    def available_versions(self) -> list[str]:
        if self.config.available_versions:
            return list(self.config.available_versions)
        if self.config.mode == "playback":
            return [self.config.default_version]
        return [self._probe_version(self.solc_binary())]

    def select_version(self, source: str) -> str:
        return select_compiler_version(source, self.available_versions(), self.config.default_version)

    # fixtures -------------------------------------------------------------

    def _fixture_path(self, source: str, kind: str) -> Path:
        assert self.config.fixtures_dir is not None
        return self.config.fixtures_dir / f"{source_key(source)}.{kind}.json"

    def _playback(self, source: str, kind: str) -> dict:
        path = self._fixture_path(source, kind)
        if not path.exists():
            raise FixtureMissing(f"no recorded {kind} output for source {source_key(source)[:12]} in {self.config.fixtures_dir}")
        return json.loads(path.read_text(encoding="utf-8"))

    def _record(self, source: str, kind: str, payload: dict) -> None:
        path = self._fixture_path(source, kind)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    # compile --------------------------------------------------------------

    def compile(self, source: str, version: str | None = None) -> CompileResult:
        if self.config.mode == "playback":
            rec = self._playback(source, "compile")
            return parse_compiler_output(rec.get("output", rec), rec.get("compiler_version", version or self.config.default_version))
        version = version or self.select_version(source)
        binary = self.solc_binary()
        actual = self._probe_version(binary)
        if actual != version:
            log.warning("requested solc %s but %s is %s", version, binary, actual)
        output = self._run_compiler(binary, source)
        if self.config.mode == "record":
            self._record(source, "compile", {"compiler_version": actual, "output": output})
        return parse_compiler_output(output, actual)

    def _run_compiler(self, binary: str, source: str) -> dict:
        payload = json.dumps(standard_json_input(source))
        try:
            returncode, stdout, stderr = run_to_file(
                [binary, "--standard-json"], payload.encode("utf-8"), timeout=self.config.compile_timeout
            )
        except subprocess.TimeoutExpired as exc:
            raise ToolTimeout(f"compiler exceeded {self.config.compile_timeout}s") from exc
        except OSError as exc:
            raise ToolNotFound(str(exc)) from exc
        try:
            return _load_json_stdout(stdout.decode("utf-8", errors="replace"))
        except json.JSONDecodeError as exc:
            tail = stderr.decode("utf-8", errors="replace").strip()[-500:]
            raise ToolCrashed(f"compiler exited {returncode} without JSON output: {tail}") from exc

    # analyze --------------------------------------------------------------

    def analyze(self, source: str, version: str | None = None) -> AnalysisResult:
        if self.config.mode == "playback":
            rec = self._playback(source, "analysis")
            return parse_analyzer_output(rec.get("output", rec), rec.get("analyzer_version", "unknown"))
        slither = self.slither_binary()
        analyzer_version = self._probe_version(slither)
        output = self._run_analyzer(slither, source)
        if self.config.mode == "record":
            self._record(source, "analysis", {"analyzer_version": analyzer_version, "output": output})
        return parse_analyzer_output(output, analyzer_version)

    def _run_analyzer(self, slither: str, source: str) -> Any:
        solc = self.solc_binary()
        with tempfile.TemporaryDirectory(prefix="fsmscg-slither-") as tmp:
            tmpdir = Path(tmp)
            (tmpdir / SOURCE_NAME).write_text(source, encoding="utf-8")
            (tmpdir / "input.json").write_text(json.dumps(standard_json_input(source, full_output=True)), encoding="utf-8")
            if "solcjs" in Path(solc).name:
                solc = str(_write_solcjs_shim(tmpdir, solc))
            cmd = [slither, "input.json", "--compile-force-framework", "solc-json", "--solc", solc, "--json", "-"]
            try:
                proc = subprocess.run(cmd, capture_output=True, text=True, timeout=self.config.analyze_timeout, cwd=tmp)
            except subprocess.TimeoutExpired as exc:
                raise ToolTimeout(f"analyzer exceeded {self.config.analyze_timeout}s") from exc
            except OSError as exc:
                raise ToolNotFound(str(exc)) from exc
        # Slither exits non-zero whenever it reports findings; only the JSON matters.
        if not proc.stdout.strip():
            raise ToolCrashed(f"analyzer exited {proc.returncode} without output: {proc.stderr.strip()[-500:]}")
        try:
            return _load_json_stdout(proc.stdout)
        except json.JSONDecodeError as exc:
            raise AnalyzerParseError(f"analyzer output is not JSON: {exc}") from exc


def _write_solcjs_shim(directory: Path, solcjs: str) -> Path:
    """solcjs rejects --allow-paths and prints a banner; wrap it for slither."""
    shim = directory / "solc"
    shim.write_text(
        f"#!{sys.executable}\n"
        "import sys\n"
        "from fsmscg._solcjs_shim import main\n"
        f"sys.exit(main({solcjs!r}, sys.argv[1:]))\n",
        encoding="utf-8",
    )
    shim.chmod(shim.stat().st_mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
    return shim

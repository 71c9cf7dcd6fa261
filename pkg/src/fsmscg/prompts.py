"""Prompt rendering from ``{{name}}`` templates.

Substitution is a single pass: text inserted for a placeholder is never
scanned again, so user input containing ``{{`` comes through verbatim.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .fsm import CANONICAL_SCHEMA
from .scoring import SEVERITY_RANK
from .toolchain import CompileIssue, Finding

R2F = "R2F"
F2C = "F2C"
COMPILE_FEEDBACK = "CompileFeedback"
SECURITY_FEEDBACK = "SecurityFeedback"
C2F = "C2F"
C2R = "C2R"
QUALITY = "Quality"

KIND_PLACEHOLDERS: dict[str, frozenset[str]] = {
    R2F: frozenset({"requirements", "fsm_schema"}),
    F2C: frozenset(),
    COMPILE_FEEDBACK: frozenset({"errors"}),
    SECURITY_FEEDBACK: frozenset({"findings"}),
    C2F: frozenset({"code", "fsm_schema"}),
    C2R: frozenset({"code"}),
    QUALITY: frozenset({"requirements", "fsm", "code"}),
}

TEMPLATE_FILES = {
    R2F: "r2f.txt",
    F2C: "f2c.txt",
    COMPILE_FEEDBACK: "compile_feedback.txt",
    SECURITY_FEEDBACK: "security_feedback.txt",
    C2F: "c2f.txt",
    C2R: "c2r.txt",
    QUALITY: "quality.txt",
}

DEFAULT_BUDGET = 12_000
TRUNCATION_MARKER = "(truncated)"

_PLACEHOLDER = re.compile(r"\{\{(\w+)\}\}")


class PromptError(ValueError):
    pass


class TemplateError(PromptError):
    pass


class EmptyRequirement(PromptError):
    pass


class EmptyIssueList(PromptError):
    pass


class EmptyFindingList(PromptError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    kind: str
    body: str

    def __post_init__(self):
        if self.kind not in KIND_PLACEHOLDERS:
            raise TemplateError(f"unknown prompt kind {self.kind!r}")
        found = _PLACEHOLDER.findall(self.body)
        expected = KIND_PLACEHOLDERS[self.kind]
        for name in expected:
            if found.count(name) != 1:
                raise TemplateError(f"{self.kind} template must contain {{{{{name}}}}} exactly once")
        unknown = set(found) - expected
        if unknown:
            raise TemplateError(f"{self.kind} template has unknown placeholders {sorted(unknown)}")

    def render(self, values: dict[str, str]) -> str:
        return _PLACEHOLDER.sub(lambda m: values[m.group(1)], self.body)


@dataclass(frozen=True)
class Prompt:
    kind: str
    text: str
    provenance: dict[str, str] = field(default_factory=dict, compare=False)


def load_template(kind: str, template_dir: Path | None = None) -> PromptTemplate:
    name = TEMPLATE_FILES[kind]
    if template_dir is not None and (Path(template_dir) / name).exists():
        body = (Path(template_dir) / name).read_text(encoding="utf-8")
    else:
        body = resources.files("fsmscg.templates").joinpath(name).read_text(encoding="utf-8")
    return PromptTemplate(kind, body)


def format_issue(index: int, issue: CompileIssue) -> str:
    kind = issue.error_type or issue.severity.capitalize()
    code = f" ({issue.error_code})" if issue.error_code else ""
    lines = [f"Error {index}: {kind}{code}", f"  message: {issue.message}"]
    if issue.location is not None:
        lines.append(f"  location: {issue.location.file} bytes {issue.location.start}-{issue.location.end}")
    if issue.formatted_message:
        lines.append("  compiler output:")
        lines += [f"    {ln}" for ln in issue.formatted_message.rstrip().splitlines()]
    return "\n".join(lines) + "\n"


def format_finding(index: int, finding: Finding) -> str:
    lines = [
        f"Vulnerability {index}: {finding.check}",
        f"  level: {finding.severity} severity, {finding.confidence} confidence",
    ]
    loc = finding.location
    if loc is not None:
        where = []
        if loc.function:
            where.append(f"function {loc.function}")
        if loc.file:
            where.append(loc.file)
        if loc.lines:
            where.append(f"lines {loc.lines[0]}-{loc.lines[-1]}" if len(loc.lines) > 1 else f"line {loc.lines[0]}")
        if where:
            lines.append("  position: " + ", ".join(where))
    if finding.description:
        lines.append("  reason:")
        lines += [f"    {ln}" for ln in finding.description.rstrip().splitlines()]
    return "\n".join(lines) + "\n"


class PromptForge:
    """Loads the seven templates once and renders prompts within a character budget."""

    def __init__(self, template_dir: Path | str | None = None, budget: int = DEFAULT_BUDGET):
        self.template_dir = Path(template_dir) if template_dir else None
        self.budget = budget
        self.templates = {kind: load_template(kind, self.template_dir) for kind in TEMPLATE_FILES}

    def _render(self, kind: str, **values: str) -> Prompt:
        text = self.templates[kind].render(values)
        return Prompt(kind, text, dict(values))

    def build_r2f(self, requirements: str, violations: Sequence[str] = ()) -> Prompt:
        """Requirement-to-FSM prompt; *violations* turns it into a regeneration request."""
        if not requirements or not requirements.strip():
            raise EmptyRequirement("requirements must be non-empty")
        prompt = self._render(R2F, fsm_schema=CANONICAL_SCHEMA, requirements=requirements)
        if not violations:
            return prompt
        notes = "\n".join(f"- {v}" for v in violations)
        text = (
            prompt.text.rstrip("\n")
            + "\n\nYour previous FSM was rejected for the following reasons. Return a corrected FSM in the same JSON format:\n"
            + notes
            + "\n"
        )
        return Prompt(R2F, text, {**prompt.provenance, "violations": notes})

    def build_f2c(self, fsm_text: str | None = None) -> Prompt:
        prompt = self._render(F2C)
        if fsm_text is None:
            return prompt
        # Only used when the FSM turn is not part of the session.
        text = prompt.text.rstrip("\n") + "\n\nSmartFSM:\n" + fsm_text.rstrip("\n") + "\n"
        return Prompt(F2C, text, {"fsm": fsm_text})

    def _fit_blocks(self, kind: str, slot: str, blocks: list[str], noun: str) -> Prompt:
        # Blocks are joined with "\n", so each one after the first costs one extra character.
        used = len(self.templates[kind].render({slot: ""}))
        kept: list[str] = []
        for i, block in enumerate(blocks):
            sep = 1 if kept else 0
            marker = f"{TRUNCATION_MARKER} {len(blocks) - i} further {noun} omitted\n"
            reserve = 1 + len(marker) if i + 1 < len(blocks) else 0
            if used + sep + len(block) + reserve > self.budget:
                kept.append(marker)
                break
            kept.append(block)
            used += sep + len(block)
        return self._render(kind, **{slot: "\n".join(kept)})

    def build_compile_feedback(self, issues: Iterable[CompileIssue]) -> Prompt:
        issues = list(issues)
        if not issues:
            raise EmptyIssueList("no compile issues to report")
        blocks = [format_issue(i, issue) for i, issue in enumerate(issues, 1)]
        return self._fit_blocks(COMPILE_FEEDBACK, "errors", blocks, "errors")

    def build_security_feedback(self, findings: Iterable[Finding]) -> Prompt:
        findings = list(findings)
        if not findings:
            raise EmptyFindingList("no findings to report")
        ordered = sorted(findings, key=lambda f: -SEVERITY_RANK[f.severity])
        blocks = [format_finding(i, f) for i, f in enumerate(ordered, 1)]
        return self._fit_blocks(SECURITY_FEEDBACK, "findings", blocks, "vulnerabilities")

    def build_c2f(self, code: str) -> Prompt:
        if not code.strip():
            raise PromptError("code must be non-empty")
        return self._render(C2F, fsm_schema=CANONICAL_SCHEMA, code=code)

    def build_c2r(self, code: str) -> Prompt:
        if not code.strip():
            raise PromptError("code must be non-empty")
        return self._render(C2R, code=code)

    def build_quality(self, requirements: str, fsm_text: str, code: str) -> Prompt:
        return self._render(QUALITY, requirements=requirements, fsm=fsm_text, code=code)


_default: PromptForge | None = None


def default_forge() -> PromptForge:
    global _default
    if _default is None:
        _default = PromptForge()
    return _default


def build_r2f(requirements: str) -> Prompt:
    return default_forge().build_r2f(requirements)


def build_f2c() -> Prompt:
    return default_forge().build_f2c()


def build_compile_feedback(issues: Iterable[CompileIssue]) -> Prompt:
    return default_forge().build_compile_feedback(issues)


def build_security_feedback(findings: Iterable[Finding]) -> Prompt:
    return default_forge().build_security_feedback(findings)

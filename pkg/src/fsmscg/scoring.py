"""Contract risk metrics: VRS per contract, CPR/ZRCP/HRCP over a batch."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence

from .toolchain import AnalysisResult, CompileResult, Finding

# VRS assigned to any contract that fails to compile.
NON_COMPILING_VRS = 10.0

_SCALE = {"high": 3, "medium": 2, "low": 1}
_EXCLUDED_LEVELS = ("informational", "optimization")

SEVERITY_RANK = {"optimization": 0, "informational": 1, "low": 2, "medium": 3, "high": 4}


class UnknownLevel(ValueError):
    pass


class InconsistentInput(ValueError):
    pass


class EmptyBatch(ValueError):
    pass


def severity_score(level: str) -> int | None:
    """3/2/1 for high/medium/low; ``None`` for levels outside that scale."""
    level = level.lower()
    if level in _SCALE:
        return _SCALE[level]
    if level in _EXCLUDED_LEVELS:
        return None
    raise UnknownLevel(level)


def confidence_score(level: str) -> int:
    level = level.lower()
    if level not in _SCALE:
        raise UnknownLevel(level)
    return _SCALE[level]


def counted_findings(findings: Iterable[Finding], count_informational: bool = False) -> list[Finding]:
    return [f for f in findings if count_informational or severity_score(f.severity) is not None]


def vrs(compiled: bool, findings: Sequence[Finding], count_informational: bool = False) -> float:
    if not compiled:
        return NON_COMPILING_VRS
    counted = counted_findings(findings, count_informational)
    if not counted:
        return 0.0
    # Informational/optimization findings, when counted at all, carry no severity weight.
    total = sum((severity_score(f.severity) or 0) * confidence_score(f.confidence) for f in counted)
    return total / len(counted)


@dataclass(frozen=True)
class ContractScore:
    compiled: bool
    vrs: float
    zero_risk: bool
    has_high: bool
    counted_findings: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "ContractScore":
        return cls(**d)


NOT_COMPILED = ContractScore(compiled=False, vrs=NON_COMPILING_VRS, zero_risk=False, has_high=False, counted_findings=0)


def score_contract(
    compile: CompileResult, analysis: AnalysisResult | None, count_informational: bool = False
) -> ContractScore:
    if not compile.success:
        if analysis is not None:
            raise InconsistentInput("analysis supplied for a contract that failed to compile")
        return NOT_COMPILED
    if analysis is None:
        raise InconsistentInput("compiled contract needs an analysis result")
    if not analysis.ran:
        raise InconsistentInput("analyzer did not run; refusing to score as clean")
    counted = counted_findings(analysis.findings, count_informational)
    value = vrs(True, analysis.findings, count_informational)
    return ContractScore(
        compiled=True,
        vrs=value,
        zero_risk=value == 0,
        has_high=any(f.severity == "high" for f in counted),
        counted_findings=len(counted),
    )


@dataclass(frozen=True)
class MetricsSummary:
    total: int
    compiled: int
    zero: int
    high: int
    cpr: float
    zrcp: float
    hrcp: float
    mean_vrs: float

    def to_dict(self) -> dict:
        return asdict(self)


def aggregate(scores: Sequence[ContractScore]) -> MetricsSummary:
    if not scores:
        raise EmptyBatch("cannot aggregate an empty batch")
    total = len(scores)
    compiled = sum(s.compiled for s in scores)
    zero = sum(s.zero_risk for s in scores)
    high = sum(s.has_high for s in scores)
    return MetricsSummary(
        total=total,
        compiled=compiled,
        zero=zero,
        high=high,
        cpr=100.0 * compiled / total,
        zrcp=100.0 * zero / total,
        hrcp=100.0 * high / total,
        mean_vrs=sum(s.vrs for s in scores) / total,
    )


def format_table(rows: Mapping[str, MetricsSummary]) -> str:
    """Aligned text table with one row per labelled summary."""
    header = ("Approach", "N", "CPR(↑)", "ZRCP(↑)", "HRCP(↓)", "VRS(↓)")
    body = [
        (label, str(m.total), f"{m.cpr:.2f}%", f"{m.zrcp:.2f}%", f"{m.hrcp:.2f}%", f"{m.mean_vrs:.4f}")
        for label, m in rows.items()
    ]
    widths = [max(len(r[i]) for r in (header, *body)) for i in range(len(header))]

    def line(cells):
        first = cells[0].ljust(widths[0])
        return "  ".join([first, *(c.rjust(w) for c, w in zip(cells[1:], widths[1:]))])

    rule = "-" * len(line(header))
    return "\n".join([line(header), rule, *(line(r) for r in body)]) + "\n"

"""Format and graph checks over a SmartFsm.

Every finding is returned as data (a :class:`Violation`); nothing here
raises on a bad FSM.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Literal

from .fsm import FsmSets, SmartFsm, extract_sets

INITIAL_STATE_UNDEFINED = "INITIAL_STATE_UNDEFINED"
SOURCE_UNDEFINED = "SOURCE_UNDEFINED"
TARGET_UNDEFINED = "TARGET_UNDEFINED"
TRIGGER_UNDECLARED = "TRIGGER_UNDECLARED"
DUPLICATE_TRANSITION = "DUPLICATE_TRANSITION"
UNREACHABLE_STATE = "UNREACHABLE_STATE"
SELF_LOOP = "SELF_LOOP"
NO_CYCLE = "NO_CYCLE"

FORMAT_CODES = (INITIAL_STATE_UNDEFINED, SOURCE_UNDEFINED, TARGET_UNDEFINED, TRIGGER_UNDECLARED, DUPLICATE_TRANSITION)
GRAPH_CODES = (UNREACHABLE_STATE, SELF_LOOP, NO_CYCLE)

CycleRule = Literal["error", "warn", "off"]
TriggerNamespace = Literal["functions", "events", "both"]


@dataclass(frozen=True)
class ValidatorConfig:
    cycle_rule: CycleRule = "error"
    trigger_namespace: TriggerNamespace = "both"

    def __post_init__(self):
        if self.cycle_rule not in ("error", "warn", "off"):
            raise ValueError(f"cycle_rule must be error|warn|off, got {self.cycle_rule!r}")
        if self.trigger_namespace not in ("functions", "events", "both"):
            raise ValueError(f"trigger_namespace must be functions|events|both, got {self.trigger_namespace!r}")


@dataclass(frozen=True)
class Violation:
    """One failed condition.

    ``subject`` is a state/trigger name for name-level codes and an
    ``(source, trigger, target)`` triple for transition-level codes.
    ``level`` is ``"error"`` or ``"warning"``; only errors fail a report.
    """

    code: str
    subject: str | tuple[str, str, str] | None
    message: str
    level: str = "error"

    def to_dict(self) -> dict:
        subject = list(self.subject) if isinstance(self.subject, tuple) else self.subject
        return {"code": self.code, "level": self.level, "subject": subject, "message": self.message}


@dataclass(frozen=True)
class CheckReport:
    format_violations: tuple[Violation, ...] = ()
    graph_violations: tuple[Violation, ...] = ()
    passed: bool = field(init=False)

    def __post_init__(self):
        errors = [v for v in self.violations if v.level == "error"]
        object.__setattr__(self, "passed", not errors)

    @property
    def violations(self) -> tuple[Violation, ...]:
        return self.format_violations + self.graph_violations

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]

    def errors(self) -> list[Violation]:
        return [v for v in self.violations if v.level == "error"]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "format_violations": [v.to_dict() for v in self.format_violations],
            "graph_violations": [v.to_dict() for v in self.graph_violations],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def summary(self) -> str:
        if not self.violations:
            return "PASS: no violations"
        head = "PASS" if self.passed else "FAIL"
        lines = [f"{head}: {len(self.errors())} error(s), {len(self.violations) - len(self.errors())} warning(s)"]
        lines += [f"  [{v.level}] {v.code}: {v.message}" for v in self.violations]
        return "\n".join(lines)


def _fmt(triple: tuple[str, str, str]) -> str:
    return "({}, {}, {})".format(*triple)


def format_check(fsm: SmartFsm, sets: FsmSets, config: ValidatorConfig = ValidatorConfig()) -> list[Violation]:
    states = set(sets.states)
    declared: set[str] = set()
    if config.trigger_namespace in ("functions", "both"):
        declared.update(f.name for f in fsm.functions)
    if config.trigger_namespace in ("events", "both"):
        declared.update(e.name for e in fsm.events)

    out: list[Violation] = []
    if fsm.initial_state not in states:
        out.append(
            Violation(INITIAL_STATE_UNDEFINED, fsm.initial_state, f"initial state {fsm.initial_state!r} is not a declared state")
        )
    seen: set[tuple[str, str, str]] = set()
    for triple in sets.transitions:
        s, x, t = triple
        if s not in states:
            out.append(Violation(SOURCE_UNDEFINED, triple, f"transition {_fmt(triple)} starts from undeclared state {s!r}"))
        if t not in states:
            out.append(Violation(TARGET_UNDEFINED, triple, f"transition {_fmt(triple)} targets undeclared state {t!r}"))
        if x not in declared:
            out.append(Violation(TRIGGER_UNDECLARED, x, f"trigger {x!r} of {_fmt(triple)} is not a declared {_namespace_label(config)}"))
        if triple in seen:
            out.append(Violation(DUPLICATE_TRANSITION, triple, f"transition {_fmt(triple)} is listed more than once"))
        seen.add(triple)
    return out


def _namespace_label(config: ValidatorConfig) -> str:
    return {"functions": "function", "events": "event", "both": "function or event"}[config.trigger_namespace]


def _adjacency(sets: FsmSets) -> dict[str, list[str]]:
    # Only well-formed edges between declared states; self-loops are reported
    # separately and do not count as cycles.
    states = set(sets.states)
    adj: dict[str, list[str]] = {s: [] for s in sets.states}
    for s, _, t in sets.transitions:
        if s in states and t in states and s != t and t not in adj[s]:
            adj[s].append(t)
    return adj


def reachable_from(start: str, adj: dict[str, list[str]]) -> set[str]:
    if start not in adj:
        return set()
    seen = {start}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for nxt in adj[node]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def has_cycle(adj: dict[str, list[str]]) -> bool:
    """Kahn's algorithm: a cycle exists iff some node never reaches in-degree 0."""
    indegree = {n: 0 for n in adj}
    for targets in adj.values():
        for t in targets:
            indegree[t] += 1
    queue = deque(n for n, d in indegree.items() if d == 0)
    removed = 0
    while queue:
        node = queue.popleft()
        removed += 1
        for t in adj[node]:
            indegree[t] -= 1
            if indegree[t] == 0:
                queue.append(t)
    return removed < len(adj)


def graph_check(fsm: SmartFsm, sets: FsmSets, config: ValidatorConfig = ValidatorConfig()) -> list[Violation]:
    adj = _adjacency(sets)
    out: list[Violation] = []

    reached = reachable_from(fsm.initial_state, adj)
    for s in sets.states:
        if s not in reached:
            out.append(Violation(UNREACHABLE_STATE, s, f"state {s!r} cannot be reached from {fsm.initial_state!r}"))

    for triple in sets.transitions:
        if triple[0] == triple[2]:
            out.append(Violation(SELF_LOOP, triple, f"transition {_fmt(triple)} loops on state {triple[0]!r}"))

    if config.cycle_rule != "off" and len(sets.states) > 1 and not has_cycle(adj):
        level = "error" if config.cycle_rule == "error" else "warning"
        out.append(Violation(NO_CYCLE, None, "state graph contains no cycle between distinct states", level=level))
    return out


def validate(fsm: SmartFsm, config: ValidatorConfig = ValidatorConfig()) -> CheckReport:
    sets = extract_sets(fsm)
    return CheckReport(
        format_violations=tuple(format_check(fsm, sets, config)),
        graph_violations=tuple(graph_check(fsm, sets, config)),
    )

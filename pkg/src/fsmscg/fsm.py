"""SmartFSM data model, canonical JSON form, and set extraction.

A SmartFSM describes a contract in five sections (basic information, states,
variables, functions, events) plus the transition list that carries the
Mealy-style behaviour: states are ``S``, transition triggers are ``X``,
events are the outputs ``Y``, transitions are ``delta`` and the ``emits`` list
attached to a transition is ``lambda``.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Any, Iterable

__all__ = [
    "CANONICAL_SCHEMA",
    "BasicInfo",
    "ContractViolation",
    "EventDecl",
    "FsmError",
    "FsmSets",
    "FunctionDecl",
    "Param",
    "ParseError",
    "SchemaError",
    "SmartFsm",
    "Transition",
    "UnknownFieldWarning",
    "VariableDecl",
    "extract_sets",
    "parse_fsm",
    "serialize_fsm",
]


class FsmError(Exception):
    """Base class for SmartFSM document errors."""


class ParseError(FsmError):
    """The document is not well-formed UTF-8 JSON."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class SchemaError(FsmError):
    """The document is JSON but does not match the canonical schema.

    ``section`` names the offending key path, or the duplicated name.
    """

    def __init__(self, section: str, message: str | None = None):
        super().__init__(message or section)
        self.section = section


class ContractViolation(ValueError):
    """A SmartFsm value was constructed that breaks a type invariant."""


class UnknownFieldWarning(UserWarning):
    pass


def _require_name(value: str, what: str) -> None:
    if not isinstance(value, str) or not value:
        raise ContractViolation(f"{what} must be a non-empty string, got {value!r}")


def _require_unique(names: Iterable[str], what: str) -> None:
    seen: set[str] = set()
    for name in names:
        _require_name(name, what)
        if name in seen:
            raise ContractViolation(f"duplicate {what} {name!r}")
        seen.add(name)


@dataclass(frozen=True)
class BasicInfo:
    name: str
    description: str = ""


@dataclass(frozen=True)
class Param:
    name: str
    type_name: str


@dataclass(frozen=True)
class VariableDecl:
    name: str
    type_name: str
    description: str = ""


@dataclass(frozen=True)
class FunctionDecl:
    name: str
    description: str = ""
    inputs: tuple[Param, ...] = ()


@dataclass(frozen=True)
class EventDecl:
    name: str
    parameters: tuple[Param, ...] = ()
    description: str = ""


@dataclass(frozen=True)
class Transition:
    source: str
    trigger: str
    target: str
    condition: str | None = None
    emits: tuple[str, ...] | None = None

    def __post_init__(self):
        _require_name(self.source, "transition source")
        _require_name(self.trigger, "transition trigger")
        _require_name(self.target, "transition target")
        if self.emits is not None and not isinstance(self.emits, tuple):
            object.__setattr__(self, "emits", tuple(self.emits))

    @property
    def triple(self) -> tuple[str, str, str]:
        return (self.source, self.trigger, self.target)


@dataclass(frozen=True)
class SmartFsm:
    basic_info: BasicInfo
    states: tuple[str, ...]
    initial_state: str
    variables: tuple[VariableDecl, ...] = ()
    functions: tuple[FunctionDecl, ...] = ()
    events: tuple[EventDecl, ...] = ()
    transitions: tuple[Transition, ...] = ()

    def __post_init__(self):
        # Accept lists from callers but store tuples so values stay hashable.
        for name in ("states", "variables", "functions", "events", "transitions"):
            value = getattr(self, name)
            if not isinstance(value, tuple):
                object.__setattr__(self, name, tuple(value))
        if not self.states:
            raise ContractViolation("states must be non-empty")
        _require_unique(self.states, "state")
        _require_name(self.initial_state, "initial_state")
        _require_unique((v.name for v in self.variables), "variable")
        _require_unique((f.name for f in self.functions), "function")
        _require_unique((e.name for e in self.events), "event")


@dataclass(frozen=True)
class FsmSets:
    """Ordered projections of a SmartFsm (first-occurrence order, no repeats).

    ``transitions`` keeps every triple in declaration order, duplicates
    included.
    """

    states: tuple[str, ...]
    triggers: tuple[str, ...]
    targets: tuple[str, ...]
    transitions: tuple[tuple[str, str, str], ...] = field(default=())


def _unique(items: Iterable[str]) -> tuple[str, ...]:
    return tuple(dict.fromkeys(items))


def extract_sets(fsm: SmartFsm) -> FsmSets:
    triples = tuple(t.triple for t in fsm.transitions)
    return FsmSets(
        states=_unique(fsm.states),
        triggers=_unique(x for _, x, _ in triples),
        targets=_unique(t for _, _, t in triples),
        transitions=triples,
    )


# ---------------------------------------------------------------- parsing

_TOP_KEYS = (
    "basic_information",
    "states",
    "initial_state",
    "variables",
    "functions",
    "events",
    "transitions",
)


def _warn_unknown(obj: dict, known: tuple[str, ...], where: str) -> None:
    for key in obj:
        if key not in known:
            warnings.warn(f"ignoring unknown field {where}{key!r}", UnknownFieldWarning, stacklevel=4)


def _get(obj: dict, key: str, kind: type | tuple[type, ...], path: str, *, optional=False):
    if key not in obj:
        if optional:
            return None
        raise SchemaError(path + key, f"missing required field {path + key!r}")
    value = obj[key]
    if optional and value is None:
        return None
    if not isinstance(value, kind):
        raise SchemaError(path + key, f"field {path + key!r} has wrong type {type(value).__name__}")
    return value


def _name(obj: dict, path: str) -> str:
    value = _get(obj, "name", str, path)
    if not value:
        raise SchemaError(path + "name", f"field {path + 'name'!r} must be non-empty")
    return value


def _objects(doc: dict, key: str) -> list[tuple[str, dict]]:
    items = _get(doc, key, list, "")
    out = []
    for i, item in enumerate(items):
        path = f"{key}[{i}]."
        if not isinstance(item, dict):
            raise SchemaError(path.rstrip("."), f"{path.rstrip('.')!r} must be an object")
        out.append((path, item))
    return out


def _params(obj: dict, key: str, path: str) -> tuple[Param, ...]:
    raw = _get(obj, key, list, path)
    params = []
    for i, item in enumerate(raw):
        ppath = f"{path}{key}[{i}]."
        if not isinstance(item, dict):
            raise SchemaError(ppath.rstrip("."), f"{ppath.rstrip('.')!r} must be an object")
        _warn_unknown(item, ("name", "type"), ppath)
        params.append(Param(_name(item, ppath), _get(item, "type", str, ppath)))
    return tuple(params)


def _check_duplicates(names: list[str], section: str) -> None:
    seen: set[str] = set()
    for name in names:
        if name in seen:
            raise SchemaError(name, f"duplicate name {name!r} in {section}")
        seen.add(name)


def parse_fsm(document: bytes | str) -> SmartFsm:
    """Parse a canonical SmartFSM JSON document.

    Raises :class:`ParseError` for malformed input (with the byte offset of
    the problem) and :class:`SchemaError` for structural problems. Unknown
    keys are ignored and reported as :class:`UnknownFieldWarning`.
    """
    if isinstance(document, str):
        raw = document.encode("utf-8")
    else:
        raw = bytes(document)
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError("invalid UTF-8", exc.start) from exc
    if not text.strip():
        raise ParseError("empty document", 0)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ParseError(exc.msg, offset) from exc
    if not isinstance(doc, dict):
        raise SchemaError("document", "top level must be a JSON object")
    for key in _TOP_KEYS:
        if key not in doc:
            raise SchemaError(key, f"missing required section {key!r}")
    _warn_unknown(doc, _TOP_KEYS, "")

    info = _get(doc, "basic_information", dict, "")
    _warn_unknown(info, ("name", "description"), "basic_information.")
    basic = BasicInfo(_name(info, "basic_information."), _get(info, "description", str, "basic_information."))

    states = _get(doc, "states", list, "")
    if not states:
        raise SchemaError("states", "section 'states' must be non-empty")
    for i, s in enumerate(states):
        if not isinstance(s, str) or not s:
            raise SchemaError(f"states[{i}]", f"states[{i}] must be a non-empty string")
    _check_duplicates(states, "states")

    initial = _get(doc, "initial_state", str, "")
    if not initial:
        raise SchemaError("initial_state", "initial_state must be non-empty")

    variables = []
    for path, item in _objects(doc, "variables"):
        _warn_unknown(item, ("name", "type", "description"), path)
        variables.append(VariableDecl(_name(item, path), _get(item, "type", str, path), _get(item, "description", str, path)))
    _check_duplicates([v.name for v in variables], "variables")

    functions = []
    for path, item in _objects(doc, "functions"):
        _warn_unknown(item, ("name", "description", "inputs"), path)
        functions.append(FunctionDecl(_name(item, path), _get(item, "description", str, path), _params(item, "inputs", path)))
    _check_duplicates([f.name for f in functions], "functions")

    events = []
    for path, item in _objects(doc, "events"):
        _warn_unknown(item, ("name", "parameters", "description"), path)
        events.append(EventDecl(_name(item, path), _params(item, "parameters", path), _get(item, "description", str, path)))
    _check_duplicates([e.name for e in events], "events")

    transitions = []
    for path, item in _objects(doc, "transitions"):
        _warn_unknown(item, ("from", "trigger", "to", "condition", "emits"), path)
        ends = {}
        for key in ("from", "trigger", "to"):
            value = _get(item, key, str, path)
            if not value:
                raise SchemaError(path + key, f"field {path + key!r} must be non-empty")
            ends[key] = value
        emits = _get(item, "emits", list, path, optional=True)
        if emits is not None:
            for j, e in enumerate(emits):
                if not isinstance(e, str):
                    raise SchemaError(f"{path}emits[{j}]", f"{path}emits[{j}] must be a string")
            emits = tuple(emits)
        transitions.append(
            Transition(
                ends["from"],
                ends["trigger"],
                ends["to"],
                condition=_get(item, "condition", str, path, optional=True),
                emits=emits,
            )
        )

    return SmartFsm(
        basic_info=basic,
        states=tuple(states),
        initial_state=initial,
        variables=tuple(variables),
        functions=tuple(functions),
        events=tuple(events),
        transitions=tuple(transitions),
    )


# ---------------------------------------------------------- serialization


def _params_doc(params: tuple[Param, ...]) -> list[dict[str, str]]:
    return [{"name": p.name, "type": p.type_name} for p in params]


def fsm_to_dict(fsm: SmartFsm) -> dict[str, Any]:
    """Canonical JSON object for *fsm*, keys in schema order."""
    return {
        "basic_information": {"name": fsm.basic_info.name, "description": fsm.basic_info.description},
        "states": list(fsm.states),
        "initial_state": fsm.initial_state,
        "variables": [{"name": v.name, "type": v.type_name, "description": v.description} for v in fsm.variables],
        "functions": [
            {"name": f.name, "description": f.description, "inputs": _params_doc(f.inputs)} for f in fsm.functions
        ],
        "events": [
            {"name": e.name, "parameters": _params_doc(e.parameters), "description": e.description}
            for e in fsm.events
        ],
        "transitions": [
            {
                "from": t.source,
                "trigger": t.trigger,
                "to": t.target,
                "condition": t.condition,
                "emits": list(t.emits) if t.emits is not None else None,
            }
            for t in fsm.transitions
        ],
    }


def _dump(obj: Any) -> bytes:
    return (json.dumps(obj, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def serialize_fsm(fsm: SmartFsm) -> bytes:
    """Deterministic UTF-8 rendering: schema key order, 2-space indent, trailing newline."""
    if not isinstance(fsm, SmartFsm):
        raise ContractViolation(f"expected SmartFsm, got {type(fsm).__name__}")
    return _dump(fsm_to_dict(fsm))


# The skeleton handed to the model so it knows the exact document shape.
CANONICAL_SCHEMA: str = _dump(
    {
        "basic_information": {"name": "<contract name>", "description": "<background and overview of the contract>"},
        "states": ["<state name>", "..."],
        "initial_state": "<one of states>",
        "variables": [{"name": "<variable name>", "type": "<solidity type>", "description": "<role in state changes>"}],
        "functions": [
            {
                "name": "<function name>",
                "description": "<what the function does>",
                "inputs": [{"name": "<parameter name>", "type": "<solidity type>"}],
            }
        ],
        "events": [
            {
                "name": "<event name>",
                "parameters": [{"name": "<parameter name>", "type": "<solidity type>"}],
                "description": "<operation or state change recorded>",
            }
        ],
        "transitions": [
            {
                "from": "<source state>",
                "trigger": "<function or event name>",
                "to": "<target state>",
                "condition": "<guard, or null>",
                "emits": ["<event name>"],
            }
        ],
    }
).decode("utf-8")

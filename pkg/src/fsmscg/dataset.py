"""Fine-tuning dataset construction from a directory of Solidity contracts.

Stages: load and near-duplicate removal, model-assisted requirement/FSM
synthesis, main-dataset assembly with a validator gate, projection into chat
sub-datasets, and annotation/function pair extraction.
"""
from __future__ import annotations

import hashlib
import json
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import _solidity
from .fsm import ContractViolation, FsmError, SmartFsm, fsm_to_dict, parse_fsm, serialize_fsm
from .gateway import NoPayloadFound, Session, extract_fsm_payload
from .prompts import PromptForge
from .validate import ValidatorConfig, validate

SUBSETS = ("r2f2c", "r2f", "f2c", "c2f", "r2c")
SHINGLE_SIZE = 5
DEFAULT_THRESHOLD = 0.9


class InvalidItem(ValueError):
    pass


# ---------------------------------------------------------------- corpus


@dataclass(frozen=True)
class CorpusItem:
    source: str
    code: str
    fingerprint: str = field(init=False)
    shingles: frozenset[tuple[str, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        normalized = _solidity.normalize(self.code)
        object.__setattr__(self, "fingerprint", hashlib.sha256(normalized.encode("utf-8")).hexdigest())
        object.__setattr__(self, "shingles", shingle_set(self.code))


def shingle_set(code: str, size: int = SHINGLE_SIZE) -> frozenset[tuple[str, ...]]:
    toks = _solidity.tokens(code)
    if len(toks) < size:
        return frozenset({tuple(toks)}) if toks else frozenset()
    return frozenset(tuple(toks[i : i + size]) for i in range(len(toks) - size + 1))


def jaccard(a: frozenset, b: frozenset) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def load_corpus(directory: Path | str) -> list[CorpusItem]:
    directory = Path(directory)
    return [
        CorpusItem(path.relative_to(directory).as_posix(), path.read_text(encoding="utf-8", errors="replace"))
        for path in sorted(directory.rglob("*.sol"))
    ]


def _better(a: CorpusItem, b: CorpusItem) -> CorpusItem:
    # Longest code wins; source path breaks ties.
    return a if (len(a.code), b.source) > (len(b.code), a.source) else b


def dedupe_corpus(items: Sequence[CorpusItem], threshold: float = DEFAULT_THRESHOLD) -> list[CorpusItem]:
    """Keep one representative per group of near-duplicates.

    Groups are the connected components of the "Jaccard >= threshold"
    relation over 5-token shingle sets (exact normalized matches always
    join). Survivors keep their input order.
    """
    if not 0 < threshold <= 1:
        raise ValueError("threshold must be in (0, 1]")
    parent = list(range(len(items)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int) -> None:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    by_print: dict[str, int] = {}
    for i, item in enumerate(items):
        if item.fingerprint in by_print:
            union(by_print[item.fingerprint], i)
        else:
            by_print[item.fingerprint] = i
    uniques = list(by_print.values())
    for a_pos, i in enumerate(uniques):
        for j in uniques[a_pos + 1 :]:
            if jaccard(items[i].shingles, items[j].shingles) >= threshold:
                union(i, j)

    best: dict[int, CorpusItem] = {}
    for i, item in enumerate(items):
        root = find(i)
        best[root] = _better(best[root], item) if root in best else item
    keep = {id(v) for v in best.values()}
    return [item for item in items if id(item) in keep]


# ------------------------------------------------------------- synthesis


@dataclass
class MainItem:
    requirement: str
    fsm: SmartFsm | None
    code: str
    source: str = ""
    fsm_valid: bool = False
    filtered_reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "requirement": self.requirement,
            "fsm": fsm_to_dict(self.fsm) if self.fsm else None,
            "code": self.code,
            "fsm_valid": self.fsm_valid,
            "filtered_reason": self.filtered_reason,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MainItem":
        fsm = parse_fsm(json.dumps(d["fsm"])) if d.get("fsm") else None
        return cls(d["requirement"], fsm, d["code"], d.get("source", ""), d["fsm_valid"], d.get("filtered_reason"))


def _read_score(reply: str) -> float | None:
    m = re.search(r"-?\d+(?:\.\d+)?", reply)
    return float(m.group()) if m else None


def synthesize_rf(
    code: str,
    session: Session,
    forge: PromptForge | None = None,
    validator: ValidatorConfig = ValidatorConfig(),
    source: str = "",
    min_quality: float | None = None,
) -> MainItem:
    """Ask the model for the FSM and the requirements behind *code*.

    The FSM must parse and pass validation, otherwise the item comes back
    with ``fsm_valid=False`` and a ``filtered_reason``. With *min_quality*
    set, the model also rates the triple and low scores are filtered.
    Backend errors propagate.
    """
    if not code or not code.strip():
        raise ValueError("code must be non-empty")
    forge = forge or PromptForge()
    fsm_reply = session.send(forge.build_c2f(code))
    requirement = session.send(forge.build_c2r(code)).strip()
    item = MainItem(requirement=requirement, fsm=None, code=code, source=source)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            item.fsm = parse_fsm(extract_fsm_payload(fsm_reply))
    except NoPayloadFound:
        item.filtered_reason = "EXTRACTION_FAILED"
        return item
    except (FsmError, ContractViolation):
        item.filtered_reason = "PARSE_ERROR"
        return item
    if not requirement:
        item.filtered_reason = "EMPTY_REQUIREMENT"
        return item
    report = validate(item.fsm, validator)
    if not report.passed:
        item.filtered_reason = report.errors()[0].code
        return item
    if min_quality is not None:
        score = _read_score(session.send(forge.build_quality(requirement, serialize_fsm(item.fsm).decode(), code)))
        if score is None or score < min_quality:
            item.filtered_reason = "LOW_QUALITY_SCORE"
            return item
    item.fsm_valid = True
    return item


# ------------------------------------------------------------ projection


def _chat(*pairs: tuple[str, str]) -> dict:
    return {"messages": [{"role": role, "content": content} for role, content in pairs]}


def build_subsets(items: Iterable[MainItem], which: Iterable[str], forge: PromptForge | None = None) -> dict[str, list[dict]]:
    which = list(dict.fromkeys(which))
    unknown = set(which) - set(SUBSETS)
    if unknown:
        raise ValueError(f"unknown subsets {sorted(unknown)}; choose from {', '.join(SUBSETS)}")
    forge = forge or PromptForge()
    instruction = forge.build_f2c().text
    out: dict[str, list[dict]] = {name: [] for name in which}
    for item in items:
        if not item.fsm_valid or item.fsm is None:
            raise InvalidItem(f"item {item.source or '<unnamed>'} did not pass the FSM gate")
        r, f, c = item.requirement, serialize_fsm(item.fsm).decode("utf-8"), item.code
        records = {
            "r2f": _chat(("user", r), ("assistant", f)),
            "f2c": _chat(("user", f), ("assistant", c)),
            "c2f": _chat(("user", c), ("assistant", f)),
            "r2c": _chat(("user", r), ("assistant", c)),
            "r2f2c": _chat(("user", r), ("assistant", f), ("user", instruction), ("assistant", c)),
        }
        for name in which:
            out[name].append(records[name])
    return out


# ---------------------------------------------------------- annotations


@dataclass(frozen=True)
class AnnotationPair:
    annotation: str
    code: str


_FUNCTION_RE = re.compile(r"\bfunction\b")


def _comment_text(raw: str) -> str:
    lines = []
    for ln in raw.splitlines():
        ln = ln.strip()
        for prefix in ("/**", "/*", "*/", "///", "//", "*"):
            if ln.startswith(prefix):
                ln = ln[len(prefix) :]
                break
        if ln.endswith("*/"):
            ln = ln[:-2]
        lines.append(ln.strip())
    return "\n".join(ln for ln in lines if ln)


def extract_a2c(code: str) -> list[AnnotationPair]:
    """Pair each ``function`` with the comment block directly above it.

    A comment block is one ``/* */`` or ``/** */`` comment, or a run of line
    comments on consecutive lines. Only whitespace, and no blank line, may
    separate the block from the function keyword. Functions without a body
    (interface declarations) are skipped.
    """
    spans = list(_solidity.spans(code))
    pairs: list[AnnotationPair] = []
    for k, span in enumerate(spans):
        if span.kind != "code":
            continue
        text = code[span.start : span.end]
        for m in _FUNCTION_RE.finditer(text):
            if not _adjacent(text[: m.start()]):
                continue
            block = _preceding_comments(code, spans, k)
            if not block:
                continue
            start = span.start + m.start()
            body_open = _body_open(code, start)
            if body_open < 0:
                continue
            end = _solidity.matching_brace(code, body_open)
            if end < 0:
                continue
            annotation = _comment_text(block)
            if annotation:
                pairs.append(AnnotationPair(annotation, code[start:end]))
    return pairs


def _adjacent(gap: str) -> bool:
    # Whitespace only, and no blank line.
    return not gap.strip() and gap.count("\n") <= 1


def _preceding_comments(code: str, spans: list, k: int) -> str:
    parts: list[str] = []
    j = k - 1
    while j >= 0:
        s = spans[j]
        if s.kind == "code":
            if not _adjacent(code[s.start : s.end]):
                break
        elif s.kind in ("line_comment", "block_comment"):
            if parts and s.kind == "block_comment":
                break
            parts.append(code[s.start : s.end])
            if s.kind == "block_comment":
                break
        else:
            break
        j -= 1
    return "\n".join(reversed(parts))


def _body_open(code: str, start: int) -> int:
    """Index of the ``{`` opening the body of the function at *start*; -1 for declarations."""
    depth = 0
    for span in _solidity.spans(code[start:]):
        if span.kind != "code":
            continue
        for i in range(span.start, span.end):
            c = code[start + i]
            if c == "(":
                depth += 1
            elif c == ")":
                depth -= 1
            elif depth == 0 and c == ";":
                return -1
            elif depth == 0 and c == "{":
                return start + i
    return -1


def a2c_records(pairs: Iterable[AnnotationPair]) -> list[dict]:
    return [_chat(("user", p.annotation), ("assistant", p.code)) for p in pairs]


# ---------------------------------------------------------------- output


def write_jsonl(path: Path, records: Iterable[dict]) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
            n += 1
    return n


def read_jsonl(path: Path) -> list[dict]:
    with Path(path).open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def build_dataset(
    corpus: Path,
    out: Path,
    subsets: Sequence[str],
    session_factory: Callable[[str], Session],
    *,
    threshold: float = DEFAULT_THRESHOLD,
    forge: PromptForge | None = None,
    validator: ValidatorConfig = ValidatorConfig(),
    min_quality: float | None = None,
    include_a2c: bool = False,
) -> dict[str, int]:
    """Run every stage over *corpus* and write the JSON-lines files to *out*.

    Returns the record count per written file stem.
    """
    forge = forge or PromptForge()
    items = dedupe_corpus(load_corpus(corpus), threshold)
    main = [
        synthesize_rf(item.code, session_factory(item.source), forge, validator, item.source, min_quality)
        for item in items
    ]
    counts = {"main": write_jsonl(out / "main.jsonl", (m.to_dict() for m in main))}
    for name, records in build_subsets([m for m in main if m.fsm_valid], subsets, forge).items():
        counts[name] = write_jsonl(out / f"{name}.jsonl", records)
    if include_a2c:
        counts["a2c"] = write_jsonl(out / "a2c.jsonl", a2c_records(p for item in items for p in extract_a2c(item.code)))
    return counts


def build_a2c(corpus: Path, out: Path, threshold: float = DEFAULT_THRESHOLD) -> int:
    items = dedupe_corpus(load_corpus(corpus), threshold)
    return write_jsonl(out / "a2c.jsonl", a2c_records(p for item in items for p in extract_a2c(item.code)))

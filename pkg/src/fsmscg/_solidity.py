"""Minimal Solidity lexing: comments, strings, and brace matching."""
from __future__ import annotations

import re
from typing import Iterator, NamedTuple

TOKEN_RE = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*|\d[\w.]*|\S")


class Span(NamedTuple):
    kind: str  # "line_comment" | "block_comment" | "string" | "code"
    start: int
    end: int


def spans(code: str) -> Iterator[Span]:
    """Split *code* into comment, string-literal and plain-code spans."""
    i, n = 0, len(code)
    start = 0
    while i < n:
        ch = code[i]
        nxt = code[i + 1] if i + 1 < n else ""
        if ch == "/" and nxt == "/":
            if start < i:
                yield Span("code", start, i)
            end = code.find("\n", i)
            end = n if end < 0 else end
            yield Span("line_comment", i, end)
            i = start = end
        elif ch == "/" and nxt == "*":
            if start < i:
                yield Span("code", start, i)
            end = code.find("*/", i + 2)
            end = n if end < 0 else end + 2
            yield Span("block_comment", i, end)
            i = start = end
        elif ch in "\"'":
            if start < i:
                yield Span("code", start, i)
            j = i + 1
            while j < n and code[j] != ch and code[j] != "\n":
                j += 2 if code[j] == "\\" else 1
            end = min(j + 1, n)
            yield Span("string", i, end)
            i = start = end
        else:
            i += 1
    if start < n:
        yield Span("code", start, n)


def strip_comments(code: str) -> str:
    """Remove comments, keeping string literals intact."""
    return "".join(code[s.start : s.end] if s.kind != "block_comment" and s.kind != "line_comment" else " " for s in spans(code))


def normalize(code: str) -> str:
    """Comment-free code with all whitespace runs collapsed to one space."""
    return " ".join(strip_comments(code).split())


def tokens(code: str) -> list[str]:
    return TOKEN_RE.findall(normalize(code))


def matching_brace(code: str, open_index: int) -> int:
    """Index just past the ``}`` balancing the ``{`` at *open_index*, or -1."""
    depth = 0
    for span in spans(code):
        if span.end <= open_index or span.kind != "code":
            continue
        for k in range(max(span.start, open_index), span.end):
            c = code[k]
            if c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth == 0:
                    return k + 1
    return -1

"""Control-token grammar: tagged tool invocations embedded in model text.

The reasoning model requests tools inline with three tag pairs
(``<search>...</search>``, ``<perceive>...</perceive>``, ``<code>...</code>``).
The closing tags double as generation stop sequences, so a completion usually
ends exactly at a closer. This module turns raw completion text into a flat
segment list without ever guessing: unknown or mismatched tags stay literal
text, and an opened-but-unclosed invocation is reported as such rather than
dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class ToolKind(Enum):
    SEARCH = "Search"
    PERCEIVE = "Perceive"
    CODE = "Code"


OPEN_TAGS: dict[ToolKind, str] = {
    ToolKind.SEARCH: "<search>",
    ToolKind.PERCEIVE: "<perceive>",
    ToolKind.CODE: "<code>",
}

CLOSE_TAGS: dict[ToolKind, str] = {
    ToolKind.SEARCH: "</search>",
    ToolKind.PERCEIVE: "</perceive>",
    ToolKind.CODE: "</code>",
}

#: Closing tags in canonical order; used as generation stop sequences.
STOP_SEQUENCES: tuple[str, ...] = (
    CLOSE_TAGS[ToolKind.SEARCH],
    CLOSE_TAGS[ToolKind.PERCEIVE],
    CLOSE_TAGS[ToolKind.CODE],
)

# Payload trimming is ASCII whitespace only; str.strip() with no arguments
# would also eat unicode spaces, which must survive round-tripping untouched.
_ASCII_WS = " \t\r\n\f\v"


class SegmentKind(Enum):
    REASONING = "Reasoning"
    INVOCATION = "Invocation"
    UNTERMINATED = "UnterminatedInvocation"


@dataclass(frozen=True)
class Segment:
    """One contiguous slice of the source text.

    ``raw`` is the exact source slice ``text[span[0]:span[1]]``; concatenating
    the ``raw`` fields of a scan in order reproduces the input byte for byte.
    ``tool``/``payload`` are set for INVOCATION and UNTERMINATED segments;
    ``payload`` is the text between the tags trimmed of ASCII whitespace.
    """

    kind: SegmentKind
    span: tuple[int, int]
    raw: str
    tool: ToolKind | None = None
    payload: str | None = None


def _find_next_opener(text: str, start: int) -> tuple[int, ToolKind] | None:
    """Earliest opening tag at or after ``start``; tags are case-sensitive."""
    best: tuple[int, ToolKind] | None = None
    for kind, tag in OPEN_TAGS.items():
        at = text.find(tag, start)
        if at != -1 and (best is None or at < best[0]):
            best = (at, kind)
    return best


def scan(text: str) -> list[Segment]:
    """Parse ``text`` into Reasoning / Invocation segments, left to right.

    Single pass, no nesting: the earliest opening tag wins, its payload runs
    to the first matching closer, and any tags inside that payload are literal
    text. A closing tag with no matching opener is literal reasoning text. An
    opened invocation with no closer becomes a trailing UNTERMINATED segment.
    """
    segments: list[Segment] = []
    pos = 0
    n = len(text)
    while pos < n:
        found = _find_next_opener(text, pos)
        if found is None:
            segments.append(Segment(SegmentKind.REASONING, (pos, n), text[pos:n]))
            break
        at, kind = found
        if at > pos:
            segments.append(Segment(SegmentKind.REASONING, (pos, at), text[pos:at]))
        body_start = at + len(OPEN_TAGS[kind])
        closer = CLOSE_TAGS[kind]
        close_at = text.find(closer, body_start)
        if close_at == -1:
            payload = text[body_start:n].strip(_ASCII_WS)
            segments.append(
                Segment(SegmentKind.UNTERMINATED, (at, n), text[at:n], kind, payload)
            )
            break
        end = close_at + len(closer)
        payload = text[body_start:close_at].strip(_ASCII_WS)
        segments.append(
            Segment(SegmentKind.INVOCATION, (at, end), text[at:end], kind, payload)
        )
        pos = end
    return segments


def first_invocation(text: str) -> Segment | None:
    """The earliest *complete* invocation in ``text``, or None.

    Equals the first INVOCATION segment of :func:`scan`. Note that an
    unterminated invocation swallows everything after its opener, so tags
    inside it do not count.
    """
    for seg in scan(text):
        if seg.kind is SegmentKind.INVOCATION:
            return seg
    return None


def tool_by_name(name: str) -> ToolKind | None:
    """Case-insensitive tool-name lookup ('search' == 'Search' == 'SEARCH')."""
    try:
        return ToolKind[name.strip().upper()]
    except KeyError:
        return None

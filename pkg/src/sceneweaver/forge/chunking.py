"""Chapter-aware book chunking under a token budget.

Books split on chapter-title patterns, then adjacent chapters merge greedily
left to right while the merged estimate stays within budget. Concatenating the
chunk texts always reproduces the input exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

DEFAULT_BUDGET = 8192

TokenEstimator = Callable[[str], int]


def estimate_tokens(text: str) -> int:
    """Default token estimate: ceil(characters / 4). Monotone in length."""
    return (len(text) + 3) // 4


# Shipped chapter-heading pattern set; an extension point, order matters only
# for title capture, not for boundaries. Covers arabic and roman "Chapter"
# headings, bare roman-numeral lines, and markdown-style headers.
DEFAULT_CHAPTER_PATTERNS: tuple[str, ...] = (
    r"^[ \t]*(?:Chapter|CHAPTER)\s+\d+[^\n]*$",
    r"^[ \t]*(?:Chapter|CHAPTER)\s+[IVXLCDM]+\b[^\n]*$",
    r"^[ \t]*[IVXLCDM]+\.?[ \t]*$",
    r"^#{1,3}[ \t]+[^\n]+$",
)


@dataclass(frozen=True)
class Chunk:
    """A contiguous slice of a book under (or flagged over) the token budget."""

    book_id: str
    index: int
    text: str
    token_estimate: int
    chapter_spans: tuple[tuple[str, int], ...] = ()
    oversize: bool = False


@dataclass(frozen=True)
class _Segment:
    title: str
    start: int
    text: str


def _find_chapter_segments(text: str, patterns: Sequence[str]) -> list[_Segment]:
    compiled = [re.compile(p, re.MULTILINE) for p in patterns]
    starts: dict[int, str] = {}
    for pattern in compiled:
        for match in pattern.finditer(text):
            starts.setdefault(match.start(), match.group(0).strip())
    if not starts:
        return []
    boundaries = sorted(starts)
    segments: list[_Segment] = []
    if boundaries[0] > 0:
        segments.append(_Segment(title="", start=0, text=text[: boundaries[0]]))
    for i, start in enumerate(boundaries):
        end = boundaries[i + 1] if i + 1 < len(boundaries) else len(text)
        segments.append(_Segment(title=starts[start], start=start, text=text[start:end]))
    return segments


def _largest_fitting_prefix(text: str, budget: int, estimator: TokenEstimator) -> int:
    """Longest prefix length whose estimate fits the budget (>= 1 for progress)."""
    if estimator(text) <= budget:
        return len(text)
    lo, hi = 1, len(text)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if estimator(text[:mid]) <= budget:
            lo = mid
        else:
            hi = mid - 1
    return max(lo, 1)


def _fixed_split(text: str, budget: int, estimator: TokenEstimator) -> list[str]:
    pieces: list[str] = []
    position = 0
    while position < len(text):
        take = _largest_fitting_prefix(text[position:], budget, estimator)
        pieces.append(text[position : position + take])
        position += take
    return pieces


def chunk_book(
    text: str,
    patterns: Optional[Sequence[str]] = None,
    budget: int = DEFAULT_BUDGET,
    *,
    book_id: str = "",
    estimator: TokenEstimator = estimate_tokens,
) -> list[Chunk]:
    """Split a book into budget-bounded chunks, keeping chapters intact.

    Greedy left-to-right merging: adjacent chapters join while the merged
    estimate stays within budget. Without any chapter-title match the whole
    text falls back to fixed-size splitting. A single chapter over the budget
    is fixed-split internally and its pieces are flagged oversize.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if not text:
        return []
    patterns = DEFAULT_CHAPTER_PATTERNS if patterns is None else tuple(patterns)

    chunks: list[Chunk] = []

    def emit(chunk_text: str, spans: tuple[tuple[str, int], ...], oversize: bool) -> None:
        chunks.append(
            Chunk(
                book_id=book_id,
                index=len(chunks),
                text=chunk_text,
                token_estimate=estimator(chunk_text),
                chapter_spans=spans,
                oversize=oversize,
            )
        )

    segments = _find_chapter_segments(text, patterns)
    if not segments:
        for piece in _fixed_split(text, budget, estimator):
            emit(piece, (), False)
        return chunks

    pending: list[_Segment] = []

    def flush_pending() -> None:
        if not pending:
            return
        merged = "".join(s.text for s in pending)
        base = pending[0].start
        spans = tuple((s.title, s.start - base) for s in pending if s.title)
        emit(merged, spans, False)
        pending.clear()

    for segment in segments:
        if estimator(segment.text) > budget:
            flush_pending()
            for i, piece in enumerate(_fixed_split(segment.text, budget, estimator)):
                spans = ((segment.title, 0),) if i == 0 and segment.title else ()
                emit(piece, spans, True)
            continue
        if pending and estimator("".join(s.text for s in pending) + segment.text) > budget:
            flush_pending()
        pending.append(segment)
    flush_pending()
    return chunks

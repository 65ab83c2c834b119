"""Rule-based sentence segmentation for case-law text.

Deterministic splitter that refuses to break inside reporter citations,
after protected legal abbreviations, or inside parenthesized court-year
groups.  Newlines count as soft whitespace; two or more consecutive
newlines force a paragraph boundary.  Ellipses and bracketed editorial
marks ("[...]") never terminate a sentence.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .corpus import contains_phrase

# Tokens whose trailing period must not end a sentence.  Loadable from a
# plain-text file (one entry per line) via load_abbreviations().
DEFAULT_ABBREVIATIONS = (
    "v.", "vs.", "Inc.", "Corp.", "Co.", "Ltd.", "No.", "Nos.",
    "U.S.", "U.S.C.", "F.2d", "F.3d", "F.4th", "F. Supp.", "F. Supp. 2d",
    "Supp.", "S. Ct.", "L. Ed.", "Ed.", "App.", "Rptr.",
    "Cir.", "Ct.", "Stat.", "Rev.", "Reg.",
    "id.", "Id.", "e.g.", "i.e.", "cf.", "etc.", "§",
    "Mr.", "Mrs.", "Ms.", "Dr.", "Jr.", "Sr.", "St.",
    "art.", "Art.", "sec.", "Sec.", "ch.", "Ch.", "para.", "Para.",
    "Jan.", "Feb.", "Mar.", "Apr.", "Jun.", "Jul.", "Aug.", "Sept.",
    "Oct.", "Nov.", "Dec.",
)


@dataclass(frozen=True)
class SentenceSpan:
    """Half-open [start, end) character span over the original text."""

    start: int
    end: int
    text: str


def load_abbreviations(path: str | Path) -> tuple[str, ...]:
    """Read a protected-abbreviation list, one entry per line, '#' comments."""
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return tuple(out)


_PARA_BREAK = re.compile(r"\n[ \t]*\n")


class SentenceSegmenter:
    """Splits documents into :class:`SentenceSpan` lists."""

    def __init__(self, abbreviations: tuple[str, ...] = DEFAULT_ABBREVIATIONS):
        self.abbreviations = tuple(abbreviations)
        # suffix match set for "token ends with abbreviation" checks
        self._abbrev_suffixes = tuple(a for a in self.abbreviations)

    def _token_before(self, text: str, idx: int) -> str:
        """Whitespace-delimited token ending at idx (exclusive)."""
        j = idx
        while j > 0 and not text[j - 1].isspace():
            j -= 1
        return text[j:idx]

    def _is_protected(self, token: str) -> bool:
        stripped = token.lstrip("([\"'")
        for abbr in self._abbrev_suffixes:
            if stripped == abbr or stripped.endswith(abbr):
                return True
        # single-letter initials like "A." or "W."
        if re.fullmatch(r"[A-Z]\.", stripped):
            return True
        # multi-initial runs like "S.O.S." or "E.D.N.Y."
        if re.fullmatch(r"(?:[A-Za-z]\.){2,}", stripped):
            return True
        return False

    def _boundaries(self, text: str) -> list[int]:
        """Indices right after which a sentence break occurs."""
        bounds: list[int] = []
        depth = 0
        i = 0
        n = len(text)
        while i < n:
            ch = text[i]
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth = max(0, depth - 1)
            elif ch in ".!?":
                # ellipsis runs never terminate
                if ch == "." and (i + 1 < n and text[i + 1] == ".") or (
                    ch == "." and i > 0 and text[i - 1] == "."
                ):
                    i += 1
                    continue
                # decimal or section numbering like "3.5" / "70001.3"
                if ch == "." and i + 1 < n and text[i + 1].isdigit():
                    i += 1
                    continue
                if depth > 0:
                    i += 1
                    continue
                # absorb closing quotes/brackets after the terminator
                j = i + 1
                while j < n and text[j] in "\"'”’)]":
                    j += 1
                # must be followed by whitespace or end of text
                if j < n and not text[j].isspace():
                    i += 1
                    continue
                if ch == ".":
                    token = self._token_before(text, i + 1)
                    if self._is_protected(token):
                        i += 1
                        continue
                # next sentence must open with an uppercase letter, digit,
                # or opening quote/bracket (conservative split)
                k = j
                while k < n and text[k].isspace():
                    k += 1
                if k < n:
                    nxt = text[k]
                    if not (nxt.isupper() or nxt.isdigit() or nxt in "\"'“‘([§"):
                        i += 1
                        continue
                bounds.append(j)
                i = j
                continue
            i += 1
        # paragraph breaks force boundaries regardless of punctuation
        for m in _PARA_BREAK.finditer(text):
            bounds.append(m.start())
        return sorted(set(bounds))

    def segment(self, text: str) -> list[SentenceSpan]:
        """Split ``text`` into ordered, non-overlapping sentence spans."""
        if not text.strip():
            return []
        bounds = self._boundaries(text)
        spans: list[SentenceSpan] = []
        prev = 0
        for b in bounds + [len(text)]:
            chunk = text[prev:b]
            start = prev + (len(chunk) - len(chunk.lstrip()))
            end = prev + len(chunk.rstrip())
            if end > start:
                spans.append(SentenceSpan(start, end, text[start:end]))
            prev = b
        return spans

    def sentences_with_phrase(self, text: str, phrase: str) -> list[SentenceSpan]:
        """Spans whose normalized text contains the normalized phrase."""
        if not phrase.strip():
            raise ValueError("phrase must be non-empty")
        return [s for s in self.segment(text) if contains_phrase(s.text, phrase)]


_DEFAULT = SentenceSegmenter()


def segment(text: str) -> list[SentenceSpan]:
    return _DEFAULT.segment(text)


def sentences_with_phrase(text: str, phrase: str) -> list[SentenceSpan]:
    return _DEFAULT.sentences_with_phrase(text, phrase)

"""Prompt assembly for the baseline and augmented explanation modes.

Templates live as plain-text assets; substitution is literal and single
pass, so placeholder-looking text inside the data renders verbatim and is
never re-expanded.  Line endings are normalized to a single "\n".
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Mapping

from .corpus import SourceProvision, TermOfInterest
from .retrieval import RankedSentence, format_context_line

_PLACEHOLDER_RE = re.compile(r"\{\{(\w+)\}\}")


class DegenerateAugmentationError(ValueError):
    """Augmented prompt requested with zero retrieved sentences."""


def _load_asset(name: str) -> str:
    text = resources.files("lexgloss.assets").joinpath(name).read_text("utf-8")
    return text.replace("\r\n", "\n").replace("\r", "\n")


def _render(template: str, values: Mapping[str, str]) -> str:
    def sub(match: re.Match) -> str:
        key = match.group(1)
        if key not in values:
            raise KeyError(f"template placeholder {key!r} has no value")
        return values[key]

    return _PLACEHOLDER_RE.sub(sub, template)


@dataclass(frozen=True)
class PromptBundle:
    system_message: str
    user_message: str
    mode: str  # "baseline" | "augmented"
    num_sentences: int
    term_id: str
    supplied_citations: tuple[str, ...]
    token_estimate: int


def system_prompt() -> str:
    return _load_asset("system_prompt.txt")


def _bundle(
    template_name: str,
    term: TermOfInterest,
    provision: SourceProvision,
    num_sentences: int,
    mode: str,
    extra: Mapping[str, str],
    supplied_citations: tuple[str, ...],
) -> PromptBundle:
    if num_sentences < 1:
        raise ValueError("num_sentences must be positive")
    values = {
        "term_of_interest": term.phrase,
        "source_provision_citation": provision.citation,
        "source_provision_text": provision.text,
        "num_sentences": str(num_sentences),
        "s": "" if num_sentences == 1 else "s",
        **extra,
    }
    user = _render(_load_asset(template_name), values)
    system = system_prompt()
    # lazy import avoids a cycle with the gateway module
    from .gateway import estimate_tokens

    return PromptBundle(
        system_message=system,
        user_message=user,
        mode=mode,
        num_sentences=num_sentences,
        term_id=term.term_id,
        supplied_citations=supplied_citations,
        token_estimate=estimate_tokens(system) + estimate_tokens(user),
    )


def build_baseline_prompt(
    term: TermOfInterest, provision: SourceProvision, num_sentences: int
) -> PromptBundle:
    """Fig-style prompt without any retrieved context."""
    return _bundle(
        "user_baseline.txt", term, provision, num_sentences,
        mode="baseline", extra={}, supplied_citations=(),
    )


def build_augmented_prompt(
    term: TermOfInterest,
    provision: SourceProvision,
    sentences: list[RankedSentence],
    num_sentences: int,
) -> PromptBundle:
    """Prompt carrying one hyphen-prefixed context line per retrieved sentence."""
    if not sentences:
        raise DegenerateAugmentationError(
            f"term {term.term_id}: no retrieved sentences to augment with"
        )
    block = "\n".join(format_context_line(r.sentence) for r in sentences)
    citations = tuple(dict.fromkeys(
        r.sentence.case.case_citation for r in sentences
    ))
    return _bundle(
        "user_augmented.txt", term, provision, num_sentences,
        mode="augmented", extra={"retrieved_sentences": block},
        supplied_citations=citations,
    )


def dump_prompt(bundle: PromptBundle) -> str:
    """Exact debug rendering of a bundle as UTF-8 text."""
    return (
        f"# mode: {bundle.mode}  num_sentences: {bundle.num_sentences}  "
        f"term: {bundle.term_id}\n"
        f"--- system ---\n{bundle.system_message}\n"
        f"--- user ---\n{bundle.user_message}\n"
    )

"""Sentence retrieval: gold-label mode and a transparent BM25 heuristic.

Gold mode returns exactly the high-value sentences for a term.  Heuristic
mode ranks sentences containing the term by BM25 (k1=1.2, b=0.75 by
default) plus a +1.0 bonus per distinct definitional cue phrase present.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .corpus import Corpus, LabeledSentence, contains_phrase, sentences_for_term

INDEX_SCHEMA_VERSION = 1

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75

# Cue phrases signalling a definitional sentence; configuration, not code.
DEFAULT_CUE_PHRASES = (
    "means", "defined as", "definition of", "construed", "interpreted",
    "refers to",
)

_TOKEN_RE = re.compile(r"[0-9a-z]+")


def tokenize(text: str) -> list[str]:
    """Casefold and split on non-alphanumeric runs; numerals kept."""
    return _TOKEN_RE.findall(text.casefold())


class RetrievalError(Exception):
    pass


class IndexSchemaError(RetrievalError):
    pass


@dataclass(frozen=True)
class SentenceIndex:
    vocabulary: Mapping[str, int]
    postings: Mapping[int, tuple[tuple[str, int], ...]]
    doc_lengths: Mapping[str, int]
    avg_doc_length: float
    sentence_count: int


@dataclass(frozen=True)
class RankedSentence:
    sentence: LabeledSentence
    score: float
    rank: int
    mode: str  # "gold" | "heuristic"


def build_index(corpus: Corpus) -> SentenceIndex:
    vocabulary: dict[str, int] = {}
    postings: dict[int, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    for s in corpus.sentences:
        tokens = tokenize(s.text)
        doc_lengths[s.sentence_id] = len(tokens)
        tf: dict[str, int] = {}
        for tok in tokens:
            tf[tok] = tf.get(tok, 0) + 1
        for tok, count in sorted(tf.items()):
            tid = vocabulary.setdefault(tok, len(vocabulary))
            postings.setdefault(tid, []).append((s.sentence_id, count))
    n = len(doc_lengths)
    avg = (sum(doc_lengths.values()) / n) if n else 0.0
    return SentenceIndex(
        vocabulary=vocabulary,
        postings={tid: tuple(pl) for tid, pl in postings.items()},
        doc_lengths=doc_lengths,
        avg_doc_length=avg,
        sentence_count=n,
    )


def bm25_score(
    index: SentenceIndex,
    query_tokens: Iterable[str],
    sentence_id: str,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> float:
    """BM25 with the +1 idf variant (never negative)."""
    n = index.sentence_count
    if n == 0:
        return 0.0
    dl = index.doc_lengths.get(sentence_id, 0)
    score = 0.0
    for tok in dict.fromkeys(query_tokens):  # distinct, original order
        tid = index.vocabulary.get(tok)
        if tid is None:
            continue
        plist = index.postings[tid]
        df = len(plist)
        tf = 0
        for sid, count in plist:
            if sid == sentence_id:
                tf = count
                break
        if tf == 0:
            continue
        idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
        denom = tf + k1 * (1.0 - b + b * dl / index.avg_doc_length)
        score += idf * tf * (k1 + 1.0) / denom
    return score


def rank_gold(corpus: Corpus, term_id: str) -> list[RankedSentence]:
    """The dataset's high-value sentences for the term, score 1.0, id order."""
    high = sentences_for_term(corpus, term_id, {"high"})
    return [
        RankedSentence(sentence=s, score=1.0, rank=i + 1, mode="gold")
        for i, s in enumerate(high)
    ]


def cue_bonus(text: str, cue_phrases: Iterable[str] = DEFAULT_CUE_PHRASES) -> float:
    """+1.0 per distinct cue phrase present under normalized containment."""
    return float(sum(1 for cue in dict.fromkeys(cue_phrases) if contains_phrase(text, cue)))


def rank_heuristic(
    index: SentenceIndex,
    corpus: Corpus,
    term_id: str,
    k: int,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    cue_phrases: Iterable[str] = DEFAULT_CUE_PHRASES,
) -> list[RankedSentence]:
    if k < 0:
        raise ValueError("k must be >= 0")
    term = corpus.term(term_id)
    query = tokenize(term.phrase)
    candidates = [
        s for s in sentences_for_term(corpus, term_id) if s.contains_term
    ]
    scored = [
        (bm25_score(index, query, s.sentence_id, k1, b) + cue_bonus(s.text, cue_phrases), s)
        for s in candidates
    ]
    scored.sort(key=lambda pair: (-pair[0], pair[1].sentence_id))
    return [
        RankedSentence(sentence=s, score=score, rank=i + 1, mode="heuristic")
        for i, (score, s) in enumerate(scored[:k])
    ]


def format_context_line(sentence: LabeledSentence) -> str:
    """The prompt line format used for budget estimation and prompt assembly."""
    return f"- {sentence.text} ({sentence.case.case_citation})"


def select_for_prompt(
    ranked: list[RankedSentence],
    max_sentences: int,
    token_budget: int,
    estimator: Callable[[str], int],
    deduplicate: bool = False,
) -> list[RankedSentence]:
    """Longest rank-order prefix within the count and token budgets.

    Never reorders.  With ``deduplicate`` set, later entries whose
    normalized text repeats an earlier one are skipped (they do not
    consume budget either).
    """
    if max_sentences < 0 or token_budget < 0:
        raise ValueError("max_sentences and token_budget must be >= 0")
    out: list[RankedSentence] = []
    seen_texts: set[str] = set()
    used = 0
    for r in ranked:
        if deduplicate:
            key = " ".join(r.sentence.text.casefold().split())
            if key in seen_texts:
                continue
        if len(out) >= max_sentences:
            break
        cost = estimator(format_context_line(r.sentence))
        if used + cost > token_budget:
            break
        if deduplicate:
            seen_texts.add(" ".join(r.sentence.text.casefold().split()))
        out.append(r)
        used += cost
    return out


# --- persistence / export --------------------------------------------------


def save_index(index: SentenceIndex, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({
            "kind": "header",
            "schema_version": INDEX_SCHEMA_VERSION,
            "sentence_count": index.sentence_count,
            "avg_doc_length": index.avg_doc_length,
        }) + "\n")
        fh.write(json.dumps({"kind": "vocabulary", "tokens": dict(index.vocabulary)}) + "\n")
        fh.write(json.dumps({"kind": "doc_lengths", "lengths": dict(index.doc_lengths)}) + "\n")
        for tid, plist in index.postings.items():
            fh.write(json.dumps({"kind": "postings", "token_id": tid,
                                 "entries": [list(p) for p in plist]}) + "\n")


def load_index(path: str | Path) -> SentenceIndex:
    path = Path(path)
    header = None
    vocabulary: dict[str, int] = {}
    doc_lengths: dict[str, int] = {}
    postings: dict[int, tuple[tuple[str, int], ...]] = {}
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            kind = rec["kind"]
            if kind == "header":
                if rec.get("schema_version") != INDEX_SCHEMA_VERSION:
                    raise IndexSchemaError(
                        f"unsupported index schema_version {rec.get('schema_version')!r}"
                    )
                header = rec
            elif kind == "vocabulary":
                vocabulary = {k: int(v) for k, v in rec["tokens"].items()}
            elif kind == "doc_lengths":
                doc_lengths = {k: int(v) for k, v in rec["lengths"].items()}
            elif kind == "postings":
                postings[int(rec["token_id"])] = tuple(
                    (sid, int(c)) for sid, c in rec["entries"]
                )
    if header is None:
        raise IndexSchemaError(f"missing header record in {path}")
    return SentenceIndex(
        vocabulary=vocabulary,
        postings=postings,
        doc_lengths=doc_lengths,
        avg_doc_length=float(header["avg_doc_length"]),
        sentence_count=int(header["sentence_count"]),
    )


def export_ranking_csv(
    path: str | Path, term_id: str, ranked: list[RankedSentence]
) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["term_id", "sentence_id", "rank", "score", "mode"])
        for r in ranked:
            writer.writerow([term_id, r.sentence.sentence_id, r.rank, repr(r.score), r.mode])

"""Data model and persistence for terms, provisions, cases and labeled sentences.

The canonical on-disk format is line-delimited JSON: a header record carrying
``schema_version`` followed by one object per line with a ``kind`` field in
``{"term", "provision", "case", "sentence"}``.  An ``upstream`` adapter imports
a directory of per-term JSON files as published by the statutory
interpretation dataset, mapping its label strings through an explicit,
configurable label map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

SCHEMA_VERSION = 1

VALUE_LABELS = ("high", "certain", "potential", "none")
JURISDICTION_LEVELS = ("federal", "state", "unknown")

# Upstream label strings -> canonical labels.  Overridable per import call.
DEFAULT_LABEL_MAP = {
    "high value": "high",
    "high": "high",
    "certain value": "certain",
    "certain": "certain",
    "potential value": "potential",
    "potential": "potential",
    "no value": "none",
    "none": "none",
}


class CorpusError(Exception):
    """Base class for corpus construction and persistence failures."""


class ParseError(CorpusError):
    """Malformed input file; carries the offending location."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        locus = ""
        if path is not None:
            locus = f" ({path}" + (f":{line}" if line is not None else "") + ")"
        super().__init__(message + locus)
        self.path = path
        self.line = line


class ReferentialError(CorpusError):
    """A record references an identifier that does not exist."""


class SchemaVersionError(CorpusError):
    """Stored file was written under an incompatible schema version."""


def normalize(text: str) -> str:
    """Casefold and collapse all whitespace runs to single spaces."""
    return " ".join(text.casefold().split())


def contains_phrase(text: str, phrase: str) -> bool:
    """Normalized-containment test used for the ``contains_term`` flag."""
    return normalize(phrase) in normalize(text)


@dataclass(frozen=True)
class SourceProvision:
    provision_id: str
    citation: str
    text: str
    jurisdiction_level: str = "unknown"

    def __post_init__(self):
        if not self.citation.strip():
            raise CorpusError(f"provision {self.provision_id}: empty citation")
        if not self.text.strip():
            raise CorpusError(f"provision {self.provision_id}: empty text")
        if self.jurisdiction_level not in JURISDICTION_LEVELS:
            raise CorpusError(
                f"provision {self.provision_id}: bad jurisdiction_level "
                f"{self.jurisdiction_level!r}"
            )


@dataclass(frozen=True)
class TermOfInterest:
    term_id: str
    phrase: str
    provision_ref: str

    def __post_init__(self):
        if not normalize(self.phrase):
            raise CorpusError(f"term {self.term_id}: empty phrase")


@dataclass(frozen=True)
class CaseMeta:
    case_id: str
    case_citation: str
    court_level: str = "unknown"
    year: int | None = None

    def __post_init__(self):
        if not self.case_citation.strip():
            raise CorpusError(f"case {self.case_id}: empty citation")
        if self.court_level not in JURISDICTION_LEVELS:
            raise CorpusError(f"case {self.case_id}: bad court_level {self.court_level!r}")
        if self.year is not None and not (1600 <= self.year <= 2100):
            raise CorpusError(f"case {self.case_id}: year {self.year} out of range")


@dataclass(frozen=True)
class LabeledSentence:
    sentence_id: str
    term_id: str
    text: str
    case: CaseMeta
    value_label: str
    contains_term: bool
    extras: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.value_label not in VALUE_LABELS:
            raise CorpusError(
                f"sentence {self.sentence_id}: bad value_label {self.value_label!r}"
            )


@dataclass(frozen=True)
class CorpusStats:
    term_count: int
    sentence_count: int
    high_value_count: int
    per_term_high_value: Mapping[str, int]
    mean_high_value_per_term: float | None

    def __post_init__(self):
        if self.high_value_count != sum(self.per_term_high_value.values()):
            raise CorpusError("stats: high_value_count inconsistent with per-term map")


@dataclass(frozen=True)
class ImportReport:
    source: str
    term_count: int
    sentence_count: int
    flagged_sentence_ids: tuple[str, ...]

    def to_text(self) -> str:
        lines = [
            f"imported {self.term_count} terms, {self.sentence_count} sentences "
            f"from {self.source}",
            f"{len(self.flagged_sentence_ids)} sentence(s) do not contain their term:",
        ]
        lines.extend(f"  {sid}" for sid in self.flagged_sentence_ids)
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "source": self.source,
            "term_count": self.term_count,
            "sentence_count": self.sentence_count,
            "flagged_sentence_ids": list(self.flagged_sentence_ids),
        }


@dataclass(frozen=True)
class Corpus:
    """Immutable corpus; all cross-references are validated at construction."""

    terms: Mapping[str, TermOfInterest]
    provisions: Mapping[str, SourceProvision]
    sentences: tuple[LabeledSentence, ...]
    stats: CorpusStats

    def term(self, term_id: str) -> TermOfInterest:
        try:
            return self.terms[term_id]
        except KeyError:
            raise ReferentialError(f"unknown term: {term_id!r}") from None

    def provision_for(self, term: TermOfInterest) -> SourceProvision:
        return self.provisions[term.provision_ref]

    def cases(self) -> dict[str, CaseMeta]:
        out: dict[str, CaseMeta] = {}
        for s in self.sentences:
            out.setdefault(s.case.case_id, s.case)
        return out


def build_corpus(
    terms: Iterable[TermOfInterest],
    provisions: Iterable[SourceProvision],
    sentences: Iterable[LabeledSentence],
) -> Corpus:
    """Validate cross-references, recompute contains_term flags and stats."""
    prov_map = {p.provision_id: p for p in provisions}
    term_map: dict[str, TermOfInterest] = {}
    for t in terms:
        if t.provision_ref not in prov_map:
            raise ReferentialError(
                f"term {t.term_id}: unknown provision {t.provision_ref!r}"
            )
        if t.term_id in term_map:
            raise CorpusError(f"duplicate term_id {t.term_id!r}")
        term_map[t.term_id] = t

    seen_ids: set[str] = set()
    fixed: list[LabeledSentence] = []
    for s in sentences:
        if s.term_id not in term_map:
            raise ReferentialError(
                f"sentence {s.sentence_id}: unknown term {s.term_id!r}"
            )
        if s.sentence_id in seen_ids:
            raise CorpusError(f"duplicate sentence_id {s.sentence_id!r}")
        seen_ids.add(s.sentence_id)
        flag = contains_phrase(s.text, term_map[s.term_id].phrase)
        fixed.append(s if s.contains_term == flag else replace(s, contains_term=flag))

    fixed_t = tuple(fixed)
    stats = _compute_stats(term_map, fixed_t)
    return Corpus(terms=term_map, provisions=prov_map, sentences=fixed_t, stats=stats)


def _compute_stats(
    terms: Mapping[str, TermOfInterest], sentences: tuple[LabeledSentence, ...]
) -> CorpusStats:
    per_term = {tid: 0 for tid in terms}
    for s in sentences:
        if s.value_label == "high":
            per_term[s.term_id] += 1
    high = sum(per_term.values())
    mean = high / len(terms) if terms else None
    return CorpusStats(
        term_count=len(terms),
        sentence_count=len(sentences),
        high_value_count=high,
        per_term_high_value=per_term,
        mean_high_value_per_term=mean,
    )


def compute_stats(corpus: Corpus) -> CorpusStats:
    """Recompute stats from the collections; idempotent and order-independent."""
    return _compute_stats(corpus.terms, corpus.sentences)


def sentences_for_term(
    corpus: Corpus, term_id: str, label_filter: set[str] | None = None
) -> list[LabeledSentence]:
    """All sentences for a term in stable sentence_id order, optionally filtered."""
    corpus.term(term_id)
    out = [s for s in corpus.sentences if s.term_id == term_id]
    if label_filter is not None:
        out = [s for s in out if s.value_label in label_filter]
    out.sort(key=lambda s: s.sentence_id)
    return out


# --- canonical line-delimited store ---------------------------------------


def _sentence_to_record(s: LabeledSentence) -> dict:
    rec = {
        "kind": "sentence",
        "sentence_id": s.sentence_id,
        "term_id": s.term_id,
        "text": s.text,
        "case_id": s.case.case_id,
        "value_label": s.value_label,
        "contains_term": s.contains_term,
    }
    if s.extras:
        rec["extras"] = dict(s.extras)
    return rec


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"kind": "header", "schema_version": SCHEMA_VERSION}) + "\n")
        for p in sorted(corpus.provisions.values(), key=lambda p: p.provision_id):
            fh.write(json.dumps({
                "kind": "provision",
                "provision_id": p.provision_id,
                "citation": p.citation,
                "text": p.text,
                "jurisdiction_level": p.jurisdiction_level,
            }, ensure_ascii=False) + "\n")
        for t in sorted(corpus.terms.values(), key=lambda t: t.term_id):
            fh.write(json.dumps({
                "kind": "term",
                "term_id": t.term_id,
                "phrase": t.phrase,
                "provision_ref": t.provision_ref,
            }, ensure_ascii=False) + "\n")
        for c in sorted(corpus.cases().values(), key=lambda c: c.case_id):
            fh.write(json.dumps({
                "kind": "case",
                "case_id": c.case_id,
                "case_citation": c.case_citation,
                "court_level": c.court_level,
                "year": c.year,
            }, ensure_ascii=False) + "\n")
        for s in corpus.sentences:
            fh.write(json.dumps(_sentence_to_record(s), ensure_ascii=False) + "\n")


def load_corpus(path: str | Path) -> Corpus:
    corpus, _report = _import_canonical(Path(path))
    return corpus


def _import_canonical(path: Path) -> tuple[Corpus, ImportReport]:
    terms: list[TermOfInterest] = []
    provisions: list[SourceProvision] = []
    cases: dict[str, CaseMeta] = {}
    raw_sentences: list[dict] = []
    saw_header = False

    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad JSON: {exc}", str(path), lineno) from None
            kind = rec.get("kind")
            if kind == "header":
                saw_header = True
                if rec.get("schema_version") != SCHEMA_VERSION:
                    raise SchemaVersionError(
                        f"unsupported schema_version {rec.get('schema_version')!r}"
                    )
            elif kind == "provision":
                provisions.append(SourceProvision(
                    provision_id=rec["provision_id"],
                    citation=rec["citation"],
                    text=rec["text"],
                    jurisdiction_level=rec.get("jurisdiction_level", "unknown"),
                ))
            elif kind == "term":
                terms.append(TermOfInterest(
                    term_id=rec["term_id"],
                    phrase=rec["phrase"],
                    provision_ref=rec["provision_ref"],
                ))
            elif kind == "case":
                c = CaseMeta(
                    case_id=rec["case_id"],
                    case_citation=rec["case_citation"],
                    court_level=rec.get("court_level", "unknown"),
                    year=rec.get("year"),
                )
                cases[c.case_id] = c
            elif kind == "sentence":
                rec["_lineno"] = lineno
                raw_sentences.append(rec)
            else:
                raise ParseError(f"unknown record kind {kind!r}", str(path), lineno)

    if not saw_header:
        raise SchemaVersionError(f"missing header record in {path}")

    sentences: list[LabeledSentence] = []
    for rec in raw_sentences:
        case_id = rec.get("case_id")
        if case_id not in cases:
            raise ParseError(
                f"sentence {rec.get('sentence_id')!r}: unknown case {case_id!r}",
                str(path), rec["_lineno"],
            )
        sentences.append(LabeledSentence(
            sentence_id=rec["sentence_id"],
            term_id=rec["term_id"],
            text=rec["text"],
            case=cases[case_id],
            value_label=rec["value_label"],
            contains_term=bool(rec.get("contains_term", False)),
            extras=rec.get("extras", {}),
        ))

    corpus = build_corpus(terms, provisions, sentences)
    report = ImportReport(
        source=str(path),
        term_count=corpus.stats.term_count,
        sentence_count=corpus.stats.sentence_count,
        flagged_sentence_ids=tuple(
            s.sentence_id for s in corpus.sentences if not s.contains_term
        ),
    )
    return corpus, report


# --- upstream adapter ------------------------------------------------------


def _import_upstream(path: Path, label_map: Mapping[str, str]) -> tuple[Corpus, ImportReport]:
    """Import a directory of per-term JSON files.

    Each file holds one term: the phrase, its source provision, and the list
    of labeled sentences.  Field names vary slightly across dataset releases,
    so the adapter probes a small set of aliases; everything it does not model
    is preserved under the sentence's ``extras`` map.
    """
    if path.is_file():
        files = [path]
    else:
        files = sorted(p for p in path.glob("*.json"))
    if not files:
        raise ParseError("no upstream .json files found", str(path))

    terms: list[TermOfInterest] = []
    provisions: list[SourceProvision] = []
    sentences: list[LabeledSentence] = []

    for fp in files:
        try:
            doc = json.loads(fp.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad JSON: {exc}", str(fp)) from None

        term_id = str(doc.get("term_id") or doc.get("id") or fp.stem)
        phrase = doc.get("phrase") or doc.get("term") or doc.get("query")
        if not phrase:
            raise ParseError("missing term phrase", str(fp))
        prov = doc.get("provision") or {}
        if isinstance(prov, str):
            prov = {"text": prov}
        citation = (
            prov.get("citation") or doc.get("provision_citation")
            or doc.get("source") or f"unknown provision ({term_id})"
        )
        text = prov.get("text") or doc.get("provision_text") or citation
        level = prov.get("jurisdiction_level") or doc.get("jurisdiction_level")
        if level is None:
            # United States Code provisions default to federal
            level = "federal" if "u.s. code" in citation.casefold() or "u.s.c" in citation.casefold() else "unknown"
        provision_id = prov.get("provision_id") or f"prov-{term_id}"
        provisions.append(SourceProvision(provision_id, citation, text, level))
        terms.append(TermOfInterest(term_id, phrase, provision_id))

        raw = doc.get("sentences") or []
        for i, srec in enumerate(raw):
            raw_label = str(srec.get("value") or srec.get("label") or srec.get("value_label") or "").casefold()
            if raw_label not in label_map:
                raise ParseError(
                    f"unmapped value label {raw_label!r} in sentence {i}", str(fp)
                )
            stext = srec.get("text") or srec.get("sentence")
            if stext is None:
                raise ParseError(f"sentence {i} has no text", str(fp))
            case_id = str(srec.get("case_id") or srec.get("doc_id") or f"{term_id}-case-{i}")
            case_citation = srec.get("citation") or srec.get("case_citation") or case_id
            year = srec.get("year")
            court_level = srec.get("court_level", "unknown")
            known = {
                "value", "label", "value_label", "text", "sentence", "case_id",
                "doc_id", "citation", "case_citation", "year", "court_level",
                "sentence_id",
            }
            extras = {k: v for k, v in srec.items() if k not in known}
            sentences.append(LabeledSentence(
                sentence_id=str(srec.get("sentence_id") or f"{term_id}-{i:05d}"),
                term_id=term_id,
                text=stext,
                case=CaseMeta(case_id, case_citation, court_level, year),
                value_label=label_map[raw_label],
                contains_term=False,  # recomputed by build_corpus
                extras=extras,
            ))

    corpus = build_corpus(terms, provisions, sentences)
    report = ImportReport(
        source=str(path),
        term_count=corpus.stats.term_count,
        sentence_count=corpus.stats.sentence_count,
        flagged_sentence_ids=tuple(
            s.sentence_id for s in corpus.sentences if not s.contains_term
        ),
    )
    return corpus, report


def import_dataset(
    path: str | Path,
    format: str = "canonical",
    label_map: Mapping[str, str] | None = None,
) -> tuple[Corpus, ImportReport]:
    """Import a dataset in ``canonical`` or ``upstream`` format.

    Returns the validated corpus together with an import report listing
    sentences whose text does not contain their term phrase.
    """
    path = Path(path)
    if not path.exists():
        raise ParseError("path does not exist", str(path))
    if format == "canonical":
        return _import_canonical(path)
    if format == "upstream":
        return _import_upstream(path, label_map or DEFAULT_LABEL_MAP)
    raise ValueError(f"unknown format {format!r}")

"""Corpus ingestion: documents split into paragraphs and sentences, plus glossaries.

All IDs are assigned deterministically from input order, so identical bytes
always produce an identical corpus.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Union

from .errors import EmptyCorpus, EncodingError, MalformedEntry

CORPUS_FORMAT = "ragkit-corpus"
CORPUS_VERSION = 1

# A term and its definition are joined with an em dash when indexed together.
COMBINED_SEPARATOR = " — "

# Sentence boundary: terminator followed by whitespace and an uppercase
# letter or digit.
_BOUNDARY_RE = re.compile(r"[.?!](?=\s+[A-Z0-9])")

# Dotted abbreviations that never end a sentence. Single-letter tokens such
# as "A." are deliberately absent: they do not suppress splits.
ABBREVIATIONS = ("Fig.", "e.g.", "i.e.", "et al.", "No.", "Std.")

_PARAGRAPH_SPLIT_RE = re.compile(r"\n\s*\n")
_ACRONYM_RE = re.compile(r"[A-Z]{2,}[0-9]*")
_WORDISH_RE = re.compile(r"[a-z0-9]+")

TextSource = Union[str, bytes, IO[str], IO[bytes]]


@dataclass(frozen=True)
class Sentence:
    sent_id: str
    para_id: str
    text: str
    word_count: int
    char_offset: int


@dataclass(frozen=True)
class Paragraph:
    para_id: str
    doc_id: str
    text: str
    sentences: tuple[Sentence, ...]
    word_count: int


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    paragraphs: tuple[Paragraph, ...]


@dataclass(frozen=True)
class GlossaryEntry:
    entry_id: str
    term: str
    definition: str
    combined: str
    contains_acronym: bool


def word_count(text: str) -> int:
    """Count maximal nonwhitespace runs."""
    return len(text.split())


def word_tokens(text: str) -> list[str]:
    """Lowercase alphanumeric-run tokens, shared by embedding and matching."""
    return _WORDISH_RE.findall(text.lower())


def contains_acronym(text: str) -> bool:
    """True when any token is two or more uppercase letters, optionally with trailing digits."""
    for token in re.findall(r"[A-Za-z0-9]+", text):
        if _ACRONYM_RE.fullmatch(token):
            return True
    return False


def _is_guarded(text: str, boundary_end: int) -> bool:
    """Whether the terminator ending at ``boundary_end`` closes a guarded abbreviation."""
    head = text[:boundary_end]
    for abbr in ABBREVIATIONS:
        if not head.endswith(abbr):
            continue
        start = boundary_end - len(abbr)
        if start == 0 or text[start - 1].isspace():
            return True
    return False


def segment_sentences(paragraph_text: str) -> list[tuple[str, int]]:
    """Split a paragraph into (sentence_text, char_offset) pairs.

    Splits after ``.``, ``?`` or ``!`` when followed by whitespace and an
    uppercase letter or digit, unless the terminator closes an abbreviation
    from ``ABBREVIATIONS``. The whole input is returned as one sentence when
    no boundary is found.
    """
    if not paragraph_text.strip():
        return []
    breaks = []
    for match in _BOUNDARY_RE.finditer(paragraph_text):
        end = match.start() + 1
        if _is_guarded(paragraph_text, end):
            continue
        breaks.append(end)

    sentences: list[tuple[str, int]] = []
    start = 0
    for end in breaks + [len(paragraph_text)]:
        chunk = paragraph_text[start:end]
        stripped = chunk.strip()
        if stripped:
            offset = start + chunk.index(stripped[0])
            sentences.append((stripped, offset))
        start = end
    return sentences


def _read_text(source: TextSource) -> str:
    if isinstance(source, str):
        return source
    if isinstance(source, bytes):
        try:
            return source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise EncodingError(f"source is not valid UTF-8: {exc}") from exc
    data = source.read()
    if isinstance(data, bytes):
        return _read_text(data)
    return data


def ingest_document(source: TextSource, doc_id: str, title: str = "") -> Document:
    """Ingest UTF-8 text into a Document.

    Paragraphs split on one or more blank lines; sentence and paragraph IDs
    are ``doc_id/pN`` and ``doc_id/pN/sM`` in source order.
    """
    text = _read_text(source)
    if not text.strip():
        raise EmptyCorpus(f"document {doc_id!r} has no content")
    text = text.replace("\r\n", "\n")

    paragraphs = []
    for block in _PARAGRAPH_SPLIT_RE.split(text):
        block = block.strip()
        if not block:
            continue
        para_id = f"{doc_id}/p{len(paragraphs)}"
        sentences = tuple(
            Sentence(
                sent_id=f"{para_id}/s{m}",
                para_id=para_id,
                text=sent_text,
                word_count=word_count(sent_text),
                char_offset=offset,
            )
            for m, (sent_text, offset) in enumerate(segment_sentences(block))
        )
        paragraphs.append(
            Paragraph(
                para_id=para_id,
                doc_id=doc_id,
                text=block,
                sentences=sentences,
                word_count=word_count(block),
            )
        )
    if not paragraphs:
        raise EmptyCorpus(f"document {doc_id!r} has no content")
    return Document(doc_id=doc_id, title=title or doc_id, paragraphs=tuple(paragraphs))


def ingest_glossary(source: TextSource) -> list[GlossaryEntry]:
    """Ingest a JSON-Lines glossary into entries g0, g1, ... in input order.

    Each line must be an object with nonempty "term" and "definition" fields.
    """
    text = _read_text(source)
    entries: list[GlossaryEntry] = []
    record_index = 0
    for line in text.splitlines():
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedEntry(record_index, f"invalid JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise MalformedEntry(record_index, "record is not an object")
        term = record.get("term")
        definition = record.get("definition")
        if not term or not isinstance(term, str):
            raise MalformedEntry(record_index, "missing or empty 'term'")
        if not definition or not isinstance(definition, str):
            raise MalformedEntry(record_index, "missing or empty 'definition'")
        combined = term + COMBINED_SEPARATOR + definition
        entries.append(
            GlossaryEntry(
                entry_id=f"g{record_index}",
                term=term,
                definition=definition,
                combined=combined,
                contains_acronym=contains_acronym(term) or contains_acronym(definition),
            )
        )
        record_index += 1
    return entries


@dataclass(frozen=True)
class Corpus:
    """Documents and glossary entries with unique IDs and parent links."""

    documents: tuple[Document, ...] = ()
    glossary: tuple[GlossaryEntry, ...] = ()

    def __post_init__(self):
        seen: set[str] = set()
        for doc in self.documents:
            if not doc.doc_id or doc.doc_id in seen:
                raise ValueError(f"duplicate or empty doc_id {doc.doc_id!r}")
            seen.add(doc.doc_id)
            for para in doc.paragraphs:
                if para.para_id in seen:
                    raise ValueError(f"duplicate para_id {para.para_id!r}")
                if para.doc_id != doc.doc_id:
                    raise ValueError(f"paragraph {para.para_id!r} not linked to {doc.doc_id!r}")
                seen.add(para.para_id)
                for sent in para.sentences:
                    if sent.sent_id in seen:
                        raise ValueError(f"duplicate sent_id {sent.sent_id!r}")
                    if sent.para_id != para.para_id:
                        raise ValueError(f"sentence {sent.sent_id!r} not linked to {para.para_id!r}")
                    seen.add(sent.sent_id)
        for entry in self.glossary:
            if entry.entry_id in seen:
                raise ValueError(f"duplicate entry_id {entry.entry_id!r}")
            seen.add(entry.entry_id)

    def paragraphs(self) -> Iterable[Paragraph]:
        for doc in self.documents:
            yield from doc.paragraphs

    def sentences(self) -> Iterable[Sentence]:
        for para in self.paragraphs():
            yield from para.sentences

    def unit_ids(self) -> set[str]:
        ids = {doc.doc_id for doc in self.documents}
        for para in self.paragraphs():
            ids.add(para.para_id)
            ids.update(sent.sent_id for sent in para.sentences)
        ids.update(entry.entry_id for entry in self.glossary)
        return ids

    def unit_text(self, unit_id: str) -> str:
        """Resolve a sentence, paragraph, or glossary-entry ID to its text.

        Glossary entries resolve to their definition, the substantive side
        of the entry.
        """
        for para in self.paragraphs():
            if para.para_id == unit_id:
                return para.text
            for sent in para.sentences:
                if sent.sent_id == unit_id:
                    return sent.text
        for entry in self.glossary:
            if entry.entry_id == unit_id:
                return entry.definition
        raise KeyError(unit_id)

    def glossary_entry(self, entry_id: str) -> GlossaryEntry:
        for entry in self.glossary:
            if entry.entry_id == entry_id:
                return entry
        raise KeyError(entry_id)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    payload = {
        "format": CORPUS_FORMAT,
        "version": CORPUS_VERSION,
        "documents": [
            {
                "doc_id": doc.doc_id,
                "title": doc.title,
                "paragraphs": [
                    {
                        "para_id": para.para_id,
                        "doc_id": para.doc_id,
                        "text": para.text,
                        "word_count": para.word_count,
                        "sentences": [
                            {
                                "sent_id": sent.sent_id,
                                "para_id": sent.para_id,
                                "text": sent.text,
                                "word_count": sent.word_count,
                                "char_offset": sent.char_offset,
                            }
                            for sent in para.sentences
                        ],
                    }
                    for para in doc.paragraphs
                ],
            }
            for doc in corpus.documents
        ],
        "glossary": [
            {
                "entry_id": entry.entry_id,
                "term": entry.term,
                "definition": entry.definition,
                "combined": entry.combined,
                "contains_acronym": entry.contains_acronym,
            }
            for entry in corpus.glossary
        ],
    }
    Path(path).write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def load_corpus(path: str | Path) -> Corpus:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise EmptyCorpus(f"corpus file {path} is not valid JSON: {exc}") from exc
    if payload.get("format") != CORPUS_FORMAT:
        raise EmptyCorpus(f"corpus file {path} has unknown format {payload.get('format')!r}")
    documents = tuple(
        Document(
            doc_id=doc["doc_id"],
            title=doc["title"],
            paragraphs=tuple(
                Paragraph(
                    para_id=para["para_id"],
                    doc_id=para["doc_id"],
                    text=para["text"],
                    word_count=para["word_count"],
                    sentences=tuple(
                        Sentence(
                            sent_id=sent["sent_id"],
                            para_id=sent["para_id"],
                            text=sent["text"],
                            word_count=sent["word_count"],
                            char_offset=sent["char_offset"],
                        )
                        for sent in para["sentences"]
                    ),
                )
                for para in doc["paragraphs"]
            ),
        )
        for doc in payload["documents"]
    )
    glossary = tuple(
        GlossaryEntry(
            entry_id=entry["entry_id"],
            term=entry["term"],
            definition=entry["definition"],
            combined=entry["combined"],
            contains_acronym=entry["contains_acronym"],
        )
        for entry in payload["glossary"]
    )
    return Corpus(documents=documents, glossary=glossary)

"""CoNLL-U ingestion for the pair miner.

Dependency parses are consumed, never produced: the miner reads standard
10-column CoNLL-U (UTF-8, tab separated, blank line between sentences,
``#`` comments). Multiword-token ranges (``3-4``) and empty nodes
(``3.1``) are skipped.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ParseError, StructuralError

N_COLUMNS = 10


@dataclass(frozen=True)
class DepToken:
    """One syntactic word. ``head`` is the 1-based governor index, 0 for root."""

    index: int
    surface_form: str
    lemma: str
    upos: str
    head: int
    deprel: str


@dataclass(frozen=True)
class ParsedSentence:
    sentence_id: str
    tokens: tuple[DepToken, ...]

    def token(self, index: int) -> DepToken:
        return self.tokens[index - 1]


def _is_word_id(field: str) -> bool:
    # plain integer IDs only; "3-4" ranges and "3.1" empty nodes are skipped
    return field.isdigit()


def parse_conllu(text: str) -> list[ParsedSentence]:
    """Parse CoNLL-U text into sentences.

    The sentence id comes from a ``# sent_id =`` comment when present,
    otherwise the 1-based block ordinal as a string. Columns used: ID,
    FORM, LEMMA, UPOS, HEAD, DEPREL; lemmas are lowercased at ingestion.

    Raises ParseError for malformed token lines (wrong column count,
    non-integer ID/HEAD, empty lemma) and StructuralError for head indices
    outside the sentence, self-heads, or non-contiguous token indices.
    """
    sentences: list[ParsedSentence] = []
    pending: list[DepToken] = []
    pending_sent_id: str | None = None

    def flush() -> None:
        nonlocal pending, pending_sent_id
        if not pending:
            return
        sent_id = pending_sent_id or str(len(sentences) + 1)
        sentences.append(_build_sentence(sent_id, pending))
        pending = []
        pending_sent_id = None

    for line_number, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            comment = line[1:].strip()
            if comment.startswith("sent_id") and "=" in comment:
                pending_sent_id = comment.split("=", 1)[1].strip()
            continue
        columns = line.split("\t")
        if len(columns) != N_COLUMNS:
            raise ParseError(
                f"expected {N_COLUMNS} tab-separated columns, got {len(columns)}",
                line_number,
            )
        token_id = columns[0]
        if not _is_word_id(token_id):
            if "-" in token_id or "." in token_id:
                continue  # multiword-token range or empty node
            raise ParseError(f"non-integer token ID {token_id!r}", line_number)
        head_field = columns[6]
        if not head_field.isdigit():
            raise ParseError(f"non-integer HEAD {head_field!r}", line_number)
        lemma = columns[2].lower()
        if not lemma:
            raise ParseError("empty LEMMA column", line_number)
        pending.append(
            DepToken(
                index=int(token_id),
                surface_form=columns[1],
                lemma=lemma,
                upos=columns[3],
                head=int(head_field),
                deprel=columns[7],
            )
        )

    flush()
    return sentences


def _build_sentence(sent_id: str, tokens: list[DepToken]) -> ParsedSentence:
    n = len(tokens)
    for position, token in enumerate(tokens, start=1):
        if token.index != position:
            raise StructuralError(
                f"sentence {sent_id!r}: token indices not contiguous from 1 "
                f"(found {token.index} at position {position})"
            )
        if token.head < 0 or token.head > n:
            raise StructuralError(
                f"sentence {sent_id!r}: head {token.head} of token {token.index} "
                f"outside 1..{n}"
            )
        if token.head == token.index:
            raise StructuralError(
                f"sentence {sent_id!r}: token {token.index} is its own head"
            )
    return ParsedSentence(sentence_id=sent_id, tokens=tuple(tokens))


def parse_conllu_file(path) -> list[ParsedSentence]:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_conllu(handle.read())

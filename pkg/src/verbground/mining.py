"""Verb/direct-object pair extraction and filtering.

A token contributes a pair when its relation to its governor is ``obj``
(UD v2) or ``dobj`` (UD v1) and the governor is tagged VERB. Whitelist
filtering stands in for manual annotation of concrete, correctly-sensed
pairs; a frequency threshold drops rare noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .conllu import ParsedSentence
from .errors import ConfigError, ParseError

OBJECT_RELATIONS = frozenset({"obj", "dobj"})


@dataclass(frozen=True)
class MinedPair:
    verb: str
    object: str
    frequency: int = 1
    source_ids: tuple[str, ...] = field(default_factory=tuple)

    @property
    def key(self) -> tuple[str, str]:
        return (self.verb, self.object)


def extract_pairs(sentence: ParsedSentence) -> list[MinedPair]:
    """Emit (verb lemma, object lemma) for each direct object in the sentence,
    in token order. Sentences with no matches yield an empty list."""
    pairs = []
    for token in sentence.tokens:
        if token.deprel not in OBJECT_RELATIONS or token.head == 0:
            continue
        head = sentence.token(token.head)
        if head.upos != "VERB":
            continue
        pairs.append(
            MinedPair(
                verb=head.lemma,
                object=token.lemma,
                frequency=1,
                source_ids=(sentence.sentence_id,),
            )
        )
    return pairs


def aggregate_pairs(pairs: list[MinedPair]) -> list[MinedPair]:
    """Merge pairs sharing (verb, object): frequencies sum, source ids
    concatenate in encounter order. Output sorted by (verb, object)."""
    merged: dict[tuple[str, str], list] = {}
    for pair in pairs:
        entry = merged.setdefault(pair.key, [0, []])
        entry[0] += pair.frequency
        entry[1].extend(pair.source_ids)
    return [
        MinedPair(verb=verb, object=obj, frequency=freq, source_ids=tuple(sources))
        for (verb, obj), (freq, sources) in sorted(merged.items())
    ]


def filter_pairs(
    pairs: list[MinedPair],
    object_whitelist: set[str],
    verb_whitelist: set[str] | None = None,
    min_frequency: int = 1,
) -> list[MinedPair]:
    """Keep pairs whose object (and verb, when a verb whitelist is given)
    is whitelisted and whose frequency meets the threshold.

    An empty object whitelist is rejected: it would silently filter
    everything.
    """
    if not object_whitelist:
        raise ConfigError("object whitelist is empty; every pair would be dropped")
    kept = [
        pair
        for pair in pairs
        if pair.object in object_whitelist
        and (verb_whitelist is None or pair.verb in verb_whitelist)
        and pair.frequency >= min_frequency
    ]
    return sorted(kept, key=lambda pair: pair.key)


def mine_sentences(sentences: list[ParsedSentence]) -> list[MinedPair]:
    pairs: list[MinedPair] = []
    for sentence in sentences:
        pairs.extend(extract_pairs(sentence))
    return aggregate_pairs(pairs)


def load_whitelist(path) -> set[str]:
    """One lowercase lemma per line; blank lines and ``#`` comments ignored."""
    entries = set()
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            lemma = line.strip()
            if lemma and not lemma.startswith("#"):
                entries.add(lemma.lower())
    return entries


def write_pairs_tsv(pairs: list[MinedPair], path) -> None:
    """``verb<TAB>object<TAB>frequency`` records, LF endings, sorted."""
    ordered = sorted(pairs, key=lambda pair: pair.key)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for pair in ordered:
            handle.write(f"{pair.verb}\t{pair.object}\t{pair.frequency}\n")


def read_pairs_tsv(path) -> list[MinedPair]:
    pairs = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line:
                continue
            columns = line.split("\t")
            if len(columns) == 2:
                verb, obj = columns
                frequency = 1
            elif len(columns) == 3:
                verb, obj = columns[0], columns[1]
                if not columns[2].isdigit():
                    raise ParseError(
                        f"frequency column is not an integer: {columns[2]!r}",
                        line_number,
                    )
                frequency = int(columns[2])
            else:
                raise ParseError(
                    f"expected 2 or 3 tab-separated columns, got {len(columns)}",
                    line_number,
                )
            if not verb or not obj:
                raise ParseError("empty verb or object field", line_number)
            pairs.append(MinedPair(verb=verb.lower(), object=obj.lower(), frequency=frequency))
    return aggregate_pairs(pairs)

"""Command templates, tokenization and vocabulary.

Commands are generated by substituting a verb (and optionally an object
noun) into surface templates, then word-tokenized. The vocabulary maps
tokens to embedding rows; unknown tokens at lookup time resolve per a
deterministic policy so evaluation with out-of-vocabulary nouns stays
reproducible.
"""

from __future__ import annotations

import hashlib
import string
from dataclasses import dataclass
from importlib import resources

from .errors import ConfigError, DataError

MODE_VERB_ONLY = "verb-only"
MODE_VERB_NOUN = "verb+noun"
MODE_VERB_UNKNOWN_NOUN = "verb+unknown-noun"
MODES = (MODE_VERB_ONLY, MODE_VERB_NOUN, MODE_VERB_UNKNOWN_NOUN)

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_ID = 0
UNK_ID = 1

POLICY_RESERVED_UNK = "reserved-unk"
POLICY_HASHED_RANDOM = "hashed-random"
UNK_POLICIES = (POLICY_RESERVED_UNK, POLICY_HASHED_RANDOM)

# ids for hashed unknowns live in [vocab_size, vocab_size + HASHED_ID_SPACE)
HASHED_ID_SPACE = 1 << 20

_PUNCT = string.punctuation


@dataclass(frozen=True)
class CommandTemplate:
    """A surface pattern with a ``{verb}`` slot and optionally an ``{object}`` slot."""

    pattern: str

    def __post_init__(self):
        if self.pattern.count("{verb}") != 1:
            raise ConfigError(
                f"template must contain {{verb}} exactly once: {self.pattern!r}"
            )
        if self.pattern.count("{object}") > 1:
            raise ConfigError(
                f"template may contain {{object}} at most once: {self.pattern!r}"
            )

    @property
    def has_object_slot(self) -> bool:
        return "{object}" in self.pattern

    def render(self, verb: str, object_noun: str | None = None) -> str:
        command = self.pattern.replace("{verb}", verb)
        if self.has_object_slot:
            if object_noun is None:
                raise DataError(f"template {self.pattern!r} needs an object noun")
            command = command.replace("{object}", object_noun)
        return command


def templates_for_mode(
    templates: list[CommandTemplate], mode: str
) -> list[CommandTemplate]:
    if mode not in MODES:
        raise ConfigError(f"unknown command mode {mode!r}; expected one of {MODES}")
    if mode == MODE_VERB_ONLY:
        usable = [t for t in templates if not t.has_object_slot]
    else:
        usable = [t for t in templates if t.has_object_slot]
    if not usable:
        raise ConfigError(f"no template applicable to mode {mode!r}")
    return usable


def expand_templates(pair, templates: list[CommandTemplate], mode: str) -> list[str]:
    """One rendered command per template applicable to the mode.

    ``pair`` is anything with ``verb`` and ``object_class`` attributes; in
    verb-only mode the object slot is unused.
    """
    usable = templates_for_mode(templates, mode)
    noun = None if mode == MODE_VERB_ONLY else pair.object_class
    return [template.render(pair.verb, noun) for template in usable]


def load_templates(path) -> list[CommandTemplate]:
    """One pattern per line, UTF-8; blank lines and ``#`` comments ignored."""
    templates = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            pattern = line.strip()
            if pattern and not pattern.startswith("#"):
                templates.append(CommandTemplate(pattern))
    if not templates:
        raise ConfigError(f"no templates found in {path}")
    return templates


def _data_text(name: str) -> str:
    return resources.files("verbground.data").joinpath(name).read_text("utf-8")


def default_templates() -> list[CommandTemplate]:
    lines = _data_text("templates.txt").splitlines()
    return [CommandTemplate(line.strip()) for line in lines if line.strip() and not line.startswith("#")]


def default_nonces() -> list[str]:
    lines = _data_text("nonces.txt").splitlines()
    return [line.strip() for line in lines if line.strip() and not line.startswith("#")]


def default_verb_whitelist() -> set[str]:
    lines = _data_text("verbs_concrete.txt").splitlines()
    return {line.strip() for line in lines if line.strip() and not line.startswith("#")}


def tokenize(command: str) -> list[str]:
    """Lowercase, split on whitespace, strip edge ASCII punctuation per token,
    drop empties. An all-punctuation or blank command is an error."""
    tokens = []
    for chunk in command.lower().split():
        token = chunk.strip(_PUNCT)
        if token:
            tokens.append(token)
    if not tokens:
        raise DataError(f"command {command!r} tokenizes to nothing")
    return tokens


def _hashed_offset(token: str, seed: int) -> int:
    digest = hashlib.blake2b(
        token.encode("utf-8"), key=str(seed).encode("ascii"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little") % HASHED_ID_SPACE


class Vocabulary:
    """Bijective token/id mapping with reserved pad (0) and unk (1) rows.

    Lookup of an unknown token depends on the policy: ``reserved-unk``
    maps every unknown to id 1; ``hashed-random`` maps it to a
    deterministic pseudo-id at or above ``size`` which the encoder
    resolves to a frozen, seeded random embedding.
    """

    def __init__(self, id_to_token: list[str], unk_policy: str, seed: int):
        if unk_policy not in UNK_POLICIES:
            raise ConfigError(f"unknown unk policy {unk_policy!r}")
        if id_to_token[:2] != [PAD_TOKEN, UNK_TOKEN]:
            raise ConfigError("vocabulary must reserve ids 0/1 for pad/unk")
        self.id_to_token = list(id_to_token)
        self.token_to_id = {token: i for i, token in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ConfigError("duplicate tokens in vocabulary")
        self.unk_policy = unk_policy
        self.seed = int(seed)

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def lookup(self, token: str) -> int:
        known = self.token_to_id.get(token)
        if known is not None:
            return known
        if self.unk_policy == POLICY_RESERVED_UNK:
            return UNK_ID
        return self.size + _hashed_offset(token, self.seed)

    def encode(self, tokens: list[str]) -> list[int]:
        return [self.lookup(token) for token in tokens]

    def to_dict(self) -> dict:
        return {
            "tokens": self.id_to_token,
            "unk_policy": self.unk_policy,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Vocabulary":
        return cls(payload["tokens"], payload["unk_policy"], payload["seed"])


def build_vocab(
    token_lists: list[list[str]],
    unk_policy: str = POLICY_HASHED_RANDOM,
    seed: int = 0,
) -> Vocabulary:
    """Assign ids in first-occurrence order after the reserved rows."""
    if not token_lists:
        raise DataError("cannot build a vocabulary from zero commands")
    id_to_token = [PAD_TOKEN, UNK_TOKEN]
    seen = set(id_to_token)
    for tokens in token_lists:
        for token in tokens:
            if token not in seen:
                seen.add(token)
                id_to_token.append(token)
    return Vocabulary(id_to_token, unk_policy, seed)

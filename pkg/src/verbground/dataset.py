"""Training/evaluation data construction.

Builds class-disjoint splits from verb-object pairs, expands commands
from templates, and assembles balanced positive/negative training
samples against a feature store. All generation is a pure function of
(inputs, seed).

Samples file layout (``VGSAMP01``), little-endian:

    8 bytes   magic
    u64       JSON header byte length
    bytes     JSON header: {dim, count, vocab:{tokens, unk_policy, seed}}
    per sample:
        u16         token count T
        T x u32     token ids
        i8          label (+1 / -1)
        u16         verb byte length, then UTF-8 bytes
        u16         class-name byte length, then UTF-8 bytes
        u32         instance id
        dim x f32   feature vector
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError, DataError, ParseError
from .features import FeatureRecord, FeatureStore, VerbObjectPair
from .text import (
    MODE_VERB_ONLY,
    Vocabulary,
    build_vocab,
    templates_for_mode,
    tokenize,
)

SAMPLES_MAGIC = b"VGSAMP01"


def load_pairs(path) -> list[VerbObjectPair]:
    """Read the miner's TSV (frequency column optional) into a deduplicated,
    sorted pair list."""
    pairs = set()
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line:
                continue
            columns = line.split("\t")
            if len(columns) not in (2, 3):
                raise ParseError(
                    f"expected 2 or 3 tab-separated columns, got {len(columns)}",
                    line_number,
                )
            verb, object_class = columns[0].strip(), columns[1].strip()
            if not verb or not object_class:
                raise ParseError("empty verb or object field", line_number)
            pairs.add(VerbObjectPair(verb.lower(), object_class.lower()))
    if not pairs:
        raise DataError(f"no verb-object pairs in {path}")
    return sorted(pairs)


@dataclass(frozen=True)
class SplitManifest:
    seed: int
    holdout_fraction: float
    train_classes: tuple[str, ...]
    test_classes: tuple[str, ...]
    train_pairs: tuple[VerbObjectPair, ...]
    test_pairs: tuple[VerbObjectPair, ...]

    @property
    def all_pairs(self) -> tuple[VerbObjectPair, ...]:
        return self.train_pairs + self.test_pairs

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "holdout_fraction": self.holdout_fraction,
            "train_classes": list(self.train_classes),
            "test_classes": list(self.test_classes),
            "train_pairs": [list(p) for p in self.train_pairs],
            "test_pairs": [list(p) for p in self.test_pairs],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SplitManifest":
        return cls(
            seed=payload["seed"],
            holdout_fraction=payload["holdout_fraction"],
            train_classes=tuple(payload["train_classes"]),
            test_classes=tuple(payload["test_classes"]),
            train_pairs=tuple(VerbObjectPair(*p) for p in payload["train_pairs"]),
            test_pairs=tuple(VerbObjectPair(*p) for p in payload["test_pairs"]),
        )


def split_by_object(
    pairs: list[VerbObjectPair], holdout_fraction: float, seed: int
) -> SplitManifest:
    """Hold out a seeded-random fraction of the object classes for testing.

    Only classes are disjoint; verbs may appear on both sides. The test
    side receives floor(holdout_fraction * n_classes) classes, and a
    split that would receive zero classes is an error.
    """
    if not 0.0 < holdout_fraction < 1.0:
        raise DataError(f"holdout fraction must be in (0, 1), got {holdout_fraction}")
    classes = sorted({pair.object_class for pair in pairs})
    if len(classes) < 2:
        raise DataError("need at least 2 distinct object classes to split")
    n_test = int(math.floor(holdout_fraction * len(classes) + 1e-9))
    if n_test == 0:
        raise DataError(
            f"test split receives zero of {len(classes)} classes at "
            f"holdout fraction {holdout_fraction}"
        )
    if n_test == len(classes):
        raise DataError("train split receives zero classes")
    rng = np.random.default_rng(seed)
    shuffled = [classes[int(i)] for i in rng.permutation(len(classes))]
    test_classes = sorted(shuffled[:n_test])
    train_classes = sorted(shuffled[n_test:])
    test_set = set(test_classes)
    ordered = sorted(set(pairs))
    return SplitManifest(
        seed=seed,
        holdout_fraction=holdout_fraction,
        train_classes=tuple(train_classes),
        test_classes=tuple(test_classes),
        train_pairs=tuple(p for p in ordered if p.object_class not in test_set),
        test_pairs=tuple(p for p in ordered if p.object_class in test_set),
    )


def save_manifest(manifest: SplitManifest, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(manifest.to_dict(), handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_manifest(path) -> SplitManifest:
    with open(path, "r", encoding="utf-8") as handle:
        return SplitManifest.from_dict(json.load(handle))


@dataclass(frozen=True)
class TrainingSample:
    tokens: tuple[str, ...]
    token_ids: tuple[int, ...]
    feature: np.ndarray
    label: int
    verb: str
    object_class: str
    instance_id: int


@dataclass
class TrainingSet:
    samples: list[TrainingSample]
    vocab: Vocabulary
    dim: int


def negative_sample(
    verb: str,
    pair_set: set[VerbObjectPair],
    store: FeatureStore,
    rng: np.random.Generator,
    classes: list[str] | None = None,
) -> FeatureRecord:
    """Uniformly pick an instance whose class cannot be paired with the verb.

    The draw is uniform over the pooled instances of all non-pairable
    classes (so classes with more instances are proportionally likelier).
    """
    pool_classes = classes if classes is not None else store.classes
    candidates = [
        record
        for object_class in pool_classes
        if VerbObjectPair(verb, object_class) not in pair_set
        for record in store.instances_of(object_class)
    ]
    if not candidates:
        raise DataError(
            f"verb {verb!r} is compatible with every available object class; "
            "no negative sample exists"
        )
    return candidates[int(rng.integers(len(candidates)))]


def generate_training_set(
    manifest: SplitManifest,
    templates,
    store: FeatureStore,
    target_size: int,
    seed: int,
    mode: str = MODE_VERB_ONLY,
    unk_policy: str = "hashed-random",
) -> TrainingSet:
    """Exactly ``target_size`` positives plus as many negatives.

    Each training pair appears floor(target/n) or ceil(target/n) times
    (the extra occurrences go to a seeded-random subset of pairs); every
    occurrence pairs a seeded-random template expansion with a
    seeded-random instance of the pair's class. Each positive spawns one
    negative sharing its command but carrying a feature of a class the
    verb cannot be paired with, drawn from the training classes only.
    The combined list is shuffled by the same seed.
    """
    train_pairs = list(manifest.train_pairs)
    if not train_pairs:
        raise DataError("manifest has no training pairs")
    if target_size < len(train_pairs):
        raise DataError(
            f"target size {target_size} below the {len(train_pairs)} training pairs"
        )
    if len(store.classes) < 2:
        raise DataError("feature store must cover at least 2 object classes")
    available = set(store.classes)
    for object_class in manifest.train_classes:
        if object_class not in available:
            raise DataError(f"feature store has no instances of class {object_class!r}")

    usable_templates = templates_for_mode(templates, mode)
    pair_set = set(manifest.all_pairs)
    train_classes = list(manifest.train_classes)
    rng = np.random.default_rng(seed)

    counts = np.full(len(train_pairs), target_size // len(train_pairs), dtype=int)
    remainder = target_size % len(train_pairs)
    if remainder:
        extra = rng.permutation(len(train_pairs))[:remainder]
        counts[extra] += 1

    drafts = []  # (tokens, positive record, negative record, verb)
    for pair, count in zip(train_pairs, counts):
        instances = store.instances_of(pair.object_class)
        for _ in range(int(count)):
            template = usable_templates[int(rng.integers(len(usable_templates)))]
            noun = None if mode == MODE_VERB_ONLY else pair.object_class
            tokens = tuple(tokenize(template.render(pair.verb, noun)))
            positive = instances[int(rng.integers(len(instances)))]
            negative = negative_sample(pair.verb, pair_set, store, rng, train_classes)
            drafts.append((tokens, positive, negative, pair.verb))

    vocab = build_vocab([list(d[0]) for d in drafts], unk_policy=unk_policy, seed=seed)

    samples = []
    for tokens, positive, negative, verb in drafts:
        token_ids = tuple(vocab.encode(list(tokens)))
        samples.append(
            TrainingSample(
                tokens=tokens,
                token_ids=token_ids,
                feature=positive.vector,
                label=1,
                verb=verb,
                object_class=positive.object_class,
                instance_id=positive.instance_id,
            )
        )
        samples.append(
            TrainingSample(
                tokens=tokens,
                token_ids=token_ids,
                feature=negative.vector,
                label=-1,
                verb=verb,
                object_class=negative.object_class,
                instance_id=negative.instance_id,
            )
        )
    order = rng.permutation(len(samples))
    return TrainingSet(
        samples=[samples[int(i)] for i in order], vocab=vocab, dim=store.dim
    )


def samples_to_bytes(training_set: TrainingSet) -> bytes:
    header = json.dumps(
        {
            "dim": training_set.dim,
            "count": len(training_set.samples),
            "vocab": training_set.vocab.to_dict(),
        },
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    chunks = [SAMPLES_MAGIC, struct.pack("<Q", len(header)), header]
    for sample in training_set.samples:
        chunks.append(struct.pack("<H", len(sample.token_ids)))
        chunks.append(struct.pack(f"<{len(sample.token_ids)}I", *sample.token_ids))
        chunks.append(struct.pack("<b", sample.label))
        verb = sample.verb.encode("utf-8")
        chunks.append(struct.pack("<H", len(verb)))
        chunks.append(verb)
        name = sample.object_class.encode("utf-8")
        chunks.append(struct.pack("<H", len(name)))
        chunks.append(name)
        chunks.append(struct.pack("<I", sample.instance_id))
        chunks.append(sample.feature.astype("<f4", copy=False).tobytes())
    return b"".join(chunks)


def samples_from_bytes(blob: bytes) -> TrainingSet:
    if blob[:8] != SAMPLES_MAGIC:
        raise CheckpointError("bad magic: not a samples file")
    (header_len,) = struct.unpack_from("<Q", blob, 8)
    header_end = 16 + header_len
    if header_end > len(blob):
        raise CheckpointError("truncated samples header")
    header = json.loads(blob[16:header_end].decode("utf-8"))
    vocab = Vocabulary.from_dict(header["vocab"])
    dim = int(header["dim"])
    offset = header_end
    samples = []
    for _ in range(int(header["count"])):
        (n_tokens,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        token_ids = struct.unpack_from(f"<{n_tokens}I", blob, offset)
        offset += 4 * n_tokens
        (label,) = struct.unpack_from("<b", blob, offset)
        offset += 1
        (verb_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        verb = blob[offset : offset + verb_len].decode("utf-8")
        offset += verb_len
        (name_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        object_class = blob[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (instance_id,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        if offset + dim * 4 > len(blob):
            raise CheckpointError("truncated samples record")
        feature = np.frombuffer(blob, dtype="<f4", count=dim, offset=offset).copy()
        offset += dim * 4
        tokens = tuple(
            vocab.id_to_token[i] if i < vocab.size else "<oov>" for i in token_ids
        )
        samples.append(
            TrainingSample(
                tokens=tokens,
                token_ids=tuple(int(i) for i in token_ids),
                feature=feature,
                label=int(label),
                verb=verb,
                object_class=object_class,
                instance_id=int(instance_id),
            )
        )
    if offset != len(blob):
        raise CheckpointError(f"{len(blob) - offset} trailing bytes in samples file")
    return TrainingSet(samples=samples, vocab=vocab, dim=dim)


def save_samples(training_set: TrainingSet, path) -> None:
    with open(path, "wb") as handle:
        handle.write(samples_to_bytes(training_set))


def load_samples(path) -> TrainingSet:
    with open(path, "rb") as handle:
        return samples_from_bytes(handle.read())

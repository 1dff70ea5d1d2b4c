"""Object feature records and the FEAT binary store format.

A record is (object_class, instance_id, vector). Vectors come from a
frozen image encoder in production and from ``synth_features`` in tests;
either way they are float32 and never trained here.

FEAT file layout, little-endian throughout:

    8 bytes   magic ``VGFEAT01``
    u32       dim
    u32       record count
    per record:
        u16       class-name byte length
        bytes     class name, UTF-8
        u32       instance id
        dim x f32 feature vector
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import CheckpointError, DataError

FEAT_MAGIC = b"VGFEAT01"


class VerbObjectPair(NamedTuple):
    """An assertion that ``object_class`` can fulfil the task named by ``verb``."""

    verb: str
    object_class: str


@dataclass(frozen=True)
class FeatureRecord:
    object_class: str
    instance_id: int
    vector: np.ndarray


class FeatureStore:
    """In-memory collection of feature records with unique (class, instance) keys."""

    def __init__(self, dim: int, records: list[FeatureRecord]):
        self.dim = int(dim)
        self.records = list(records)
        self._by_key: dict[tuple[str, int], FeatureRecord] = {}
        self._by_class: dict[str, list[FeatureRecord]] = {}
        for record in self.records:
            if record.vector.shape != (self.dim,):
                raise DataError(
                    f"feature for {record.object_class}/{record.instance_id} has "
                    f"shape {record.vector.shape}, expected ({self.dim},)"
                )
            if not np.isfinite(record.vector).all() or not record.vector.any():
                raise DataError(
                    f"feature for {record.object_class}/{record.instance_id} is "
                    "zero or non-finite"
                )
            key = (record.object_class, record.instance_id)
            if key in self._by_key:
                raise DataError(f"duplicate feature record {key}")
            self._by_key[key] = record
            self._by_class.setdefault(record.object_class, []).append(record)

    @property
    def classes(self) -> list[str]:
        return sorted(self._by_class)

    def instances_of(self, object_class: str) -> list[FeatureRecord]:
        try:
            return self._by_class[object_class]
        except KeyError:
            raise DataError(f"no features for object class {object_class!r}") from None

    def get(self, object_class: str, instance_id: int) -> FeatureRecord:
        try:
            return self._by_key[(object_class, instance_id)]
        except KeyError:
            raise DataError(
                f"missing feature record ({object_class!r}, {instance_id})"
            ) from None

    def __len__(self) -> int:
        return len(self.records)


def write_feat(store: FeatureStore, path) -> None:
    with open(path, "wb") as handle:
        handle.write(FEAT_MAGIC)
        handle.write(struct.pack("<II", store.dim, len(store.records)))
        for record in store.records:
            name = record.object_class.encode("utf-8")
            handle.write(struct.pack("<H", len(name)))
            handle.write(name)
            handle.write(struct.pack("<I", record.instance_id))
            handle.write(record.vector.astype("<f4", copy=False).tobytes())


def read_feat(path) -> FeatureStore:
    with open(path, "rb") as handle:
        blob = handle.read()
    if blob[:8] != FEAT_MAGIC:
        raise CheckpointError(f"bad magic in {path}: not a FEAT file")
    if len(blob) < 16:
        raise CheckpointError(f"truncated FEAT header in {path}")
    dim, count = struct.unpack_from("<II", blob, 8)
    offset = 16
    records = []
    vec_bytes = dim * 4
    for _ in range(count):
        if offset + 2 > len(blob):
            raise CheckpointError(f"truncated FEAT record in {path}")
        (name_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        end = offset + name_len + 4 + vec_bytes
        if end > len(blob):
            raise CheckpointError(f"truncated FEAT record in {path}")
        name = blob[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (instance_id,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        vector = np.frombuffer(blob, dtype="<f4", count=dim, offset=offset).copy()
        offset += vec_bytes
        records.append(FeatureRecord(name, instance_id, vector))
    if offset != len(blob):
        raise CheckpointError(f"{len(blob) - offset} trailing bytes in {path}")
    return FeatureStore(dim, records)


def synth_features(
    n_verbs: int,
    n_classes: int,
    instances_per_class: int,
    dim: int,
    cluster_separation: float,
    noise_sigma: float,
    seed: int,
) -> tuple[FeatureStore, list[VerbObjectPair]]:
    """Desk-scale stand-in for real image features.

    Every verb gets a random unit concept direction. Every class draws
    1-3 verbs; its centroid is the normalized sum of those directions
    scaled by ``cluster_separation``, and instances are the centroid plus
    isotropic Gaussian noise. Returns the store and the ground-truth
    pair list, both fully determined by the seed.
    """
    if n_verbs < 2 or n_classes < n_verbs:
        raise DataError("need n_classes >= n_verbs >= 2")
    if dim < 8:
        raise DataError("need dim >= 8")
    rng = np.random.default_rng(seed)
    verbs = [_synth_verb_name(i) for i in range(n_verbs)]
    directions = rng.standard_normal((n_verbs, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)

    records = []
    pairs = []
    max_assigned = min(3, n_verbs)
    for c in range(n_classes):
        object_class = f"obj{c:03d}"
        n_assigned = int(rng.integers(1, max_assigned + 1))
        assigned = sorted(int(v) for v in rng.choice(n_verbs, size=n_assigned, replace=False))
        centroid = directions[assigned].sum(axis=0)
        centroid = centroid / np.linalg.norm(centroid) * cluster_separation
        for verb_index in assigned:
            pairs.append(VerbObjectPair(verbs[verb_index], object_class))
        for instance_id in range(instances_per_class):
            noise = rng.standard_normal(dim) * noise_sigma
            vector = (centroid + noise).astype(np.float32)
            records.append(FeatureRecord(object_class, instance_id, vector))
    return FeatureStore(dim, records), sorted(pairs)


_SYNTH_VERBS = [
    "contain", "construct", "cut", "don", "eat", "grow", "hit", "insert",
    "open", "play", "protect", "rotate", "serve", "wear", "wrap", "write",
]


def _synth_verb_name(i: int) -> str:
    if i < len(_SYNTH_VERBS):
        return _SYNTH_VERBS[i]
    return f"verb{i:03d}"

"""FEAT store format and the synthetic feature generator."""

import numpy as np
import pytest

from verbground.errors import CheckpointError, DataError
from verbground.features import (
    FEAT_MAGIC,
    FeatureRecord,
    FeatureStore,
    read_feat,
    synth_features,
    write_feat,
)


def small_store(dim=8):
    rng = np.random.default_rng(0)
    records = [
        FeatureRecord("cup", 0, rng.standard_normal(dim).astype(np.float32)),
        FeatureRecord("cup", 1, rng.standard_normal(dim).astype(np.float32)),
        FeatureRecord("knife", 0, rng.standard_normal(dim).astype(np.float32)),
    ]
    return FeatureStore(dim, records)


class TestFeatureStore:
    def test_duplicate_key_rejected(self):
        vec = np.ones(4, dtype=np.float32)
        with pytest.raises(DataError):
            FeatureStore(4, [FeatureRecord("cup", 0, vec), FeatureRecord("cup", 0, vec)])

    def test_zero_vector_rejected(self):
        with pytest.raises(DataError):
            FeatureStore(4, [FeatureRecord("cup", 0, np.zeros(4, dtype=np.float32))])

    def test_wrong_dim_rejected(self):
        with pytest.raises(DataError):
            FeatureStore(4, [FeatureRecord("cup", 0, np.ones(5, dtype=np.float32))])

    def test_lookup(self):
        store = small_store()
        assert store.get("cup", 1).instance_id == 1
        assert store.classes == ["cup", "knife"]
        with pytest.raises(DataError):
            store.get("cup", 9)


class TestFeatFile:
    def test_round_trip(self, tmp_path):
        store = small_store()
        path = tmp_path / "features.feat"
        write_feat(store, path)
        assert path.read_bytes()[:8] == FEAT_MAGIC
        loaded = read_feat(path)
        assert loaded.dim == store.dim
        assert len(loaded) == len(store)
        for original, copy in zip(store.records, loaded.records):
            assert original.object_class == copy.object_class
            assert original.instance_id == copy.instance_id
            np.testing.assert_array_equal(original.vector, copy.vector)

    def test_write_is_deterministic(self, tmp_path):
        store = small_store()
        a, b = tmp_path / "a.feat", tmp_path / "b.feat"
        write_feat(store, a)
        write_feat(store, b)
        assert a.read_bytes() == b.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.feat"
        path.write_bytes(b"NOTAFEAT" + b"\x00" * 16)
        with pytest.raises(CheckpointError, match="magic"):
            read_feat(path)

    def test_truncated_record(self, tmp_path):
        store = small_store()
        path = tmp_path / "features.feat"
        write_feat(store, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-5])
        with pytest.raises(CheckpointError, match="truncated"):
            read_feat(path)


class TestSynthFeatures:
    def test_same_seed_identical_bytes(self, tmp_path):
        paths = []
        for name in ("a.feat", "b.feat"):
            store, _ = synth_features(4, 8, 3, 16, 8.0, 1.0, seed=5)
            path = tmp_path / name
            write_feat(store, path)
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_zero_noise_collapses_instances(self):
        store, _ = synth_features(4, 8, 3, 16, 8.0, 0.0, seed=5)
        for object_class in store.classes:
            instances = store.instances_of(object_class)
            for record in instances[1:]:
                np.testing.assert_array_equal(record.vector, instances[0].vector)

    def test_pairs_cover_every_class(self):
        store, pairs = synth_features(4, 8, 3, 16, 8.0, 1.0, seed=5)
        assert {p.object_class for p in pairs} == set(store.classes)
        assert all(1 <= len([p for p in pairs if p.object_class == c]) <= 3
                   for c in store.classes)

    def test_separation_beats_noise_in_cosine(self):
        # within-class similarity must exceed cross-class (no shared verb)
        store, pairs = synth_features(10, 20, 10, 64, 8.0, 1.0, seed=7)
        verbs_of = {}
        for pair in pairs:
            verbs_of.setdefault(pair.object_class, set()).add(pair.verb)

        def cosine(a, b):
            return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))

        within = []
        for object_class in store.classes:
            instances = store.instances_of(object_class)
            within.extend(
                cosine(instances[i].vector, instances[j].vector)
                for i in range(len(instances))
                for j in range(i + 1, len(instances))
            )
        cross = []
        classes = store.classes
        for i, class_a in enumerate(classes):
            for class_b in classes[i + 1 :]:
                if verbs_of[class_a] & verbs_of[class_b]:
                    continue
                cross.append(
                    cosine(
                        store.instances_of(class_a)[0].vector,
                        store.instances_of(class_b)[0].vector,
                    )
                )
        assert np.mean(within) > np.mean(cross)

    def test_preconditions(self):
        with pytest.raises(DataError):
            synth_features(1, 4, 2, 16, 8.0, 1.0, seed=0)
        with pytest.raises(DataError):
            synth_features(4, 2, 2, 16, 8.0, 1.0, seed=0)
        with pytest.raises(DataError):
            synth_features(2, 4, 2, 4, 8.0, 1.0, seed=0)

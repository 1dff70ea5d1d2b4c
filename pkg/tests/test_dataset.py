"""Pair loading, class-disjoint splits, and training-set generation."""

import numpy as np
import pytest

from verbground.dataset import (
    SplitManifest,
    generate_training_set,
    load_manifest,
    load_pairs,
    load_samples,
    negative_sample,
    samples_from_bytes,
    samples_to_bytes,
    save_manifest,
    save_samples,
    split_by_object,
)
from verbground.errors import DataError, ParseError
from verbground.features import VerbObjectPair, synth_features
from verbground.text import MODE_VERB_NOUN, MODE_VERB_ONLY, default_templates


class TestLoadPairs:
    def test_table_style_pairs(self, tmp_path):
        path = tmp_path / "pairs.tsv"
        path.write_text("contain\tbucket\ncut\tcleaver\n")
        assert load_pairs(path) == [
            VerbObjectPair("contain", "bucket"),
            VerbObjectPair("cut", "cleaver"),
        ]

    def test_duplicates_collapse(self, tmp_path):
        path = tmp_path / "pairs.tsv"
        path.write_text("cut\tcleaver\t3\ncut\tcleaver\t1\n")
        assert load_pairs(path) == [VerbObjectPair("cut", "cleaver")]

    def test_single_column_errors(self, tmp_path):
        path = tmp_path / "pairs.tsv"
        path.write_text("cut\n")
        with pytest.raises(ParseError, match="line 1"):
            load_pairs(path)

    def test_empty_file_errors(self, tmp_path):
        path = tmp_path / "pairs.tsv"
        path.write_text("")
        with pytest.raises(DataError):
            load_pairs(path)


def pairs_over_classes(n_classes, verbs=("cut", "wear", "play")):
    pairs = []
    for i in range(n_classes):
        pairs.append(VerbObjectPair(verbs[i % len(verbs)], f"obj{i:03d}"))
    return pairs


class TestSplitByObject:
    def test_paper_scale_class_counts(self):
        manifest = split_by_object(pairs_over_classes(216), 0.2, seed=0)
        assert len(manifest.test_classes) == 43
        assert len(manifest.train_classes) == 173

    def test_small_case_ceiling_free(self):
        manifest = split_by_object(pairs_over_classes(5), 0.2, seed=0)
        assert len(manifest.test_classes) == 1
        assert len(manifest.train_classes) == 4

    def test_same_seed_identical(self):
        pairs = pairs_over_classes(30)
        assert split_by_object(pairs, 0.2, seed=9) == split_by_object(pairs, 0.2, seed=9)

    def test_split_routes_every_pair_once(self):
        pairs = pairs_over_classes(30)
        manifest = split_by_object(pairs, 0.3, seed=1)
        assert sorted(manifest.train_pairs + manifest.test_pairs) == sorted(pairs)

    def test_disjoint_classes_over_seeds(self):
        pairs = pairs_over_classes(17)
        for seed in range(50):
            manifest = split_by_object(pairs, 0.25, seed=seed)
            assert not set(manifest.train_classes) & set(manifest.test_classes)
            for pair in manifest.test_pairs:
                assert pair.object_class in manifest.test_classes
            for pair in manifest.train_pairs:
                assert pair.object_class in manifest.train_classes

    def test_zero_class_split_errors(self):
        with pytest.raises(DataError):
            split_by_object(pairs_over_classes(4), 0.1, seed=0)

    def test_fraction_bounds(self):
        with pytest.raises(DataError):
            split_by_object(pairs_over_classes(4), 0.0, seed=0)
        with pytest.raises(DataError):
            split_by_object(pairs_over_classes(4), 1.0, seed=0)

    def test_manifest_round_trip(self, tmp_path):
        manifest = split_by_object(pairs_over_classes(12), 0.25, seed=3)
        path = tmp_path / "manifest.json"
        save_manifest(manifest, path)
        assert load_manifest(path) == manifest


@pytest.fixture(scope="module")
def synth_world():
    store, pairs = synth_features(6, 12, 4, 16, 8.0, 1.0, seed=21)
    manifest = split_by_object(pairs, 0.25, seed=21)
    return store, pairs, manifest


class TestNegativeSample:
    def test_only_valid_class_chosen(self, synth_world):
        store, _, _ = synth_world
        pair_set = {VerbObjectPair("cut", c) for c in store.classes[1:]}
        rng = np.random.default_rng(0)
        for _ in range(20):
            record = negative_sample("cut", pair_set, store, rng)
            assert record.object_class == store.classes[0]

    def test_fully_compatible_verb_errors(self, synth_world):
        store, _, _ = synth_world
        pair_set = {VerbObjectPair("cut", c) for c in store.classes}
        with pytest.raises(DataError, match="cut"):
            negative_sample("cut", pair_set, store, np.random.default_rng(0))

    def test_uniform_over_instances(self):
        # two valid classes, equal instance counts: frequencies 0.5 +- 0.03
        store, _ = synth_features(2, 4, 10, 16, 8.0, 1.0, seed=3)
        classes = store.classes
        pair_set = {VerbObjectPair("cut", c) for c in classes[2:]}
        rng = np.random.default_rng(42)
        draws = [negative_sample("cut", pair_set, store, rng).object_class
                 for _ in range(10_000)]
        frequency = draws.count(classes[0]) / len(draws)
        assert abs(frequency - 0.5) < 0.03


class TestGenerateTrainingSet:
    def test_balance_is_exact(self, synth_world):
        store, _, manifest = synth_world
        training_set = generate_training_set(
            manifest, default_templates(), store, target_size=40, seed=5
        )
        labels = [s.label for s in training_set.samples]
        assert labels.count(1) == 40
        assert labels.count(-1) == 40

    def test_pair_occurrence_counts(self, synth_world):
        store, _, manifest = synth_world
        target = 41
        training_set = generate_training_set(
            manifest, default_templates(), store, target_size=target, seed=5
        )
        n_pairs = len(manifest.train_pairs)
        per_pair = {}
        for sample in training_set.samples:
            if sample.label == 1:
                key = (sample.verb, sample.object_class)
                per_pair[key] = per_pair.get(key, 0) + 1
        assert sum(per_pair.values()) == target
        low, high = target // n_pairs, -(-target // n_pairs)
        assert set(per_pair.values()) <= {low, high}
        assert set(per_pair) == {tuple(p) for p in manifest.train_pairs}

    def test_label_soundness_exhaustive(self, synth_world):
        store, pairs, manifest = synth_world
        pair_set = set(pairs)
        training_set = generate_training_set(
            manifest, default_templates(), store, target_size=60, seed=8
        )
        for sample in training_set.samples:
            member = VerbObjectPair(sample.verb, sample.object_class) in pair_set
            assert member == (sample.label == 1)

    def test_negatives_stay_in_train_classes(self, synth_world):
        store, _, manifest = synth_world
        training_set = generate_training_set(
            manifest, default_templates(), store, target_size=40, seed=5
        )
        train_classes = set(manifest.train_classes)
        for sample in training_set.samples:
            assert sample.object_class in train_classes

    def test_same_seed_byte_identical(self, synth_world):
        store, _, manifest = synth_world
        blobs = [
            samples_to_bytes(
                generate_training_set(
                    manifest, default_templates(), store, target_size=30, seed=13
                )
            )
            for _ in range(2)
        ]
        assert blobs[0] == blobs[1]

    def test_target_below_pair_count_errors(self, synth_world):
        store, _, manifest = synth_world
        with pytest.raises(DataError):
            generate_training_set(
                manifest, default_templates(), store,
                target_size=len(manifest.train_pairs) - 1, seed=0,
            )

    def test_missing_class_named(self, synth_world):
        store, pairs, _ = synth_world
        extra = sorted(set(pairs) | {VerbObjectPair("cut", "zzz_unseen")})
        manifest = SplitManifest(
            seed=0,
            holdout_fraction=0.25,
            train_classes=tuple(sorted({p.object_class for p in extra[:-1]} | {"zzz_unseen"})),
            test_classes=("obj011",),
            train_pairs=tuple(p for p in extra if p.object_class != "obj011"),
            test_pairs=tuple(p for p in extra if p.object_class == "obj011"),
        )
        with pytest.raises(DataError, match="zzz_unseen"):
            generate_training_set(
                manifest, default_templates(), store, target_size=100, seed=0
            )

    def test_verb_noun_mode_includes_object_token(self, synth_world):
        store, _, manifest = synth_world
        training_set = generate_training_set(
            manifest, default_templates(), store, target_size=30, seed=5,
            mode=MODE_VERB_NOUN,
        )
        positives = [s for s in training_set.samples if s.label == 1]
        assert all(s.object_class in s.tokens for s in positives)

    def test_tokens_all_in_vocab(self, synth_world):
        store, _, manifest = synth_world
        training_set = generate_training_set(
            manifest, default_templates(), store, target_size=30, seed=5
        )
        for sample in training_set.samples:
            assert all(i < training_set.vocab.size for i in sample.token_ids)


class TestSamplesFile:
    def test_round_trip(self, synth_world, tmp_path):
        store, _, manifest = synth_world
        training_set = generate_training_set(
            manifest, default_templates(), store, target_size=25, seed=2
        )
        path = tmp_path / "samples.bin"
        save_samples(training_set, path)
        loaded = load_samples(path)
        assert len(loaded.samples) == len(training_set.samples)
        assert loaded.vocab.id_to_token == training_set.vocab.id_to_token
        for original, copy in zip(training_set.samples, loaded.samples):
            assert original.token_ids == copy.token_ids
            assert original.tokens == copy.tokens
            assert original.label == copy.label
            assert original.verb == copy.verb
            assert original.object_class == copy.object_class
            np.testing.assert_array_equal(original.feature, copy.feature)
        # serialization is stable through a load/save cycle
        assert samples_to_bytes(loaded) == path.read_bytes()

    def test_bad_magic(self):
        from verbground.errors import CheckpointError

        with pytest.raises(CheckpointError, match="magic"):
            samples_from_bytes(b"WRONG!!!" + b"\x00" * 8)

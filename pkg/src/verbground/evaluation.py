"""Five-candidate retrieval evaluation.

A task pairs one generated command with five candidate objects of
distinct classes, exactly one of which (the gold) can be paired with the
command's verb; the other four are distractors whose classes admit no
pairing with that verb. A trained checkpoint ranks candidates by cosine
similarity between the command embedding and each candidate feature.
Accuracies are averaged over repeated runs with fresh task samples and
reported with standard errors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .features import FeatureStore, VerbObjectPair
from .model import cosine_similarity
from .text import (
    MODE_VERB_ONLY,
    MODE_VERB_UNKNOWN_NOUN,
    CommandTemplate,
    templates_for_mode,
    tokenize,
)
from .training import ModelCheckpoint, encode_command, train

N_CANDIDATES = 5


@dataclass(frozen=True)
class RetrievalTask:
    command_tokens: tuple[str, ...]
    candidates: tuple[tuple[str, int], ...]  # (object_class, instance_id) x 5
    gold_indices: frozenset[int]
    verb: str

    def to_dict(self) -> dict:
        return {
            "command_tokens": list(self.command_tokens),
            "candidates": [list(c) for c in self.candidates],
            "gold_indices": sorted(self.gold_indices),
            "verb": self.verb,
        }


@dataclass
class TaskGenConfig:
    test_pairs: list[VerbObjectPair]
    pair_set: set[VerbObjectPair]
    store: FeatureStore
    n_tasks: int
    mode: str = MODE_VERB_ONLY
    templates: list[CommandTemplate] = field(default_factory=list)
    seed: int = 0
    nonces: list[str] = field(default_factory=lambda: ["dax"])


def generate_tasks(config: TaskGenConfig, seed=None) -> list[RetrievalTask]:
    """Sample ``n_tasks`` retrieval tasks.

    Per task: a test pair is drawn uniformly, a gold instance of its
    class is drawn, four distractor instances come from distinct classes
    that cannot be paired with the verb, and the five candidates are
    shuffled. The command is rendered from a seeded template choice; in
    unknown-noun mode the object slot is filled with a nonce token.
    """
    if not config.test_pairs:
        raise DataError("no test pairs to generate tasks from")
    if len(config.store.classes) < N_CANDIDATES:
        raise DataError(
            f"store has {len(config.store.classes)} classes; "
            f"{N_CANDIDATES} are needed per task"
        )
    usable_templates = templates_for_mode(config.templates, config.mode)
    rng = np.random.default_rng(config.seed if seed is None else seed)
    classes = config.store.classes
    tasks = []
    for _ in range(config.n_tasks):
        pair = config.test_pairs[int(rng.integers(len(config.test_pairs)))]
        verb = pair.verb
        distractor_classes = [
            c
            for c in classes
            if c != pair.object_class and VerbObjectPair(verb, c) not in config.pair_set
        ]
        if len(distractor_classes) < N_CANDIDATES - 1:
            raise DataError(
                f"verb {verb!r} admits only {len(distractor_classes)} distractor "
                f"classes; {N_CANDIDATES - 1} are needed"
            )
        gold_instances = config.store.instances_of(pair.object_class)
        gold = gold_instances[int(rng.integers(len(gold_instances)))]
        chosen = rng.choice(len(distractor_classes), size=N_CANDIDATES - 1, replace=False)
        candidates = [(gold.object_class, gold.instance_id)]
        for class_index in chosen:
            instances = config.store.instances_of(distractor_classes[int(class_index)])
            record = instances[int(rng.integers(len(instances)))]
            candidates.append((record.object_class, record.instance_id))
        order = rng.permutation(N_CANDIDATES)
        shuffled = tuple(candidates[int(i)] for i in order)
        gold_indices = frozenset(
            i
            for i, (object_class, _) in enumerate(shuffled)
            if VerbObjectPair(verb, object_class) in config.pair_set
        )

        template = usable_templates[int(rng.integers(len(usable_templates)))]
        if config.mode == MODE_VERB_ONLY:
            command = template.render(verb)
        elif config.mode == MODE_VERB_UNKNOWN_NOUN:
            nonce = config.nonces[int(rng.integers(len(config.nonces)))]
            command = template.render(verb, nonce)
        else:
            command = template.render(verb, pair.object_class)
        tasks.append(
            RetrievalTask(
                command_tokens=tuple(tokenize(command)),
                candidates=shuffled,
                gold_indices=gold_indices,
                verb=verb,
            )
        )
    return tasks


def rank_candidates(
    checkpoint: ModelCheckpoint, task: RetrievalTask, store: FeatureStore
) -> list[int]:
    """Candidate indices ordered by descending cosine similarity to the
    command embedding; ties break toward the lower index."""
    embedding = encode_command(checkpoint, list(task.command_tokens))
    similarities = [
        cosine_similarity(embedding, store.get(object_class, instance_id).vector)
        for object_class, instance_id in task.candidates
    ]
    return sorted(range(len(task.candidates)), key=lambda i: (-similarities[i], i))


def topk_accuracy(
    rankings: list[list[int]], tasks: list[RetrievalTask], k: int
) -> float:
    if len(rankings) != len(tasks):
        raise DataError(
            f"{len(rankings)} rankings for {len(tasks)} tasks; lengths must match"
        )
    if not tasks:
        raise DataError("cannot score an empty task list")
    hits = sum(
        1 for ranking, task in zip(rankings, tasks) if task.gold_indices & set(ranking[:k])
    )
    return 100.0 * hits / len(tasks)


@dataclass
class EvalReport:
    n_tasks: int
    runs: int
    top1_mean: float
    top1_se: float
    top2_mean: float
    top2_se: float
    per_verb: dict[str, dict]
    config_fingerprint: str = ""
    mode: str = MODE_VERB_ONLY
    per_run_top1: list[float] = field(default_factory=list)
    per_run_top2: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n_tasks": self.n_tasks,
            "runs": self.runs,
            "top1_mean": self.top1_mean,
            "top1_se": self.top1_se,
            "top2_mean": self.top2_mean,
            "top2_se": self.top2_se,
            "per_verb": self.per_verb,
            "config_fingerprint": self.config_fingerprint,
            "mode": self.mode,
            "per_run_top1": self.per_run_top1,
            "per_run_top2": self.per_run_top2,
        }


def _standard_error(values: list[float]) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / np.sqrt(len(values)))


def run_eval(
    checkpoint: ModelCheckpoint,
    task_config: TaskGenConfig,
    runs: int,
    config_fingerprint: str = "",
) -> EvalReport:
    """Evaluate over ``runs`` independently sampled task sets.

    Run r uses the stream (seed, r), so task samples are fresh per run
    but the whole report is reproducible. Standard errors use the
    sample standard deviation (n-1) over per-run accuracies; a single
    run reports zero by convention.
    """
    if runs < 1:
        raise DataError(f"runs must be >= 1, got {runs}")
    per_run_top1 = []
    per_run_top2 = []
    verb_totals: dict[str, dict] = {}
    for run in range(runs):
        tasks = generate_tasks(task_config, seed=[task_config.seed, run])
        rankings = [rank_candidates(checkpoint, task, task_config.store) for task in tasks]
        per_run_top1.append(topk_accuracy(rankings, tasks, 1))
        per_run_top2.append(topk_accuracy(rankings, tasks, 2))
        for ranking, task in zip(rankings, tasks):
            bucket = verb_totals.setdefault(
                task.verb, {"top1_hits": 0, "top2_hits": 0, "n": 0}
            )
            bucket["n"] += 1
            if task.gold_indices & set(ranking[:1]):
                bucket["top1_hits"] += 1
            if task.gold_indices & set(ranking[:2]):
                bucket["top2_hits"] += 1
    per_verb = {
        verb: {
            "top1": 100.0 * totals["top1_hits"] / totals["n"],
            "top2": 100.0 * totals["top2_hits"] / totals["n"],
            "n": totals["n"],
        }
        for verb, totals in sorted(verb_totals.items())
    }
    return EvalReport(
        n_tasks=task_config.n_tasks,
        runs=runs,
        top1_mean=float(np.mean(per_run_top1)),
        top1_se=_standard_error(per_run_top1),
        top2_mean=float(np.mean(per_run_top2)),
        top2_se=_standard_error(per_run_top2),
        per_verb=per_verb,
        config_fingerprint=config_fingerprint,
        mode=task_config.mode,
        per_run_top1=per_run_top1,
        per_run_top2=per_run_top2,
    )


def random_baseline_exact(tasks: list[RetrievalTask]) -> tuple[float, float]:
    """Expected top-1/top-2 accuracy of a uniformly random ranker, by
    brute-force enumeration of all 120 candidate permutations."""
    if not tasks:
        raise DataError("cannot score an empty task list")
    perms = list(itertools.permutations(range(N_CANDIDATES)))
    hits1 = 0
    hits2 = 0
    for task in tasks:
        hits1 += sum(1 for perm in perms if perm[0] in task.gold_indices)
        hits2 += sum(1 for perm in perms if task.gold_indices & {perm[0], perm[1]})
    total = len(tasks) * len(perms)
    return 100.0 * hits1 / total, 100.0 * hits2 / total


def random_baseline(
    tasks: list[RetrievalTask], trials: int, seed: int = 0
) -> tuple[float, float]:
    """Monte Carlo estimate of the random-ranker baseline over uniform
    permutations of the five candidates."""
    if trials < 1:
        raise DataError(f"trials must be >= 1, got {trials}")
    if not tasks:
        raise DataError("cannot score an empty task list")
    rng = np.random.default_rng(seed)
    hits1 = 0
    hits2 = 0
    for _ in range(trials):
        task = tasks[int(rng.integers(len(tasks)))]
        perm = rng.permutation(N_CANDIDATES)
        if int(perm[0]) in task.gold_indices:
            hits1 += 1
        if task.gold_indices & {int(perm[0]), int(perm[1])}:
            hits2 += 1
    return 100.0 * hits1 / trials, 100.0 * hits2 / trials


@dataclass
class SweepRow:
    data_size: int
    top1_mean: float
    top1_se: float
    top2_mean: float
    top2_se: float

    def to_dict(self) -> dict:
        return {
            "data_size": self.data_size,
            "top1_mean": self.top1_mean,
            "top1_se": self.top1_se,
            "top2_mean": self.top2_mean,
            "top2_se": self.top2_se,
        }


def data_size_sweep(
    manifest,
    templates,
    store: FeatureStore,
    sizes: list[int],
    train_config,
    task_config: TaskGenConfig,
    runs: int,
    data_seed: int = 0,
    mode: str = MODE_VERB_ONLY,
    config_fingerprint: str = "",
) -> list[SweepRow]:
    """Train one model per data size and evaluate each on the same task
    stream (the eval seed is fixed across sizes, so run r sees identical
    tasks for every row)."""
    from .dataset import generate_training_set

    if sorted(sizes) != list(sizes):
        raise DataError("sizes must be ascending")
    rows = []
    for size in sizes:
        training_set = generate_training_set(
            manifest,
            templates,
            store,
            target_size=size,
            seed=data_seed,
            mode=mode,
            unk_policy=train_config.unk_policy,
        )
        checkpoint = train(train_config, training_set)
        report = run_eval(checkpoint, task_config, runs, config_fingerprint)
        rows.append(
            SweepRow(
                data_size=size,
                top1_mean=report.top1_mean,
                top1_se=report.top1_se,
                top2_mean=report.top2_mean,
                top2_se=report.top2_se,
            )
        )
    return rows


def cross_dataset_eval(
    checkpoint: ModelCheckpoint,
    external_store: FeatureStore,
    external_pairs: list[VerbObjectPair],
    task_config: TaskGenConfig,
    runs: int,
    config_fingerprint: str = "",
) -> EvalReport:
    """Evaluate an already-trained checkpoint on externally supplied
    features and pair annotations; no parameter updates occur.

    The store must match the checkpoint's feature dimension, and every
    external verb must be in the training vocabulary (nouns may be
    unknown; verbs carry the signal)."""
    out_dim = checkpoint.params.proj_bias.shape[0]
    if external_store.dim != out_dim:
        raise DataError(
            f"external store dim {external_store.dim} does not match "
            f"checkpoint dim {out_dim}"
        )
    unknown = sorted(
        {pair.verb for pair in external_pairs if pair.verb not in checkpoint.vocab}
    )
    if unknown:
        raise DataError(f"verbs not in checkpoint vocabulary: {unknown}")
    config = TaskGenConfig(
        test_pairs=list(external_pairs),
        pair_set=set(external_pairs),
        store=external_store,
        n_tasks=task_config.n_tasks,
        mode=task_config.mode,
        templates=task_config.templates,
        seed=task_config.seed,
        nonces=task_config.nonces,
    )
    return run_eval(checkpoint, config, runs, config_fingerprint)

"""Command-line entry point wiring the pipeline stages together.

Exit codes: 0 success, 1 usage error, 2 data/validation error,
3 numerical failure. Failures print a machine-parsable
``error_code: <code>:`` line to stderr. Relative output paths are
resolved under ``$VERBGROUND_OUTPUT_ROOT`` when that variable is set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import dataset, evaluation, features, mining, reporting, text, training
from .conllu import parse_conllu_file
from .errors import ConfigError, DataError, NumericalError, VerbGroundError
from .gradcheck import GradCheckSample, grad_check
from .model import Dims, init_params

GRADCHECK_THRESHOLD = 1e-3


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error_code: usage: {message}\n")
        raise SystemExit(1)


def _resolve_out(path_str: str) -> Path:
    path = Path(path_str)
    root = os.environ.get("VERBGROUND_OUTPUT_ROOT")
    if root and not path.is_absolute():
        path = Path(root) / path
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _load_run_config(args) -> config_mod.RunConfig:
    if getattr(args, "config", None):
        return config_mod.load_config(args.config)
    return config_mod.RunConfig()


def _templates(run_config, args):
    path = getattr(args, "templates", None) or run_config["dataset"]["templates_path"]
    if path:
        return text.load_templates(path)
    return text.default_templates()


def _seed(args, fallback) -> int:
    return args.seed if getattr(args, "seed", None) is not None else fallback


def build_parser() -> _Parser:
    parser = _Parser(prog="verbground", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mine", help="extract verb-object pairs from CoNLL-U parses")
    p.add_argument("--conllu", required=True, help="CoNLL-U file or directory of *.conllu files")
    p.add_argument("--out", required=True, help="output pairs TSV")
    p.add_argument("--config", default=None, help="run config JSON (default: built-in defaults)")
    p.add_argument("--verb-whitelist", default=None, help="one verb lemma per line (default: config)")
    p.add_argument("--object-whitelist", default=None, help="one object lemma per line (default: config)")
    p.add_argument("--min-frequency", type=int, default=None, help="minimum pair frequency (default: config, 1)")
    p.set_defaults(handler=cmd_mine)

    p = sub.add_parser("split", help="class-disjoint train/test split of a pair list")
    p.add_argument("--pairs", required=True, help="pairs TSV from mine")
    p.add_argument("--holdout", type=float, default=None, help="held-out class fraction (default: config, 0.2)")
    p.add_argument("--seed", type=int, default=None, help="shuffle seed (default: config, 0)")
    p.add_argument("--out", required=True, help="output manifest JSON")
    p.add_argument("--config", default=None, help="run config JSON")
    p.set_defaults(handler=cmd_split)

    p = sub.add_parser("build", help="generate balanced training samples")
    p.add_argument("--manifest", required=True, help="split manifest JSON")
    p.add_argument("--features", required=True, help="FEAT feature store")
    p.add_argument("--size", type=int, required=True, help="number of positive samples")
    p.add_argument("--out", required=True, help="output samples file")
    p.add_argument("--templates", default=None, help="templates file (default: built-in)")
    p.add_argument("--mode", default=None, choices=[text.MODE_VERB_ONLY, text.MODE_VERB_NOUN],
                   help="command mode (default: config, verb-only)")
    p.add_argument("--seed", type=int, default=None, help="generation seed (default: config, 0)")
    p.add_argument("--config", default=None, help="run config JSON")
    p.set_defaults(handler=cmd_build)

    p = sub.add_parser("synth", help="generate a synthetic feature store and pair list")
    p.add_argument("--spec", required=True, help="JSON generator spec")
    p.add_argument("--out", required=True, help="output FEAT file")
    p.add_argument("--pairs-out", default=None, help="also write the ground-truth pairs TSV here")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("train", help="train the language encoder")
    p.add_argument("--config", default=None, help="run config JSON")
    p.add_argument("--samples", required=True, help="samples file from build")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--log", default=None, help="write a JSONL training log here")
    p.add_argument("--debug-norms", action="store_true",
                   help="include per-layer parameter norms in each log entry")
    p.add_argument("--epochs", type=int, default=None, help="override train.epochs")
    p.add_argument("--lr", type=float, default=None, help="override train.lr")
    p.add_argument("--seed", type=int, default=None, help="override train.seed")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="run the retrieval evaluation protocol")
    p.add_argument("--ckpt", required=True, help="trained checkpoint")
    p.add_argument("--manifest", default=None, help="split manifest JSON (held-out evaluation)")
    p.add_argument("--pairs", default=None, help="external pairs TSV (cross-dataset evaluation)")
    p.add_argument("--features", required=True, help="FEAT feature store")
    p.add_argument("--mode", default=None, choices=list(text.MODES),
                   help="command mode (default: config, verb-only)")
    p.add_argument("--runs", type=int, default=None, help="repeated runs (default: config, 5)")
    p.add_argument("--tasks", type=int, default=None, help="tasks per run (default: config, 200)")
    p.add_argument("--seed", type=int, default=None, help="task sampling seed (default: config, 0)")
    p.add_argument("--templates", default=None, help="templates file (default: built-in)")
    p.add_argument("--out", required=True, help="output report JSON; .csv and .png siblings are derived")
    p.add_argument("--dump-tasks", default=None, help="write sampled tasks as JSON lines here")
    p.add_argument("--no-figure", action="store_true", help="skip the figure")
    p.add_argument("--config", default=None, help="run config JSON")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("sweep", help="train and evaluate across data sizes")
    p.add_argument("--config", default=None, help="run config JSON")
    p.add_argument("--manifest", required=True, help="split manifest JSON")
    p.add_argument("--features", required=True, help="FEAT feature store")
    p.add_argument("--sizes", required=True, help="comma-separated ascending data sizes")
    p.add_argument("--out-dir", required=True, help="directory for sweep.json/.csv/.png")
    p.add_argument("--runs", type=int, default=None, help="eval runs per size (default: config, 5)")
    p.add_argument("--tasks", type=int, default=None, help="tasks per run (default: config, 200)")
    p.add_argument("--seed", type=int, default=None, help="override all seeds")
    p.add_argument("--no-figure", action="store_true", help="skip the figure")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("retrieve", help="rank stored objects against one command")
    p.add_argument("--ckpt", required=True, help="trained checkpoint")
    p.add_argument("--features", required=True, help="FEAT feature store")
    p.add_argument("--command", required=True, help="natural language command")
    p.add_argument("--k", type=int, default=2, help="how many candidates to print")
    p.set_defaults(handler=cmd_retrieve)

    p = sub.add_parser("gradcheck", help="verify analytic gradients by finite differences")
    p.add_argument("--seed", type=int, default=0, help="random configuration seed")
    p.add_argument("--cell", default="both", choices=["elman", "gated", "both"],
                   help="which recurrent cell(s) to check")
    p.add_argument("--epsilon", type=float, default=1e-3, help="central-difference step")
    p.set_defaults(handler=cmd_gradcheck)

    return parser


def cmd_mine(args) -> int:
    run_config = _load_run_config(args)
    miner_cfg = run_config["miner"]
    source = Path(args.conllu)
    if source.is_dir():
        paths = sorted(source.glob("*.conllu"))
        if not paths:
            raise DataError(f"no *.conllu files in {source}")
    elif source.exists():
        paths = [source]
    else:
        raise DataError(f"no such file or directory: {source}")

    pairs = []
    n_sentences = 0
    for path in paths:
        sentences = parse_conllu_file(path)
        n_sentences += len(sentences)
        for sentence in sentences:
            pairs.extend(mining.extract_pairs(sentence))
    pairs = mining.aggregate_pairs(pairs)

    verb_path = args.verb_whitelist or miner_cfg["verb_whitelist"]
    object_path = args.object_whitelist or miner_cfg["object_whitelist"]
    min_frequency = (
        args.min_frequency if args.min_frequency is not None else miner_cfg["min_frequency"]
    )
    if object_path:
        pairs = mining.filter_pairs(
            pairs,
            object_whitelist=mining.load_whitelist(object_path),
            verb_whitelist=mining.load_whitelist(verb_path) if verb_path else None,
            min_frequency=min_frequency,
        )
    elif verb_path or min_frequency > 1:
        verbs = mining.load_whitelist(verb_path) if verb_path else None
        pairs = [
            pair
            for pair in pairs
            if (verbs is None or pair.verb in verbs) and pair.frequency >= min_frequency
        ]

    out = _resolve_out(args.out)
    mining.write_pairs_tsv(pairs, out)
    print(f"mined {len(pairs)} pairs from {n_sentences} sentences -> {out}")
    return 0


def cmd_split(args) -> int:
    run_config = _load_run_config(args)
    dataset_cfg = run_config["dataset"]
    pairs = dataset.load_pairs(args.pairs)
    holdout = args.holdout if args.holdout is not None else dataset_cfg["holdout_fraction"]
    seed = _seed(args, dataset_cfg["seed"])
    manifest = dataset.split_by_object(pairs, holdout, seed)
    out = _resolve_out(args.out)
    dataset.save_manifest(manifest, out)
    print(
        f"split {len(pairs)} pairs over {len(manifest.train_classes)} train / "
        f"{len(manifest.test_classes)} test classes -> {out}"
    )
    return 0


def cmd_build(args) -> int:
    run_config = _load_run_config(args)
    dataset_cfg = run_config["dataset"]
    manifest = dataset.load_manifest(args.manifest)
    store = features.read_feat(args.features)
    templates = _templates(run_config, args)
    mode = args.mode or dataset_cfg["mode"]
    seed = _seed(args, dataset_cfg["seed"])
    training_set = dataset.generate_training_set(
        manifest,
        templates,
        store,
        target_size=args.size,
        seed=seed,
        mode=mode,
        unk_policy=run_config["model"]["unk_policy"],
    )
    out = _resolve_out(args.out)
    dataset.save_samples(training_set, out)
    print(
        f"built {len(training_set.samples)} samples "
        f"({args.size} positive, vocab {training_set.vocab.size}) -> {out}"
    )
    return 0


_SYNTH_DEFAULTS = {
    "n_verbs": 10,
    "n_classes": 40,
    "instances_per_class": 20,
    "dim": 64,
    "cluster_separation": 8.0,
    "noise_sigma": 1.0,
    "seed": 0,
}


def cmd_synth(args) -> int:
    with open(args.spec, "r", encoding="utf-8") as handle:
        spec = json.load(handle)
    unknown = set(spec) - set(_SYNTH_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown synth spec keys: {sorted(unknown)}")
    merged = {**_SYNTH_DEFAULTS, **spec}
    store, pairs = features.synth_features(**merged)
    out = _resolve_out(args.out)
    features.write_feat(store, out)
    print(f"synthesized {len(store)} features over {len(store.classes)} classes -> {out}")
    if args.pairs_out:
        pairs_out = _resolve_out(args.pairs_out)
        mining.write_pairs_tsv(
            [mining.MinedPair(p.verb, p.object_class) for p in pairs], pairs_out
        )
        print(f"wrote {len(pairs)} ground-truth pairs -> {pairs_out}")
    return 0


def _train_config(run_config, args, seed=None) -> training.TrainConfig:
    model_cfg = run_config["model"]
    train_cfg = run_config["train"]
    return training.TrainConfig(
        epochs=getattr(args, "epochs", None) or train_cfg["epochs"],
        lr=getattr(args, "lr", None) or train_cfg["lr"],
        margin=model_cfg["margin"],
        batch_size=train_cfg["batch_size"],
        seed=seed if seed is not None else train_cfg["seed"],
        word_dim=model_cfg["word_dim"],
        hidden_dim=model_cfg["hidden_dim"],
        out_dim=model_cfg["out_dim"],
        unk_policy=model_cfg["unk_policy"],
        cell=model_cfg["cell"],
    )


def cmd_train(args) -> int:
    run_config = _load_run_config(args)
    training_set = dataset.load_samples(args.samples)
    config = _train_config(run_config, args, seed=_seed(args, run_config["train"]["seed"]))
    log_path = _resolve_out(args.log) if args.log else None
    checkpoint = training.train(
        config, training_set, log_path=log_path, collect_norms=args.debug_norms
    )
    out = _resolve_out(args.out)
    training.save_checkpoint(checkpoint, out)
    final = checkpoint.metadata["epoch_losses"][-1]
    print(
        f"trained {checkpoint.metadata['epochs_run']} epochs "
        f"(final mean loss {final:.6f}) -> {out}"
    )
    return 0


def _sub_store(store: features.FeatureStore, classes) -> features.FeatureStore:
    wanted = set(classes)
    records = [record for record in store.records if record.object_class in wanted]
    return features.FeatureStore(store.dim, records)


def cmd_eval(args) -> int:
    run_config = _load_run_config(args)
    eval_cfg = run_config["eval"]
    checkpoint = training.load_checkpoint(args.ckpt)
    store = features.read_feat(args.features)
    templates = _templates(run_config, args)
    mode = args.mode or eval_cfg["mode"]
    runs = args.runs if args.runs is not None else eval_cfg["runs"]
    n_tasks = args.tasks if args.tasks is not None else eval_cfg["n_tasks"]
    seed = _seed(args, eval_cfg["seed"])
    fingerprint = run_config.fingerprint()

    if (args.manifest is None) == (args.pairs is None):
        raise ConfigError("eval needs exactly one of --manifest or --pairs")

    if args.manifest:
        manifest = dataset.load_manifest(args.manifest)
        task_config = evaluation.TaskGenConfig(
            test_pairs=list(manifest.test_pairs),
            pair_set=set(manifest.all_pairs),
            store=_sub_store(store, manifest.test_classes),
            n_tasks=n_tasks,
            mode=mode,
            templates=templates,
            seed=seed,
            nonces=text.default_nonces(),
        )
        report = evaluation.run_eval(checkpoint, task_config, runs, fingerprint)
    else:
        external_pairs = [
            features.VerbObjectPair(p.verb, p.object) for p in mining.read_pairs_tsv(args.pairs)
        ]
        task_config = evaluation.TaskGenConfig(
            test_pairs=external_pairs,
            pair_set=set(external_pairs),
            store=store,
            n_tasks=n_tasks,
            mode=mode,
            templates=templates,
            seed=seed,
            nonces=text.default_nonces(),
        )
        report = evaluation.cross_dataset_eval(
            checkpoint, store, external_pairs, task_config, runs, fingerprint
        )

    out = _resolve_out(args.out)
    csv_path = out.with_suffix(".csv")
    figure_path = None if args.no_figure else out.with_suffix(".png")
    reporting.write_eval_report(report, out, csv_path, figure_path)
    if args.dump_tasks:
        tasks = evaluation.generate_tasks(task_config, seed=[task_config.seed, 0])
        reporting.write_task_dump(tasks, _resolve_out(args.dump_tasks))
    print(
        f"top-1 {report.top1_mean:.1f} ({report.top1_se:.2f})  "
        f"top-2 {report.top2_mean:.1f} ({report.top2_se:.2f})  "
        f"[{mode}, {runs} runs x {n_tasks} tasks] -> {out}"
    )
    return 0


def cmd_sweep(args) -> int:
    run_config = _load_run_config(args)
    eval_cfg = run_config["eval"]
    dataset_cfg = run_config["dataset"]
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s]
    except ValueError as exc:
        raise ConfigError(f"bad --sizes value {args.sizes!r}: {exc}") from exc
    manifest = dataset.load_manifest(args.manifest)
    store = features.read_feat(args.features)
    templates = _templates(run_config, args)
    data_seed = _seed(args, dataset_cfg["seed"])
    train_config = _train_config(run_config, args, seed=_seed(args, run_config["train"]["seed"]))
    task_config = evaluation.TaskGenConfig(
        test_pairs=list(manifest.test_pairs),
        pair_set=set(manifest.all_pairs),
        store=_sub_store(store, manifest.test_classes),
        n_tasks=args.tasks if args.tasks is not None else eval_cfg["n_tasks"],
        mode=eval_cfg["mode"],
        templates=templates,
        seed=_seed(args, eval_cfg["seed"]),
        nonces=text.default_nonces(),
    )
    rows = evaluation.data_size_sweep(
        manifest,
        templates,
        store,
        sizes,
        train_config,
        task_config,
        runs=args.runs if args.runs is not None else eval_cfg["runs"],
        data_seed=data_seed,
        mode=dataset_cfg["mode"],
        config_fingerprint=run_config.fingerprint(),
    )
    out_dir = _resolve_out(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reporting.write_sweep_report(
        rows,
        json_path=out_dir / "sweep.json",
        csv_path=out_dir / "sweep.csv",
        figure_path=None if args.no_figure else out_dir / "sweep.png",
        config_fingerprint=run_config.fingerprint(),
    )
    for row in rows:
        print(
            f"size {row.data_size}: top-1 {row.top1_mean:.1f} ({row.top1_se:.2f})  "
            f"top-2 {row.top2_mean:.1f} ({row.top2_se:.2f})"
        )
    print(f"sweep written to {out_dir}")
    return 0


def cmd_retrieve(args) -> int:
    checkpoint = training.load_checkpoint(args.ckpt)
    store = features.read_feat(args.features)
    embedding = training.encode_command_text(checkpoint, args.command)
    from .model import cosine_similarity

    scored = [
        (cosine_similarity(embedding, record.vector), record)
        for record in store.records
    ]
    scored.sort(key=lambda pair: (-pair[0], pair[1].object_class, pair[1].instance_id))
    for similarity, record in scored[: max(args.k, 1)]:
        print(f"{record.object_class}\t{record.instance_id}\t{similarity:.3f}")
    return 0


def cmd_gradcheck(args) -> int:
    cells = ["elman", "gated"] if args.cell == "both" else [args.cell]
    rng = np.random.default_rng(args.seed)
    dims = Dims(vocab_size=50, word_dim=16, hidden_dim=32, out_dim=64)
    worst = 0.0
    for cell in cells:
        params = init_params(dims, int(rng.integers(2**31)), cell)
        for y, margin in ((1, 0.0), (-1, -0.5)):
            length = int(rng.integers(3, 9))
            sample = GradCheckSample(
                token_ids=tuple(int(t) for t in rng.integers(0, dims.vocab_size, length)),
                target_feature=rng.standard_normal(dims.out_dim),
                y=y,
                margin=margin,
            )
            error = grad_check(params, sample, epsilon=args.epsilon, max_coordinates=1200)
            print(f"cell={cell} y={y:+d} max_rel_err={error:.3e}")
            worst = max(worst, error)
    print(f"max_relative_error: {worst:.6e}")
    if not worst < GRADCHECK_THRESHOLD:
        raise NumericalError(
            f"gradient check failed: {worst:.3e} >= {GRADCHECK_THRESHOLD:.0e}"
        )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except VerbGroundError as exc:
        print(f"error_code: {exc.error_code}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error_code: data: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

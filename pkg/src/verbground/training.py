"""Training loop and bit-exact checkpoint serialization.

Checkpoint file layout (``VGCKPT01``), little-endian:

    8 bytes   magic
    u64       JSON header byte length
    bytes     JSON header: config echo, vocabulary, training metadata,
              tensor manifest [{name, shape, offset}]
    bytes     tensors, row-major f32, in manifest order

Training is a pure function of (config, samples): the per-epoch shuffle
is derived from (seed, epoch) and updates are applied in sequence order,
so equal inputs give byte-identical checkpoints.
"""

from __future__ import annotations

import hashlib
import json
import struct
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import CheckpointError, ConfigError, DataError, NumericalError
from .dataset import TrainingSet, samples_to_bytes
from .model import (
    CELLS,
    Dims,
    EncoderParams,
    Gradients,
    TENSOR_NAMES,
    encoder_forward,
    init_params,
    loss_and_backward,
    param_norms,
)
from .optim import AdamState, adam_step
from .text import UNK_POLICIES, Vocabulary, tokenize

CHECKPOINT_MAGIC = b"VGCKPT01"

# rng stream tag for the validation split; epoch streams use the epoch index
_VAL_STREAM = 999983


@dataclass
class TrainConfig:
    epochs: int = 50
    lr: float = 1e-4
    margin: float = 0.0
    batch_size: int = 1
    seed: int = 0
    word_dim: int = 128
    hidden_dim: int = 256
    out_dim: int | None = None  # None: adopt the feature dimension of the data
    unk_policy: str = "hashed-random"
    cell: str = "elman"
    early_stop_patience: int = 0  # 0 disables early stopping
    val_fraction: float = 0.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr < 0:
            raise ConfigError(f"lr must be >= 0, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not -1.0 <= self.margin <= 1.0:
            raise ConfigError(f"margin must lie in [-1, 1], got {self.margin}")
        if self.cell not in CELLS:
            raise ConfigError(f"unknown cell {self.cell!r}")
        if self.unk_policy not in UNK_POLICIES:
            raise ConfigError(f"unknown unk policy {self.unk_policy!r}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError(f"val_fraction must lie in [0, 1), got {self.val_fraction}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**payload)


@dataclass
class ModelCheckpoint:
    config: TrainConfig
    vocab: Vocabulary
    params: EncoderParams
    metadata: dict = field(default_factory=dict)

    def fingerprint(self) -> str:
        return hashlib.sha256(checkpoint_to_bytes(self)).hexdigest()


def data_fingerprint(training_set: TrainingSet) -> str:
    return hashlib.sha256(samples_to_bytes(training_set)).hexdigest()


def train(
    config: TrainConfig,
    training_set: TrainingSet,
    log_path=None,
    collect_norms: bool = False,
) -> ModelCheckpoint:
    """Run the optimizer over the samples for the configured epoch budget.

    Per epoch: seeded shuffle, per-sample exact gradients (averaged over a
    mini-batch when batch_size > 1), one Adam step per batch, mean epoch
    loss recorded. A non-finite loss aborts with its epoch and sample
    index. Optional early stopping watches the monitored loss with the
    configured patience.
    """
    samples = training_set.samples
    if not samples:
        raise DataError("cannot train on an empty sample list")
    for sample in samples:
        if sample.feature.shape != (training_set.dim,):
            raise DataError(
                f"sample feature shape {sample.feature.shape} != dim {training_set.dim}"
            )
    out_dim = config.out_dim if config.out_dim is not None else training_set.dim
    if out_dim != training_set.dim:
        raise DataError(
            f"config out_dim {out_dim} does not match feature dim {training_set.dim}"
        )
    vocab = training_set.vocab
    dims = Dims(vocab.size, config.word_dim, config.hidden_dim, out_dim)
    params = init_params(dims, config.seed, config.cell)
    state = AdamState.for_params(params, lr=config.lr)

    indices = np.arange(len(samples))
    val_indices = np.array([], dtype=int)
    if config.val_fraction > 0.0:
        val_rng = np.random.default_rng([config.seed, _VAL_STREAM])
        order = val_rng.permutation(len(samples))
        n_val = int(config.val_fraction * len(samples))
        val_indices = order[:n_val]
        indices = np.sort(order[n_val:])

    epoch_losses: list[float] = []
    log_entries: list[dict] = []
    best = float("inf")
    stale = 0
    for epoch in range(config.epochs):
        start = time.perf_counter()
        rng = np.random.default_rng([config.seed, epoch])
        order = rng.permutation(len(indices))
        total = 0.0
        for batch_start in range(0, len(order), config.batch_size):
            batch = order[batch_start : batch_start + config.batch_size]
            grads = None
            for position in batch:
                sample = samples[int(indices[int(position)])]
                try:
                    loss, sample_grads = loss_and_backward(
                        params,
                        list(sample.token_ids),
                        sample.feature,
                        sample.label,
                        config.margin,
                        unk_seed=vocab.seed,
                    )
                except NumericalError as exc:
                    raise NumericalError(
                        f"epoch {epoch}, sample index {int(position)}: {exc}"
                    ) from exc
                if not np.isfinite(loss):
                    raise NumericalError(
                        f"non-finite loss at epoch {epoch}, sample index {int(position)}"
                    )
                total += loss
                if grads is None:
                    grads = sample_grads
                else:
                    grads.add_(sample_grads)
            if len(batch) > 1:
                grads.scale_(1.0 / len(batch))
            adam_step(params, grads, state)
        mean_loss = total / len(indices)
        epoch_losses.append(mean_loss)
        entry = {
            "epoch": epoch,
            "mean_loss": mean_loss,
            "wall_ms": int((time.perf_counter() - start) * 1000),
        }
        if collect_norms:
            entry["norms"] = param_norms(params)
        log_entries.append(entry)

        monitored = mean_loss
        if len(val_indices) > 0:
            monitored = _mean_loss(params, samples, val_indices, config, vocab)
            log_entries[-1]["val_loss"] = monitored
        if config.early_stop_patience > 0:
            if monitored < best - 1e-12:
                best = monitored
                stale = 0
            else:
                stale += 1
                if stale >= config.early_stop_patience:
                    break

    if log_path is not None:
        with open(log_path, "w", encoding="utf-8", newline="\n") as handle:
            for entry in log_entries:
                handle.write(json.dumps(entry, sort_keys=True) + "\n")

    metadata = {
        "epoch_losses": epoch_losses,
        "epochs_run": len(epoch_losses),
        "data_fingerprint": data_fingerprint(training_set),
    }
    return ModelCheckpoint(config=config, vocab=vocab, params=params, metadata=metadata)


def _mean_loss(params, samples, indices, config, vocab) -> float:
    from .model import cosine_embedding_loss

    total = 0.0
    for i in indices:
        sample = samples[int(i)]
        embedding, _ = encoder_forward(
            params, list(sample.token_ids), unk_seed=vocab.seed
        )
        total += cosine_embedding_loss(
            embedding, sample.feature, sample.label, config.margin
        )
    return total / len(indices)


def encode_command(checkpoint: ModelCheckpoint, tokens: list[str]) -> np.ndarray:
    """Embed a tokenized command with a trained checkpoint."""
    token_ids = checkpoint.vocab.encode(tokens)
    embedding, _ = encoder_forward(
        checkpoint.params, token_ids, unk_seed=checkpoint.vocab.seed
    )
    return embedding


def encode_command_text(checkpoint: ModelCheckpoint, command: str) -> np.ndarray:
    return encode_command(checkpoint, tokenize(command))


def checkpoint_to_bytes(checkpoint: ModelCheckpoint) -> bytes:
    tensors = checkpoint.params.tensors()
    manifest = []
    offset = 0
    blobs = []
    for name in TENSOR_NAMES:
        tensor = tensors[name]
        blob = tensor.astype("<f4", copy=False).tobytes()
        manifest.append({"name": name, "shape": list(tensor.shape), "offset": offset})
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps(
        {
            "config": checkpoint.config.to_dict(),
            "vocabulary": checkpoint.vocab.to_dict(),
            "metadata": checkpoint.metadata,
            "tensors": manifest,
        },
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    return b"".join(
        [CHECKPOINT_MAGIC, struct.pack("<Q", len(header)), header, *blobs]
    )


def checkpoint_from_bytes(blob: bytes) -> ModelCheckpoint:
    if blob[:8] != CHECKPOINT_MAGIC:
        raise CheckpointError("bad magic: not a checkpoint file")
    if len(blob) < 16:
        raise CheckpointError("truncated header: missing length field")
    (header_len,) = struct.unpack_from("<Q", blob, 8)
    header_end = 16 + header_len
    if header_end > len(blob):
        raise CheckpointError("truncated header")
    try:
        header = json.loads(blob[16:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from exc
    config = TrainConfig.from_dict(header["config"])
    vocab = Vocabulary.from_dict(header["vocabulary"])
    section = blob[header_end:]
    arrays = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape, dtype=np.int64)) * 4
        start = entry["offset"]
        if start + size > len(section):
            raise CheckpointError(f"truncated tensor {entry['name']!r}")
        arrays[entry["name"]] = (
            np.frombuffer(section, dtype="<f4", count=size // 4, offset=start)
            .reshape(shape)
            .copy()
        )
    missing = [name for name in TENSOR_NAMES if name not in arrays]
    if missing:
        raise CheckpointError(f"checkpoint missing tensors {missing}")
    params = EncoderParams(
        *(arrays[name] for name in TENSOR_NAMES), cell=config.cell
    )
    if params.word_embeddings.shape[0] != vocab.size:
        raise CheckpointError(
            f"vocabulary size {vocab.size} does not match "
            f"{params.word_embeddings.shape[0]} embedding rows"
        )
    params.validate()
    return ModelCheckpoint(
        config=config, vocab=vocab, params=params, metadata=header["metadata"]
    )


def save_checkpoint(checkpoint: ModelCheckpoint, path) -> None:
    with open(path, "wb") as handle:
        handle.write(checkpoint_to_bytes(checkpoint))


def load_checkpoint(path) -> ModelCheckpoint:
    with open(path, "rb") as handle:
        return checkpoint_from_bytes(handle.read())

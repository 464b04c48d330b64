"""Experiment orchestration: training loops, sweeps, checkpoints, reports.

A run is fully determined by its :class:`~diet.config.TrainConfig`: datasets,
parameter init, batch order, augmentation, and candidate sampling all derive
from the config seed, so reruns and checkpoint-resumed runs reproduce the same
numbers bit for bit (wall-clock excepted).  In ``diet`` mode the training path
sees only features and index targets; true labels are read exclusively by the
probe, and every run reports how many label reads happened outside it.
"""

from __future__ import annotations

import csv
import json
import math
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import stats

from .config import (
    HEAD_SAMPLED,
    MODE_DIET,
    MODE_SUPERVISED,
    TrainConfig,
    config_hash,
    save_train_config,
)
from .data import AugmentationPolicy, IndexedDataset, epoch_batches, make_dataset, subsample
from .encoder import MlpEncoder, backward, forward, init_encoder
from .errors import DivergenceError, FormatError, NonFiniteError, ReportError, SpecError
from .head import (
    DietHead,
    head_backward,
    init_head,
    logits,
    sample_candidates,
    sampled_xent,
    xent_smoothed,
)
from .optim import ADAMW, OptimState, apply_step, init_optim_state, lr_at
from .probe import evaluate_probe
from .rng import RngState

# seed offset that generates the held-out evaluation split
EVAL_SEED_OFFSET = 10_000_019

CHECKPOINT_MAGIC = b"DIETCK1"
CHECKPOINT_VERSION = 1

METRICS_FIELDS = (
    "epoch",
    "train_loss",
    "learning_rate",
    "probe_top1",
    "wall_clock_seconds",
    "config_hash",
)


@dataclass
class MetricsRecord:
    epoch: int
    train_loss: float
    learning_rate: float
    probe_top1: float | None
    wall_clock_seconds: float
    config_hash: str


@dataclass
class TrainState:
    """Everything needed to continue a run from an epoch boundary."""

    epoch: int  # next epoch to execute, 0-based
    global_step: int
    alpha: float
    encoder: MlpEncoder
    head: DietHead
    enc_opt: OptimState
    head_opt: OptimState


@dataclass
class RunArtifact:
    config: TrainConfig
    metrics: list[MetricsRecord]
    checkpoint_path: str | None
    state: TrainState
    label_reads_outside_probe: int

    @property
    def final_train_loss(self) -> float:
        return self.metrics[-1].train_loss

    @property
    def final_probe_top1(self) -> float | None:
        for record in reversed(self.metrics):
            if record.probe_top1 is not None:
                return record.probe_top1
        return None


def build_datasets(cfg: TrainConfig) -> tuple[IndexedDataset, IndexedDataset]:
    """Training split (optionally subsampled) and the held-out probe split."""
    train = make_dataset(cfg.dataset)
    if cfg.subsample_m is not None:
        train = subsample(train, cfg.subsample_m, seed=cfg.seed)
    eval_spec = replace(
        cfg.dataset,
        seed=cfg.dataset.seed + EVAL_SEED_OFFSET,
        n_samples=cfg.eval_n_samples or cfg.dataset.n_samples,
    )
    return train, make_dataset(eval_spec)


def init_train_state(cfg: TrainConfig, train_ds: IndexedDataset) -> TrainState:
    n_outputs = train_ds.n if cfg.mode == MODE_DIET else train_ds.n_classes
    encoder = init_encoder(cfg.encoder_dims(), cfg.seed)
    head = init_head(n_outputs, cfg.feature_dim, cfg.seed)
    sched = cfg.schedule()
    return TrainState(
        epoch=0,
        global_step=0,
        alpha=cfg.label_smoothing,
        encoder=encoder,
        head=head,
        enc_opt=init_optim_state(encoder.parameters(), sched),
        head_opt=init_optim_state([head.weight], sched),
    )


def _probe_scheduled(cfg: TrainConfig, epoch: int) -> bool:
    if cfg.probe_every <= 0:
        return False
    done = epoch + 1
    return done % cfg.probe_every == 0 or done == cfg.epochs


def _run(
    cfg: TrainConfig,
    resume_state: TrainState | None,
    stop_after_epoch: int | None,
    out_dir,
    metrics_format: str,
) -> RunArtifact:
    train_ds, eval_ds = build_datasets(cfg)
    state = resume_state if resume_state is not None else init_train_state(cfg, train_ds)
    if not math.isclose(state.alpha, cfg.label_smoothing):
        raise SpecError(
            f"checkpoint alpha {state.alpha} != config label_smoothing {cfg.label_smoothing}"
        )

    if cfg.mode == MODE_SUPERVISED:
        # the one sanctioned label read: supervised targets
        supervised_targets = np.asarray(train_ds.true_labels, dtype=np.int64)
        sanctioned_reads = 1
    else:
        supervised_targets = None
        sanctioned_reads = 0

    sched = cfg.schedule()
    head_sched = sched if cfg.decay_head else replace(sched, weight_decay=0.0)
    policy = AugmentationPolicy(strength=cfg.da_strength)
    batch_size = min(sched.batch_size, train_ds.n)
    steps_per_epoch = math.ceil(train_ds.n / batch_size)
    end_epoch = cfg.epochs if stop_after_epoch is None else min(stop_after_epoch, cfg.epochs)
    cfg_hash = config_hash(cfg)
    online_probe = replace(cfg.probe, epochs=cfg.online_probe_epochs)

    metrics: list[MetricsRecord] = []
    probe_reads = 0
    for epoch in range(state.epoch, end_epoch):
        tic = time.perf_counter()
        loss_sum = 0.0
        last_lr = 0.0
        for batch_index, (x, idx) in enumerate(
            epoch_batches(train_ds, batch_size, epoch, cfg.seed, policy)
        ):
            lr = lr_at(sched, state.global_step, steps_per_epoch)
            targets = idx if supervised_targets is None else supervised_targets[idx]
            try:
                features, cache = forward(state.encoder, x)
                if cfg.head_variant == HEAD_SAMPLED:
                    cands = sample_candidates(
                        targets,
                        state.head.n_classes,
                        cfg.n_candidates,
                        RngState(cfg.seed).child("cand", epoch, batch_index),
                    )
                    result = sampled_xent(state.head, features, targets, cfg.label_smoothing, cands)
                    loss = result.loss
                    grad_w = result.dense_grad_weight(state.head, features)
                    grad_features = result.grad_features(state.head)
                else:
                    z = logits(state.head, features)
                    loss, grad_z = xent_smoothed(z, targets, cfg.label_smoothing)
                    grad_w, grad_features = head_backward(state.head, features, grad_z)
                enc_grads, _ = backward(state.encoder, cache, grad_features)
            except NonFiniteError as exc:
                raise DivergenceError(str(exc), step=state.global_step) from exc
            apply_step(state.encoder.parameters(), enc_grads.parameters(), state.enc_opt, lr, sched)
            apply_step(
                [state.head.weight], [grad_w], state.head_opt, lr * cfg.head_lr_scale, head_sched
            )
            loss_sum += loss * x.shape[0]
            last_lr = lr
            state.global_step += 1

        epoch_loss = loss_sum / train_ds.n
        if not np.isfinite(epoch_loss):
            raise DivergenceError("epoch mean loss is not finite", step=state.global_step)

        probe_top1 = None
        if _probe_scheduled(cfg, epoch):
            budget = cfg.probe if epoch + 1 == cfg.epochs else online_probe
            before = train_ds.label_reads
            probe_top1 = evaluate_probe(state.encoder, train_ds, eval_ds, budget)
            probe_reads += train_ds.label_reads - before

        state.epoch = epoch + 1
        metrics.append(
            MetricsRecord(
                epoch=epoch + 1,
                train_loss=float(epoch_loss),
                learning_rate=float(last_lr),
                probe_top1=probe_top1,
                wall_clock_seconds=time.perf_counter() - tic,
                config_hash=cfg_hash,
            )
        )

    outside = train_ds.label_reads - probe_reads - sanctioned_reads
    artifact = RunArtifact(cfg, metrics, None, state, outside)
    if out_dir is not None:
        artifact.checkpoint_path = str(write_run_artifacts(artifact, out_dir, metrics_format))
    return artifact


def run_diet(
    cfg: TrainConfig,
    resume_state: TrainState | None = None,
    stop_after_epoch: int | None = None,
    out_dir=None,
    metrics_format: str = "jsonl",
) -> RunArtifact:
    """Index-as-target training per the config; see the module docstring."""
    if cfg.mode != MODE_DIET:
        raise SpecError(f"run_diet requires mode={MODE_DIET!r}, got {cfg.mode!r}")
    return _run(cfg, resume_state, stop_after_epoch, out_dir, metrics_format)


def run_supervised(
    cfg: TrainConfig,
    resume_state: TrainState | None = None,
    stop_after_epoch: int | None = None,
    out_dir=None,
    metrics_format: str = "jsonl",
) -> RunArtifact:
    """Identical pipeline with a C-output head and true labels as targets."""
    if cfg.mode != MODE_SUPERVISED:
        raise SpecError(f"run_supervised requires mode={MODE_SUPERVISED!r}, got {cfg.mode!r}")
    return _run(cfg, resume_state, stop_after_epoch, out_dir, metrics_format)


def run_config(cfg: TrainConfig, **kwargs) -> RunArtifact:
    return run_diet(cfg, **kwargs) if cfg.mode == MODE_DIET else run_supervised(cfg, **kwargs)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


@dataclass
class SweepEntry:
    """Outcome slot for one grid config: an artifact or a recorded failure."""

    config: TrainConfig
    artifact: RunArtifact | None
    error: str | None


def _sweep_one(args) -> SweepEntry:
    cfg, run_dir, metrics_format = args
    try:
        artifact = run_config(cfg, out_dir=run_dir, metrics_format=metrics_format)
        return SweepEntry(cfg, artifact, None)
    except Exception as exc:  # per-config failures must not abort the sweep
        return SweepEntry(cfg, None, f"{type(exc).__name__}: {exc}")


def sweep(
    grid: list[TrainConfig],
    workers: int = 1,
    out_dir=None,
    metrics_format: str = "jsonl",
) -> list[SweepEntry]:
    """Run every config; output order equals input order regardless of scheduling."""
    if not grid:
        raise SpecError("sweep grid must be non-empty")
    jobs = []
    for i, cfg in enumerate(grid):
        run_dir = None if out_dir is None else Path(out_dir) / f"run_{i:03d}"
        jobs.append((cfg, run_dir, metrics_format))
    if workers <= 1:
        return [_sweep_one(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_one, jobs))


# ---------------------------------------------------------------------------
# Loss-vs-accuracy correlation report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroupCorrelation:
    label_smoothing: float
    n_runs: int
    rho: float | None  # None when the correlation is undefined (constant input)


@dataclass
class CorrelationReport:
    groups: list[GroupCorrelation]
    points: list[tuple[float, float, float]]  # (final_loss, final_probe_top1, alpha)


def correlation_report(runs) -> CorrelationReport:
    """Spearman rank correlation of final training loss vs final probe accuracy,
    within each label-smoothing group; emits the (loss, accuracy, alpha) triples."""
    if not runs:
        raise ReportError("no runs given")
    by_alpha: dict[float, list[tuple[float, float]]] = {}
    points = []
    for run in runs:
        alpha = run.config.label_smoothing
        final_loss = run.metrics[-1].train_loss if run.metrics else None
        final_probe = None
        for record in reversed(run.metrics):
            if record.probe_top1 is not None:
                final_probe = record.probe_top1
                break
        if final_loss is None or final_probe is None:
            raise ReportError("every run needs a final loss and at least one probe value")
        by_alpha.setdefault(alpha, []).append((final_loss, final_probe))
        points.append((final_loss, final_probe, alpha))
    groups = []
    for alpha in sorted(by_alpha):
        pairs = by_alpha[alpha]
        if len(pairs) < 3:
            raise ReportError(
                f"label-smoothing group {alpha} has {len(pairs)} runs; need >= 3"
            )
        losses = np.array([p[0] for p in pairs])
        accs = np.array([p[1] for p in pairs])
        if np.all(losses == losses[0]) or np.all(accs == accs[0]):
            rho = None
        else:
            rho = float(stats.spearmanr(losses, accs).statistic)
            if not np.isfinite(rho):
                rho = None
        groups.append(GroupCorrelation(alpha, len(pairs), rho))
    return CorrelationReport(groups, points)


# ---------------------------------------------------------------------------
# Metrics files
# ---------------------------------------------------------------------------


def _record_to_dict(record: MetricsRecord) -> dict:
    return {name: getattr(record, name) for name in METRICS_FIELDS}


def write_metrics(records: list[MetricsRecord], path, fmt: str = "jsonl") -> None:
    path = Path(path)
    if fmt == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(_record_to_dict(record)) + "\n")
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=METRICS_FIELDS)
            writer.writeheader()
            for record in records:
                row = _record_to_dict(record)
                if row["probe_top1"] is None:
                    row["probe_top1"] = ""
                writer.writerow(row)
    else:
        raise SpecError(f"unknown metrics format: {fmt!r} (use 'jsonl' or 'csv')")


def read_metrics(path) -> list[MetricsRecord]:
    path = Path(path)
    records = []
    if path.suffix == ".csv":
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                records.append(
                    MetricsRecord(
                        epoch=int(row["epoch"]),
                        train_loss=float(row["train_loss"]),
                        learning_rate=float(row["learning_rate"]),
                        probe_top1=float(row["probe_top1"]) if row["probe_top1"] else None,
                        wall_clock_seconds=float(row["wall_clock_seconds"]),
                        config_hash=row["config_hash"],
                    )
                )
    else:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                records.append(MetricsRecord(**{name: obj[name] for name in METRICS_FIELDS}))
    return records


# ---------------------------------------------------------------------------
# Checkpoints: magic "DIETCK1", u32 version, then progress / encoder / head /
# optimizer segments, all little-endian (layouts documented in the README)
# ---------------------------------------------------------------------------


def _write_array(fh, arr: np.ndarray) -> None:
    fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.offset = 0
        self.path = path

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.blob):
            raise FormatError(f"{self.path}: truncated checkpoint")
        chunk = self.blob[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def array(self, shape) -> np.ndarray:
        count = int(np.prod(shape))
        flat = np.frombuffer(self.take(count * 8), dtype="<f8")
        return flat.astype(np.float64).reshape(shape)


def save_checkpoint(run, path) -> None:
    """Serialize a RunArtifact's (or TrainState's) resumable state."""
    state = run.state if isinstance(run, RunArtifact) else run
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<QQ", state.epoch, state.global_step))
        enc = state.encoder
        fh.write(struct.pack("<I", len(enc.layer_dims)))
        fh.write(np.array(enc.layer_dims, dtype="<u8").tobytes())
        for w, b in zip(enc.weights, enc.biases):
            _write_array(fh, w)
            _write_array(fh, b)
        head = state.head
        fh.write(struct.pack("<QQd", head.n_classes, head.feature_dim, state.alpha))
        _write_array(fh, head.weight)
        kind_code = 0 if state.enc_opt.kind == ADAMW else 1
        fh.write(struct.pack("<BQQ", kind_code, state.enc_opt.step, state.head_opt.step))
        if kind_code == 0:
            for arr in state.enc_opt.m + state.enc_opt.v:
                _write_array(fh, arr)
            _write_array(fh, state.head_opt.m[0])
            _write_array(fh, state.head_opt.v[0])
        else:
            for arr in state.enc_opt.velocity:
                _write_array(fh, arr)
            _write_array(fh, state.head_opt.velocity[0])


def load_checkpoint(path) -> TrainState:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic, expected {CHECKPOINT_MAGIC!r}")
    reader = _Reader(blob, path)
    reader.take(len(CHECKPOINT_MAGIC))
    version = reader.u32()
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    epoch = reader.u64()
    global_step = reader.u64()
    n_dims = reader.u32()
    dims = [int(v) for v in np.frombuffer(reader.take(n_dims * 8), dtype="<u8")]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(reader.array((fan_out, fan_in)))
        biases.append(reader.array((fan_out,)))
    encoder = MlpEncoder(dims, weights, biases)
    n_classes = reader.u64()
    feature_dim = reader.u64()
    alpha = reader.f64()
    head = DietHead(reader.array((n_classes, feature_dim)))
    kind_code, enc_step, head_step = struct.unpack("<BQQ", reader.take(17))
    params = encoder.parameters()
    if kind_code == 0:
        enc_opt = OptimState(
            ADAMW,
            step=enc_step,
            m=[reader.array(p.shape) for p in params],
            v=[],
        )
        enc_opt.v = [reader.array(p.shape) for p in params]
        head_opt = OptimState(
            ADAMW,
            step=head_step,
            m=[reader.array(head.weight.shape)],
            v=[],
        )
        head_opt.v = [reader.array(head.weight.shape)]
    else:
        enc_opt = OptimState("sgd", step=enc_step, velocity=[reader.array(p.shape) for p in params])
        head_opt = OptimState("sgd", step=head_step, velocity=[reader.array(head.weight.shape)])
    if reader.offset != len(blob):
        raise FormatError(f"{path}: {len(blob) - reader.offset} trailing bytes")
    return TrainState(epoch, global_step, alpha, encoder, head, enc_opt, head_opt)


def write_run_artifacts(artifact: RunArtifact, out_dir, metrics_format: str = "jsonl") -> Path:
    """Write config.json, metrics.(jsonl|csv), checkpoint.bin; returns the checkpoint path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_train_config(artifact.config, out / "config.json")
    suffix = "jsonl" if metrics_format == "jsonl" else "csv"
    write_metrics(artifact.metrics, out / f"metrics.{suffix}", metrics_format)
    ckpt = out / "checkpoint.bin"
    save_checkpoint(artifact, ckpt)
    return ckpt

"""Run configuration and its flat key-value file format.

A config file is a single JSON object with flat dotted keys (no nesting) and a
``schema_version`` key, e.g.::

    {
      "schema_version": 1,
      "seed": 0,
      "mode": "diet",
      "epochs": 300,
      "dataset.kind": "gaussian-clusters",
      "dataset.n_samples": 2000,
      "optim.base_lr": 0.001
    }

Unknown keys are rejected so typos fail loudly.  Omitted keys take the
defaults below.  ``epochs`` governs the schedule length; the optimizer's
``total_epochs`` is derived from it and is not a file key.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

from .data import SyntheticSpec
from .errors import FormatError, SpecError
from .optim import OptimConfig
from .probe import ProbeConfig

SCHEMA_VERSION = 1

MODE_DIET = "diet"
MODE_SUPERVISED = "supervised"
HEAD_FULL = "full"
HEAD_SAMPLED = "sampled"


def _default_dataset() -> SyntheticSpec:
    return SyntheticSpec(
        kind="gaussian-clusters",
        n_samples=2000,
        dimension=32,
        n_classes=10,
        noise_sigma=0.15,
        seed=0,
    )


@dataclass(frozen=True)
class TrainConfig:
    """Every knob of one training run."""

    dataset: SyntheticSpec = field(default_factory=_default_dataset)
    encoder_hidden: tuple[int, ...] = (128, 128)
    feature_dim: int = 64
    label_smoothing: float = 0.8
    da_strength: int = 2
    optim: OptimConfig = field(default_factory=OptimConfig)
    epochs: int = 300
    probe_every: int = 25
    online_probe_epochs: int = 100
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    seed: int = 0
    mode: str = MODE_DIET
    head_variant: str = HEAD_FULL
    n_candidates: int = 0
    subsample_m: int | None = None
    eval_n_samples: int | None = None
    decay_head: bool = True
    head_lr_scale: float = 1.0

    def __post_init__(self):
        if self.mode not in (MODE_DIET, MODE_SUPERVISED):
            raise SpecError(f"unknown mode: {self.mode!r}")
        if self.head_variant not in (HEAD_FULL, HEAD_SAMPLED):
            raise SpecError(f"unknown head variant: {self.head_variant!r}")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise SpecError(f"label_smoothing must be in [0, 1), got {self.label_smoothing}")
        if self.da_strength not in (1, 2, 3):
            raise SpecError(f"da_strength must be 1, 2 or 3, got {self.da_strength}")
        if self.epochs < 1:
            raise SpecError(f"epochs must be >= 1, got {self.epochs}")
        if self.probe_every < 0 or self.online_probe_epochs < 0:
            raise SpecError("probe cadence and online probe budget must be >= 0")
        if self.feature_dim < 1 or any(h < 1 for h in self.encoder_hidden):
            raise SpecError("encoder dims must be >= 1")
        if self.head_variant == HEAD_SAMPLED and self.n_candidates < 1:
            raise SpecError("sampled head needs n_candidates >= 1")
        if self.subsample_m is not None and self.subsample_m < 1:
            raise SpecError(f"subsample_m must be >= 1, got {self.subsample_m}")
        if self.eval_n_samples is not None and self.eval_n_samples < 1:
            raise SpecError(f"eval_n_samples must be >= 1, got {self.eval_n_samples}")
        if self.head_lr_scale <= 0:
            raise SpecError(f"head_lr_scale must be > 0, got {self.head_lr_scale}")
        if self.optim.warmup_epochs > self.epochs:
            raise SpecError(
                f"warmup_epochs ({self.optim.warmup_epochs}) exceeds epochs ({self.epochs})"
            )
        # this run's epochs are the single source of truth for the schedule horizon
        if self.optim.total_epochs != self.epochs:
            object.__setattr__(self, "optim", replace(self.optim, total_epochs=self.epochs))

    def schedule(self) -> OptimConfig:
        """Optimizer config with the schedule horizon set to this run's epochs."""
        return self.optim

    def encoder_dims(self) -> list[int]:
        return [self.dataset_feature_dim(), *self.encoder_hidden, self.feature_dim]

    def dataset_feature_dim(self) -> int:
        if self.dataset.kind == "patterned-grids":
            return self.dataset.dimension * self.dataset.dimension
        return self.dataset.dimension


def to_flat_dict(cfg: TrainConfig) -> dict:
    """Flatten to the documented file schema, in a stable key order."""
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": cfg.seed,
        "mode": cfg.mode,
        "epochs": cfg.epochs,
        "probe_every": cfg.probe_every,
        "online_probe_epochs": cfg.online_probe_epochs,
        "label_smoothing": cfg.label_smoothing,
        "da_strength": cfg.da_strength,
        "feature_dim": cfg.feature_dim,
        "encoder_hidden": list(cfg.encoder_hidden),
        "head_variant": cfg.head_variant,
        "n_candidates": cfg.n_candidates,
        "subsample_m": cfg.subsample_m,
        "eval_n_samples": cfg.eval_n_samples,
        "decay_head": cfg.decay_head,
        "head_lr_scale": cfg.head_lr_scale,
        "dataset.kind": cfg.dataset.kind,
        "dataset.n_samples": cfg.dataset.n_samples,
        "dataset.dimension": cfg.dataset.dimension,
        "dataset.n_classes": cfg.dataset.n_classes,
        "dataset.noise_sigma": cfg.dataset.noise_sigma,
        "dataset.seed": cfg.dataset.seed,
        "optim.kind": cfg.optim.kind,
        "optim.base_lr": cfg.optim.base_lr,
        "optim.weight_decay": cfg.optim.weight_decay,
        "optim.beta1": cfg.optim.betas[0],
        "optim.beta2": cfg.optim.betas[1],
        "optim.eps": cfg.optim.eps,
        "optim.momentum": cfg.optim.momentum,
        "optim.warmup_epochs": cfg.optim.warmup_epochs,
        "optim.batch_size": cfg.optim.batch_size,
        "optim.final_lr_floor": cfg.optim.final_lr_floor,
        "probe.l2_penalty": cfg.probe.l2_penalty,
        "probe.epochs": cfg.probe.epochs,
        "probe.lr": cfg.probe.lr,
        "probe.batch_size": cfg.probe.batch_size,
    }


def from_flat_dict(flat: dict) -> TrainConfig:
    flat = dict(flat)
    version = flat.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise FormatError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    defaults = to_flat_dict(TrainConfig())
    unknown = set(flat) - set(defaults)
    if unknown:
        raise SpecError(f"unknown config keys: {sorted(unknown)}")
    merged = {**defaults, **flat}

    epochs = int(merged["epochs"])
    dataset = SyntheticSpec(
        kind=str(merged["dataset.kind"]),
        n_samples=int(merged["dataset.n_samples"]),
        dimension=int(merged["dataset.dimension"]),
        n_classes=int(merged["dataset.n_classes"]),
        noise_sigma=float(merged["dataset.noise_sigma"]),
        seed=int(merged["dataset.seed"]),
    )
    optim = OptimConfig(
        kind=str(merged["optim.kind"]),
        base_lr=float(merged["optim.base_lr"]),
        weight_decay=float(merged["optim.weight_decay"]),
        betas=(float(merged["optim.beta1"]), float(merged["optim.beta2"])),
        eps=float(merged["optim.eps"]),
        momentum=float(merged["optim.momentum"]),
        warmup_epochs=int(merged["optim.warmup_epochs"]),
        total_epochs=epochs,
        batch_size=int(merged["optim.batch_size"]),
        final_lr_floor=float(merged["optim.final_lr_floor"]),
    )
    probe = ProbeConfig(
        l2_penalty=float(merged["probe.l2_penalty"]),
        epochs=int(merged["probe.epochs"]),
        lr=float(merged["probe.lr"]),
        batch_size=int(merged["probe.batch_size"]),
    )
    return TrainConfig(
        dataset=dataset,
        encoder_hidden=tuple(int(h) for h in merged["encoder_hidden"]),
        feature_dim=int(merged["feature_dim"]),
        label_smoothing=float(merged["label_smoothing"]),
        da_strength=int(merged["da_strength"]),
        optim=optim,
        epochs=epochs,
        probe_every=int(merged["probe_every"]),
        online_probe_epochs=int(merged["online_probe_epochs"]),
        probe=probe,
        seed=int(merged["seed"]),
        mode=str(merged["mode"]),
        head_variant=str(merged["head_variant"]),
        n_candidates=int(merged["n_candidates"]),
        subsample_m=None if merged["subsample_m"] is None else int(merged["subsample_m"]),
        eval_n_samples=(
            None if merged["eval_n_samples"] is None else int(merged["eval_n_samples"])
        ),
        decay_head=bool(merged["decay_head"]),
        head_lr_scale=float(merged["head_lr_scale"]),
    )


def save_train_config(cfg: TrainConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_flat_dict(cfg), fh, indent=2)
        fh.write("\n")


def load_train_config(path) -> TrainConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            flat = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(flat, dict):
        raise FormatError(f"{path}: config must be a flat JSON object")
    return from_flat_dict(flat)


def config_hash(cfg: TrainConfig) -> str:
    """Short stable digest of the canonical flat form."""
    canonical = json.dumps(to_flat_dict(cfg), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]

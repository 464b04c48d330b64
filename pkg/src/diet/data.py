"""Synthetic datasets, index targets, augmentation, batching, subsampling.

Datasets are immutable after construction.  The target of sample ``n`` is
``n`` itself; true class labels travel with the dataset for probe evaluation
only, behind an instrumented accessor that counts every read.  All randomness
flows through named streams (:mod:`diet.rng`): the per-sample augmentation
stream is keyed by (seed, epoch, sample index), so augmentation draws do not
depend on batch size or iteration order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .errors import DimensionError, FormatError, PolicyError, SpecError
from .numeric import Matrix, as_matrix, require_finite
from .rng import RngState, StreamFactory, stream

GAUSSIAN_CLUSTERS = "gaussian-clusters"
PATTERNED_GRIDS = "patterned-grids"

# Class geometry (cluster centers) is a fixed function of (dimension, n_classes),
# like the procedural grid patterns: datasets that differ only in seed share the
# same classification task and so form valid train / held-out splits.
CLASS_GEOMETRY_SEED = 7

_MAGIC = b"DIETDS1"


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a synthetic dataset; identical specs generate identical data.

    ``dimension`` is the feature dimension D for gaussian clusters and the
    grid side g (so D = g*g) for patterned grids.
    """

    kind: str
    n_samples: int
    dimension: int
    n_classes: int
    noise_sigma: float
    seed: int

    def __post_init__(self):
        if self.kind not in (GAUSSIAN_CLUSTERS, PATTERNED_GRIDS):
            raise SpecError(f"unknown dataset kind: {self.kind!r}")
        if self.dimension < 1:
            raise SpecError(f"dimension must be >= 1, got {self.dimension}")
        if self.n_classes < 1:
            raise SpecError(f"n_classes must be >= 1, got {self.n_classes}")
        if self.n_samples < self.n_classes:
            raise SpecError(
                f"n_samples ({self.n_samples}) must be >= n_classes ({self.n_classes})"
            )
        if not (self.noise_sigma >= 0.0):
            raise SpecError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


class IndexedDataset:
    """N samples whose training target is their own row index.

    ``true_labels`` is the only way to read class labels and increments
    ``label_reads`` on every access; the training path must never touch it.
    """

    def __init__(
        self,
        features: Matrix,
        true_labels: np.ndarray,
        n_classes: int,
        name: str,
        provenance: dict,
        grid_side: int | None = None,
    ):
        features = as_matrix(features, "features")
        labels = np.ascontiguousarray(true_labels, dtype=np.uint32)
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise DimensionError(
                f"labels shape {labels.shape} does not match {features.shape[0]} samples"
            )
        if n_classes < 1 or (labels.size and int(labels.max()) >= n_classes):
            raise SpecError(f"labels must lie in [0, {n_classes})")
        if grid_side is not None and grid_side * grid_side != features.shape[1]:
            raise SpecError(
                f"grid_side {grid_side} does not square to dimension {features.shape[1]}"
            )
        features.setflags(write=False)
        labels.setflags(write=False)
        self.features = features
        self._true_labels = labels
        self.n_classes = int(n_classes)
        self.name = name
        self.provenance = dict(provenance)
        self.grid_side = grid_side
        self.label_reads = 0

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def index_targets(self) -> np.ndarray:
        return np.arange(self.n, dtype=np.int64)

    @property
    def true_labels(self) -> np.ndarray:
        """Instrumented label access; counts every read for the firewall audit."""
        self.label_reads += 1
        return self._true_labels


def _balanced_labels(n_samples: int, n_classes: int) -> np.ndarray:
    # interleaved so any prefix, and any stable subsample, stays near-balanced
    return (np.arange(n_samples) % n_classes).astype(np.uint32)


def make_gaussian_clusters(spec: SyntheticSpec) -> IndexedDataset:
    """C cluster centers on the unit sphere in R^D, plus isotropic noise.

    The centers depend only on (dimension, n_classes); ``spec.seed`` drives the
    sample noise, so two specs differing only in seed are draws from the same
    class-conditional distribution.
    """
    if spec.kind != GAUSSIAN_CLUSTERS:
        raise SpecError(f"expected kind {GAUSSIAN_CLUSTERS!r}, got {spec.kind!r}")
    d = spec.dimension
    gen_centers = stream(CLASS_GEOMETRY_SEED, "centers", d, spec.n_classes)
    centers = gen_centers.standard_normal((spec.n_classes, d))
    norms = np.linalg.norm(centers, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    centers /= norms
    labels = _balanced_labels(spec.n_samples, spec.n_classes)
    noise = stream(spec.seed, "noise").standard_normal((spec.n_samples, d))
    features = centers[labels] + spec.noise_sigma * noise
    return IndexedDataset(
        features,
        labels,
        spec.n_classes,
        name=f"gaussian-clusters(n={spec.n_samples},d={d},c={spec.n_classes})",
        provenance={"spec": spec},
    )


def _base_pattern(class_id: int, n_classes: int, g: int) -> np.ndarray:
    """Deterministic procedural pattern: rotated bars or rotated checkers."""
    theta = math.pi * class_id / max(n_classes, 1)
    freq = 1 + (class_id % 3)
    phase = 2.0 * math.pi * (class_id + 1) / (n_classes + 1)
    ys, xs = np.mgrid[0:g, 0:g].astype(np.float64)
    t1 = (xs + 0.5) * math.cos(theta) + (ys + 0.5) * math.sin(theta)
    if class_id % 2 == 0:
        return np.sin(2.0 * math.pi * freq * t1 / g + phase)
    t2 = -(xs + 0.5) * math.sin(theta) + (ys + 0.5) * math.cos(theta)
    a = np.sin(2.0 * math.pi * freq * t1 / g + phase)
    b = np.sin(2.0 * math.pi * freq * t2 / g + phase)
    return np.sign(a) * np.sign(b)


def make_patterned_grids(spec: SyntheticSpec) -> IndexedDataset:
    """C procedural g x g patterns (bars/checkers), plus pixel noise."""
    if spec.kind != PATTERNED_GRIDS:
        raise SpecError(f"expected kind {PATTERNED_GRIDS!r}, got {spec.kind!r}")
    g = spec.dimension
    bases = [_base_pattern(c, spec.n_classes, g).ravel() for c in range(spec.n_classes)]
    for c in range(1, spec.n_classes):
        # guarantee pairwise-distinct bases even if two patterns quantize alike
        bump = 0
        while any(np.array_equal(bases[c], bases[j]) for j in range(c)):
            bump += 1
            bases[c] = bases[c] + 1e-3 * bump
    base = np.stack(bases)
    labels = _balanced_labels(spec.n_samples, spec.n_classes)
    noise = stream(spec.seed, "noise").standard_normal((spec.n_samples, g * g))
    features = base[labels] + spec.noise_sigma * noise
    return IndexedDataset(
        features,
        labels,
        spec.n_classes,
        name=f"patterned-grids(n={spec.n_samples},g={g},c={spec.n_classes})",
        provenance={"spec": spec},
        grid_side=g,
    )


def make_dataset(spec: SyntheticSpec) -> IndexedDataset:
    if spec.kind == GAUSSIAN_CLUSTERS:
        return make_gaussian_clusters(spec)
    return make_patterned_grids(spec)


@dataclass(frozen=True)
class AugmentationPolicy:
    """Tiered augmentation; tier s applies every transform of tier s-1 plus its own.

    Grid data (images flattened from a g x g grid):
      tier 1: crop-and-resize (area scale U[0.6,1.0], nearest-neighbor) + horizontal flip
      tier 2: + brightness/contrast jitter (gain U[0.6,1.4], offset U[-0.2,0.2]) + grayscale
              analog (50% blend toward the image mean)
      tier 3: + 3x3 box blur + random erasing (zero a rectangle of 10-25% area)

    Vector data:
      tier 1: additive gaussian noise (sigma = noise_scale * std(x)) + sign-flip of a
              random coordinate pair
      tier 2: + scaling jitter (gain U[0.6,1.4], offset U[-0.2,0.2] * std(x))
      tier 3: + coordinate erasing (zero a contiguous 10-25% range)

    Probabilities are exposed per transform so tests can force or silence any
    branch.  Each sample draws from one stream keyed by (seed, epoch, index),
    consumed in tier order, so lower tiers see the same draws whatever the
    strength: a strength-3 policy with tier-2/3 probabilities zeroed reproduces
    strength-1 outputs exactly.
    """

    strength: int = 2
    route: str = "auto"  # "auto" | "grid" | "vector"
    crop_prob: float = 1.0
    crop_scale: tuple[float, float] = (0.6, 1.0)
    flip_prob: float = 0.5
    jitter_prob: float = 0.3
    jitter_gain: tuple[float, float] = (0.6, 1.4)
    jitter_offset: tuple[float, float] = (-0.2, 0.2)
    gray_prob: float = 0.2
    blur_prob: float = 0.2
    erase_prob: float = 0.25
    erase_area: tuple[float, float] = (0.10, 0.25)
    noise_prob: float = 1.0
    noise_scale: float = 0.1
    signflip_prob: float = 0.5

    def __post_init__(self):
        if self.strength not in (1, 2, 3):
            raise SpecError(f"strength must be 1, 2 or 3, got {self.strength}")
        if self.route not in ("auto", "grid", "vector"):
            raise SpecError(f"unknown route {self.route!r}")

    def silenced(self) -> "AugmentationPolicy":
        """Test hook: same strength, every probability forced to zero."""
        return replace(
            self,
            crop_prob=0.0,
            flip_prob=0.0,
            jitter_prob=0.0,
            gray_prob=0.0,
            blur_prob=0.0,
            erase_prob=0.0,
            noise_prob=0.0,
            signflip_prob=0.0,
        )


def _sample_std(x: np.ndarray) -> float:
    mean = float(x.sum()) / x.size
    return math.sqrt(max(float(x @ x) / x.size - mean * mean, 0.0))


def _fires(gen: np.random.Generator, prob: float) -> bool:
    return gen.random() < prob


def _pair_without_replacement(gen: np.random.Generator, d: int) -> tuple[int, int]:
    i = int(gen.integers(0, d))
    j = int(gen.integers(0, d - 1))
    return i, j + 1 if j >= i else j


def _augment_grid(img: np.ndarray, policy: AugmentationPolicy, gen: np.random.Generator) -> np.ndarray:
    g = img.shape[0]
    if _fires(gen, policy.crop_prob):
        area = gen.uniform(*policy.crop_scale)
        side = int(np.clip(round(g * math.sqrt(area)), 1, g))
        top = int(gen.integers(0, g - side + 1))
        left = int(gen.integers(0, g - side + 1))
        if side < g:
            crop = img[top : top + side, left : left + side]
            idx = np.minimum((np.arange(g) * side) // g, side - 1)
            img = crop[np.ix_(idx, idx)].copy()
    if _fires(gen, policy.flip_prob):
        img = img[:, ::-1].copy()
    if policy.strength >= 2:
        if _fires(gen, policy.jitter_prob):
            gain = gen.uniform(*policy.jitter_gain)
            offset = gen.uniform(*policy.jitter_offset)
            img = img * gain + offset
        if _fires(gen, policy.gray_prob):
            img = 0.5 * img + 0.5 * img.mean()
    if policy.strength >= 3:
        if _fires(gen, policy.blur_prob):
            img = ndimage.uniform_filter(img, size=3, mode="nearest")
        if _fires(gen, policy.erase_prob):
            frac = gen.uniform(*policy.erase_area)
            aspect = gen.uniform(0.5, 2.0)
            area = frac * g * g
            h = int(np.clip(round(math.sqrt(area * aspect)), 1, g))
            w = int(np.clip(round(area / h), 1, g))
            top = int(gen.integers(0, g - h + 1))
            left = int(gen.integers(0, g - w + 1))
            img = img.copy()
            img[top : top + h, left : left + w] = 0.0
    return img


def _augment_vector(x: np.ndarray, policy: AugmentationPolicy, gen: np.random.Generator) -> np.ndarray:
    d = x.shape[0]
    out = x.copy()
    scale = _sample_std(x)  # reference scale: std of the clean sample
    if _fires(gen, policy.noise_prob):
        out += gen.standard_normal(d) * (policy.noise_scale * scale)
    if _fires(gen, policy.signflip_prob) and d >= 2:
        i, j = _pair_without_replacement(gen, d)
        out[i] = -out[i]
        out[j] = -out[j]
    if policy.strength >= 2:
        if _fires(gen, policy.jitter_prob):
            gain = gen.uniform(*policy.jitter_gain)
            offset = gen.uniform(*policy.jitter_offset)
            out = out * gain + offset * scale
    if policy.strength >= 3:
        if _fires(gen, policy.erase_prob):
            frac = gen.uniform(*policy.erase_area)
            length = max(1, int(round(frac * d)))
            start = int(gen.integers(0, d - length + 1))
            out[start : start + length] = 0.0
    return out


def augment(
    x: np.ndarray,
    policy: AugmentationPolicy,
    grid_side: int | None,
    rng: RngState,
    _factory: StreamFactory | None = None,
    _check: bool = True,
) -> np.ndarray:
    """Apply the policy's active tiers to one sample vector; dimension preserved.

    ``_factory`` lets batch loops reuse one generator object and ``_check``
    lets them batch the finite check; outputs are identical either way.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError(f"augment expects a 1-D sample, got shape {x.shape}")
    gen = rng.generator() if _factory is None else _factory.get(rng)
    use_grid = policy.route == "grid" or (policy.route == "auto" and grid_side is not None)
    if use_grid:
        if grid_side is None:
            raise PolicyError("policy requires grid transforms but grid_side is missing")
        if grid_side * grid_side != x.shape[0]:
            raise PolicyError(
                f"grid_side {grid_side} does not square to sample length {x.shape[0]}"
            )
        out = _augment_grid(x.reshape(grid_side, grid_side), policy, gen).ravel()
    else:
        out = _augment_vector(x, policy, gen)
    if _check:
        require_finite(out, "augmented sample")
    return out


def epoch_batches(
    ds: IndexedDataset,
    batch_size: int,
    epoch: int,
    seed: int,
    policy: AugmentationPolicy | None = None,
):
    """Yield (augmented feature batch, index-target batch) pairs for one epoch.

    The sample order is a permutation derived from (seed, epoch); every index
    appears exactly once.  Augmentation, when a policy is given, draws from a
    per-(epoch, index) stream.
    """
    if not 1 <= batch_size <= ds.n:
        raise SpecError(f"batch_size must be in [1, {ds.n}], got {batch_size}")
    perm = stream(seed, "perm", epoch).permutation(ds.n)
    epoch_root = RngState(seed).child("aug", epoch)
    factory = StreamFactory()
    for start in range(0, ds.n, batch_size):
        idx = perm[start : start + batch_size]
        batch = ds.features[idx].copy()
        if policy is not None:
            for k, sample_index in enumerate(idx):
                batch[k] = augment(
                    batch[k],
                    policy,
                    ds.grid_side,
                    epoch_root.child(int(sample_index)),
                    _factory=factory,
                    _check=False,
                )
            require_finite(batch, "augmented batch")
        yield batch, idx.astype(np.int64)


def subsample(ds: IndexedDataset, m: int, seed: int) -> IndexedDataset:
    """Keep m rows chosen without replacement, preserving original row order.

    Index targets are implicitly renumbered 0..m-1; true labels travel along.
    Stable selection makes m == n the exact identity.
    """
    if not 1 <= m <= ds.n:
        raise SpecError(f"subsample size must be in [1, {ds.n}], got {m}")
    keep = np.sort(stream(seed, "subsample").choice(ds.n, size=m, replace=False))
    return IndexedDataset(
        ds.features[keep],
        ds._true_labels[keep],
        ds.n_classes,
        name=f"{ds.name}[sub m={m} seed={seed}]",
        provenance={**ds.provenance, "subsample": {"m": m, "seed": seed}},
        grid_side=ds.grid_side,
    )


def save_dataset(ds: IndexedDataset, path) -> None:
    """Write the binary container: b"DIETDS1", u64 N, D, C, features f64, labels u32.

    All integers and floats are little-endian; features are row-major.
    """
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(np.array([ds.n, ds.dim, ds.n_classes], dtype="<u8").tobytes())
        fh.write(np.ascontiguousarray(ds.features, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(ds._true_labels, dtype="<u4").tobytes())


def load_dataset(path, grid_side: int | None = None, name: str | None = None) -> IndexedDataset:
    """Read a container written by :func:`save_dataset`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(_MAGIC)] != _MAGIC:
        raise FormatError(f"{path}: bad magic, expected {_MAGIC!r}")
    if len(blob) < len(_MAGIC) + 3 * 8:
        raise FormatError(f"{path}: truncated header")
    header = np.frombuffer(blob, dtype="<u8", count=3, offset=len(_MAGIC))
    n, d, c = (int(v) for v in header)
    offset = len(_MAGIC) + 3 * 8
    expected = offset + n * d * 8 + n * 4
    if len(blob) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(blob)}")
    features = np.frombuffer(blob, dtype="<f8", count=n * d, offset=offset).reshape(n, d)
    labels = np.frombuffer(blob, dtype="<u4", count=n, offset=offset + n * d * 8)
    return IndexedDataset(
        features.astype(np.float64),
        labels,
        c,
        name=name or str(path),
        provenance={"source": str(path)},
        grid_side=grid_side,
    )

"""Two answers to the N-output head's memory appetite.

When the head is one row per training sample, very large datasets stop
fitting.  Subsampling shrinks N directly at some accuracy cost; the sampled
softmax keeps all N classes but computes each step's loss over a candidate
subset, never materializing an N-wide logit row (and reproducing the full
loss bit for bit when the candidate set is everything).
"""

import dataclasses

import numpy as np

from diet.config import TrainConfig
from diet.data import SyntheticSpec
from diet.harness import run_diet
from diet.head import init_head, logits, sample_candidates, sampled_xent, xent_smoothed
from diet.optim import OptimConfig
from diet.rng import RngState, stream

# --- sampled softmax: exact when candidates = all classes, sparse otherwise
head = init_head(n_classes=5000, feature_dim=16, seed=0)
feats = stream(1, "f").standard_normal((8, 16))
targets = stream(1, "t").integers(0, 5000, size=8)

full_loss, _ = xent_smoothed(logits(head, feats), targets, 0.8)
exact = sampled_xent(head, feats, targets, 0.8, np.arange(5000))
print(f"full loss {full_loss:.6f}; all-candidate sampled loss {exact.loss:.6f} "
      f"(bit-identical: {exact.loss == full_loss})")

cands = sample_candidates(targets, 5000, 64, RngState(2))
sparse = sampled_xent(head, feats, targets, 0.8, cands)
print(f"64-candidate loss {sparse.loss:.6f} (a biased estimate); "
      f"gradient touches {cands.size} of 5000 weight rows")

# --- subsampling: train on half the data, probe on the same held-out split
base = TrainConfig(
    dataset=SyntheticSpec("gaussian-clusters", 800, 16, 10, 0.3, 2),
    encoder_hidden=(64,),
    feature_dim=32,
    epochs=80,
    probe_every=80,
    optim=OptimConfig(batch_size=128, warmup_epochs=5),
)
for m in (None, 400):
    artifact = run_diet(dataclasses.replace(base, subsample_m=m))
    label = "full data " if m is None else f"subsample {m}"
    print(f"{label}: head outputs {artifact.state.head.n_classes:>4}, "
          f"probe top-1 {artifact.final_probe_top1:.4f}")

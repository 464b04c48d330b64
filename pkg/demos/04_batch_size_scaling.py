"""Batch-size robustness under the linear learning-rate scaling rule.

The peak learning rate is base_lr * batch_size / 256, so halving the batch
halves the rate.  With that rule in place, final probe accuracy should barely
move across batch sizes.
"""

import dataclasses

from diet.config import TrainConfig
from diet.data import SyntheticSpec
from diet.harness import run_diet
from diet.optim import OptimConfig, scaled_lr

base = TrainConfig(
    dataset=SyntheticSpec("gaussian-clusters", 512, 16, 8, 0.25, 1),
    encoder_hidden=(64,),
    feature_dim=32,
    epochs=60,
    probe_every=60,
)

print(f"{'batch':>6} {'peak lr':>10} {'final loss':>12} {'probe top-1':>12}")
for bs in (32, 64, 128, 256):
    optim = OptimConfig(batch_size=bs, warmup_epochs=5)
    artifact = run_diet(dataclasses.replace(base, optim=optim))
    print(
        f"{bs:>6} {scaled_lr(optim):>10.6f} "
        f"{artifact.final_train_loss:>12.4f} {artifact.final_probe_top1:>12.4f}"
    )

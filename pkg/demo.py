#!/usr/bin/env python
"""Demo script: a tiny generate -> train -> evaluate -> render run in memory."""

import tempfile

from src.config import Config
from src.metrics import build_report, select_tau
from src.models import SceneCache, create_model
from src.scenes import Vocabulary, census, generate_split
from src.training import Trainer
from src.visualize import render_shift_kernel

print("shiftlab - Demo")
print("=" * 50)
print()

config = Config.from_dict(
    {
        "generation": {"train_size": 60, "val_size": 20, "test_size": 20},
        "model": {"shift_channels": 4},
        "training": {"epochs": 3, "batch_size": 16, "learning_rate": 0.003},
    }
)
gen = config.generation
vocabulary = Vocabulary.from_config(gen)

print("✓ Generating scenes...")
splits = {
    split: generate_split(gen, 17, split, size)
    for split, size in (("train", gen.train_size), ("val", gen.val_size), ("test", gen.test_size))
}
stats = census(splits["train"], vocabulary)
print(f"  {stats['scenes']} training scenes, {stats['queries']} queries")
print(f"  Ambiguous scenes: {stats['ambiguous_fraction']:.2f}")
print()

caches = {
    split: SceneCache(scenes, vocabulary, config.encoder.grid_size, config.encoder.mode)
    for split, scenes in splits.items()
}

print("✓ Training SSAS (t=2)...")
model = create_model("ssas", vocabulary, config, seed=17)
trainer = Trainer(model, config.training, caches["train"], caches["val"])
trainer.set_status_callback(lambda message: print(f"  {message}"))
trainer.train()
print()

print("✓ Evaluating...")
tau = select_tau(model, caches["val"], config.evaluation)
report = build_report(model, caches["test"], config.evaluation, tau)
print(f"  tau {tau:.1f}: S-IoU {report.overall.s_iou:.3f}, O-IoU {report.overall.o_iou:.3f}")
print(f"  Ambiguous subset ({report.ambiguous.n} queries): S-IoU {report.ambiguous.s_iou:.3f}")
print()

print("✓ Rendering the 'left' shift...")
with tempfile.TemporaryDirectory() as out:
    sidecar = render_shift_kernel(model, vocabulary.predicate_id("left"), "left", 14, out)
d_row, d_col = sidecar["forward"]["displacement"]
print(f"  Centred attention moves by Δrow {d_row:+.2f}, Δcol {d_col:+.2f}")
print()

print("=" * 50)
print("Demo finished! ✨")
print()
print("For the full pipeline:")
print("  shiftlab generate --out data")
print("  shiftlab train --data data --out ssas.ckpt")
print("  shiftlab eval --ckpt ssas.ckpt --data data --out eval")

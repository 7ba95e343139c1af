"""
Training a decoder, then stylizing
==================================

A short run on procedurally generated content/style pairs. The loss trace is
written as CSV; the trained decoder then stylizes a held-out pair, with the
graph layers dropped as at inference time.
"""

from pathlib import Path

import numpy as np

from grin.data import generate_pair
from grin.imageio import write_png
from grin.net import DecoderParams, stylize
from grin.tensor import Rng
from grin.trainer import TrainConfig, moving_average, trace_csv, train

out_dir = Path(__file__).with_name("output")
out_dir.mkdir(exist_ok=True)

###############################################################################
# 150 steps at batch 8 take well under a minute on one core.
cfg = TrainConfig(steps=150, batch_size=8, image_size=32, seed=0,
                  checkpoint_path=str(out_dir / "demo.grin"))
result = train(cfg)
(out_dir / "demo.csv").write_text(trace_csv(result.trace))
ma = moving_average([r.total for _, r in result.trace])
print(f"total loss, 10-step average: {ma[0]:.1f} -> {ma[-1]:.1f}")

###############################################################################
# Stylize an unseen pair. Only decoder weights are used.
pair = generate_pair(Rng(12345), 32)
decoder = DecoderParams.from_named(result.params)
image = stylize(pair.content, pair.style, decoder)
for name, img in (("content", pair.content), ("style", pair.style), ("stylized", image)):
    write_png(out_dir / f"{name}.png", img)
print("wrote", sorted(p.name for p in out_dir.glob("*.png")))
print("stylized range:", float(np.min(image)), float(np.max(image)))

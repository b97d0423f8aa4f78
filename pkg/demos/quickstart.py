"""Compress a short synthetic series, write the archive, read it back.

Runs in well under a minute on a small grid with a loose tolerance:

    python3 demos/quickstart.py
"""
import os
import tempfile

import numpy as np

from bandcodec import container, metrics, synth, trc
from bandcodec.codec import CodecConfig
from bandcodec.pyramid import NetSpec

shape = (4, 24, 48)
spec = synth.random_spec(shape, n_spikes=5, seed=3)
frames = synth.gen_series(shape, spec, 3, drift=0.01)

# Small networks and short budgets; a real run would use CodecConfig().
cfg = CodecConfig(
    eps=3e-2,
    quantile=0.99,
    thumb=NetSpec(2, 16, 14.0),
    mid_block=NetSpec(1, 8, 22.0),
    trc_thumb=NetSpec(2, 8, 15.0),
    trc_residual=NetSpec(1, 8, 16.0),
    thumb_steps=400,
    block_steps=300,
    idm_budget=300,
    max_depth=1,
    warm_steps=100,
    trc_steps=150,
)
chain = trc.compress_series(frames, cfg)

with tempfile.TemporaryDirectory() as tmp:
    path = os.path.join(tmp, "demo.hha")
    size = container.write_archive(path, chain)
    with open(path, "rb") as fh:
        data = fh.read()
    decoded, back, _ = container.decode(data)

report = {"bytes": size, "ratio": container.compression_ratio(size, frames)}
for t, (f, d, art) in enumerate(zip(frames, decoded, back.frames)):
    kind = "full" if t == 0 or t in back.retrain_markers else "delta"
    report[f"frame{t}_{kind}_norm_rmse"] = metrics.normalized_rmse(f, d, art.norm)
report.update({f"{k}_bytes": v for k, v in container.inspect(data).items()})
print(metrics.format_report(report))
assert all(np.isfinite(d.values).all() for d in decoded)

"""Export attention maps, render query heatmaps, and plot spectra.

Every encoder block's attention tensor is row-stochastic; one query pixel's
row reshapes to the key grid as a heatmap. The cumulative singular-value
curve of a map shows how much of it low-rank structure explains (flat early
curve = high rank; steep = low rank).
"""

from pathlib import Path

import numpy as np

from styleattn import verify
from styleattn.generator import build, preset
from styleattn.imageio import heatmap_png
from styleattn.substrate import RngStream

out = Path("demo_out/attention")
out.mkdir(parents=True, exist_ok=True)

g = build(preset("toy16"), seed=5, dtype=np.float64)
z = g.sample_z(RngStream(5, ("attn",)))
records = g.export_attention(z)
for rec in records:
    heads, n, m = rec["tensor"].shape
    print(f"stage {rec['stage']} block {rec['block']} @ {rec['resolution']}px: "
          f"{heads} heads, map {n}x{m}, row sums within "
          f"{np.abs(rec['tensor'].sum(-1) - 1).max():.1e} of 1")

query = 5
rec = records[-1]
side = int(np.sqrt(rec["key_pixels"]))
for h in range(rec["tensor"].shape[0]):
    sheet = rec["tensor"][h, query].reshape(side, side)
    heatmap_png(sheet, out / f"head{h}_query{query}.png")
print(f"\nwrote per-head heatmaps for query pixel {query} to {out}/")

stream = RngStream(5, ("spectrum",))
latents = [g.sample_z(stream) for _ in range(16)]
curve = verify.attention_spectrum(g, latents, stage=1)
(out / "spectrum_stage1.csv").write_text(curve.to_csv())
k = len(curve.values)
print(f"spectrum curve ({k} points): "
      f"25% of singular values carry {curve.values[k // 4 - 1]:.1%} of the mass "
      f"(untrained model; trained maps concentrate much harder)")

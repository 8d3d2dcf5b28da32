#!/usr/bin/env python3
"""The three affinity targets the matching loss trains toward.

Full matches pull the affinity matrix onto a Gaussian diagonal, non-matches
toward normalized noise, and front-partial matches toward a row-wise blend.
Renders each as ASCII art and a PGM, then shows what an untrained model's
affinity looks like by comparison.
"""

from pathlib import Path

from crosskws import losses, metrics
from crosskws.corpus import synth_toy_corpus
from crosskws.model import ModelConfig, forward, init_params

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

SHADES = " .:-=+*#%@"


def ascii_heat(m):
    lo, hi = m.min(), m.max()
    span = hi - lo if hi > lo else 1.0
    lines = []
    for row in m:
        idx = ((row - lo) / span * (len(SHADES) - 1)).astype(int)
        lines.append("".join(SHADES[i] for i in idx))
    return "\n".join(lines)


t_t, t_a = 8, 16
full = losses.target_full(t_t, t_a, g=0.2)
non = losses.target_non(t_t, t_a, seed=42)
partial = losses.target_partial(t_t, t_a, boundary_k=4, seed=42)

for name, m in (("full match (Gaussian diagonal)", full),
                ("non-match (normalized noise)", non),
                ("partial front, boundary 4", partial)):
    print(f"--- {name}, rows sum to "
          f"{m.sum(axis=1).min():.3f}..{m.sum(axis=1).max():.3f} ---")
    print(ascii_heat(m))
    print()

metrics.export_affinity(full, OUT / "target_full.csv", OUT / "target_full.pgm")
metrics.export_affinity(non, OUT / "target_non.csv", OUT / "target_non.pgm")
metrics.export_affinity(partial, OUT / "target_partial.csv",
                        OUT / "target_partial.pgm")
print(f"wrote target PGMs to {OUT}")

# --- what an untrained detector produces ----------------------------------
toy = synth_toy_corpus(4, 4, seed=0)
pair = toy.train_pairs[0]
params = init_params(0, ModelConfig(embed_dim=32))
out = forward(pair.features.frames, pair.phonemes, params)
print(f"\nuntrained affinity for a matched pair "
      f"({out.affinity.data.shape[0]} phonemes x "
      f"{out.affinity.data.shape[1]} audio frames):")
print(ascii_heat(out.affinity.data))
print("\nno structure yet; demo 05 trains the model and the diagonal appears.")
metrics.export_affinity(out.affinity.data, OUT / "affinity_untrained.csv",
                        OUT / "affinity_untrained.pgm")

#!/usr/bin/env python3
"""End-to-end: synthesize a corpus, train the detector, evaluate, inspect.

Runs a scaled-down configuration (4 keywords, embedding width 32) so the
whole story takes about a minute.  The full-size acceptance run lives in
tests/test_acceptance.py.
"""

import time
from pathlib import Path

import numpy as np

from crosskws import metrics
from crosskws.corpus import synth_toy_corpus
from crosskws.losses import MatchKind
from crosskws.model import forward
from crosskws.training import TrainConfig, evaluate, train

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

print("synthesizing 4 tone keywords x 8 recordings ...")
toy = synth_toy_corpus(4, 8, seed=21)
kinds = sorted({p.match_type.kind.value for p in toy.train_pairs})
print(f"  {len(toy.train_pairs)} training pairs, match kinds {kinds}")
print(f"  {len(toy.eval_episodes)} held-out episodes "
      f"(3 positives + 3 negatives each)")

config = TrainConfig(steps=900, batch_size=2, learning_rate=1e-3, seed=21,
                     embed_dim=32)
print(f"\ntraining {config.steps} steps (embed dim {config.embed_dim}) ...")
t0 = time.monotonic()
params, logs = train(toy.train_pairs, config)
elapsed = time.monotonic() - t0
head = np.mean([l.total for l in logs[:90]])
tail = np.mean([l.total for l in logs[-90:]])
switch = next(l.step for l in logs if l.phase == "focal")
print(f"  {elapsed:.0f}s; loss {head:.3f} -> {tail:.3f}; "
      f"BCE until step {switch}, focal after")

report = evaluate(params, toy.eval_episodes)
print(f"\nheld-out results: EER {report.eer:.3f}, AUC {report.auc:.3f} "
      f"over {report.n_scores} pairs")
for length, entry in sorted(report.by_length.items()):
    if entry["count"]:
        print(f"  {length}-word keywords: n={entry['count']}, "
              f"eer={entry['eer']}, auc={entry['auc']}")
metrics.write_report(report, OUT / "toy_eval.json", OUT / "toy_det.csv")
print(f"wrote {OUT/'toy_eval.json'} and DET points")

# --- look at the affinity matrices the detector learned -------------------
episode = toy.eval_episodes[0]
matched = episode.positives[0]
unmatched = next(p for p in episode.negatives
                 if p.match_type.kind is MatchKind.NON)

out_pos = forward(matched.features.frames, matched.phonemes, params)
out_neg = forward(unmatched.features.frames, unmatched.phonemes, params)
print(f"\nanchor {episode.anchor_text!r}:")
print(f"  matched audio     -> p = {out_pos.prob.item():.3f}")
print(f"  non-match audio   -> p = {out_neg.prob.item():.3f}")

metrics.export_affinity(out_pos.affinity.data, OUT / "affinity_match.csv",
                        OUT / "affinity_match.pgm")
metrics.export_affinity(out_neg.affinity.data, OUT / "affinity_nonmatch.csv",
                        OUT / "affinity_nonmatch.pgm")
print(f"affinity PGMs in {OUT} (matched shows the diagonal ridge)")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not installed; skipping DET plot")
else:
    fig, (ax1, ax2, ax3) = plt.subplots(1, 3, figsize=(12, 3.6))
    fars = [p[0] for p in report.det_points]
    misses = [p[1] for p in report.det_points]
    ax1.plot(fars, misses, marker=".")
    ax1.set_xlabel("false-alarm rate")
    ax1.set_ylabel("miss rate")
    ax1.set_title(f"DET (EER {report.eer:.2f})")
    ax2.imshow(out_pos.affinity.data.T, aspect="auto", origin="lower",
               interpolation="nearest")
    ax2.set_title("affinity: matched")
    ax2.set_xlabel("phoneme")
    ax2.set_ylabel("audio frame")
    ax3.imshow(out_neg.affinity.data.T, aspect="auto", origin="lower",
               interpolation="nearest")
    ax3.set_title("affinity: non-match")
    ax3.set_xlabel("phoneme")
    fig.tight_layout()
    fig.savefig(OUT / "toy_training.png", dpi=110)
    print(f"saved {OUT/'toy_training.png'}")

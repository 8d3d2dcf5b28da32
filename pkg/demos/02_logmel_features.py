#!/usr/bin/env python3
"""From waveform to the 40-band log-mel matrix the audio encoder eats.

Synthesizes a three-tone sweep, walks through framing, the mel filterbank,
and noise mixing at an exact SNR, and saves a picture of the features.
"""

from pathlib import Path

import numpy as np

from crosskws import dsp

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

rate = 16000
rng = np.random.default_rng(1)

# --- a toy utterance: 440 Hz, 880 Hz, 1760 Hz, 0.3 s each ----------------
pieces = []
for freq in (440.0, 880.0, 1760.0):
    t = np.arange(int(0.3 * rate)) / rate
    pieces.append(0.3 * np.sin(2 * np.pi * freq * t))
wave = dsp.Waveform(np.concatenate(pieces), rate)
print(f"waveform: {len(wave)} samples, {wave.duration:.2f} s")

# --- framing: 25 ms windows every 10 ms ----------------------------------
frames = dsp.frame_signal(wave, 400, 160)
print(f"framing: {frames.shape[0]} Hamming frames of {frames.shape[1]} samples")

# --- the filterbank -------------------------------------------------------
fb = dsp.mel_filterbank()
print(f"filterbank: {fb.shape[0]} triangles over {fb.shape[1]} FFT bins, "
      f"all rows positive: {bool(np.all(fb.sum(axis=1) > 0))}")

feats = dsp.log_mel(wave)
print(f"log-mel features: {feats.frames.data.shape}")

# each tone should light up a different filter
thirds = np.array_split(feats.frames.data, 3)
for freq, chunk in zip((440, 880, 1760), thirds):
    winner = np.bincount(chunk.argmax(axis=1)).argmax()
    print(f"  {freq:5d} Hz -> dominant mel filter {winner}")

# --- noise mixing at an exact SNR -----------------------------------------
noise = dsp.Waveform(rng.normal(size=len(wave)), rate)
for snr in (15.0, 5.0):
    mixed = dsp.mix_at_snr(wave, noise, snr)
    added = mixed.samples - wave.samples
    achieved = 10 * np.log10(np.mean(wave.samples ** 2) / np.mean(added ** 2))
    print(f"mix at {snr:4.1f} dB -> achieved {achieved:.9f} dB")

dsp.write_wav(OUT / "demo_tones.wav", wave)
dsp.write_wav(OUT / "demo_tones_noisy.wav", dsp.mix_at_snr(wave, noise, 5.0))
print(f"wrote {OUT/'demo_tones.wav'} and a 5 dB noisy version")

# --- picture, if matplotlib is around -------------------------------------
try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not installed; skipping the feature plot")
else:
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6))
    ax1.imshow(feats.frames.data.T, aspect="auto", origin="lower",
               interpolation="nearest")
    ax1.set_title("log-mel features (tone sweep)")
    ax1.set_xlabel("frame")
    ax1.set_ylabel("mel band")
    noisy_feats = dsp.log_mel(dsp.mix_at_snr(wave, noise, 5.0))
    ax2.imshow(noisy_feats.frames.data.T, aspect="auto", origin="lower",
               interpolation="nearest")
    ax2.set_title("same audio at 5 dB SNR")
    ax2.set_xlabel("frame")
    ax2.set_ylabel("mel band")
    fig.tight_layout()
    fig.savefig(OUT / "logmel_demo.png", dpi=110)
    print(f"saved {OUT/'logmel_demo.png'}")

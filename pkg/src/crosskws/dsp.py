"""Waveform handling and log-mel feature extraction.

Converts mono PCM16 WAV audio into the 40-band log-mel matrices the audio
encoder consumes (25 ms Hamming frames every 10 ms, 512-point FFT, HTK mel
scale spanning 0 to Nyquist, natural log with a 1e-10 floor), and mixes
noise into clean speech at an exact target SNR.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np

from .tensor import Tensor

N_MELS = 40
FRAME_MS = 25
HOP_MS = 10
LOG_FLOOR = 1e-10


@dataclass
class Waveform:
    """Mono audio samples as float64, nominally within [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("waveform samples must be 1-D")
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform holds non-finite samples")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class FeatureMatrix:
    """T x 40 log-mel energies plus the framing that produced them."""

    frames: Tensor
    frame_shift_ms: int = HOP_MS
    frame_length_ms: int = FRAME_MS

    def __post_init__(self):
        if self.frames.data.ndim != 2 or self.frames.data.shape[1] != N_MELS:
            raise ValueError(f"feature matrix must be T x {N_MELS}")

    @property
    def num_frames(self) -> int:
        return self.frames.data.shape[0]


def read_wav(path) -> Waveform:
    """Read a mono PCM16 RIFF WAV file; reject anything else."""
    with wave.open(str(path), "rb") as wf:
        if wf.getnchannels() != 1:
            raise ValueError(f"{path}: expected mono audio, got {wf.getnchannels()} channels")
        if wf.getsampwidth() != 2:
            raise ValueError(f"{path}: expected 16-bit PCM, got {8 * wf.getsampwidth()}-bit")
        if wf.getcomptype() != "NONE":
            raise ValueError(f"{path}: compressed WAV ({wf.getcomptype()}) not supported")
        raw = wf.readframes(wf.getnframes())
        rate = wf.getframerate()
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return Waveform(samples, rate)


def write_wav(path, w: Waveform) -> None:
    """Write as mono PCM16; samples are clipped to [-1, 1] on the way out."""
    pcm = np.clip(w.samples, -1.0, 1.0)
    ints = np.round(pcm * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(w.sample_rate)
        wf.writeframes(ints.tobytes())


def frame_signal(w: Waveform, frame_len: int, hop: int) -> np.ndarray:
    """Slice into Hamming-windowed frames: T = 1 + floor((N - frame_len) / hop)."""
    if not frame_len >= hop >= 1:
        raise ValueError(f"need frame_len >= hop >= 1, got {frame_len}, {hop}")
    n = len(w.samples)
    if n < frame_len:
        raise ValueError(f"signal of {n} samples is shorter than one {frame_len}-sample frame")
    t = 1 + (n - frame_len) // hop
    idx = np.arange(t)[:, None] * hop + np.arange(frame_len)[None, :]
    return w.samples[idx] * np.hamming(frame_len)


def mel_filterbank(sample_rate: int = 16000, n_fft: int = 512,
                   n_mels: int = N_MELS) -> np.ndarray:
    """Triangular filters, n_mels x (n_fft/2 + 1), HTK mel spacing over 0..Nyquist."""

    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    nyquist = sample_rate / 2.0
    mel_pts = np.linspace(hz_to_mel(0.0), hz_to_mel(nyquist), n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    bin_freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft

    fb = np.zeros((n_mels, n_fft // 2 + 1))
    for i in range(n_mels):
        left, center, right = hz_pts[i], hz_pts[i + 1], hz_pts[i + 2]
        rising = (bin_freqs - left) / (center - left)
        falling = (right - bin_freqs) / (right - center)
        fb[i] = np.maximum(0.0, np.minimum(rising, falling))
    return fb


def log_mel(w: Waveform) -> FeatureMatrix:
    """Waveform -> T x 40 natural-log mel energies (floor 1e-10)."""
    if len(w.samples) == 0:
        raise ValueError("empty waveform")
    frame_len = int(round(w.sample_rate * FRAME_MS / 1000))
    hop = int(round(w.sample_rate * HOP_MS / 1000))
    n_fft = 1
    while n_fft < frame_len:
        n_fft *= 2
    frames = frame_signal(w, frame_len, hop)
    power = np.abs(np.fft.rfft(frames, n=n_fft, axis=1)) ** 2
    fb = mel_filterbank(w.sample_rate, n_fft)
    energies = power @ fb.T
    return FeatureMatrix(Tensor(np.log(energies + LOG_FLOOR)))


def mix_at_snr(clean: Waveform, noise: Waveform, snr_db: float) -> Waveform:
    """clean + alpha * noise, with alpha set so the SNR is exactly snr_db.

    Noise is looped or truncated to the clean length first; powers are mean
    squares over that span.
    """
    if clean.sample_rate != noise.sample_rate:
        raise ValueError("clean and noise sample rates differ")
    n = len(clean.samples)
    if n == 0:
        raise ValueError("empty clean signal")
    if len(noise.samples) == 0:
        raise ValueError("empty noise signal")
    reps = -(-n // len(noise.samples))
    noise_fit = np.tile(noise.samples, reps)[:n]

    p_clean = float(np.mean(clean.samples ** 2))
    p_noise = float(np.mean(noise_fit ** 2))
    if p_clean == 0.0:
        raise ValueError("clean signal has zero power")
    if p_noise == 0.0:
        raise ValueError("noise signal has zero power")
    alpha = np.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0)))
    return Waveform(clean.samples + alpha * noise_fit, clean.sample_rate)

"""Adam optimization, the training loop, and episode evaluation.

Each training step runs every pair in the batch through the detector twice
on the audio side: once clean and once with fresh noise mixed in at an SNR
drawn uniformly from the configured range.  The de-noising loss ties the
two audio embeddings together; the matching and detection losses are
computed on the clean path only.  Batch losses are averaged, so the
learning rate is batch-size stable.  All randomness (batch order, SNR
draws, noise, matching-loss targets) derives from the single config seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .corpus import Episode, LabeledPair
from .dsp import Waveform, log_mel, mix_at_snr
from .losses import (LossWeights, denoising_loss, detection_loss, mml_loss,
                     total_loss)
from .metrics import EvalReport, build_report
from .model import (ForwardOutput, ModelConfig, ModelParams, encode_audio,
                    forward, init_params)


@dataclass
class TrainConfig:
    steps: int = 1000
    batch_size: int = 2
    learning_rate: float = 1e-3
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    snr_low: float = 5.0
    snr_high: float = 15.0
    eval_interval: int = 0  # 0 disables mid-run evaluation
    embed_dim: int = 128

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.snr_low > self.snr_high:
            raise ValueError("snr_low must not exceed snr_high")


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(params: ModelParams, grads: dict[str, np.ndarray],
              state: AdamState, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    """One bias-corrected Adam update, applied in place to the parameters."""
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for name in params.names():
        p = params[name]
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.data.shape:
            raise T.ShapeError(f"gradient shape {g.shape} != param {p.data.shape} "
                               f"for {name!r}")
        m = state.m.setdefault(name, np.zeros_like(p.data))
        v = state.v.setdefault(name, np.zeros_like(p.data))
        m[...] = beta1 * m + (1.0 - beta1) * g
        v[...] = beta2 * v + (1.0 - beta2) * g * g
        p.data = p.data - lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return state


def _rng_for(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                        spawn_key=key))


def noisy_variant(pair: LabeledPair, rng: np.random.Generator,
                  snr_low: float, snr_high: float):
    """Fresh white noise mixed into the pair's clean audio at a drawn SNR."""
    snr = rng.uniform(snr_low, snr_high)
    noise = Waveform(rng.normal(0.0, 1.0, size=len(pair.wave)),
                     pair.wave.sample_rate)
    return log_mel(mix_at_snr(pair.wave, noise, snr))


@dataclass
class StepLog:
    step: int
    l_dn: float
    l_mm: float
    l_d: float
    total: float
    phase: str


def train(pairs: list[LabeledPair], config: TrainConfig,
          eval_episodes: list[Episode] | None = None
          ) -> tuple[ModelParams, list[StepLog]]:
    """Minimize the combined objective over labeled pairs.

    Returns the trained parameters and a per-step component log.  With
    ``eval_interval`` set and episodes supplied, pooled EER/AUC are attached
    to the log rows at that cadence (as extra attributes on the StepLog).
    """
    if not pairs:
        raise ValueError("training corpus is empty")
    params = init_params(config.seed, ModelConfig(embed_dim=config.embed_dim))
    state = AdamState()
    w = config.weights
    order_rng = _rng_for(config.seed, 0)
    order = order_rng.permutation(len(pairs))
    cursor = 0
    logs: list[StepLog] = []

    for step in range(config.steps):
        step_fraction = step / config.steps
        phase = "bce" if step_fraction < w.switch_fraction else "focal"
        batch: list[LabeledPair] = []
        for _ in range(config.batch_size):
            if cursor == len(order):
                order = order_rng.permutation(len(pairs))
                cursor = 0
            batch.append(pairs[order[cursor]])
            cursor += 1

        params.zero_grad()
        comp_sums = np.zeros(3)
        with T.Tape() as tape:
            batch_total = None
            for slot, pair in enumerate(batch):
                noise_rng = _rng_for(config.seed, 1, step, slot)
                noisy_feats = noisy_variant(pair, noise_rng,
                                            config.snr_low, config.snr_high)
                out: ForwardOutput = forward(pair.features.frames,
                                             pair.phonemes, params)
                e_noisy = encode_audio(noisy_feats.frames, params)
                l_dn = denoising_loss(out.e_a, e_noisy)
                target_seed = int(_rng_for(config.seed, 2, step, slot)
                                  .integers(0, 2 ** 31))
                l_mm = mml_loss(out.affinity, pair.match_type, target_seed,
                                g=w.gaussian_width)
                l_d = detection_loss(out.prob, pair.label, step_fraction, w)
                pair_total = total_loss(l_dn, l_mm, l_d, w)
                comp_sums += (l_dn.item(), l_mm.item(), l_d.item())
                batch_total = pair_total if batch_total is None else T.add(
                    batch_total, pair_total)
            batch_loss = T.scale(batch_total, 1.0 / len(batch))
            T.backward(batch_loss, tape)

        grads = {name: params[name].grad for name in params.names()
                 if params[name].grad is not None}
        adam_step(params, grads, state, lr=config.learning_rate)

        comp = comp_sums / len(batch)
        logs.append(StepLog(step=step, l_dn=float(comp[0]), l_mm=float(comp[1]),
                            l_d=float(comp[2]), total=float(batch_loss.item()),
                            phase=phase))
    return params, logs


def score_pairs(params: ModelParams, pairs: list[LabeledPair]
                ) -> tuple[list[float], list[int], list[int]]:
    scores, labels, n_words = [], [], []
    for pair in pairs:
        out = forward(pair.features.frames, pair.phonemes, params)
        scores.append(out.prob.item())
        labels.append(pair.label)
        n_words.append(pair.n_words)
    return scores, labels, n_words


def evaluate(params: ModelParams, episodes: list[Episode]) -> EvalReport:
    """Score every episode pair and pool them into one report."""
    if not episodes:
        raise ValueError("no evaluation episodes")
    pairs: list[LabeledPair] = []
    for ep in episodes:
        pairs.extend(ep.positives)
        pairs.extend(ep.negatives)
    scores, labels, n_words = score_pairs(params, pairs)
    return build_report(scores, labels, n_words)


def write_metrics_csv(path, logs: list[StepLog]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("step,l_dn,l_mm,l_d,total,phase\n")
        for row in logs:
            fh.write(f"{row.step},{row.l_dn!r},{row.l_mm!r},{row.l_d!r},"
                     f"{row.total!r},{row.phase}\n")

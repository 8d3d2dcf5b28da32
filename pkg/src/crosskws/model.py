"""The cross-modal keyword detector.

Four pieces: an audio encoder (two 1-D convolutions, the first with stride
2, then two GRUs), a text encoder (phoneme one-hots through an affine
layer), a pattern extractor (single-head cross-attention with the text
embedding as query and the audio embedding as key and value, no learned
projections) and a pattern discriminator (GRU over the attention output,
last state through an affine layer and a sigmoid).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import Tensor
from .text import INVENTORY_SIZE, PhonemeSequence, phoneme_onehot

_CHECKPOINT_MAGIC = b"CKWS"
_CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 128
    n_mels: int = 40
    inventory_size: int = INVENTORY_SIZE
    conv_kernel: int = 5
    conv_stride: int = 2


@dataclass
class ModelParams:
    """All trainable weights, keyed by name."""

    config: ModelConfig
    tensors: dict[str, Tensor] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def names(self) -> list[str]:
        return sorted(self.tensors)

    def values(self) -> list[Tensor]:
        return [self.tensors[n] for n in self.names()]

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.zero_grad()


def glorot_bound(shape: tuple[int, ...]) -> float:
    """sqrt(6 / (fan_in + fan_out)).

    Matrices (in x out) use their two dims as fans; conv stacks
    (C_out x C_in x k) use fan_in = C_in*k, fan_out = C_out*k.
    """
    if len(shape) == 2:
        fan_in, fan_out = shape
    elif len(shape) == 3:
        c_out, c_in, k = shape
        fan_in, fan_out = c_in * k, c_out * k
    else:
        raise ValueError(f"no fan convention for shape {shape}")
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_params(seed: int, config: ModelConfig = ModelConfig()) -> ModelParams:
    """Glorot-uniform weights, zero biases, deterministic per seed."""
    rng = np.random.default_rng(seed)
    m = config.embed_dim
    k = config.conv_kernel

    def uniform(name, *shape):
        bound = glorot_bound(shape)
        params.tensors[name] = Tensor(rng.uniform(-bound, bound, size=shape), name=name)

    def zeros(name, *shape):
        params.tensors[name] = Tensor(np.zeros(shape), name=name)

    params = ModelParams(config)
    uniform("conv1_w", m, config.n_mels, k)
    zeros("conv1_b", m)
    uniform("conv2_w", m, m, k)
    zeros("conv2_b", m)
    for gru in ("agru1", "agru2", "dgru"):
        uniform(f"{gru}_w", m, 3 * m)
        uniform(f"{gru}_u", m, 3 * m)
        zeros(f"{gru}_b", 3 * m)
    uniform("text_w", config.inventory_size, m)
    zeros("text_b", m)
    uniform("out_w", m, 1)
    zeros("out_b", 1)
    return params


@dataclass
class ForwardOutput:
    prob: Tensor      # scalar detection probability, in (0, 1)
    affinity: Tensor  # T_t x T_a row-stochastic attention weights
    e_a: Tensor       # T_a x m audio embedding (for the de-noising loss)


def encode_audio(features: Tensor, params: ModelParams) -> Tensor:
    """T x n_mels log-mel matrix -> ceil(T/2) x m embedding."""
    if features.data.ndim != 2 or features.data.shape[0] == 0:
        raise T.EmptyInputError("audio features must be a nonempty T x n_mels matrix")
    p = params
    h = T.conv1d(features, p["conv1_w"], stride=p.config.conv_stride)
    h = T.relu(T.add_rowvec(h, p["conv1_b"]))
    h = T.conv1d(h, p["conv2_w"], stride=1)
    h = T.relu(T.add_rowvec(h, p["conv2_b"]))
    h = T.gru_forward(h, p["agru1_w"], p["agru1_u"], p["agru1_b"])
    h = T.gru_forward(h, p["agru2_w"], p["agru2_u"], p["agru2_b"])
    return h


def encode_text(seq: PhonemeSequence, params: ModelParams) -> Tensor:
    """Phoneme sequence -> T_t x m embedding through one affine layer."""
    onehot = phoneme_onehot(seq)
    if onehot.data.shape[1] != params.config.inventory_size:
        raise T.ShapeError("phoneme inventory does not match the model")
    return T.add_rowvec(T.matmul(onehot, params["text_w"]), params["text_b"])


def pattern_extract(e_t: Tensor, e_a: Tensor) -> tuple[Tensor, Tensor]:
    """Cross-attention: A = softmax_rows(e_t e_a^T / sqrt(m)); attn = A e_a."""
    if e_t.data.shape[0] == 0 or e_a.data.shape[0] == 0:
        raise T.EmptyInputError("pattern_extract needs nonempty embeddings")
    if e_t.data.shape[1] != e_a.data.shape[1]:
        raise T.ShapeError(
            f"embedding dims differ: text {e_t.data.shape}, audio {e_a.data.shape}")
    m = e_t.data.shape[1]
    logits = T.scale(T.matmul(e_t, T.transpose(e_a)), 1.0 / np.sqrt(m))
    affinity = T.softmax_rows(logits)
    attn = T.matmul(affinity, e_a)
    return affinity, attn


# Pre-sigmoid clamp keeping the probability strictly inside (0, 1) at
# float64 (sigmoid saturates to exactly 1.0 past ~36.7).
_LOGIT_LIMIT = 30.0


def discriminate(attn: Tensor, params: ModelParams) -> Tensor:
    """Attention rows -> scalar keyword probability."""
    if attn.data.ndim != 2 or attn.data.shape[0] == 0:
        raise T.EmptyInputError("discriminator input must be a nonempty T_t x m matrix")
    p = params
    states = T.gru_forward(attn, p["dgru_w"], p["dgru_u"], p["dgru_b"])
    last = T.reshape(T.take_row(states, -1), (1, p.config.embed_dim))
    logit = T.add_rowvec(T.matmul(last, p["out_w"]), p["out_b"])
    prob = T.sigmoid(T.clip(T.reshape(logit, ()), -_LOGIT_LIMIT, _LOGIT_LIMIT))
    return prob


def forward(features: Tensor, seq: PhonemeSequence,
            params: ModelParams) -> ForwardOutput:
    """Full detector pass; exposes the affinity matrix and audio embedding."""
    e_a = encode_audio(features, params)
    e_t = encode_text(seq, params)
    affinity, attn = pattern_extract(e_t, e_a)
    prob = discriminate(attn, params)
    return ForwardOutput(prob=prob, affinity=affinity, e_a=e_a)


def save_checkpoint(params: ModelParams, path) -> None:
    """Versioned binary dump of all named tensors; bit-exact round trip."""
    names = params.names()
    header = {
        "version": _CHECKPOINT_VERSION,
        "config": {
            "embed_dim": params.config.embed_dim,
            "n_mels": params.config.n_mels,
            "inventory_size": params.config.inventory_size,
            "conv_kernel": params.config.conv_kernel,
            "conv_stride": params.config.conv_stride,
        },
        "tensors": [{"name": n, "shape": list(params[n].data.shape)} for n in names],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", _CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(params[n].data, dtype="<f8").tobytes())


def load_checkpoint(path) -> ModelParams:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        version, blob_len = struct.unpack("<II", fh.read(8))
        if version != _CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        header = json.loads(fh.read(blob_len).decode("utf-8"))
        params = ModelParams(ModelConfig(**header["config"]))
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(8 * count)
            if len(raw) != 8 * count:
                raise ValueError(f"{path}: truncated checkpoint")
            data = np.frombuffer(raw, dtype="<f8").reshape(shape)
            params.tensors[entry["name"]] = Tensor(data.copy(), name=entry["name"])
    return params

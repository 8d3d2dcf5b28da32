"""Keyword spotting with text enrollment.

Speech and enrolled keyword text are embedded into a shared space; a
cross-attention affinity matrix between the two sequences is scored by a
small discriminator to decide whether the keyword was spoken.  Everything
runs on a self-contained float64 tensor library with reverse-mode
differentiation, so the whole pipeline is verifiable at desk scale.
"""

from .tensor import Tape, Tensor, backward, finite_diff_check
from .dsp import FeatureMatrix, Waveform, log_mel, mix_at_snr, read_wav, write_wav
from .text import PhonemeSequence, default_dictionary, g2p, levenshtein, load_dictionary
from .losses import LossWeights, MatchKind, MatchType
from .model import (ModelConfig, ModelParams, forward, init_params,
                    load_checkpoint, save_checkpoint)
from .corpus import (AlignedUtterance, Episode, LabeledPair, Phrase,
                     build_episodes, classify_negative, determine_match_type,
                     split_phrases, synth_toy_corpus)
from .metrics import EvalReport, build_report, compute_auc, compute_eer, det_curve
from .training import AdamState, TrainConfig, adam_step, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "AdamState", "AlignedUtterance", "Episode", "EvalReport", "FeatureMatrix",
    "LabeledPair", "LossWeights", "MatchKind", "MatchType", "ModelConfig",
    "ModelParams", "Phrase", "PhonemeSequence", "Tape", "Tensor", "TrainConfig",
    "Waveform", "adam_step", "backward", "build_episodes", "build_report",
    "classify_negative", "compute_auc", "compute_eer", "default_dictionary",
    "det_curve", "determine_match_type", "evaluate", "finite_diff_check",
    "forward", "g2p", "init_params", "levenshtein", "load_checkpoint",
    "load_dictionary", "log_mel", "mix_at_snr", "read_wav", "split_phrases",
    "synth_toy_corpus", "train", "write_wav",
]

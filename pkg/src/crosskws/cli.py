"""Command-line pipeline: corpus building, training, evaluation, inspection.

One executable with five subcommands:

    synth-corpus      generate the synthetic tone corpus (WAVs + manifests)
    build-corpus      split aligned speech into phrases and mine negatives
    train             fit the detector on a pair manifest
    eval              score an episode manifest with a checkpoint
    inspect-affinity  dump the affinity matrix for one audio/text pair

Configuration is a flat JSON object; unknown keys are rejected and each
subcommand checks its required keys.  Every random choice derives from the
single seed (``--seed`` overrides the config value).  Exit codes: 0 on
success, 1 on usage errors, 2 on data or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import dsp, metrics, model, text, training
from .losses import LossWeights

CONFIG_ENV_VAR = "CROSSKWS_CONFIG"

# key -> (type, default); None default means "required if listed by a command"
_CONFIG_KEYS: dict[str, tuple[type, object]] = {
    "seed": (int, 0),
    "threads": (int, 1),
    "out_dir": (str, None),
    "corpus_root": (str, None),
    "alignments_path": (str, None),
    "dictionary_path": (str, None),
    "steps": (int, 1000),
    "batch_size": (int, 2),
    "learning_rate": (float, 1e-3),
    "lambda_denoise": (float, 0.5),
    "lambda_match": (float, 0.3),
    "focal_gamma": (float, 2.0),
    "focal_alpha": (float, 0.25),
    "switch_fraction": (float, 0.5),
    "gaussian_width": (float, 0.2),
    "snr_low": (float, 5.0),
    "snr_high": (float, 15.0),
    "eval_interval": (int, 0),
    "embed_dim": (int, 128),
    "synth_keywords": (int, 8),
    "synth_samples_per": (int, 10),
    "neg_threshold": (int, 2),
    "negatives_per_phrase": (int, 1),
    "max_phrases_per_length": (int, 0),
}

_REQUIRED: dict[str, set[str]] = {
    "synth-corpus": {"out_dir", "synth_keywords", "synth_samples_per"},
    "build-corpus": {"out_dir", "corpus_root", "alignments_path"},
    "train": {"out_dir", "corpus_root", "steps"},
    "eval": {"out_dir", "corpus_root"},
    "inspect-affinity": set(),
}

PAIR_MANIFEST = "train_pairs.jsonl"
EPISODE_MANIFEST = "episodes.jsonl"
LEXICON_FILE = "lexicon.dict"


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def load_config(path: str | None, command: str, seed_override: int | None) -> dict:
    cfg = dict()
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        for key, value in raw.items():
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            want, _ = _CONFIG_KEYS[key]
            if want is float and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            if not isinstance(value, want) or isinstance(value, bool):
                raise ConfigError(f"config key {key!r} must be {want.__name__}")
            cfg[key] = value
    missing = _REQUIRED[command] - cfg.keys()
    if missing:
        raise ConfigError(f"{command} config is missing keys: {sorted(missing)}")
    for key, (_, default) in _CONFIG_KEYS.items():
        cfg.setdefault(key, default)
    if seed_override is not None:
        cfg["seed"] = seed_override
    if cfg["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    return cfg


def _weights(cfg: dict) -> LossWeights:
    return LossWeights(lambda_denoise=cfg["lambda_denoise"],
                       lambda_match=cfg["lambda_match"],
                       focal_gamma=cfg["focal_gamma"],
                       focal_alpha=cfg["focal_alpha"],
                       switch_fraction=cfg["switch_fraction"],
                       gaussian_width=cfg["gaussian_width"])


def _dictionary(cfg: dict) -> dict:
    if cfg.get("dictionary_path"):
        return text.load_dictionary(cfg["dictionary_path"])
    return text.default_dictionary()


def cmd_synth_corpus(cfg: dict) -> int:
    out = Path(cfg["out_dir"])
    (out / "wavs").mkdir(parents=True, exist_ok=True)
    toy = corpus_mod.synth_toy_corpus(cfg["synth_keywords"],
                                      cfg["synth_samples_per"], cfg["seed"])
    for (i, j) in sorted(toy.recordings):
        dsp.write_wav(out / corpus_mod.toy_wav_name(i, j), toy.recordings[(i, j)])
    corpus_mod.write_jsonl(out / PAIR_MANIFEST,
                           [corpus_mod.pair_to_record(p) for p in toy.train_pairs])
    episode_records = []
    for ep in toy.eval_episodes:
        episode_records.append({
            "anchor": ep.anchor_text,
            "anchor_phonemes": list(ep.anchor_phonemes.symbols),
            "tag": ep.tag,
            "positives": [corpus_mod.pair_to_record(p) for p in ep.positives],
            "negatives": [corpus_mod.pair_to_record(p) for p in ep.negatives],
        })
    corpus_mod.write_jsonl(out / EPISODE_MANIFEST, episode_records)
    with open(out / LEXICON_FILE, "w", encoding="utf-8") as fh:
        fh.write(";;; synthetic tone lexicon\n")
        for word in sorted(toy.lexicon):
            fh.write(f"{word}  {' '.join(toy.lexicon[word])}\n")
    print(f"synth-corpus: {len(toy.recordings)} recordings, "
          f"{len(toy.train_pairs)} train pairs, "
          f"{len(toy.eval_episodes)} episodes -> {out}")
    return 0


def cmd_build_corpus(cfg: dict) -> int:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    root = cfg["corpus_root"]
    dictionary = _dictionary(cfg)
    utterances = corpus_mod.read_alignments(cfg["alignments_path"])
    rng = np.random.default_rng(cfg["seed"])

    phrases: list[corpus_mod.Phrase] = []
    for n in range(1, 5):
        of_len: list[corpus_mod.Phrase] = []
        for utt in utterances:
            of_len.extend(corpus_mod.split_phrases(utt, n, dictionary))
        cap = cfg["max_phrases_per_length"]
        if cap and len(of_len) > cap:
            keep = sorted(rng.choice(len(of_len), cap, replace=False))
            of_len = [of_len[i] for i in keep]
        phrases.extend(of_len)
    if not phrases:
        raise ValueError("no phrases extracted from the alignments")

    phrase_records = [{
        "text": p.text, "n_words": p.n_words, "audio": p.audio_path,
        "start": p.start, "end": p.end, "phonemes": list(p.phonemes.symbols),
    } for p in phrases]
    corpus_mod.write_jsonl(out / "phrases.jsonl", phrase_records)

    by_len: dict[int, list[corpus_mod.Phrase]] = {}
    for p in phrases:
        by_len.setdefault(p.n_words, []).append(p)
    pair_records = []
    cache: dict = {}
    for p in phrases:
        me = corpus_mod.materialize_pair(p.text, p.phonemes, p, root, cache)
        pair_records.append(corpus_mod.pair_to_record(me))
        others = [c for c in by_len[p.n_words] if c.text != p.text]
        picked = 0
        attempts = 0
        while picked < cfg["negatives_per_phrase"] and others and attempts < 8:
            cand = others[int(rng.integers(len(others)))]
            attempts += 1
            grade = corpus_mod.classify_negative(p.phonemes, cand.phonemes,
                                                 cfg["neg_threshold"])
            if grade is corpus_mod.NegativeClass.REJECTED:
                continue
            neg = corpus_mod.materialize_pair(p.text, p.phonemes, cand, root,
                                              cache, neg_tag=grade)
            pair_records.append(corpus_mod.pair_to_record(neg))
            picked += 1
    corpus_mod.write_jsonl(out / PAIR_MANIFEST, pair_records)

    episodes = corpus_mod.build_episodes(phrases, seed=cfg["seed"],
                                         threshold=cfg["neg_threshold"], root=root)
    episode_records = []
    for ep in episodes:
        episode_records.append({
            "anchor": ep.anchor_text,
            "anchor_phonemes": list(ep.anchor_phonemes.symbols),
            "tag": ep.tag,
            "positives": [corpus_mod.pair_to_record(p) for p in ep.positives],
            "negatives": [corpus_mod.pair_to_record(p) for p in ep.negatives],
        })
    corpus_mod.write_jsonl(out / EPISODE_MANIFEST, episode_records)
    print(f"build-corpus: {len(phrases)} phrases, {len(pair_records)} pairs, "
          f"{len(episodes)} episodes -> {out}")
    return 0


def _load_pairs(cfg: dict) -> list[corpus_mod.LabeledPair]:
    root = cfg["corpus_root"]
    manifest = Path(root) / PAIR_MANIFEST
    records = corpus_mod.read_jsonl(manifest)
    if not records:
        raise ValueError(f"empty pair manifest {manifest}")
    cache: dict = {}
    return [corpus_mod.record_to_pair(r, root, cache) for r in records]


def _load_episodes(cfg: dict) -> list[corpus_mod.Episode]:
    root = cfg["corpus_root"]
    manifest = Path(root) / EPISODE_MANIFEST
    records = corpus_mod.read_jsonl(manifest)
    if not records:
        raise ValueError(f"empty episode manifest {manifest}")
    cache: dict = {}
    episodes = []
    for rec in records:
        anchor_ph = text.ids_from_symbols(rec["anchor_phonemes"],
                                          source_text=rec["anchor"])
        episodes.append(corpus_mod.Episode(
            anchor_text=rec["anchor"], anchor_phonemes=anchor_ph,
            positives=[corpus_mod.record_to_pair(r, root, cache)
                       for r in rec["positives"]],
            negatives=[corpus_mod.record_to_pair(r, root, cache)
                       for r in rec["negatives"]],
            tag=rec["tag"]))
    return episodes


def cmd_train(cfg: dict) -> int:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    pairs = _load_pairs(cfg)
    config = training.TrainConfig(steps=cfg["steps"], batch_size=cfg["batch_size"],
                                  learning_rate=cfg["learning_rate"],
                                  seed=cfg["seed"], weights=_weights(cfg),
                                  snr_low=cfg["snr_low"], snr_high=cfg["snr_high"],
                                  eval_interval=cfg["eval_interval"],
                                  embed_dim=cfg["embed_dim"])
    params, logs = training.train(pairs, config)
    model.save_checkpoint(params, out / "checkpoint.bin")
    training.write_metrics_csv(out / "metrics.csv", logs)
    print(f"train: {len(pairs)} pairs, {cfg['steps']} steps, "
          f"final loss {logs[-1].total:.6f} -> {out / 'checkpoint.bin'}")
    return 0


def cmd_eval(cfg: dict, checkpoint: str) -> int:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    params = model.load_checkpoint(checkpoint)
    episodes = _load_episodes(cfg)
    report = training.evaluate(params, episodes)
    metrics.write_report(report, out / "eval_report.json", out / "det_points.csv")
    print(f"eval: {len(episodes)} episodes, {report.n_scores} scores, "
          f"EER {report.eer:.4f}, AUC {report.auc:.4f} -> {out / 'eval_report.json'}")
    return 0


def cmd_inspect_affinity(cfg: dict, checkpoint: str, audio: str,
                         keyword: str, out_dir: str) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = model.load_checkpoint(checkpoint)
    dictionary = _dictionary(cfg)
    seq = text.g2p(keyword, dictionary)
    wave = dsp.read_wav(audio)
    feats = dsp.log_mel(wave)
    result = model.forward(feats.frames, seq, params)
    metrics.export_affinity(result.affinity.data, out / "affinity.csv",
                            out / "affinity.pgm")
    print(f"inspect-affinity: text {keyword!r} ({len(seq)} phonemes), "
          f"audio {feats.num_frames} frames, "
          f"detection probability {result.prob.item():.6f} -> {out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="crosskws",
                     description="Text-enrolled keyword spotting pipeline.")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="{synth-corpus,build-corpus,train,eval,inspect-affinity}")

    def common(p):
        p.add_argument("--config", help=f"JSON config path (or ${CONFIG_ENV_VAR})")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (currently executes serially)")

    common(sub.add_parser("synth-corpus", help="generate the synthetic tone corpus"))
    common(sub.add_parser("build-corpus", help="build phrases/episodes from aligned speech"))
    common(sub.add_parser("train", help="train a detector on a pair manifest"))

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on episodes")
    common(p_eval)
    p_eval.add_argument("--checkpoint", required=True)

    p_insp = sub.add_parser("inspect-affinity",
                            help="export the affinity matrix for one pair")
    common(p_insp)
    p_insp.add_argument("--checkpoint", required=True)
    p_insp.add_argument("--audio", required=True, help="WAV file to score")
    p_insp.add_argument("--text", required=True, dest="keyword",
                        help="enrolled keyword text")
    p_insp.add_argument("--out", default=".", help="output directory")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = load_config(args.config, args.command, args.seed)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("threads must be >= 1")
            cfg["threads"] = args.threads
        if args.command == "synth-corpus":
            return cmd_synth_corpus(cfg)
        if args.command == "build-corpus":
            return cmd_build_corpus(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, args.checkpoint)
        if args.command == "inspect-affinity":
            return cmd_inspect_affinity(cfg, args.checkpoint, args.audio,
                                        args.keyword, args.out)
        raise AssertionError(f"unhandled command {args.command}")
    except (ConfigError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

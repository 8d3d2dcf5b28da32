"""Corpus construction: phrases, labeled pairs, episodes, and a toy generator.

Real data enters as WAV files plus a word-alignment manifest (JSON lines of
``{"audio": ..., "words": [{"w": ..., "start": ..., "end": ...}]}``).
Utterances are split into 1-4 word phrases by sliding a window over the
words; negatives are mined among same-word-count phrases and graded easy or
hard by phoneme edit distance.  Evaluation episodes pair one anchor keyword
with 3 positive and 3 negative recordings.

For desk-scale runs without any speech data, ``synth_toy_corpus`` builds a
fully synthetic corpus in which each phoneme is a fixed-frequency tone
segment, so keywords are spectrally distinct and every match case
(full / none / partial front / partial back) occurs.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .dsp import FeatureMatrix, Waveform, log_mel, read_wav
from .losses import MatchKind, MatchType
from .text import PhonemeSequence, ids_from_symbols, levenshtein

logger = logging.getLogger(__name__)

MIN_PHRASE_WORDS = 1
MAX_PHRASE_WORDS = 4
DEFAULT_NEG_THRESHOLD = 2


@dataclass(frozen=True)
class WordSpan:
    text: str
    start: float
    end: float


@dataclass
class AlignedUtterance:
    """One audio file with word-level time stamps."""

    audio_path: str
    words: list[WordSpan]

    def __post_init__(self):
        prev_end = 0.0
        for w in self.words:
            if not 0.0 <= w.start < w.end:
                raise ValueError(f"bad span for {w.text!r}: [{w.start}, {w.end}]")
            if w.start < prev_end:
                raise ValueError(f"overlapping span at {w.text!r}")
            prev_end = w.end


@dataclass
class Phrase:
    """A 1-4 word window of an utterance, with its audio segment."""

    text: str
    n_words: int
    audio_path: str
    start: float
    end: float
    phonemes: PhonemeSequence | None = None

    def __post_init__(self):
        if not MIN_PHRASE_WORDS <= self.n_words <= MAX_PHRASE_WORDS:
            raise ValueError(f"phrase must have 1..4 words, got {self.n_words}")
        if not self.start < self.end:
            raise ValueError("phrase segment is empty")


class NegativeClass(enum.Enum):
    EASY = "easy"
    HARD = "hard"
    REJECTED = "rejected"


@dataclass
class LabeledPair:
    """One (audio, text keyword) example with its match annotation.

    ``audio_ref``/``span`` record where the audio came from (path relative
    to the corpus root, plus the segment in seconds when it is a slice of a
    longer file) so pairs can round-trip through manifests.
    """

    text: str
    phonemes: PhonemeSequence
    label: int
    match_type: MatchType
    wave: Waveform
    features: FeatureMatrix
    neg_tag: NegativeClass | None = None
    audio_ref: str | None = None
    span: tuple[float, float] | None = None

    def __post_init__(self):
        if (self.label == 1) != (self.match_type.kind is MatchKind.FULL):
            raise ValueError("label 1 must coincide with a full match")

    @property
    def n_words(self) -> int:
        return len(self.text.split())


@dataclass
class Episode:
    """One anchor keyword with positive and negative recordings."""

    anchor_text: str
    anchor_phonemes: PhonemeSequence
    positives: list[LabeledPair]
    negatives: list[LabeledPair]
    tag: str  # "easy" or "hard", from the negative pool

    def __post_init__(self):
        for p in self.positives:
            if p.label != 1 or p.text != self.anchor_text:
                raise ValueError("episode positives must be full matches of the anchor")
        for n in self.negatives:
            if n.label != 0:
                raise ValueError("episode negatives must be labeled 0")


def split_phrases(utterance: AlignedUtterance, n: int,
                  dictionary: dict | None = None) -> list[Phrase]:
    """All contiguous n-word windows (stride 1), audio cut at the span edges."""
    if not MIN_PHRASE_WORDS <= n <= MAX_PHRASE_WORDS:
        raise ValueError(f"phrase length must be 1..4, got {n}")
    words = utterance.words
    out = []
    for i in range(len(words) - n + 1):
        window = words[i:i + n]
        text = " ".join(w.text for w in window)
        phrase = Phrase(text=text, n_words=n, audio_path=utterance.audio_path,
                        start=window[0].start, end=window[-1].end)
        if dictionary is not None:
            from .text import g2p
            phrase.phonemes = g2p(text, dictionary)
        out.append(phrase)
    return out


def classify_negative(anchor: PhonemeSequence, cand: PhonemeSequence,
                      threshold: int = DEFAULT_NEG_THRESHOLD) -> NegativeClass:
    """Grade a candidate by phoneme edit distance from the anchor.

    Distance 0 is rejected (the candidate is really a positive); distances
    1..threshold are hard negatives, anything farther is easy.
    """
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    d = levenshtein(anchor.ids, cand.ids)
    if d == 0:
        return NegativeClass.REJECTED
    return NegativeClass.HARD if d <= threshold else NegativeClass.EASY


def _common_prefix_len(a, b) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def determine_match_type(anchor_ph: PhonemeSequence,
                         audio_ph: PhonemeSequence) -> MatchType:
    """Compare keyword phonemes against the true phonemes of the audio.

    Equal sequences are a full match.  A shared proper prefix makes a
    front-partial match with the boundary at the prefix length.  A shared
    suffix with no shared prefix is a rear-only match, which the matching
    loss treats as non-matching.
    """
    a, b = anchor_ph.ids, audio_ph.ids
    if len(a) == 0 or len(b) == 0:
        raise ValueError("cannot match empty phoneme sequences")
    if a == b:
        return MatchType(MatchKind.FULL, boundary_k=len(a))
    lcp = _common_prefix_len(a, b)
    if 0 < lcp < min(len(a), len(b)):
        return MatchType(MatchKind.PARTIAL_FRONT, boundary_k=lcp)
    lcs = _common_prefix_len(a[::-1], b[::-1])
    if lcp == 0 and lcs > 0:
        return MatchType(MatchKind.PARTIAL_BACK)
    return MatchType(MatchKind.NON)


def _load_segment(phrase: Phrase, root, cache: dict) -> Waveform:
    key = (phrase.audio_path, phrase.start, phrase.end)
    if key not in cache:
        wav = read_wav(f"{root}/{phrase.audio_path}" if root else phrase.audio_path)
        lo = int(round(phrase.start * wav.sample_rate))
        hi = int(round(phrase.end * wav.sample_rate))
        cache[key] = Waveform(wav.samples[lo:hi], wav.sample_rate)
    return cache[key]


def materialize_pair(text: str, phonemes: PhonemeSequence, phrase: Phrase,
                     root, cache: dict,
                     neg_tag: NegativeClass | None = None) -> LabeledPair:
    """Load a phrase's audio and bind it to a keyword as a labeled pair."""
    if phrase.phonemes is None:
        raise ValueError(f"phrase {phrase.text!r} has no phonemes attached")
    mt = determine_match_type(phonemes, phrase.phonemes)
    wave = _load_segment(phrase, root, cache)
    return LabeledPair(text=text, phonemes=phonemes,
                       label=1 if mt.kind is MatchKind.FULL else 0,
                       match_type=mt, wave=wave, features=log_mel(wave),
                       neg_tag=neg_tag, audio_ref=phrase.audio_path,
                       span=(phrase.start, phrase.end))


def build_episodes(phrases: list[Phrase], n_pos: int = 3, n_neg: int = 3,
                   seed: int = 0, threshold: int = DEFAULT_NEG_THRESHOLD,
                   root=None) -> list[Episode]:
    """Assemble per-anchor episodes from a pool of phrases.

    Anchors are phrase texts with at least ``n_pos`` recordings.  Negatives
    come from phrases with the same word count; an easy and a hard episode
    are emitted per anchor when the respective pool is large enough.
    Deterministic for a fixed seed; anchors lacking recordings are skipped
    and counted in the log.
    """
    rng = np.random.default_rng(seed)
    by_text: dict[str, list[Phrase]] = {}
    for ph in phrases:
        if ph.phonemes is None:
            raise ValueError(f"phrase {ph.text!r} has no phonemes attached")
        by_text.setdefault(ph.text, []).append(ph)

    cache: dict = {}
    episodes: list[Episode] = []
    skipped = 0
    for anchor_text in sorted(by_text):
        recs = by_text[anchor_text]
        if len(recs) < n_pos:
            skipped += 1
            continue
        anchor_ph = recs[0].phonemes
        pools: dict[NegativeClass, list[Phrase]] = {
            NegativeClass.EASY: [], NegativeClass.HARD: []}
        for other_text in sorted(by_text):
            if other_text == anchor_text:
                continue
            cand = by_text[other_text][0]
            if cand.n_words != recs[0].n_words:
                continue
            grade = classify_negative(anchor_ph, cand.phonemes, threshold)
            if grade is not NegativeClass.REJECTED:
                pools[grade].extend(by_text[other_text])
        pos_pick = [recs[i] for i in rng.choice(len(recs), n_pos, replace=False)]
        for grade in (NegativeClass.EASY, NegativeClass.HARD):
            pool = pools[grade]
            if len(pool) < n_neg:
                continue
            neg_pick = [pool[i] for i in rng.choice(len(pool), n_neg, replace=False)]
            positives = [materialize_pair(anchor_text, anchor_ph, p, root, cache)
                         for p in pos_pick]
            negatives = [materialize_pair(anchor_text, anchor_ph, p, root, cache,
                                          neg_tag=grade) for p in neg_pick]
            episodes.append(Episode(anchor_text=anchor_text,
                                    anchor_phonemes=anchor_ph,
                                    positives=positives, negatives=negatives,
                                    tag=grade.value))
    if skipped:
        logger.info("build_episodes: skipped %d anchors with < %d recordings",
                    skipped, n_pos)
    return episodes


# ---------------------------------------------------------------------------
# synthetic toy corpus
# ---------------------------------------------------------------------------

TOY_SAMPLE_RATE = 16000
TOY_SEGMENT_SEC = 0.12
# Tone frequency per toy phoneme, spaced so neighboring symbols land on
# different mel filters.
TOY_ALPHABET = ("AA", "B", "D", "EH", "F", "G", "IY", "K", "L", "M")
TOY_FREQS = tuple(320.0 * 1.34 ** i for i in range(len(TOY_ALPHABET)))
_MAX_TOY_KEYWORDS = 40


@dataclass
class ToyCorpus:
    train_pairs: list[LabeledPair]
    eval_episodes: list[Episode]
    keywords: list[PhonemeSequence]
    lexicon: dict[str, tuple[str, ...]]
    recordings: dict[tuple[int, int], Waveform] = field(default_factory=dict)


def toy_wav_name(keyword_idx: int, rec_idx: int) -> str:
    return f"wavs/kw{keyword_idx:02d}_s{rec_idx:02d}.wav"


def toy_keyword_symbols(i: int) -> tuple[str, ...]:
    """Deterministic keyword shapes giving full match-case coverage.

    Keywords come in groups of four: a fresh 4-gram, a 3-gram sharing its
    2-prefix (front-partial partner), a 4-gram sharing its 2-suffix
    (rear-partial partner), and a short disjoint keyword.
    """
    g, r = divmod(i, 4)
    a = (3 * g) % len(TOY_ALPHABET)

    def sym(j):
        return TOY_ALPHABET[(a + j) % len(TOY_ALPHABET)]

    if r == 0:
        return (sym(0), sym(1), sym(2), sym(3))
    if r == 1:
        return (sym(0), sym(1), sym(4))
    if r == 2:
        return (sym(6), sym(7), sym(2), sym(3))
    return (sym(8),) if g % 2 == 0 else (sym(8), sym(9))


def synth_tone_recording(symbols: tuple[str, ...], rng: np.random.Generator,
                         sample_rate: int = TOY_SAMPLE_RATE) -> Waveform:
    """One keyword utterance: a tone segment per phoneme plus light noise.

    Recordings of the same keyword differ by tempo jitter and the noise
    draw, standing in for speaker and channel variation.
    """
    tempo = rng.uniform(0.9, 1.1)
    pieces = []
    for s in symbols:
        freq = TOY_FREQS[TOY_ALPHABET.index(s)]
        n = int(round(TOY_SEGMENT_SEC * tempo * sample_rate))
        t = np.arange(n) / sample_rate
        seg = 0.4 * np.sin(2.0 * np.pi * freq * t)
        ramp = min(80, n // 4)
        if ramp > 0:
            env = np.ones(n)
            env[:ramp] = np.linspace(0.0, 1.0, ramp)
            env[-ramp:] = np.linspace(1.0, 0.0, ramp)
            seg = seg * env
        pieces.append(seg)
    samples = np.concatenate(pieces)
    samples = samples + rng.normal(0.0, 0.01, size=len(samples))
    return Waveform(samples, sample_rate)


def synth_toy_corpus(n_keywords: int, n_samples_per: int,
                     seed: int = 0) -> ToyCorpus:
    """Build an in-memory toy corpus of tone keywords.

    Emits ``n_keywords * n_samples_per`` recordings, split into training
    pairs (balanced positives/negatives per anchor) and held-out evaluation
    episodes of 3 positive and 3 negative pairs.  With four or more
    keywords all four match cases are present.  Deterministic per seed.
    """
    if n_keywords < 2:
        raise ValueError("need at least 2 keywords to form negatives")
    if n_keywords > _MAX_TOY_KEYWORDS:
        raise ValueError(f"toy generator supports at most {_MAX_TOY_KEYWORDS} keywords")
    if n_samples_per < 1:
        raise ValueError("need at least one recording per keyword")

    kw_symbols = [toy_keyword_symbols(i) for i in range(n_keywords)]
    keywords = [ids_from_symbols(s, source_text=" ".join(s)) for s in kw_symbols]
    lexicon = {s: (s,) for s in TOY_ALPHABET}

    recordings: dict[tuple[int, int], Waveform] = {}
    feats: dict[tuple[int, int], FeatureMatrix] = {}
    for i in range(n_keywords):
        for j in range(n_samples_per):
            rng = np.random.default_rng(np.random.SeedSequence(
                entropy=seed, spawn_key=(i, j)))
            recordings[(i, j)] = synth_tone_recording(kw_symbols[i], rng)
            feats[(i, j)] = log_mel(recordings[(i, j)])

    eval_per = 3 if n_samples_per >= 4 else 0
    train_per = n_samples_per - eval_per

    def make_pair(anchor: int, audio_kw: int, rec: int,
                  neg_tag: NegativeClass | None = None) -> LabeledPair:
        mt = determine_match_type(keywords[anchor], keywords[audio_kw])
        return LabeledPair(text=keywords[anchor].source_text,
                           phonemes=keywords[anchor],
                           label=1 if mt.kind is MatchKind.FULL else 0,
                           match_type=mt, wave=recordings[(audio_kw, rec)],
                           features=feats[(audio_kw, rec)], neg_tag=neg_tag,
                           audio_ref=toy_wav_name(audio_kw, rec))

    # Partners per anchor, nearest in phoneme distance first.
    partner_order: dict[int, list[int]] = {}
    for i in range(n_keywords):
        others = [(levenshtein(keywords[i].ids, keywords[j].ids), j)
                  for j in range(n_keywords) if j != i]
        partner_order[i] = [j for _, j in sorted(others)]

    train_pairs: list[LabeledPair] = []
    for i in range(n_keywords):
        partners = partner_order[i]
        for j in range(train_per):
            train_pairs.append(make_pair(i, i, j))
            partner = partners[j % len(partners)]
            train_pairs.append(make_pair(i, partner, (i + j) % train_per))

    eval_episodes: list[Episode] = []
    if eval_per >= 3:
        for i in range(n_keywords):
            partners = partner_order[i]
            positives = [make_pair(i, i, train_per + s) for s in range(3)]
            pools = {"hard": partners[:3], "easy": partners[-3:]}
            for tag, pool in pools.items():
                if len(pool) < 3:
                    continue
                negatives = []
                for slot, partner in enumerate(pool):
                    grade = classify_negative(keywords[i], keywords[partner])
                    negatives.append(make_pair(
                        i, partner, train_per + (i + slot) % eval_per,
                        neg_tag=grade))
                eval_episodes.append(Episode(
                    anchor_text=keywords[i].source_text,
                    anchor_phonemes=keywords[i],
                    positives=positives, negatives=negatives, tag=tag))

    return ToyCorpus(train_pairs=train_pairs, eval_episodes=eval_episodes,
                     keywords=keywords, lexicon=lexicon, recordings=recordings)


# ---------------------------------------------------------------------------
# manifests (JSON lines)
# ---------------------------------------------------------------------------

def read_alignments(path) -> list[AlignedUtterance]:
    """Parse an alignment manifest: one utterance object per line."""
    utterances = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                words = [WordSpan(w["w"], float(w["start"]), float(w["end"]))
                         for w in obj["words"]]
                utterances.append(AlignedUtterance(obj["audio"], words))
            except (KeyError, TypeError, json.JSONDecodeError) as e:
                raise ValueError(f"{path}:{lineno}: bad alignment record: {e}") from e
    return utterances


def pair_to_record(pair: LabeledPair) -> dict:
    if pair.audio_ref is None:
        raise ValueError(f"pair for {pair.text!r} has no audio reference")
    start, end = pair.span if pair.span is not None else (None, None)
    return {
        "audio": pair.audio_ref,
        "start": start,
        "end": end,
        "text": pair.text,
        "phonemes": list(pair.phonemes.symbols),
        "label": pair.label,
        "match": pair.match_type.kind.value,
        "boundary_k": pair.match_type.boundary_k,
        "n_words": pair.n_words,
        "neg_tag": pair.neg_tag.value if pair.neg_tag else None,
    }


def record_to_pair(rec: dict, root, cache: dict) -> LabeledPair:
    phonemes = ids_from_symbols(rec["phonemes"], source_text=rec["text"])
    kind = MatchKind(rec["match"])
    mt = MatchType(kind, rec.get("boundary_k"))
    phrase = Phrase(text=rec["text"], n_words=rec["n_words"],
                    audio_path=rec["audio"],
                    start=rec["start"] if rec["start"] is not None else 0.0,
                    end=rec["end"] if rec["end"] is not None else float("inf"))
    key = (phrase.audio_path, phrase.start, phrase.end)
    if key not in cache:
        wav = read_wav(f"{root}/{phrase.audio_path}" if root else phrase.audio_path)
        lo = int(round(phrase.start * wav.sample_rate))
        hi = len(wav.samples) if phrase.end == float("inf") else int(
            round(phrase.end * wav.sample_rate))
        cache[key] = Waveform(wav.samples[lo:hi], wav.sample_rate)
    wave = cache[key]
    tag = NegativeClass(rec["neg_tag"]) if rec.get("neg_tag") else None
    span = None
    if rec["start"] is not None and rec["end"] is not None:
        span = (rec["start"], rec["end"])
    return LabeledPair(text=rec["text"], phonemes=phonemes, label=rec["label"],
                       match_type=mt, wave=wave, features=log_mel(wave),
                       neg_tag=tag, audio_ref=rec["audio"], span=span)


def write_jsonl(path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True))
            fh.write("\n")


def read_jsonl(path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out

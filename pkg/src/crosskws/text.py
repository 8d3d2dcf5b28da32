"""Text keyword frontend: phoneme inventory, dictionary lookup and fallbacks.

Keywords are mapped to ARPAbet phoneme id sequences by looking words up in a
CMUdict-format lexicon; out-of-vocabulary words fall back to a fixed
letter-to-phoneme rule table so the mapping is total on alphabetic text.
Stress digits are stripped everywhere, leaving the 39-symbol inventory.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .tensor import Tensor

# 39 stress-free ARPAbet phonemes, alphabetical, plus a reserved pad slot.
ARPABET = (
    "AA AE AH AO AW AY B CH D DH EH ER EY F G HH IH IY JH K L M N NG "
    "OW OY P R S SH T TH UH UW V W Y Z ZH"
).split()
PAD_SYMBOL = "<pad>"
SYMBOLS = tuple(ARPABET) + (PAD_SYMBOL,)
SYMBOL_TO_ID = {s: i for i, s in enumerate(SYMBOLS)}
PAD_ID = SYMBOL_TO_ID[PAD_SYMBOL]
INVENTORY_SIZE = len(SYMBOLS)  # 40

# Deterministic letter fallback for out-of-vocabulary words.
OOV_RULES = {
    "A": ("AH",), "B": ("B",), "C": ("K",), "D": ("D",), "E": ("EH",),
    "F": ("F",), "G": ("G",), "H": ("HH",), "I": ("IH",), "J": ("JH",),
    "K": ("K",), "L": ("L",), "M": ("M",), "N": ("N",), "O": ("AA",),
    "P": ("P",), "Q": ("K",), "R": ("R",), "S": ("S",), "T": ("T",),
    "U": ("AH",), "V": ("V",), "W": ("W",), "X": ("K", "S"), "Y": ("Y",),
    "Z": ("Z",),
}

_STRESS_RE = re.compile(r"\d+$")
_VARIANT_RE = re.compile(r"^(.+)\(\d+\)$")
_TOKEN_KEEP_RE = re.compile(r"[^A-Z']")


@dataclass(frozen=True)
class PhonemeSequence:
    """Ordered phoneme ids for a phrase, with the originating text."""

    ids: tuple[int, ...]
    source_text: str

    def __post_init__(self):
        if len(self.ids) == 0:
            raise ValueError(f"empty phoneme sequence for {self.source_text!r}")
        for i in self.ids:
            if not 0 <= i < INVENTORY_SIZE:
                raise ValueError(f"phoneme id {i} out of range")

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def symbols(self) -> tuple[str, ...]:
        return tuple(SYMBOLS[i] for i in self.ids)


def ids_from_symbols(symbols, source_text: str = "") -> PhonemeSequence:
    try:
        ids = tuple(SYMBOL_TO_ID[s] for s in symbols)
    except KeyError as e:
        raise ValueError(f"unknown phoneme symbol {e.args[0]!r}") from None
    return PhonemeSequence(ids, source_text)


def load_dictionary(path) -> dict[str, tuple[str, ...]]:
    """Parse a CMUdict-format lexicon into WORD -> stress-free phoneme tuple.

    Comment lines start with ";;;".  Variant entries like "WORD(2)" are
    dropped in favor of the first pronunciation.
    """
    pron: dict[str, tuple[str, ...]] = {}
    try:
        with open(path, encoding="latin-1") as fh:
            lines = fh.readlines()
    except OSError as e:
        raise IOError(f"cannot read dictionary {path}: {e}") from e
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith(";;;"):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise ValueError(f"{path}:{lineno}: malformed dictionary line {line!r}")
        word = parts[0].upper()
        m = _VARIANT_RE.match(word)
        if m:
            if m.group(1) in pron:
                continue  # keep the first pronunciation only
            word = m.group(1)
        phones = tuple(_STRESS_RE.sub("", p) for p in parts[1:])
        for p in phones:
            if p not in SYMBOL_TO_ID or p == PAD_SYMBOL:
                raise ValueError(f"{path}:{lineno}: unknown phoneme {p!r}")
        pron.setdefault(word, phones)
    return pron


def default_dictionary() -> dict[str, tuple[str, ...]]:
    """The small lexicon bundled with the package (see data/minilex.dict)."""
    with resources.as_file(resources.files("crosskws.data") / "minilex.dict") as p:
        return load_dictionary(p)


def g2p(text: str, dictionary: dict[str, tuple[str, ...]]) -> PhonemeSequence:
    """Phrase -> phoneme ids: per-word lookup, rule fallback for OOV words.

    Case-insensitive; punctuation is stripped; words concatenate with no
    separator phoneme.
    """
    words = [w for w in (normalize_token(t) for t in text.split()) if w]
    if not words:
        raise ValueError(f"no pronounceable words in {text!r}")
    phones: list[str] = []
    for w in words:
        if w in dictionary:
            phones.extend(dictionary[w])
        else:
            for letter in w:
                phones.extend(OOV_RULES.get(letter, ()))
    if not phones:
        raise ValueError(f"no phonemes produced for {text!r}")
    return ids_from_symbols(phones, source_text=text)


def normalize_token(token: str) -> str:
    return _TOKEN_KEEP_RE.sub("", token.upper()).strip("'")


def levenshtein(a, b) -> int:
    """Unit-cost edit distance between two symbol sequences."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, sa in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, sb in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (sa != sb))
        prev = cur
    return prev[len(b)]


def phoneme_onehot(seq: PhonemeSequence) -> Tensor:
    """T_t x |inventory| one-hot rows for a phoneme sequence."""
    if len(seq) == 0:
        raise ValueError("cannot encode an empty sequence")
    onehot = np.zeros((len(seq), INVENTORY_SIZE))
    onehot[np.arange(len(seq)), list(seq.ids)] = 1.0
    return Tensor(onehot)

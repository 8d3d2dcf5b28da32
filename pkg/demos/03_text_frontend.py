#!/usr/bin/env python3
"""Keyword text to phonemes, and how negatives get graded easy vs hard.

Uses the small bundled lexicon; point load_dictionary at a full CMUdict
file for real vocabularies.
"""

from crosskws import text
from crosskws.corpus import classify_negative, determine_match_type

lex = text.default_dictionary()
print(f"bundled lexicon: {len(lex)} words, inventory {text.INVENTORY_SIZE} "
      f"symbols (39 phonemes + pad)\n")

# --- lookups and the OOV fallback ----------------------------------------
for phrase in ("friend", "the river", "hello world", "frind", "zzkq"):
    seq = text.g2p(phrase, lex)
    marker = "" if all(text.normalize_token(w) in lex for w in phrase.split()) \
        else "   (rule fallback)"
    print(f"  {phrase!r:16} -> {' '.join(seq.symbols)}{marker}")

# --- edit distances drive negative mining ---------------------------------
print("\nphoneme edit distances from 'friend':")
friend = text.g2p("friend", lex)
for cand in ("frind", "rend", "trend", "guard", "comfort", "superior"):
    seq = text.g2p(cand, lex)
    d = text.levenshtein(friend.ids, seq.ids)
    grade = classify_negative(friend, seq).value
    print(f"  {cand:10} distance {d}  ->  {grade}")

# --- the four ways audio can relate to an enrolled keyword ----------------
print("\nmatch types against keyword 'i mean to':")
anchor = text.g2p("i mean to", lex)
for phrase in ("i mean to", "be a banner", "i mean you", "we mean to"):
    mt = determine_match_type(anchor, text.g2p(phrase, lex))
    extra = f", boundary {mt.boundary_k}" if mt.boundary_k is not None else ""
    print(f"  audio {phrase!r:14} -> {mt.kind.value}{extra}")

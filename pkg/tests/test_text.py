import numpy as np
import pytest

from crosskws import text


@pytest.fixture(scope="module")
def lex():
    return text.default_dictionary()


class TestInventory:
    def test_sizes(self):
        assert len(text.ARPABET) == 39
        assert text.INVENTORY_SIZE == 40
        assert text.PAD_ID == 39

    def test_bijective_ids(self):
        assert len(set(text.SYMBOL_TO_ID.values())) == text.INVENTORY_SIZE
        for sym, i in text.SYMBOL_TO_ID.items():
            assert text.SYMBOLS[i] == sym


class TestLoadDictionary:
    def test_stress_stripped(self, lex):
        assert lex["FRIEND"] == ("F", "R", "EH", "N", "D")

    def test_comments_skipped(self, tmp_path):
        p = tmp_path / "d.dict"
        p.write_text(";;; a comment\nWORD  W ER1 D\n")
        assert text.load_dictionary(p) == {"WORD": ("W", "ER", "D")}

    def test_variant_folded_to_first(self, lex):
        # minilex carries THE and THE(2); the first pronunciation wins
        assert lex["THE"] == ("DH", "AH")

    def test_variant_without_base_is_used(self, tmp_path):
        p = tmp_path / "d.dict"
        p.write_text("ODD(2)  AA1 D\n")
        assert text.load_dictionary(p) == {"ODD": ("AA", "D")}

    def test_malformed_line_reports_number(self, tmp_path):
        p = tmp_path / "d.dict"
        p.write_text("GOOD  G UH1 D\nJUSTAWORD\n")
        with pytest.raises(ValueError, match=":2:"):
            text.load_dictionary(p)

    def test_unknown_phoneme_rejected(self, tmp_path):
        p = tmp_path / "d.dict"
        p.write_text("BAD  Q9X\n")
        with pytest.raises(ValueError, match="unknown phoneme"):
            text.load_dictionary(p)

    def test_missing_file(self):
        with pytest.raises(IOError):
            text.load_dictionary("/nonexistent/path.dict")


class TestG2p:
    def test_dictionary_hit(self, lex):
        seq = text.g2p("friend", lex)
        assert seq.symbols == ("F", "R", "EH", "N", "D")

    def test_concatenation(self, lex):
        both = text.g2p("the river", lex)
        assert both.symbols == text.g2p("the", lex).symbols + text.g2p("river", lex).symbols

    def test_oov_rule_fallback_deterministic(self, lex):
        a = text.g2p("zzkq", lex)
        b = text.g2p("zzkq", lex)
        assert a.symbols == ("Z", "Z", "K", "K")
        assert a == b

    def test_oov_frind(self, lex):
        assert text.g2p("frind", lex).symbols == ("F", "R", "IH", "N", "D")

    def test_case_and_punctuation(self, lex):
        assert text.g2p("Friend!", lex).symbols == text.g2p("friend", lex).symbols

    def test_empty_text(self, lex):
        with pytest.raises(ValueError):
            text.g2p("   ", lex)
        with pytest.raises(ValueError):
            text.g2p("...", lex)

    def test_total_on_alphabetic_text(self, lex):
        rng = np.random.default_rng(0)
        letters = "abcdefghijklmnopqrstuvwxyz"
        for _ in range(50):
            word = "".join(rng.choice(list(letters))
                           for _ in range(rng.integers(1, 9)))
            seq = text.g2p(word, lex)
            assert len(seq) >= 1


class TestLevenshtein:
    def test_identity(self):
        assert text.levenshtein("friend", "friend") == 0

    def test_single_edit(self):
        assert text.levenshtein("friend", "frind") == 1

    def test_insertions_only(self):
        assert text.levenshtein("", "abc") == 3

    def test_matches_full_dp_oracle(self):
        def oracle(a, b):
            d = np.zeros((len(a) + 1, len(b) + 1), dtype=int)
            d[:, 0] = np.arange(len(a) + 1)
            d[0, :] = np.arange(len(b) + 1)
            for i in range(1, len(a) + 1):
                for j in range(1, len(b) + 1):
                    d[i, j] = min(d[i - 1, j] + 1, d[i, j - 1] + 1,
                                  d[i - 1, j - 1] + (a[i - 1] != b[j - 1]))
            return int(d[len(a), len(b)])

        rng = np.random.default_rng(1)
        for _ in range(100):
            a = rng.integers(0, 5, size=rng.integers(0, 9)).tolist()
            b = rng.integers(0, 5, size=rng.integers(0, 9)).tolist()
            assert text.levenshtein(a, b) == oracle(a, b)

    def test_symmetry_and_triangle_inequality(self):
        rng = np.random.default_rng(2)
        seqs = [rng.integers(0, 4, size=rng.integers(0, 7)).tolist()
                for _ in range(20)]
        for a in seqs[:10]:
            for b in seqs[10:]:
                assert text.levenshtein(a, b) == text.levenshtein(b, a)
        for a, b, c in zip(seqs[:6], seqs[6:12], seqs[12:18]):
            ab = text.levenshtein(a, b)
            bc = text.levenshtein(b, c)
            ac = text.levenshtein(a, c)
            assert ac <= ab + bc


class TestPhonemeOnehot:
    def test_shape_and_rows(self):
        seq = text.PhonemeSequence((0, 5, 12), "x")
        onehot = text.phoneme_onehot(seq)
        assert onehot.data.shape == (3, 40)
        assert np.array_equal(onehot.data.sum(axis=1), np.ones(3))
        assert onehot.data[1, 5] == 1.0

    def test_invalid_id(self):
        with pytest.raises(ValueError):
            text.PhonemeSequence((40,), "bad")

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            text.PhonemeSequence((), "empty")

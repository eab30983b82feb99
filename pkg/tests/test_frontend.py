import numpy as np
import pytest

from crossvox.errors import SymbolLookupError, ValidationError
from crossvox.frontend import (
    EOS_SYMBOL,
    PAUSE_SYMBOL,
    build_symbol_table,
    detokenize,
    generate_code_switched,
    load_en_phones,
    load_lexicon,
    load_pinyin_table,
    load_zh_phones,
    tokenize_english,
    tokenize_mandarin,
    tokenize_mixed,
)


def test_table_contains_pause_and_eos(table):
    assert PAUSE_SYMBOL in table.index
    assert EOS_SYMBOL in table.index
    assert len(set(table.symbols)) == len(table.symbols)


def test_table_deterministic_under_shuffle(table):
    en = load_en_phones()
    zh = load_zh_phones()
    shuffled_en = list(reversed(en))
    shuffled_zh = list(zh[7:]) + list(zh[:7])
    again = build_symbol_table(shuffled_en, shuffled_zh)
    assert again.symbols == table.symbols


def test_table_wrong_count_rejected():
    en = load_en_phones()
    with pytest.raises(ValidationError):
        build_symbol_table(en[:-1], load_zh_phones())


def test_tokenize_mandarin_splits_initial_final(table, lexicon):
    seq = tokenize_mandarin("hao3", lexicon, table)
    assert table.decode(seq.ids) == ["zh:h", "zh:ao3", EOS_SYMBOL]


def test_tokenize_mandarin_zero_initial(table, lexicon):
    seq = tokenize_mandarin("an1", lexicon, table)
    assert table.decode(seq.ids) == ["zh:an1", EOS_SYMBOL]


def test_tokenize_mandarin_empty(table, lexicon):
    assert tokenize_mandarin("", lexicon, table).ids == [table.eos_id]


def test_tokenize_mandarin_unknown_syllable(table, lexicon):
    with pytest.raises(SymbolLookupError, match="xyz"):
        tokenize_mandarin("xyz1", lexicon, table)


def test_tokenize_english_lexicon_identity(table, lexicon):
    seq = tokenize_english("hello", lexicon, table)
    expected = [f"en:{p}" for p in lexicon.en_entries["hello"]]
    assert table.decode(seq.ids) == expected + [EOS_SYMBOL]


def test_tokenize_english_comma_pause(table, lexicon):
    seq = tokenize_english("tea, milk", lexicon, table)
    symbols = table.decode(seq.ids)
    assert PAUSE_SYMBOL in symbols
    assert symbols.index(PAUSE_SYMBOL) == len(lexicon.en_entries["tea"])


def test_tokenize_english_oov(table, lexicon):
    with pytest.raises(SymbolLookupError, match="zzzq"):
        tokenize_english("zzzq", lexicon, table)


def test_tokenize_mixed_dispatch(table, lexicon):
    seq = tokenize_mixed("wo3 like apple", lexicon, table)
    zh = tokenize_mandarin("wo3", lexicon, table)
    en = tokenize_english("like apple", lexicon, table)
    assert seq.ids == zh.ids[:-1] + en.ids


@pytest.mark.parametrize("text", ["good morning friend.", "ni3 hao3 shi4 jie4."])
def test_tokenize_mixed_monolingual_degenerate(table, lexicon, text):
    mixed = tokenize_mixed(text, lexicon, table)
    mono = (tokenize_mandarin if "3" in text else tokenize_english)(text, lexicon, table)
    assert mixed.ids == mono.ids
    assert [t.value for t in mixed.language_tags] == [t.value for t in mono.language_tags]


def test_round_trip_every_lexicon_entry(table, lexicon):
    for word in lexicon.en_entries:
        seq = tokenize_english(word, lexicon, table)
        symbols = detokenize(seq, table)
        assert table.encode(symbols) == seq.ids
    for syllable in lexicon.zh_syllables:
        seq = tokenize_mandarin(f"{syllable}3", lexicon, table)
        assert table.encode(detokenize(seq, table)) == seq.ids


def test_eos_unique_and_final(table, lexicon):
    rng = np.random.default_rng(23)
    en_words = sorted(lexicon.en_entries)
    zh_syllables = sorted(lexicon.zh_syllables)
    for _ in range(50):
        tokens = []
        for _ in range(int(rng.integers(1, 8))):
            if rng.random() < 0.5:
                tokens.append(en_words[rng.integers(len(en_words))])
            else:
                tokens.append(f"{zh_syllables[rng.integers(len(zh_syllables))]}{rng.integers(1, 6)}")
        seq = tokenize_mixed(" ".join(tokens), lexicon, table)
        assert seq.ids[-1] == table.eos_id
        assert seq.ids[:-1].count(table.eos_id) == 0


def test_code_switch_single_pair_substitution(tmp_path):
    translations = tmp_path / "translations.txt"
    translations.write_text("pin2 guo3\tapple\n", encoding="utf-8")
    lexicon = load_lexicon(translations_path=translations)
    out = generate_code_switched(["wo3 xi3 huan1 pin2 guo3"], lexicon, rate=1.0, seed=0)
    assert out == ["wo3 xi3 huan1 apple"]


def test_code_switch_untranslatable_dropped(tmp_path):
    translations = tmp_path / "translations.txt"
    translations.write_text("pin2 guo3\tapple\n", encoding="utf-8")
    lexicon = load_lexicon(translations_path=translations)
    out = generate_code_switched(["wo3 xi3 huan1"], lexicon, rate=1.0, seed=0)
    assert out == []


def test_code_switch_seeded_determinism(lexicon):
    sentences = ["wo3 xi3 huan1 pin2 guo3", "i like tea", "ni3 ai4 yin1 yue4"]
    a = generate_code_switched(sentences, lexicon, rate=0.5, seed=42)
    b = generate_code_switched(sentences, lexicon, rate=0.5, seed=42)
    assert a == b


def test_code_switch_empty_translations(tmp_path):
    translations = tmp_path / "translations.txt"
    translations.write_text("", encoding="utf-8")
    lexicon = load_lexicon(translations_path=translations)
    with pytest.raises(ValidationError):
        generate_code_switched(["i like tea"], lexicon, rate=1.0, seed=0)


def test_code_switch_rate_statistics(lexicon):
    # replacement count across many sentences stays within 3 binomial sigma
    rate = 0.3
    sentences = ["wo3 xi3 huan1 pin2 guo3"] * 400
    out = generate_code_switched(sentences, lexicon, rate=rate, seed=7)
    n_candidates = 2 * 400  # two translatable spans per sentence
    replaced = sum(s.count("like") + s.count("apple") for s in out)
    sigma = (n_candidates * rate * (1 - rate)) ** 0.5
    assert abs(replaced - n_candidates * rate) <= 3 * sigma


def test_invalid_rate(lexicon):
    with pytest.raises(ValidationError):
        generate_code_switched(["i like tea"], lexicon, rate=0.0, seed=0)

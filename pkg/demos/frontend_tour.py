"""Tour of the bilingual phoneme frontend: pinyin segmentation, tone handling,
and mixed-language tokenization into one shared symbol table."""

from crossvox.frontend import (
    default_symbol_table,
    load_lexicon,
    load_pinyin_table,
    segment_pinyin,
    tokenize_english,
    tokenize_mandarin,
    tokenize_mixed,
)

table = default_symbol_table()
lexicon = load_lexicon()
print(f"symbol table: {len(table.symbols)} symbols "
      f"(pause={table.pause_id}, eos={table.eos_id})")
print(f"lexicon: {len(lexicon.en_entries)} English words, "
      f"{len(lexicon.zh_syllables)} pinyin syllables\n")

# --- 1. pinyin syllables split into initial + final orthographically --------
for syllable in ["zhang", "xue", "er", "shi", "yu", "wo"]:
    initial, final = segment_pinyin(syllable)
    print(f"  {syllable:8s} -> initial {initial!r:6s} final {final!r}")

# the same split is also shipped as a frozen table; the parser and the table
# are two independent routes that must agree on every syllable
shipped = load_pinyin_table()
agree = sum(segment_pinyin(s) == shipped[s] for s in shipped)
print(f"\nparser vs shipped table: {agree}/{len(shipped)} syllables agree\n")

# --- 2. tone digits attach to the final, not the whole syllable -------------
seq = tokenize_mandarin("ni3 hao3 shi4 jie4", lexicon, table)
print("zh:", seq.text_ref)
print("   ", [table.symbols[i] for i in seq.ids])

# --- 3. English words go through the lexicon to ARPAbet-style phones --------
seq = tokenize_english("hello world", lexicon, table)
print("en:", seq.text_ref)
print("   ", [table.symbols[i] for i in seq.ids])

# --- 4. code-switched text mixes both, one language tag per symbol ----------
seq = tokenize_mixed("wo3 xi3 huan1 tea", lexicon, table)
print("cs:", seq.text_ref)
for sym_id, tag in zip(seq.ids, seq.language_tags):
    print(f"    {table.symbols[sym_id]:12s} {tag.value}")

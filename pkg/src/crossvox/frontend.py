"""Combined English/Mandarin text frontend.

One symbol table covers both languages: 44 English phones (stress variants
0/1/2 on vowels), 62 pinyin initials/finals (tones 1-5 on finals, 5 =
neutral), an in-utterance pause symbol and an utterance-end symbol.  English
and pinyin base phones are namespaced "en:" / "zh:" so spellings shared by
both alphabets (zh, sh, ai, ...) stay distinct.

Mandarin input is whitespace-separated tone-numbered pinyin; syllables are
split with a shipped syllable table.  ``segment_pinyin`` is an independent
orthographic splitter kept around to cross-check that table.
"""

import hashlib
import json
import random
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

from .errors import SymbolLookupError, ValidationError

EN_PREFIX = "en:"
ZH_PREFIX = "zh:"
PAUSE_SYMBOL = "<pau>"
EOS_SYMBOL = "<eos>"

VOWEL = "V"
CONSONANT = "C"
INITIAL = "I"
FINAL = "F"

STRESSES = ("0", "1", "2")
TONES = ("1", "2", "3", "4", "5")
NEUTRAL_TONE = "5"

NUM_EN_PHONES = 44
NUM_ZH_PHONES = 62

_PAUSE_PUNCT = ",;:"
_TERMINAL_PUNCT = ".!?"

# Orthographic initials for the live splitter, two-letter ones first so the
# longest prefix wins (zh over z).
_SPLIT_INITIALS = (
    "zh", "ch", "sh",
    "b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h",
    "j", "q", "x", "r", "z", "c", "s", "y", "w",
)


class LanguageTag(str, Enum):
    EN = "EN"
    ZH = "ZH"
    PAUSE = "PAUSE"
    EOS = "EOS"


def _data_path(name: str) -> Path:
    return Path(str(resources.files("crossvox").joinpath("data", name)))


def load_phone_file(path: str | Path) -> list[tuple[str, str]]:
    """Read a phone inventory file: one "symbol<TAB>kind" per line."""
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        sym, kind = line.split("\t")
        out.append((sym, kind))
    return out


def load_en_phones(path: str | Path | None = None) -> list[tuple[str, str]]:
    return load_phone_file(path if path is not None else _data_path("en_phones.txt"))


def load_zh_phones(path: str | Path | None = None) -> list[tuple[str, str]]:
    return load_phone_file(path if path is not None else _data_path("zh_phones.txt"))


def load_pinyin_table(path: str | Path | None = None) -> dict[str, tuple[str, str]]:
    """Read the syllable table: "syllable<TAB>initial<TAB>final", "-" = zero initial."""
    if path is None:
        path = _data_path("pinyin_table.txt")
    table = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        syl, initial, final = line.split("\t")
        table[syl] = ("" if initial == "-" else initial, final)
    return table


@dataclass(frozen=True)
class SymbolTable:
    """Immutable symbol list with dense ids and a reverse index."""

    symbols: tuple[str, ...]
    index: dict[str, int]

    @classmethod
    def from_symbols(cls, symbols) -> "SymbolTable":
        symbols = tuple(symbols)
        index = {s: i for i, s in enumerate(symbols)}
        if len(index) != len(symbols):
            seen: set[str] = set()
            dups = sorted({s for s in symbols if s in seen or seen.add(s)})
            raise ValidationError(f"duplicate symbols: {dups}")
        return cls(symbols=symbols, index=index)

    def __len__(self) -> int:
        return len(self.symbols)

    @property
    def pause_id(self) -> int:
        return self.index[PAUSE_SYMBOL]

    @property
    def eos_id(self) -> int:
        return self.index[EOS_SYMBOL]

    def encode(self, syms) -> list[int]:
        ids = []
        for s in syms:
            if s not in self.index:
                raise SymbolLookupError(f"unknown symbol: {s!r}")
            ids.append(self.index[s])
        return ids

    def decode(self, ids) -> list[str]:
        out = []
        for i in ids:
            if not 0 <= i < len(self.symbols):
                raise ValidationError(f"symbol id out of range: {i}")
            out.append(self.symbols[i])
        return out

    def content_hash(self) -> str:
        payload = "\n".join(f"{i}\t{s}" for i, s in enumerate(self.symbols))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def write_jsonl(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            for i, s in enumerate(self.symbols):
                fh.write(json.dumps({"id": i, "symbol": s}) + "\n")

    @classmethod
    def read_jsonl(cls, path: str | Path) -> "SymbolTable":
        rows = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                rows.append(json.loads(line))
        rows.sort(key=lambda r: r["id"])
        if [r["id"] for r in rows] != list(range(len(rows))):
            raise ValidationError("symbol ids are not dense from 0")
        return cls.from_symbols(r["symbol"] for r in rows)


def _check_inventory(got, canonical, label: str) -> None:
    got_set, want = set(got), set(canonical)
    if got_set == want:
        return
    missing = sorted(s for s, _ in want - got_set)
    extra = sorted(s for s, _ in got_set - want)
    raise ValidationError(
        f"bad {label} inventory ({len(got_set)} symbols): missing {missing}, extra {extra}"
    )


def build_symbol_table(en_phones, zh_initials_finals) -> SymbolTable:
    """Build the joint table from the two phone inventories.

    Inputs are (symbol, kind) pairs and must match the shipped canonical
    inventories exactly (any order); the error names missing/extra symbols.
    Ids are assigned after a canonical sort, so shuffled inputs give the
    identical table.
    """
    _check_inventory(en_phones, load_en_phones(), "English phone")
    _check_inventory(zh_initials_finals, load_zh_phones(), "pinyin symbol")
    decorated = []
    for sym, kind in en_phones:
        decorated.append(EN_PREFIX + sym)
        if kind == VOWEL:
            decorated.extend(EN_PREFIX + sym + s for s in STRESSES)
    for sym, kind in zh_initials_finals:
        if kind == INITIAL:
            decorated.append(ZH_PREFIX + sym)
        else:
            decorated.extend(ZH_PREFIX + sym + t for t in TONES)
    return SymbolTable.from_symbols([PAUSE_SYMBOL, EOS_SYMBOL] + sorted(decorated))


def default_symbol_table() -> SymbolTable:
    return build_symbol_table(load_en_phones(), load_zh_phones())


@dataclass(frozen=True)
class BilingualLexicon:
    """English pronunciations, the pinyin syllable table, and translation pairs."""

    en_entries: dict[str, tuple[str, ...]]
    zh_syllables: dict[str, tuple[str, str]]
    translations: dict[str, str]

    def validate(self, en_phones, zh_phones) -> None:
        """Check every referenced phone/initial/final against the base inventories."""
        vowels = {s for s, k in en_phones if k == VOWEL}
        en_base = {s for s, _ in en_phones}
        initials = {s for s, k in zh_phones if k == INITIAL}
        finals = {s for s, k in zh_phones if k == FINAL}
        for word, phones in self.en_entries.items():
            for p in phones:
                base, stress = _split_stress(p)
                if base not in en_base:
                    raise ValidationError(f"lexicon entry {word!r}: unknown phone {p!r}")
                if stress and base not in vowels:
                    raise ValidationError(f"lexicon entry {word!r}: stress on non-vowel {p!r}")
        for syl, (initial, final) in self.zh_syllables.items():
            if initial and initial not in initials:
                raise ValidationError(f"syllable {syl!r}: unknown initial {initial!r}")
            if final not in finals:
                raise ValidationError(f"syllable {syl!r}: unknown final {final!r}")


def load_lexicon(
    en_path: str | Path | None = None,
    translations_path: str | Path | None = None,
    pinyin_path: str | Path | None = None,
) -> BilingualLexicon:
    """Load the shipped (or given) lexicon files and validate the references."""
    if en_path is None:
        en_path = _data_path("en_lexicon.txt")
    if translations_path is None:
        translations_path = _data_path("translations.txt")
    en_entries = {}
    for line in Path(en_path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        word, phones = line.split("\t")
        en_entries[word] = tuple(phones.split())
    translations = {}
    for line in Path(translations_path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        src, dst = line.split("\t")
        translations[src] = dst
    lex = BilingualLexicon(
        en_entries=en_entries,
        zh_syllables=load_pinyin_table(pinyin_path),
        translations=translations,
    )
    lex.validate(load_en_phones(), load_zh_phones())
    return lex


def _split_stress(phone: str) -> tuple[str, str]:
    if phone and phone[-1].isdigit():
        return phone[:-1], phone[-1]
    return phone, ""


def split_tone(syllable: str) -> tuple[str, str]:
    """Split a trailing tone digit off a pinyin syllable; no digit means neutral."""
    if syllable and syllable[-1].isdigit():
        tone = syllable[-1]
        if tone not in TONES:
            raise SymbolLookupError(f"bad tone digit in syllable: {syllable!r}")
        return syllable[:-1], tone
    return syllable, NEUTRAL_TONE


def segment_pinyin(syllable: str, finals=None) -> tuple[str, str]:
    """Split a toneless written syllable into (initial, final), "" = zero initial.

    Pure orthographic algorithm, independent of the shipped syllable table:
    longest-prefix initial match, then the standard respellings (zi/ci/si ->
    ii, zhi/chi/shi/ri -> iii, u-forms after j/q/x/y -> v-forms).
    """
    if finals is None:
        finals = {s for s, k in load_zh_phones() if k == FINAL}
    initial, rest = "", syllable
    for cand in _SPLIT_INITIALS:
        if syllable.startswith(cand) and len(syllable) > len(cand):
            initial, rest = cand, syllable[len(cand):]
            break
    if rest == "i" and initial in ("z", "c", "s"):
        rest = "ii"
    elif rest == "i" and initial in ("zh", "ch", "sh", "r"):
        rest = "iii"
    elif initial in ("j", "q", "x", "y"):
        rest = {"u": "v", "ue": "ve", "uan": "van", "un": "vn"}.get(rest, rest)
    if rest not in finals:
        raise SymbolLookupError(f"cannot segment pinyin syllable: {syllable!r}")
    return initial, rest


@dataclass
class PhonemeSequence:
    """Symbol ids for one utterance, with per-id language tags."""

    ids: list[int]
    text_ref: str
    language_tags: list[LanguageTag]

    def __post_init__(self):
        if len(self.ids) != len(self.language_tags):
            raise ValidationError(
                f"{len(self.ids)} ids but {len(self.language_tags)} language tags"
            )

    def __len__(self) -> int:
        return len(self.ids)

    def validate(self, table: SymbolTable) -> None:
        for i in self.ids:
            if not 0 <= i < len(table):
                raise ValidationError(f"symbol id out of range: {i}")
        if not self.ids or self.ids[-1] != table.eos_id:
            raise ValidationError("sequence does not end with the utterance-end symbol")
        if self.ids.count(table.eos_id) != 1:
            raise ValidationError("utterance-end symbol appears more than once")


def detokenize(seq: PhonemeSequence, table: SymbolTable) -> list[str]:
    return table.decode(seq.ids)


def _strip_punct(token: str) -> tuple[str, bool]:
    """Remove trailing punctuation; True when it asks for an in-utterance pause."""
    pause = False
    while token and token[-1] in _PAUSE_PUNCT + _TERMINAL_PUNCT:
        pause = pause or token[-1] in _PAUSE_PUNCT
        token = token[:-1]
    return token, pause


def _en_word_symbols(word: str, lexicon: BilingualLexicon) -> list[str]:
    key = word.lower()
    if key not in lexicon.en_entries:
        raise SymbolLookupError(f"word not in lexicon: {word!r}")
    return [EN_PREFIX + p for p in lexicon.en_entries[key]]


def _zh_syllable_symbols(token: str, lexicon: BilingualLexicon) -> list[str]:
    base, tone = split_tone(token)
    if base not in lexicon.zh_syllables:
        raise SymbolLookupError(f"unknown pinyin syllable: {base!r}")
    initial, final = lexicon.zh_syllables[base]
    syms = [ZH_PREFIX + initial] if initial else []
    syms.append(ZH_PREFIX + final + tone)
    return syms


def _is_pinyin_token(token: str) -> bool:
    return len(token) >= 2 and token[-1].isdigit() and token[:-1].isalpha()


def _tokenize(text: str, lexicon, table, classify) -> PhonemeSequence:
    syms: list[str] = []
    tags: list[LanguageTag] = []
    for raw in text.split():
        token, pause = _strip_punct(raw)
        if token:
            lang = classify(token)
            if lang is LanguageTag.ZH:
                word_syms = _zh_syllable_symbols(token, lexicon)
            else:
                word_syms = _en_word_symbols(token, lexicon)
            syms.extend(word_syms)
            tags.extend([lang] * len(word_syms))
        if pause:
            syms.append(PAUSE_SYMBOL)
            tags.append(LanguageTag.PAUSE)
    syms.append(EOS_SYMBOL)
    tags.append(LanguageTag.EOS)
    return PhonemeSequence(ids=table.encode(syms), text_ref=text, language_tags=tags)


def tokenize_english(text: str, lexicon: BilingualLexicon, table: SymbolTable) -> PhonemeSequence:
    """Tokenize English text via lexicon lookup; unknown words are hard errors."""
    return _tokenize(text, lexicon, table, lambda tok: LanguageTag.EN)


def tokenize_mandarin(text: str, lexicon: BilingualLexicon, table: SymbolTable) -> PhonemeSequence:
    """Tokenize tone-numbered pinyin; a missing tone digit means neutral tone."""
    return _tokenize(text, lexicon, table, lambda tok: LanguageTag.ZH)


def tokenize_mixed(text: str, lexicon: BilingualLexicon, table: SymbolTable) -> PhonemeSequence:
    """Tokenize code-switched text: tone-digit tokens are pinyin, the rest English."""
    return _tokenize(
        text, lexicon, table,
        lambda tok: LanguageTag.ZH if _is_pinyin_token(tok) else LanguageTag.EN,
    )


def translatable_spans(tokens: list[str], lexicon: BilingualLexicon) -> list[tuple[int, int]]:
    """(start, length) spans matching translation keys, longest match first, left to right."""
    keys = {tuple(k.split()) for k in lexicon.translations}
    max_span = max((len(k) for k in keys), default=0)
    spans = []
    i = 0
    while i < len(tokens):
        for n in range(min(max_span, len(tokens) - i), 0, -1):
            if tuple(tokens[i : i + n]) in keys:
                spans.append((i, n))
                i += n
                break
        else:
            i += 1
    return spans


def generate_code_switched(
    sentences: list[str],
    lexicon: BilingualLexicon,
    rate: float,
    seed: int,
) -> list[str]:
    """Make code-switched text by replacing translatable words at the given rate.

    Each matched word/phrase is independently replaced with probability
    ``rate`` (seeded RNG, deterministic).  Sentences containing nothing
    translatable are dropped.
    """
    if not 0.0 < rate <= 1.0:
        raise ValidationError(f"rate must be in (0, 1], got {rate}")
    if not lexicon.translations:
        raise ValidationError("translation table is empty")
    rng = random.Random(seed)
    out = []
    for sentence in sentences:
        tokens = sentence.split()
        spans = translatable_spans(tokens, lexicon)
        if not spans:
            continue
        result: list[str] = []
        pos = 0
        for start, length in spans:
            result.extend(tokens[pos:start])
            phrase = " ".join(tokens[start : start + length])
            if rng.random() < rate:
                result.extend(lexicon.translations[phrase].split())
            else:
                result.extend(tokens[start : start + length])
            pos = start + length
        result.extend(tokens[pos:])
        out.append(" ".join(result))
    return out

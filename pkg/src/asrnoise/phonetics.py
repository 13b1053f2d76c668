"""Phonetic codes, articulatory edit distance and similarity supervision.

A word maps to a phonetic code (a sequence of phonemes); codes are compared
with a weighted Levenshtein distance whose substitution cost is the fraction
of articulatory slots two phonemes disagree on.  Distances feed a similarity
score and, normalized over a vocabulary, a supervision distribution for the
phoneme generation head.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import DegenerateSupportError, EmptyWordError

CONSONANT = "consonant"
VOWEL = "vowel"

UNK_SYMBOL = "UNK"

#: Subword pieces carry this prefix when they continue a word.
CONTINUATION_PREFIX = "##"


@dataclass(frozen=True)
class ConsonantProfile:
    place: str
    manner: str
    voicing: str

    kind = CONSONANT

    def slots(self) -> tuple[str, str, str]:
        return (self.place, self.manner, self.voicing)


@dataclass(frozen=True)
class VowelProfile:
    height: str
    backness: str
    rounding: str

    kind = VOWEL

    def slots(self) -> tuple[str, str, str]:
        return (self.height, self.backness, self.rounding)


@dataclass(frozen=True)
class Phoneme:
    """One phoneme: a symbol plus its articulatory profile."""

    symbol: str
    profile: ConsonantProfile | VowelProfile

    def __post_init__(self):
        if not self.symbol:
            raise ValueError("phoneme symbol must be nonempty")

    @property
    def kind(self) -> str:
        return self.profile.kind


@dataclass(frozen=True)
class PhoneticCode:
    """Ordered phoneme sequence for one word surface."""

    phonemes: tuple[Phoneme, ...]

    def __len__(self) -> int:
        return len(self.phonemes)

    def __iter__(self):
        return iter(self.phonemes)

    @property
    def symbols(self) -> tuple[str, ...]:
        return tuple(p.symbol for p in self.phonemes)

    def key(self) -> str:
        """Canonical string form, e.g. ``"K Y UW"``."""
        return " ".join(self.symbols)


# Deterministic letter fallback used when a surface is not in the lexicon.
# Every letter maps to phonemes of the same inventory; anything else maps
# to the UNK phoneme.
FALLBACK_LETTER_PHONEMES: dict[str, tuple[str, ...]] = {
    "a": ("AE",),
    "b": ("B",),
    "c": ("K",),
    "d": ("D",),
    "e": ("EH",),
    "f": ("F",),
    "g": ("G",),
    "h": ("HH",),
    "i": ("IH",),
    "j": ("JH",),
    "k": ("K",),
    "l": ("L",),
    "m": ("M",),
    "n": ("N",),
    "o": ("AA",),
    "p": ("P",),
    "q": ("K",),
    "r": ("R",),
    "s": ("S",),
    "t": ("T",),
    "u": ("AH",),
    "v": ("V",),
    "w": ("W",),
    "x": ("K", "S"),
    "y": ("Y",),
    "z": ("Z",),
}


class PronouncingLexicon:
    """Case-insensitive word -> phonetic code map over one phoneme inventory."""

    def __init__(self, entries: Mapping[str, PhoneticCode], inventory: Mapping[str, Phoneme]):
        self.inventory = dict(inventory)
        if UNK_SYMBOL not in self.inventory:
            raise ValueError("inventory must contain the %s phoneme" % UNK_SYMBOL)
        self.entries: dict[str, PhoneticCode] = {}
        for word, code in entries.items():
            for ph in code:
                if ph.symbol not in self.inventory:
                    raise ValueError(f"{word!r} uses phoneme {ph.symbol!r} not in inventory")
            self.entries[word.lower()] = code
        self._fallback_cache: dict[str, PhoneticCode] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.entries

    def words(self) -> list[str]:
        return list(self.entries)

    def phoneme(self, symbol: str) -> Phoneme:
        return self.inventory[symbol]

    def code_from_symbols(self, symbols: Iterable[str]) -> PhoneticCode:
        return PhoneticCode(tuple(self.inventory[s] for s in symbols))


def load_inventory(path) -> dict[str, Phoneme]:
    """Read one phoneme per line: ``SYMBOL<TAB>kind<TAB>slot1<TAB>slot2<TAB>slot3``."""
    inventory: dict[str, Phoneme] = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise ValueError(f"bad inventory line: {raw!r}")
            symbol, kind, s1, s2, s3 = fields
            if symbol in inventory:
                raise ValueError(f"duplicate phoneme symbol {symbol!r}")
            if kind == CONSONANT:
                profile: ConsonantProfile | VowelProfile = ConsonantProfile(s1, s2, s3)
            elif kind == VOWEL:
                profile = VowelProfile(s1, s2, s3)
            else:
                raise ValueError(f"unknown phoneme kind {kind!r}")
            inventory[symbol] = Phoneme(symbol, profile)
    return inventory


def load_lexicon(path, inventory: Mapping[str, Phoneme]) -> PronouncingLexicon:
    """Read ``WORD<TAB>PH1 PH2 ...`` lines into a lexicon."""
    entries: dict[str, PhoneticCode] = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            word, _, symbols = line.partition("\t")
            phonemes = tuple(inventory[s] for s in symbols.split())
            entries[word] = PhoneticCode(phonemes)
    return PronouncingLexicon(entries, inventory)


_DEFAULT_LEXICON: Optional[PronouncingLexicon] = None


def default_lexicon() -> PronouncingLexicon:
    """Lexicon shipped with the package (cached)."""
    global _DEFAULT_LEXICON
    if _DEFAULT_LEXICON is None:
        data = resources.files("asrnoise.data")
        inventory = load_inventory(data / "inventory.tsv")
        _DEFAULT_LEXICON = load_lexicon(data / "lexicon.tsv", inventory)
    return _DEFAULT_LEXICON


_WORD_STRIP_RE = re.compile(r"[^a-z0-9]+")


def g2p(word: str, lexicon: PronouncingLexicon) -> PhoneticCode:
    """Phonetic code for a surface: lexicon lookup, letter fallback otherwise.

    The subword continuation prefix ``##`` is stripped first.  Characters
    without a fallback entry map to the UNK phoneme.
    """
    if word.startswith(CONTINUATION_PREFIX):
        word = word[len(CONTINUATION_PREFIX):]
    word = word.lower()
    if not word:
        raise EmptyWordError("cannot derive a phonetic code for an empty word")
    entry = lexicon.entries.get(word)
    if entry is not None:
        return entry
    cached = lexicon._fallback_cache.get(word)
    if cached is not None:
        return cached
    symbols: list[str] = []
    for ch in word:
        symbols.extend(FALLBACK_LETTER_PHONEMES.get(ch, (UNK_SYMBOL,)))
    code = lexicon.code_from_symbols(symbols)
    lexicon._fallback_cache[word] = code
    return code


def articulatory_mismatches(p: Phoneme, q: Phoneme) -> int:
    """Number of differing articulatory slots, 0..3; 3 when kinds differ."""
    if p.symbol == q.symbol:
        return 0
    if p.kind != q.kind:
        return 3
    return sum(a != b for a, b in zip(p.profile.slots(), q.profile.slots()))


def phoneme_sub_cost(p: Phoneme, q: Phoneme) -> float:
    """Substitution cost in [0, 1]: differing-slot fraction, 1 across kinds."""
    return articulatory_mismatches(p, q) / 3.0


# Edit costs are kept in integer thirds so the dynamic program is exact:
# substitution costs 0..3 units, insertion and deletion cost 3 units.
_INDEL_UNITS = 3


def _edit_units(cp: Sequence[Phoneme], cq: Sequence[Phoneme]) -> int:
    n, m = len(cp), len(cq)
    prev = list(range(0, _INDEL_UNITS * (m + 1), _INDEL_UNITS))
    for i in range(1, n + 1):
        cur = [i * _INDEL_UNITS]
        pi = cp[i - 1]
        for j in range(1, m + 1):
            sub = prev[j - 1] + articulatory_mismatches(pi, cq[j - 1])
            ins = cur[j - 1] + _INDEL_UNITS
            dele = prev[j] + _INDEL_UNITS
            # substitution wins ties, then insertion, then deletion
            best = sub
            if ins < best:
                best = ins
            if dele < best:
                best = dele
            cur.append(best)
        prev = cur
    return prev[m]


def phoneme_edit_distance(cp: PhoneticCode | Sequence[Phoneme], cq: PhoneticCode | Sequence[Phoneme]) -> float:
    """Weighted Levenshtein distance between two phonetic codes.

    Substitutions cost the articulatory differing-slot fraction; insertions
    and deletions cost 1.  Symmetric, zero exactly on equal codes.
    """
    cp = tuple(cp)
    cq = tuple(cq)
    return _edit_units(cp, cq) / 3.0


def phonetic_similarity(wp: str, wq: str, lexicon: PronouncingLexicon) -> float:
    """max(|C_p| - D(C_p, C_q), 0) for the codes of two surfaces.

    Normalized by the first argument's code length, so not symmetric.
    """
    cp = g2p(wp, lexicon)
    cq = g2p(wq, lexicon)
    return max(float(len(cp)) - phoneme_edit_distance(cp, cq), 0.0)


def supervision_distribution(
    target: str,
    vocab: Sequence[Optional[str]],
    lexicon: PronouncingLexicon,
) -> np.ndarray:
    """Phonetic similarity of ``target`` to each vocab surface, normalized.

    ``None`` entries (special tokens) get zero mass.  Raises
    DegenerateSupportError when the target is phonetically disjoint from the
    whole vocabulary.
    """
    ct = g2p(target, lexicon)
    nt = float(len(ct))
    scores = np.zeros(len(vocab), dtype=np.float64)
    for i, surface in enumerate(vocab):
        if surface is None:
            continue
        try:
            cw = g2p(surface, lexicon)
        except EmptyWordError:
            continue
        scores[i] = max(nt - phoneme_edit_distance(ct, cw), 0.0)
    total = scores.sum()
    if total <= 0.0:
        raise DegenerateSupportError(
            f"target {target!r} has zero phonetic similarity to the whole vocabulary"
        )
    return scores / total

"""Reduced words, cyclic words and subword statistics in the free group F_k.

Letters are signed integers: ``i`` stands for the i-th generator and ``-i`` for
its inverse. The fixed letter order used for canonical forms and enumeration is
``a < A < b < B < ...`` (generator before its inverse).
"""
from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import (
    Dict,
    Iterable,
    Iterator,
    List,
    NamedTuple,
    Optional,
    Protocol,
    Sequence,
    Tuple,
    Union,
)

from freemal.errors import (
    AlphabetError,
    FreeGroupError,
    PreconditionError,
    WordFormatError,
    WordTooShortError,
)

log = logging.getLogger(__name__)

Letter = int
Rational = Union[Fraction, int, float, str]

_TOKEN = re.compile(r"^([xX])(\d+)$")


def to_fraction(value: Rational) -> Fraction:
    """Exact rational from an int, a Fraction, a decimal float or a string
    such as ``"1/20"`` or ``"0.05"``."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    try:
        return Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError) as e:
        raise FreeGroupError(f"Cannot read '{value}' as a rational number") from e


def letter_key(letter: Letter) -> int:
    """Position of a letter in the order a < A < b < B < ..."""
    return 2 * abs(letter) - (letter > 0)


@dataclass(frozen=True)
class Alphabet:
    rank: int

    def __post_init__(self):
        if self.rank < 1:
            raise AlphabetError(f"Alphabet rank must be at least 1, got {self.rank}")

    def letters(self) -> List[Letter]:
        return [s * i for i in range(1, self.rank + 1) for s in (1, -1)]

    def check(self, letter: Letter) -> Letter:
        if letter == 0 or abs(letter) > self.rank:
            raise AlphabetError(
                f"Letter {format_letter(letter) if letter else 0} "
                f"is outside the alphabet of rank {self.rank}"
            )
        return letter

    @classmethod
    def infer(cls, letters: Iterable[Letter], minimum: int = 1) -> "Alphabet":
        return cls(max([minimum, *(abs(x) for x in letters)]))


@dataclass(frozen=True)
class ReducedWord:
    letters: Tuple[Letter, ...]
    alphabet: Alphabet

    def __post_init__(self):
        object.__setattr__(self, "letters", tuple(self.letters))
        for x in self.letters:
            self.alphabet.check(x)
        for i in range(len(self.letters) - 1):
            if self.letters[i + 1] == -self.letters[i]:
                raise PreconditionError(
                    f"Letters are not freely reduced at position {i}: "
                    f"{format_letters(self.letters[i:i + 2], self.alphabet.rank)}"
                )

    @classmethod
    def trusted(cls, letters: Sequence[Letter], alphabet: Alphabet) -> "ReducedWord":
        """Build without validation; for letters already known to be reduced."""
        word = object.__new__(cls)
        object.__setattr__(word, "letters", tuple(letters))
        object.__setattr__(word, "alphabet", alphabet)
        return word

    @classmethod
    def empty(cls, alphabet: Alphabet) -> "ReducedWord":
        return cls.trusted((), alphabet)

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self) -> Iterator[Letter]:
        return iter(self.letters)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return ReducedWord.trusted(self.letters[item], self.alphabet)
        return self.letters[item]

    def __mul__(self, other: "ReducedWord") -> "ReducedWord":
        return concat(self, other)

    def __str__(self) -> str:
        return format_word(self)

    def inverse(self) -> "ReducedWord":
        return invert(self)

    @property
    def is_cyclically_reduced(self) -> bool:
        return len(self.letters) < 2 or self.letters[0] != -self.letters[-1]


def least_rotation(sequence: Sequence) -> int:
    """Start index of the lexicographically least rotation, in linear time."""
    n = len(sequence)
    doubled = list(sequence) * 2
    i, start = 0, 0
    while i < n:
        start = i
        j, k = i + 1, i
        while j < 2 * n and doubled[k] <= doubled[j]:
            k = i if doubled[k] < doubled[j] else k + 1
            j += 1
        while i <= k:
            i += j - k
    return start


@dataclass(frozen=True)
class CyclicWord:
    """A conjugacy class, stored as its least rotation."""

    representative: ReducedWord
    canonical: bool = True

    def __post_init__(self):
        letters = self.representative.letters
        if not self.representative.is_cyclically_reduced:
            raise PreconditionError(
                f"{format_word(self.representative)} is not cyclically reduced"
            )
        start = least_rotation([letter_key(x) for x in letters])
        if start:
            rotated = letters[start:] + letters[:start]
            object.__setattr__(
                self,
                "representative",
                ReducedWord.trusted(rotated, self.representative.alphabet),
            )
        object.__setattr__(self, "canonical", True)

    @property
    def alphabet(self) -> Alphabet:
        return self.representative.alphabet

    @property
    def letters(self) -> Tuple[Letter, ...]:
        return self.representative.letters

    def __len__(self) -> int:
        return len(self.representative)

    def __str__(self) -> str:
        return format_word(self.representative)

    def rotations(self) -> Iterator[ReducedWord]:
        letters = self.letters
        for i in range(max(len(letters), 1)):
            yield ReducedWord.trusted(letters[i:] + letters[:i], self.alphabet)


class Position(NamedTuple):
    """Where a window sits: input word index, whether the inverse was read,
    and the offset inside that (possibly inverted) word."""

    word: int
    inverted: bool
    offset: int


@dataclass(frozen=True)
class FrequencyProfile:
    single: Dict[Letter, Fraction]
    pair: Dict[Tuple[Letter, Letter], Fraction]
    length: int
    cyclic: bool


@dataclass(frozen=True)
class EquidistributionReport:
    ok: bool
    deviation: Fraction
    witness: Tuple[Letter, ...]


@dataclass(frozen=True)
class CoverageReport:
    ok: bool
    missing: Tuple[ReducedWord, ...]
    missing_count: int


@dataclass(frozen=True)
class SubwordReport:
    ok: bool
    witness: Optional[Tuple[Position, Position]] = None
    window: Optional[ReducedWord] = None


@dataclass(frozen=True)
class MatchReport:
    found: bool
    u: Optional[ReducedWord] = None
    image: Optional[ReducedWord] = None
    positions: Optional[Tuple[Position, Position]] = None


class LetterPermutation(Protocol):
    """Anything that permutes X^{±1} letterwise (relabeling automorphisms)."""

    def map_letter(self, letter: Letter) -> Letter:
        ...

    def is_identity(self) -> bool:
        ...


def _same_alphabet(*words) -> Alphabet:
    alphabets = {w.alphabet for w in words}
    if len(alphabets) > 1:
        ranks = sorted(a.rank for a in alphabets)
        raise AlphabetError(f"Words are over different alphabets (ranks {ranks})")
    return words[0].alphabet


def free_reduce(
    letters: Iterable[Letter], alphabet: Optional[Alphabet] = None
) -> ReducedWord:
    letters = list(letters)
    if alphabet is None:
        alphabet = Alphabet.infer(letters)
    stack: List[Letter] = []
    for x in letters:
        alphabet.check(x)
        if stack and stack[-1] == -x:
            stack.pop()
        else:
            stack.append(x)
    return ReducedWord.trusted(stack, alphabet)


def concat(u: ReducedWord, v: ReducedWord) -> ReducedWord:
    alphabet = _same_alphabet(u, v)
    a, b = u.letters, v.letters
    overlap = 0
    bound = min(len(a), len(b))
    while overlap < bound and a[len(a) - 1 - overlap] == -b[overlap]:
        overlap += 1
    return ReducedWord.trusted(a[: len(a) - overlap] + b[overlap:], alphabet)


def product(words: Sequence[ReducedWord], alphabet: Alphabet) -> ReducedWord:
    letters: List[Letter] = []
    for w in words:
        letters.extend(w.letters)
    return free_reduce(letters, alphabet)


def invert(w: ReducedWord) -> ReducedWord:
    return ReducedWord.trusted([-x for x in reversed(w.letters)], w.alphabet)


def cyclic_reduce(w: ReducedWord) -> Tuple[ReducedWord, CyclicWord]:
    """Split w as conjugator * core * conjugator^-1 with a maximal conjugator."""
    letters = w.letters
    n = len(letters)
    i = 0
    while i < n - 1 - i and letters[i] == -letters[n - 1 - i]:
        i += 1
    conjugator = ReducedWord.trusted(letters[:i], w.alphabet)
    core = ReducedWord.trusted(letters[i : n - i], w.alphabet)
    return conjugator, CyclicWord(core)


def cyclic_core(w: ReducedWord) -> CyclicWord:
    return cyclic_reduce(w)[1]


def prefix(w: ReducedWord, m: int) -> ReducedWord:
    if not 0 <= m <= len(w):
        raise PreconditionError(f"Prefix length {m} outside 0..{len(w)}")
    return w[:m]


def frequency_profile(g: Union[ReducedWord, CyclicWord]) -> FrequencyProfile:
    cyclic = isinstance(g, CyclicWord)
    word = g.representative if cyclic else g
    letters = word.letters
    length = len(letters)
    if length < 1:
        raise WordTooShortError("Frequencies need a word of length at least 1")

    singles = Counter(letters)
    pairs = Counter(zip(letters, letters[1:]))
    if cyclic:
        pairs[(letters[-1], letters[0])] += 1
    pair_total = length if cyclic else length - 1

    alphabet_letters = word.alphabet.letters()
    single = {u: Fraction(singles[u], length) for u in alphabet_letters}
    pair = {}
    if pair_total:
        pair = {
            (u, v): Fraction(pairs[(u, v)], pair_total)
            for u in alphabet_letters
            for v in alphabet_letters
        }
    return FrequencyProfile(single=single, pair=pair, length=length, cyclic=cyclic)


def profile_deviations(
    profile: FrequencyProfile, rank: int
) -> Tuple[Fraction, Tuple[Letter, ...], Fraction, Tuple[Letter, ...]]:
    """Largest single-letter and pair deviations from the uniform targets,
    each with the letter(s) attaining it."""
    single_target = Fraction(1, 2 * rank)
    pair_target = Fraction(1, 2 * rank * (2 * rank - 1))

    single_dev, single_witness = Fraction(0), ()
    for u, freq in profile.single.items():
        deviation = abs(freq - single_target)
        if deviation > single_dev:
            single_dev, single_witness = deviation, (u,)

    pair_dev, pair_witness = Fraction(0), ()
    for (u, v), freq in profile.pair.items():
        if v == -u:
            continue
        deviation = abs(freq - pair_target)
        if deviation > pair_dev:
            pair_dev, pair_witness = deviation, (u, v)
    return single_dev, single_witness, pair_dev, pair_witness


def is_equidistributed(
    g: Union[ReducedWord, CyclicWord], epsilon: Rational
) -> EquidistributionReport:
    epsilon = to_fraction(epsilon)
    if len(g) < 2:
        raise WordTooShortError("Equidistribution needs a word of length at least 2")
    profile = frequency_profile(g)
    single_dev, single_witness, pair_dev, pair_witness = profile_deviations(
        profile, g.alphabet.rank
    )
    if pair_dev > single_dev:
        deviation, witness = pair_dev, pair_witness
    else:
        deviation, witness = single_dev, single_witness
    return EquidistributionReport(
        ok=deviation <= epsilon, deviation=deviation, witness=witness
    )


def _encode(letters: Iterable[Letter]) -> str:
    # one character per letter so that windows are plain substrings
    return "".join(chr(0x100 + letter_key(x)) for x in letters)


def _decode(text: str) -> List[Letter]:
    letters = []
    for ch in text:
        key = ord(ch) - 0x100
        index = (key + 1) // 2
        letters.append(index if key % 2 else -index)
    return letters


def covers_all_subwords(
    g: CyclicWord, L: int, orientation: str = "directed", limit: int = 20
) -> CoverageReport:
    """Whether every reduced word of length L is a subword of the cyclic word g.

    In undirected mode a word also counts when its inverse occurs. Cyclic
    words shorter than L have no windows and cover nothing.
    """
    if L < 1:
        raise PreconditionError(f"Window length must be at least 1, got {L}")
    if orientation not in ("directed", "undirected"):
        raise PreconditionError(f"Unknown orientation '{orientation}'")
    alphabet = g.alphabet
    total = count_reduced_words(alphabet.rank, L)

    text = _encode(g.letters)
    present = set()
    if len(text) >= L:
        doubled = text + text[: L - 1]
        present = {doubled[i : i + L] for i in range(len(text))}
    if orientation == "undirected":
        present |= {_encode(-x for x in reversed(_decode(u))) for u in present}

    if len(present) == total:
        return CoverageReport(ok=True, missing=(), missing_count=0)

    missing = []
    for word in enumerate_reduced_words(alphabet, L):
        if _encode(word.letters) not in present:
            missing.append(word)
            if len(missing) >= limit:
                break
    return CoverageReport(
        ok=False, missing=tuple(missing), missing_count=total - len(present)
    )


def _collection(
    words: Sequence[ReducedWord], include_inverses: bool = True
) -> List[Tuple[int, bool, str]]:
    texts = []
    for index, word in enumerate(words):
        texts.append((index, False, _encode(word.letters)))
        if include_inverses:
            texts.append((index, True, _encode(invert(word).letters)))
    return texts


def all_subwords_distinct(words: Sequence[ReducedWord], m: int) -> SubwordReport:
    """No length-m window occurs twice across the words and their inverses."""
    if m < 1:
        raise PreconditionError(f"Window length must be at least 1, got {m}")
    if not words:
        return SubwordReport(ok=True)
    alphabet = _same_alphabet(*words)
    seen: Dict[str, Position] = {}
    for index, inverted, text in _collection(words):
        for offset in range(len(text) - m + 1):
            window = text[offset : offset + m]
            position = Position(index, inverted, offset)
            if window in seen:
                return SubwordReport(
                    ok=False,
                    witness=(seen[window], position),
                    window=ReducedWord.trusted(_decode(window), alphabet),
                )
            seen[window] = position
    return SubwordReport(ok=True)


def relabel_match_exists(
    words: Sequence[ReducedWord],
    m: int,
    phi: LetterPermutation,
    include_inverses: bool = False,
) -> MatchReport:
    """Whether some length-m window u of the collection has phi(u) occurring
    in the collection as well (u = phi(u) included). The collection is the
    input words; ``include_inverses`` adds their inverses."""
    if m < 1:
        raise PreconditionError(f"Window length must be at least 1, got {m}")
    if phi.is_identity():
        raise PreconditionError("The identity relabeling always matches")
    if not words:
        return MatchReport(found=False)
    alphabet = _same_alphabet(*words)

    collection = _collection(words, include_inverses)
    index: Dict[str, Position] = {}
    for word_index, inverted, text in collection:
        for offset in range(len(text) - m + 1):
            index.setdefault(
                text[offset : offset + m], Position(word_index, inverted, offset)
            )

    table = {
        0x100 + letter_key(x): 0x100 + letter_key(phi.map_letter(x))
        for x in alphabet.letters()
    }
    for word_index, inverted, text in collection:
        image_text = text.translate(table)
        for offset in range(len(text) - m + 1):
            image = image_text[offset : offset + m]
            if image in index:
                return MatchReport(
                    found=True,
                    u=ReducedWord.trusted(_decode(text[offset : offset + m]), alphabet),
                    image=ReducedWord.trusted(_decode(image), alphabet),
                    positions=(Position(word_index, inverted, offset), index[image]),
                )
    return MatchReport(found=False)


def count_reduced_words(k: int, A: int) -> int:
    if A < 0 or k < 1:
        raise PreconditionError(f"Need A >= 0 and k >= 1, got A={A}, k={k}")
    if A == 0:
        return 1
    return 2 * k * (2 * k - 1) ** (A - 1)


def enumerate_reduced_words(alphabet: Alphabet, A: int) -> Iterator[ReducedWord]:
    """All reduced words of length A, lexicographic in the letter order."""
    letters = alphabet.letters()

    def extend(current: List[Letter]) -> Iterator[ReducedWord]:
        if len(current) == A:
            yield ReducedWord.trusted(current, alphabet)
            return
        for x in letters:
            if current and x == -current[-1]:
                continue
            current.append(x)
            yield from extend(current)
            current.pop()

    yield from extend([])


def format_letter(letter: Letter, rank: int = 1) -> str:
    if rank > 26 or abs(letter) > 26:
        return f"x{letter}" if letter > 0 else f"X{-letter}"
    return chr(96 + letter) if letter > 0 else chr(64 - letter)


def format_letters(letters: Sequence[Letter], rank: int) -> str:
    if not letters:
        return "1"
    separator = " " if rank > 26 else ""
    return separator.join(format_letter(x, rank) for x in letters)


def format_word(w: Union[ReducedWord, CyclicWord]) -> str:
    return format_letters(w.letters, w.alphabet.rank)


def parse_letters(text: str, alphabet: Optional[Alphabet] = None) -> List[Letter]:
    """Read the word text format into raw (not necessarily reduced) letters."""
    stripped = text.strip()
    if stripped in ("", "1"):
        return []

    letters = []
    if any(ch.isdigit() for ch in stripped):
        for token in stripped.split():
            match = _TOKEN.match(token)
            if not match or int(match.group(2)) < 1:
                raise WordFormatError(f"Invalid letter token '{token}'", token)
            index = int(match.group(2))
            letters.append(index if match.group(1) == "x" else -index)
    else:
        for ch in stripped:
            if ch.isspace():
                continue
            if "a" <= ch <= "z":
                letters.append(ord(ch) - 96)
            elif "A" <= ch <= "Z":
                letters.append(-(ord(ch) - 64))
            else:
                raise WordFormatError(f"Invalid letter '{ch}' in '{stripped}'", ch)

    if alphabet is not None:
        for x in letters:
            if abs(x) > alphabet.rank:
                token = format_letter(x)
                raise WordFormatError(
                    f"Letter '{token}' is outside the alphabet of rank {alphabet.rank}",
                    token,
                )
    return letters


def parse_word(text: str, alphabet: Optional[Alphabet] = None) -> ReducedWord:
    letters = parse_letters(text, alphabet)
    return free_reduce(letters, alphabet or Alphabet.infer(letters))

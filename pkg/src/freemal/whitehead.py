"""Whitehead and relabeling automorphisms of F_k.

A Whitehead automorphism ``(a, A)`` fixes ``a`` and sends every other letter
``x`` to ``a^-e x a^f`` where ``f = [x in A]`` and ``e = [x^-1 in A]``.
Composite automorphisms (``AutoWord``) apply their factors right to left.
"""
from __future__ import annotations

import itertools
import logging
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import FrozenSet, List, NamedTuple, Optional, Tuple, Union

from freemal.errors import AlphabetError, PreconditionError, WordFormatError
from freemal.freewords import (
    Alphabet,
    CyclicWord,
    Letter,
    ReducedWord,
    concat,
    cyclic_core,
    cyclic_reduce,
    format_letter,
    format_word,
    free_reduce,
    invert,
    letter_key,
    parse_letters,
    parse_word,
)
from freemal.stallings import StallingsGraph, from_generators

log = logging.getLogger(__name__)

# margin kept below the exact bound so that equidistribution implies a strict
# length increase
EPSILON0_SAFETY = Fraction(99, 100)
# the bound below is a statement about frequencies only
EPSILON0_MIN_LENGTH = 1


def _check_alphabet(phi, w: ReducedWord):
    if w.alphabet != phi.alphabet:
        raise AlphabetError(
            f"Automorphism of F_{phi.alphabet.rank} applied to a word over "
            f"rank {w.alphabet.rank}"
        )


@dataclass(frozen=True)
class Relabeling:
    """Permutation of X^{±1} commuting with inversion, given by the images
    of the positive letters."""

    images: Tuple[Letter, ...]
    alphabet: Alphabet

    def __post_init__(self):
        object.__setattr__(self, "images", tuple(self.images))
        if len(self.images) != self.alphabet.rank or sorted(
            abs(x) for x in self.images
        ) != list(range(1, self.alphabet.rank + 1)):
            raise PreconditionError(f"{self.images} does not permute X^{{±1}}")

    @classmethod
    def identity(cls, alphabet: Alphabet) -> "Relabeling":
        return cls(tuple(range(1, alphabet.rank + 1)), alphabet)

    def map_letter(self, letter: Letter) -> Letter:
        image = self.images[abs(letter) - 1]
        return image if letter > 0 else -image

    def is_identity(self) -> bool:
        return all(x == i + 1 for i, x in enumerate(self.images))

    def compose(self, other: "Relabeling") -> "Relabeling":
        """self after other."""
        return Relabeling(
            tuple(self.map_letter(x) for x in other.images), self.alphabet
        )

    def inverse(self) -> "Relabeling":
        images = [0] * self.alphabet.rank
        for i, x in enumerate(self.images):
            images[abs(x) - 1] = (i + 1) if x > 0 else -(i + 1)
        return Relabeling(tuple(images), self.alphabet)

    def apply(self, w: ReducedWord) -> ReducedWord:
        _check_alphabet(self, w)
        return ReducedWord.trusted([self.map_letter(x) for x in w.letters], w.alphabet)

    def __str__(self) -> str:
        rank = self.alphabet.rank
        pairs = ",".join(
            f"{format_letter(i + 1, rank)}->{format_letter(x, rank)}"
            for i, x in enumerate(self.images)
        )
        return f"R({pairs})"


@dataclass(frozen=True)
class WhiteheadAuto:
    multiplier: Letter
    cut_set: FrozenSet[Letter]
    alphabet: Alphabet

    def __post_init__(self):
        object.__setattr__(self, "cut_set", frozenset(self.cut_set))
        self.alphabet.check(self.multiplier)
        for x in self.cut_set:
            self.alphabet.check(x)
        if self.multiplier not in self.cut_set or -self.multiplier in self.cut_set:
            raise PreconditionError(
                "The cut set must contain the multiplier and not its inverse"
            )

    def image(self, letter: Letter) -> List[Letter]:
        a = self.multiplier
        if letter in (a, -a):
            return [letter]
        image = [-a] if -letter in self.cut_set else []
        image.append(letter)
        if letter in self.cut_set:
            image.append(a)
        return image

    def apply(self, w: ReducedWord) -> ReducedWord:
        _check_alphabet(self, w)
        return free_reduce(
            itertools.chain.from_iterable(self.image(x) for x in w.letters),
            w.alphabet,
        )

    @property
    def is_identity(self) -> bool:
        return len(self.cut_set) == 1

    @property
    def is_inner(self) -> bool:
        # conjugation by the inverse of the multiplier
        return len(self.cut_set) == 2 * self.alphabet.rank - 1

    @property
    def is_proper(self) -> bool:
        return not (self.is_identity or self.is_inner)

    def inverse(self) -> "WhiteheadAuto":
        a = self.multiplier
        return WhiteheadAuto(-a, (self.cut_set - {a}) | {-a}, self.alphabet)

    def __str__(self) -> str:
        rank = self.alphabet.rank
        cut = ",".join(
            format_letter(x, rank) for x in sorted(self.cut_set, key=letter_key)
        )
        return f"W({format_letter(self.multiplier, rank)};{{{cut}}})"


@dataclass(frozen=True)
class Inner:
    """Conjugation x -> h x h^-1."""

    word: ReducedWord

    @property
    def alphabet(self) -> Alphabet:
        return self.word.alphabet

    def apply(self, w: ReducedWord) -> ReducedWord:
        _check_alphabet(self, w)
        return concat(concat(self.word, w), invert(self.word))

    def inverse(self) -> "Inner":
        return Inner(invert(self.word))

    def __str__(self) -> str:
        return f"I({format_word(self.word)})"


Factor = Union[Relabeling, WhiteheadAuto, Inner]


@dataclass(frozen=True)
class AutoWord:
    factors: Tuple[Factor, ...]
    alphabet: Alphabet = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        alphabets = {f.alphabet for f in self.factors}
        if self.alphabet is not None:
            alphabets.add(self.alphabet)
        if len(alphabets) > 1:
            raise AlphabetError("Automorphism factors over different alphabets")
        if not alphabets:
            raise PreconditionError("An empty automorphism word needs an alphabet")
        object.__setattr__(self, "alphabet", alphabets.pop())

    def apply(self, w: ReducedWord) -> ReducedWord:
        _check_alphabet(self, w)
        for factor in reversed(self.factors):
            w = factor.apply(w)
        return w

    def compose(self, other: "AutoWord") -> "AutoWord":
        """self after other."""
        return AutoWord(self.factors + other.factors, self.alphabet)

    def inverse(self) -> "AutoWord":
        return AutoWord(
            tuple(f.inverse() for f in reversed(self.factors)), self.alphabet
        )

    def __len__(self) -> int:
        return len(self.factors)

    def __str__(self) -> str:
        return format_automorphism(self)


def apply(phi: Union[Factor, AutoWord], w: ReducedWord) -> ReducedWord:
    return phi.apply(w)


@lru_cache(maxsize=None)
def enumerate_whitehead(k: int) -> Tuple[WhiteheadAuto, ...]:
    """All 2k * 2^(2k-2) pairs (a, A), multipliers in letter order."""
    alphabet = Alphabet(k)
    autos = []
    for a in alphabet.letters():
        others = [x for x in alphabet.letters() if x not in (a, -a)]
        for chosen in itertools.product((False, True), repeat=len(others)):
            cut = {a} | {x for x, keep in zip(others, chosen) if keep}
            autos.append(WhiteheadAuto(a, frozenset(cut), alphabet))
    return tuple(autos)


def proper_whitehead(k: int) -> Tuple[WhiteheadAuto, ...]:
    return tuple(phi for phi in enumerate_whitehead(k) if phi.is_proper)


@lru_cache(maxsize=None)
def _relabelings(k: int) -> Tuple[Relabeling, ...]:
    alphabet = Alphabet(k)
    relabelings = []
    for permutation in itertools.permutations(range(1, k + 1)):
        for signs in itertools.product((1, -1), repeat=k):
            images = tuple(s * x for s, x in zip(signs, permutation))
            relabelings.append(Relabeling(images, alphabet))
    return tuple(relabelings)


def enumerate_relabelings(alphabet: Alphabet) -> Tuple[Relabeling, ...]:
    """All 2^k * k! relabelings, the identity first."""
    return _relabelings(alphabet.rank)


def whitehead_graph_counts(g: CyclicWord) -> Counter:
    """Edge multiplicities of the Whitehead graph: every cyclic pair ``xy``
    contributes an edge between ``x`` and ``y^-1``."""
    letters = g.letters
    counts = Counter()
    for i, x in enumerate(letters):
        y = letters[(i + 1) % len(letters)]
        u, v = sorted((x, -y), key=letter_key)
        counts[(u, v)] += 1
    return counts


def length_change(
    phi: WhiteheadAuto, g: CyclicWord, counts: Optional[Counter] = None
) -> int:
    """Cyclic length of phi(g) minus that of g, from the Whitehead graph."""
    if not len(g):
        return 0
    if counts is None:
        counts = whitehead_graph_counts(g)
    a = phi.multiplier
    crossing = 0
    degree = 0
    for (u, v), count in counts.items():
        if (u in phi.cut_set) != (v in phi.cut_set):
            crossing += count
        degree += count * ((u == a) + (v == a))
    return crossing - degree


class MinimalityReport(NamedTuple):
    ok: bool
    witness: Optional[WhiteheadAuto] = None
    change: Optional[int] = None


def is_strictly_whitehead_minimal(g: CyclicWord) -> MinimalityReport:
    if not len(g):
        raise PreconditionError("Strict minimality needs a nontrivial cyclic word")
    counts = whitehead_graph_counts(g)
    for phi in proper_whitehead(g.alphabet.rank):
        change = length_change(phi, g, counts)
        if change <= 0:
            return MinimalityReport(ok=False, witness=phi, change=change)
    return MinimalityReport(ok=True)


class Minimization(NamedTuple):
    minimal: CyclicWord
    path: AutoWord


def minimize(w: ReducedWord) -> Minimization:
    """Steepest descent by proper Whitehead automorphisms on the cyclic
    length; ties go to the first automorphism in enumeration order."""
    if not len(w):
        raise PreconditionError("Cannot minimize the trivial word")
    current = cyclic_core(w)
    applied: List[WhiteheadAuto] = []
    autos = proper_whitehead(w.alphabet.rank)
    while True:
        counts = whitehead_graph_counts(current)
        best, best_change = None, 0
        for phi in autos:
            change = length_change(phi, current, counts)
            if change < best_change:
                best, best_change = phi, change
        if best is None:
            break
        current = cyclic_core(best.apply(current.representative))
        applied.append(best)
        log.debug(f"Descent by {best} to length {len(current)}")
    return Minimization(current, AutoWord(tuple(reversed(applied)), w.alphabet))


class OrbitMatch(NamedTuple):
    equal: bool
    rotation: Optional[int] = None
    relabeling: Optional[Relabeling] = None


def minimal_orbit_equal(g: CyclicWord, h: CyclicWord) -> OrbitMatch:
    """Whether a relabeling maps g onto a rotation of h; ``rotation`` is the
    shift of ``relabeling(g)`` that equals h's stored representative."""
    if g.alphabet != h.alphabet:
        raise AlphabetError("Cyclic words over different alphabets")
    for name, word in (("first", g), ("second", h)):
        report = is_strictly_whitehead_minimal(word)
        if not report.ok:
            raise PreconditionError(
                f"The {name} word is not strictly Whitehead minimal: "
                f"{report.witness} changes its length by {report.change}"
            )
    if len(g) != len(h):
        return OrbitMatch(False)

    target = h.letters
    for rho in enumerate_relabelings(g.alphabet):
        image = rho.apply(g.representative).letters
        doubled = image + image
        for shift in range(len(image)):
            if doubled[shift : shift + len(image)] == target:
                return OrbitMatch(True, shift, rho)
    return OrbitMatch(False)


def is_inner(alpha: Union[Factor, AutoWord]) -> Optional[ReducedWord]:
    """Some g with alpha(x) = g x g^-1 for every generator x, or None."""
    alphabet = alpha.alphabet
    k = alphabet.rank
    generators = [ReducedWord.trusted((i,), alphabet) for i in range(1, k + 1)]
    images = [alpha.apply(x) for x in generators]
    if k == 1:
        # F_1 is abelian
        return ReducedWord.empty(alphabet) if images[0] == generators[0] else None

    conjugator, core = cyclic_reduce(images[0])
    if core.letters != (1,) or len(images[0]) != 2 * len(conjugator) + 1:
        return None
    twisted = concat(concat(invert(conjugator), images[1]), conjugator).letters
    if not twisted:
        return None
    lead = twisted[0] if twisted[0] in (1, -1) else None
    power = 0
    if lead is not None:
        while power < len(twisted) and twisted[power] == lead:
            power += 1
        power = power if lead == 1 else -power
    shift = ReducedWord.trusted((1,) * power if power > 0 else (-1,) * -power, alphabet)
    candidate = concat(conjugator, shift)
    for x, image in zip(generators, images):
        if concat(concat(candidate, x), invert(candidate)) != image:
            return None
    return candidate


def subgroup_image(
    alpha: Union[Factor, AutoWord], g: StallingsGraph
) -> StallingsGraph:
    images = [alpha.apply(w) for w in g.basis_words()]
    return from_generators(images, g.alphabet)


class Epsilon0Row(NamedTuple):
    """Length-change statistics for proper cuts of one size.

    ``increase``, ``decrease`` count ordered Whitehead-graph edge slots that
    raise or lower the length; ``drift`` is the normalized length change
    under uniform pair frequencies and ``spread`` the worst-case sensitivity
    to pair deviations summing to zero.
    """

    cut_size: int
    increase: int
    decrease: int
    drift: Fraction
    spread: int
    bound: Fraction


def epsilon0_derivation(k: int) -> List[Epsilon0Row]:
    """Per cut size s (2 <= s <= 2k-2), the largest pair deviation that
    still forces a strict cyclic length increase.

    Writing the length change of a cyclic word of length l as
    ``l * sum(P_xy * c_xy)`` with ``c_xy`` in {1, 0, -1}, uniform pair
    frequencies give ``drift = (increase - decrease) / N`` with
    ``N = 2k(2k-1)``, and deviations bounded by eps and summing to zero lower
    this by at most ``eps * spread``.
    """
    if k < 2:
        raise PreconditionError(f"epsilon0 needs k >= 2, got {k}")
    n_pairs = 2 * k * (2 * k - 1)
    rows = []
    for s in range(2, 2 * k - 1):
        increase = (s - 1) * (2 * k - s) + (2 * k - s - 1) * s
        decrease = 2 * k - 2
        zero = n_pairs - increase - decrease
        coefficients = sorted([1] * increase + [0] * zero + [-1] * decrease)
        half = n_pairs // 2
        spread = sum(coefficients[half:]) - sum(coefficients[:half])
        drift = Fraction(increase - decrease, n_pairs)
        rows.append(Epsilon0Row(s, increase, decrease, drift, spread, drift / spread))
    return rows


@lru_cache(maxsize=None)
def epsilon0(k: int) -> Fraction:
    """Every epsilon0(k)-equidistributed cyclic word is strictly Whitehead
    minimal, at every length; see ``epsilon0_derivation``."""
    return min(row.bound for row in epsilon0_derivation(k)) * EPSILON0_SAFETY


def _split_top_level(text: str) -> List[str]:
    parts, depth, current = [], 0, []
    for ch in text:
        if ch in "({":
            depth += 1
        elif ch in ")}":
            depth -= 1
            if depth < 0:
                raise WordFormatError(f"Unbalanced '{ch}' in '{text}'", ch)
        if ch == ";" and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    if depth:
        raise WordFormatError(f"Unbalanced brackets in '{text}'", text)
    parts.append("".join(current))
    return parts


def _single_letter(token: str, alphabet: Alphabet) -> Letter:
    letters = parse_letters(token, alphabet)
    if len(letters) != 1:
        raise WordFormatError(f"Expected a single letter, got '{token}'", token)
    return letters[0]


def parse_factor(text: str, alphabet: Alphabet) -> Factor:
    text = text.strip()
    if len(text) < 3 or text[1] != "(" or text[-1] != ")":
        raise WordFormatError(f"Invalid automorphism factor '{text}'", text)
    kind, body = text[0], text[2:-1]
    if kind == "W":
        multiplier, sep, cut = body.partition(";")
        cut = cut.strip()
        if not sep or not (cut.startswith("{") and cut.endswith("}")):
            raise WordFormatError(f"Invalid Whitehead factor '{text}'", text)
        letters = [
            _single_letter(t, alphabet) for t in cut[1:-1].split(",") if t.strip()
        ]
        return WhiteheadAuto(
            _single_letter(multiplier, alphabet), frozenset(letters), alphabet
        )
    if kind == "R":
        images = list(range(1, alphabet.rank + 1))
        for pair in body.split(","):
            source, arrow, target = pair.partition("->")
            if not arrow:
                raise WordFormatError(f"Invalid relabeling entry '{pair}'", pair)
            x = _single_letter(source, alphabet)
            if x < 0:
                raise WordFormatError(
                    f"Relabelings are given on generators, got '{source}'", source
                )
            images[x - 1] = _single_letter(target, alphabet)
        return Relabeling(tuple(images), alphabet)
    if kind == "I":
        return Inner(parse_word(body, alphabet))
    raise WordFormatError(f"Unknown automorphism kind '{kind}'", kind)


def parse_automorphism(text: str, alphabet: Alphabet) -> AutoWord:
    stripped = text.strip()
    if stripped in ("", "1"):
        return AutoWord((), alphabet)
    return AutoWord(
        tuple(parse_factor(part, alphabet) for part in _split_top_level(stripped)),
        alphabet,
    )


def format_automorphism(alpha: Union[Factor, AutoWord]) -> str:
    if not isinstance(alpha, AutoWord):
        return str(alpha)
    if not alpha.factors:
        return "1"
    return ";".join(str(f) for f in alpha.factors)

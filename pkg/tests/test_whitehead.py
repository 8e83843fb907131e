from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freemal.errors import AlphabetError, PreconditionError, WordFormatError
from freemal.freewords import Alphabet, cyclic_core, format_word, is_equidistributed
from freemal.sampling import SamplerSpec, random_automorphism, sample_word
from freemal.stallings import from_generators
from freemal.whitehead import (
    AutoWord,
    Inner,
    Relabeling,
    WhiteheadAuto,
    apply,
    enumerate_relabelings,
    enumerate_whitehead,
    epsilon0,
    epsilon0_derivation,
    format_automorphism,
    is_inner,
    is_strictly_whitehead_minimal,
    length_change,
    minimal_orbit_equal,
    minimize,
    parse_automorphism,
    proper_whitehead,
    subgroup_image,
)
from tests.strategies import F2, MINIMAL, MINIMAL_IMAGE, cyclic_words, word, words


def test_enumeration_for_rank_two():
    autos = enumerate_whitehead(2)
    assert len(autos) == 16
    assert sum(phi.is_identity for phi in autos) == 4
    assert sum(phi.is_inner for phi in autos) == 4
    assert len(proper_whitehead(2)) == 8


def test_enumeration_count_rank_three():
    assert len(enumerate_whitehead(3)) == 6 * 2**4


def test_relabelings():
    relabelings = enumerate_relabelings(F2)
    assert len(relabelings) == 8
    assert relabelings[0].is_identity()


def test_cut_set_must_hold_multiplier():
    with pytest.raises(PreconditionError):
        WhiteheadAuto(1, frozenset({2}), F2)
    with pytest.raises(PreconditionError):
        WhiteheadAuto(1, frozenset({1, -1}), F2)


def test_apply_whitehead():
    phi = parse_automorphism("W(a;{b})", F2)
    assert format_word(apply(phi, word("ab"))) == "aba"


def test_apply_composite_right_to_left():
    alpha = parse_automorphism("R(a->b,b->a);W(a;{b})", F2)
    assert format_word(apply(alpha, word("b"))) == "ab"


def test_inner_by_letter():
    assert format_word(apply(Inner(word("a")), word("b"))) == "abA"


@pytest.mark.parametrize(
    "text",
    ["W(a;{a,b,B})", "R(a->b,b->A)", "I(ab)", "W(a;{a,b,B});R(a->b,b->A);I(ab)"],
)
def test_format_round_trip(text):
    assert format_automorphism(parse_automorphism(text, F2)) == text


@pytest.mark.parametrize(
    "text", ["W(a;{b}", "Q(a)", "R(a->c,b->a)", "W(ab;{a})", "R(A->a,b->b)"]
)
def test_malformed_automorphisms(text):
    with pytest.raises(WordFormatError):
        parse_automorphism(text, F2)


def test_mixed_alphabets():
    with pytest.raises(AlphabetError):
        apply(parse_automorphism("W(a;{b})", F2), word("abc", 3))


@pytest.mark.parametrize("text, length", [("ab", 1), ("abab", 2), ("abAB", 4)])
def test_minimize(text, length):
    result = minimize(word(text))
    assert len(result.minimal) == length
    image = cyclic_core(result.path.apply(word(text)))
    assert image == result.minimal


def test_minimize_trivial_word():
    with pytest.raises(PreconditionError):
        minimize(word("1"))


def test_strict_minimality():
    assert is_strictly_whitehead_minimal(cyclic_core(word(MINIMAL))).ok
    report = is_strictly_whitehead_minimal(cyclic_core(word("abAB")))
    assert not report.ok
    assert report.change == 0


def test_minimal_orbit_equal():
    g, h = cyclic_core(word(MINIMAL)), cyclic_core(word(MINIMAL_IMAGE))
    match = minimal_orbit_equal(g, h)
    assert match.equal
    rotated = match.relabeling.apply(g.representative).letters
    shifted = rotated[match.rotation :] + rotated[: match.rotation]
    assert shifted == h.letters


def test_minimal_orbit_needs_minimal_words():
    with pytest.raises(PreconditionError):
        minimal_orbit_equal(cyclic_core(word("abAB")), cyclic_core(word(MINIMAL)))


def test_is_inner():
    assert format_word(is_inner(Inner(word("ab")))) == "ab"
    assert format_word(is_inner(parse_automorphism("W(a;{a,b,B})", F2))) == "A"
    assert is_inner(parse_automorphism("W(a;{b})", F2)) is None
    assert is_inner(parse_automorphism("R(a->b,b->a)", F2)) is None
    assert len(is_inner(AutoWord((), F2))) == 0


def test_epsilon0_rank_two():
    (row,) = epsilon0_derivation(2)
    assert row.cut_size == 2
    assert row.drift == Fraction(1, 6)
    assert row.spread == 6
    assert epsilon0(2) == Fraction(11, 400)


def test_epsilon0_shrinks_with_rank():
    assert epsilon0(3) < epsilon0(2)


@given(cyclic_words(max_size=40), st.sampled_from(proper_whitehead(2)))
def test_length_change_matches_application(g, phi):
    image = cyclic_core(phi.apply(g.representative))
    assert length_change(phi, g) == len(image) - len(g)


@given(words(), st.sampled_from(enumerate_whitehead(2)))
def test_whitehead_inverse(w, phi):
    assert phi.inverse().apply(phi.apply(w)) == w


@given(words(), st.sampled_from(enumerate_relabelings(F2)))
def test_relabeling_inverse(w, rho):
    assert rho.inverse().apply(rho.apply(w)) == w
    assert rho.compose(rho.inverse()).is_identity()


@given(words(), st.integers(min_value=0, max_value=10**6))
def test_automorphism_inverse(w, trial):
    alpha = random_automorphism(2, 5, 0, trial)
    assert alpha.inverse().apply(alpha.apply(w)) == w


@settings(max_examples=30)
@given(words(max_size=20).filter(len), st.integers(min_value=0, max_value=10**6))
def test_minimal_length_is_orbit_invariant(w, trial):
    alpha = random_automorphism(2, 5, 0, trial)
    assert len(minimize(w).minimal) <= len(cyclic_core(w))
    image = alpha.apply(w)
    assert len(minimize(image).minimal) == len(minimize(w).minimal)


@pytest.mark.slow
def test_minimal_length_invariant_under_random_automorphisms():
    spec = SamplerSpec("sphere", 2, 12, seed=3)
    violations = 0
    for trial in range(100):
        w = sample_word(spec, trial)
        alpha = random_automorphism(2, 5, 3, trial)
        violations += len(minimize(alpha.apply(w)).minimal) != len(minimize(w).minimal)
    assert violations == 0


@pytest.mark.slow
def test_equidistributed_words_are_strictly_minimal():
    threshold = epsilon0(2)
    checked = 0
    for n in (100, 1000, 10000):
        spec = SamplerSpec("sphere", 2, n, seed=5)
        for trial in range(3400):
            g = cyclic_core(sample_word(spec, trial))
            if len(g) < 2 or not is_equidistributed(g, threshold).ok:
                continue
            checked += 1
            assert is_strictly_whitehead_minimal(g).ok
    assert checked > 0


def test_relabeling_must_permute():
    with pytest.raises(PreconditionError):
        Relabeling((1, 1), Alphabet(2))


def test_subgroup_image():
    cyclic = from_generators([word("a")], F2)
    swap = parse_automorphism("R(a->b,b->a)", F2)
    assert subgroup_image(swap, cyclic) == from_generators([word("b")], F2)
    conjugate = subgroup_image(parse_automorphism("I(b)", F2), cyclic)
    assert conjugate == from_generators([word("baB")], F2)

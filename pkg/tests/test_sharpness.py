import pytest

from freemal.errors import PreconditionError, TowerInvariantError
from freemal.freewords import Alphabet, covers_all_subwords, format_word
from freemal.sharpness import (
    _gf2_annihilator,
    build_tower,
    coverage_bullet,
    double_cover,
    readable_from_base,
    splitting,
    verify_sharpness,
    witness_word,
    with_extra_loops,
)
from freemal.stallings import contains, from_generators, rank
from tests.strategies import word


def graph(*texts, k=2):
    return from_generators([word(t, k) for t in texts], Alphabet(k))


def test_annihilator():
    chi = _gf2_annihilator([0b011], 2)
    assert chi == 0b11
    assert bin(chi & 0b011).count("1") % 2 == 0
    with pytest.raises(TowerInvariantError):
        _gf2_annihilator([0b01, 0b10], 2)


def test_double_cover_of_a_loop():
    assert double_cover(graph("a"), 1) == graph("aa")
    with pytest.raises(PreconditionError):
        double_cover(graph("a"), 0)


def test_extra_loops():
    g = with_extra_loops(graph("a"), 3)
    assert g.alphabet == Alphabet(3)
    assert rank(g) == 2
    assert contains(g, word("c", 3))
    with pytest.raises(PreconditionError):
        with_extra_loops(g, 2)


def test_readable_from_base():
    assert readable_from_base(graph("a", "b"), 4).ok
    report = readable_from_base(graph("a"), 1)
    assert not report.ok
    assert format_word(report.missing) == "b"


def test_rank_two_tower():
    tower = build_tower(2, 3)
    assert [level.i for level in tower] == [1, 2, 3]
    for level in tower:
        assert rank(level.A) == level.i
        assert rank(level.C) == 2 * level.i - 1
        assert level.index() == 2
        assert coverage_bullet(level).ok
    for lower, upper in zip(tower, tower[1:]):
        assert all(contains(upper.C, c) for c in lower.C_generators)
    for below, level, above in zip(tower, tower[1:], tower[2:]):
        assert above.A == from_generators(
            below.A_generators + level.C_generators, Alphabet(2)
        )


def test_first_level():
    (level,) = build_tower(2, 1)
    assert [format_word(w) for w in level.A_generators] == ["b"]
    assert [format_word(w) for w in level.C_generators] == ["bb"]


def test_tower_needs_rank_two():
    with pytest.raises(PreconditionError):
        build_tower(1, 2)


@pytest.mark.parametrize("i", [1, 2])
def test_witness_word(i):
    witness = witness_word(2, i)
    assert covers_all_subwords(witness.cyclic, 2 * i).ok
    assert contains(splitting(2, i).right, witness.word)


def test_splitting_embeds_edge_group():
    descriptor = splitting(2, 2)
    assert rank(descriptor.edge) == 3
    for c in descriptor.embeddings:
        assert contains(descriptor.left.A, c)
        assert contains(descriptor.right, c)


@pytest.mark.parametrize("i", [1, 2, 3])
def test_bound_is_attained(i):
    report = verify_sharpness(2, i)
    assert report.L == 2 * i
    assert report.rank_C == 2 * i - 1
    assert report.bound == report.rank_C
    assert report.equality
    assert report.bound_holds
    assert report.rank_formula_holds
    document = report.to_document()
    assert document["witness_length"] == len(report.witness.word)
    assert document["level"]["index"] == 2


def test_higher_rank_keeps_lower_bound():
    report = verify_sharpness(3, 1)
    assert report.rank_C == 3
    assert report.bound == 1
    assert not report.equality
    assert report.bound_holds


@pytest.mark.slow
@pytest.mark.parametrize("i", [4, 5])
def test_bound_is_attained_high_levels(i):
    report = verify_sharpness(2, i)
    assert report.equality
    assert covers_all_subwords(report.witness.cyclic, 2 * i).ok


@pytest.mark.slow
def test_rank_two_tower_to_level_five():
    tower = build_tower(2, 6)
    for level in tower[:5]:
        assert rank(level.A) == level.i
        assert rank(level.C) == 2 * level.i - 1
        assert coverage_bullet(level).ok
    for lower, upper in zip(tower[:5], tower[1:6]):
        assert all(contains(upper.C, c) for c in lower.C_generators)


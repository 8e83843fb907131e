from fractions import Fraction

import pytest
import yaml
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from freemal.certifier import (
    CHECKS,
    CertParams,
    bound_equidistribution_all,
    certify,
    check_aut_malnormal_contract,
    check_matching,
    check_prefixes,
    check_subgroup_shape,
    enumerate_cyclic_loops,
    falsify,
    scales_for,
)
from freemal.errors import CapabilityError, DecompositionError, PreconditionError
from freemal.freewords import Alphabet, format_word, is_equidistributed
from freemal.sampling import SamplerSpec, random_automorphism, random_subgroup
from freemal.stallings import central_decomposition, from_generators, rank
from freemal.whitehead import parse_automorphism
from tests.strategies import F2, nontrivial_words, word


def generators(*texts, k=2):
    return [word(t, k) for t in texts]


def test_params_round_trip():
    params = CertParams.from_dict({"lambda": "1/30", "beta": 0.2, "min_outer": 9})
    assert params.lambda_ == Fraction(1, 30)
    assert params.beta == Fraction(1, 5)
    assert params.epsilon_target is None
    assert CertParams.from_dict(params.to_dict()) == params


@pytest.mark.parametrize(
    "values", [{"lambda": 0}, {"beta": "-1/5"}, {"epsilon": 0}, {"min_outer": 0}]
)
def test_invalid_params(values):
    with pytest.raises(PreconditionError):
        CertParams.from_dict(values)


def test_scales():
    gens = [word("a" * 20), word("b" * 40)]
    assert scales_for(gens) == (1, 4, 12)
    assert scales_for(gens, CertParams(min_outer=5)).min_outer == 5
    with pytest.raises(PreconditionError):
        scales_for([word("1")])


def test_prefixes():
    assert check_prefixes(generators("ab", "ba"), 1).passed
    failed = check_prefixes(generators("ab", "aB"), 1)
    assert not failed.passed
    assert failed.witness == "a"
    assert not check_prefixes(generators("ab"), 3).passed


def test_matching_rejects_powers():
    result = check_matching(generators("aaaaaaaa"), 3)
    assert not result.passed
    assert result.witness == "aaa"


def test_subgroup_shape():
    gens = generators("aaaaa", "bbbbb")
    graph = from_generators(gens, F2)
    assert check_subgroup_shape(graph, 2, 1, 5).passed
    short = check_subgroup_shape(graph, 2, 1, 6)
    assert not short.passed
    assert short.witness == "5"


def test_full_group_is_inconclusive():
    report = certify(generators("a", "b"))
    assert report.verdict == "inconclusive"
    assert report.checks["free-basis"].passed
    assert report.checks["malnormal"].passed
    assert not report.checks["subgroup-shape"].passed


def test_power_is_inconclusive():
    report = certify(generators("aa"))
    assert report.verdict == "inconclusive"
    assert not report.checks["malnormal"].passed


def test_certify_needs_nontrivial_generators():
    with pytest.raises(PreconditionError):
        certify(generators("ab", "1"))


def test_report_document():
    report = certify(generators("aabbaBBAAbAB", "AAbbABBaaBaB"))
    document = yaml.safe_load(report.to_yaml())
    assert document["verdict"] in ("certified", "inconclusive")
    assert [check["name"] for check in document["checks"]] == list(CHECKS)
    assert document["params"] == {
        "lambda": "1/20",
        "beta": "1/5",
        "epsilon": None,
        "min_outer": None,
    }
    assert document["scales"]["m_beta"] == 3


def test_large_rank_matching_is_refused():
    gens = [word(" ".join(f"x{i}" for i in range(1, 10)), 9)]
    with pytest.raises(CapabilityError):
        check_matching(gens, 2)


def test_contract_conjugation_elsewhere():
    graph = from_generators(generators("a"), F2)
    check = check_aut_malnormal_contract(graph, parse_automorphism("I(b)", F2))
    assert check.intersects
    assert not check.basepointed
    assert format_word(check.conjugator) == "b"
    assert not check.violation


def test_contract_inner_by_member():
    graph = from_generators(generators("a"), F2)
    check = check_aut_malnormal_contract(graph, parse_automorphism("I(a)", F2))
    assert check.basepointed
    assert not check.violation


def test_contract_violation():
    graph = from_generators(generators("a"), F2)
    assert falsify(graph, [parse_automorphism("R(a->a,b->B)", F2)]) == [
        "R(a->a,b->B)"
    ]


def test_contract_disjoint_image():
    graph = from_generators(generators("ab"), F2)
    check = check_aut_malnormal_contract(graph, parse_automorphism("R(a->a,b->B)", F2))
    assert not check.intersects
    assert not check.violation


def test_certified_reports_pass_every_check():
    spec = SamplerSpec("walk", 2, 400, p=2, seed=1)
    for trial in range(5):
        report = certify(random_subgroup(spec, trial).words)
        if report.certified:
            assert all(check.status == "pass" for check in report.checks.values())


@pytest.mark.slow
def test_certified_subgroups_survive_falsification():
    spec = SamplerSpec("walk", 2, 2000, p=2, seed=1111)
    alphabet = Alphabet(2)
    for trial in range(100):
        sample = random_subgroup(spec, trial)
        if not certify(sample.words).certified:
            continue
        graph = from_generators(sample.words, alphabet)
        automorphisms = (
            random_automorphism(2, 5, 1111, t, f"automorphism/{trial}")
            for t in range(1000)
        )
        assert falsify(graph, automorphisms) == []


def test_equidistribution_bound_for_powers():
    graph = from_generators(generators("aaaaa", "bbbbb"), F2)
    decomposition = central_decomposition(graph, 2)
    assert bound_equidistribution_all(graph, decomposition) == Fraction(11, 12)


def test_single_traversals():
    graph = from_generators(generators("aaaaa", "bbbbb"), F2)
    decomposition = central_decomposition(graph, 2)
    loops = enumerate_cyclic_loops(graph, decomposition, 1)
    assert {format_word(g) for g in loops} == {"aaaaa", "AAAAA", "bbbbb", "BBBBB"}


@settings(max_examples=40)
@given(st.lists(nontrivial_words(max_size=10), min_size=2, max_size=2))
def test_equidistribution_bound_covers_enumerated_loops(gens):
    graph = from_generators(gens, F2)
    assume(rank(graph) == 2)
    try:
        decomposition = central_decomposition(graph, 2)
    except DecompositionError:
        assume(False)
    bound = bound_equidistribution_all(graph, decomposition)
    for loop in enumerate_cyclic_loops(graph, decomposition, 3):
        if len(loop) >= 2:
            assert is_equidistributed(loop, bound).deviation <= bound

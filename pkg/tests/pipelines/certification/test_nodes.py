import pandas as pd

from freemal.certifier import CHECKS
from freemal.pipelines.certification.nodes import (
    certify_subgroups,
    falsify_certified,
    sample_subgroups,
)


def certify(subgroups):
    return certify_subgroups(
        subgroups, k=2, lambda_="1/20", beta="1/5", epsilon=None, min_outer=None
    )["certificates"]


def test_sample_subgroups():
    subgroups = sample_subgroups("walk", 2, 40, 3, 4, 0)["subgroups"]
    assert list(subgroups["trial"]) == [0, 1, 2, 3]
    assert all(g.count("; ") == 2 for g in subgroups["generators"])
    again = sample_subgroups("walk", 2, 40, 3, 4, 0)["subgroups"]
    assert subgroups.equals(again)


def test_certify_subgroups():
    subgroups = pd.DataFrame(
        {"trial": [0, 1, 2], "generators": ["a; b", "aa; b", "ab; 1"]}
    )
    certificates = certify(subgroups)
    assert list(certificates.columns) == ["trial", "verdict", *CHECKS]
    assert list(certificates["verdict"]) == ["inconclusive"] * 3
    assert certificates.loc[0, "malnormal"] == "pass"
    assert certificates.loc[1, "malnormal"] == "fail"


def test_falsify_only_certified():
    subgroups = pd.DataFrame({"trial": [0, 1], "generators": ["a; b", "ab; ba"]})
    certificates = pd.DataFrame(
        {"trial": [0, 1], "verdict": ["inconclusive", "certified"]}
    )
    falsification = falsify_certified(
        subgroups, certificates, k=2, automorphisms=3, factors=2, seed=0
    )["falsification"]
    assert list(falsification["trial"]) == [1]
    assert list(falsification["tested"]) == [3]


def test_falsify_nothing_certified():
    subgroups = pd.DataFrame({"trial": [0], "generators": ["a; b"]})
    certificates = pd.DataFrame({"trial": [0], "verdict": ["inconclusive"]})
    falsification = falsify_certified(
        subgroups, certificates, k=2, automorphisms=3, factors=2, seed=0
    )["falsification"]
    assert falsification.empty

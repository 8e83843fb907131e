import logging
from typing import Optional

import pandas as pd

from freemal.certifier import CHECKS, CertParams, certify, falsify
from freemal.freewords import Alphabet, format_word, parse_word
from freemal.sampling import SamplerSpec, random_automorphism, random_subgroup
from freemal.stallings import from_generators

log = logging.getLogger(__name__)

_SEPARATOR = "; "


def sample_subgroups(model: str, k: int, n: int, p: int, count: int, seed: int):
    spec = SamplerSpec(model, k, n, p, seed)
    rows = []
    for trial in range(count):
        words = random_subgroup(spec, trial).words
        rows.append(
            {
                "trial": trial,
                "generators": _SEPARATOR.join(format_word(w) for w in words),
                "min_length": min(len(w) for w in words),
            }
        )
    log.info(f"Sampled {count} subgroups with {p} generators (n={n}, k={k})")
    subgroups = pd.DataFrame(rows, columns=["trial", "generators", "min_length"])
    return {"subgroups": subgroups}


def _generators(row, k: int):
    alphabet = Alphabet(k)
    return [parse_word(text, alphabet) for text in row.generators.split(_SEPARATOR)]


def certify_subgroups(
    subgroups: pd.DataFrame,
    k: int,
    lambda_: str,
    beta: str,
    epsilon: Optional[str],
    min_outer: Optional[int],
):
    params = CertParams.from_dict(
        {"lambda": lambda_, "beta": beta, "epsilon": epsilon, "min_outer": min_outer}
    )
    rows = []
    for row in subgroups.itertuples(index=False):
        gens = _generators(row, k)
        if any(not len(g) for g in gens):
            # a generator reduced to the identity; nothing to certify
            rows.append({"trial": row.trial, "verdict": "inconclusive"})
            continue
        report = certify(gens, params)
        rows.append(
            {
                "trial": row.trial,
                "verdict": report.verdict,
                **{name: check.status for name, check in report.checks.items()},
            }
        )
    certificates = pd.DataFrame(rows, columns=["trial", "verdict", *CHECKS])
    certified = int((certificates["verdict"] == "certified").sum())
    log.info(f"Certified {certified} of {len(certificates)} subgroups")
    return {"certificates": certificates}


def falsify_certified(
    subgroups: pd.DataFrame,
    certificates: pd.DataFrame,
    k: int,
    automorphisms: int,
    factors: int,
    seed: int,
):
    """Test every certified subgroup against random automorphisms; any
    violation means the certificate is unsound."""
    certified = set(certificates.loc[certificates["verdict"] == "certified", "trial"])
    rows = []
    for row in subgroups.itertuples(index=False):
        if row.trial not in certified:
            continue
        graph = from_generators(_generators(row, k), Alphabet(k))
        candidates = (
            random_automorphism(k, factors, seed, t, f"automorphism/{row.trial}")
            for t in range(automorphisms)
        )
        violations = falsify(graph, candidates)
        rows.append(
            {
                "trial": row.trial,
                "tested": automorphisms,
                "violations": len(violations),
                "first_violation": violations[0] if violations else "",
            }
        )
    falsification = pd.DataFrame(
        rows, columns=["trial", "tested", "violations", "first_violation"]
    )
    total = int(falsification["violations"].sum()) if len(falsification) else 0
    if total:
        log.error(f"{total} contract violations among certified subgroups")
    else:
        log.info(f"No violations among {len(falsification)} certified subgroups")
    return {"falsification": falsification}

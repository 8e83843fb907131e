"""Aut-malnormality certificates for finitely generated subgroups.

``certify`` runs a fixed sequence of checks on the generators and on the
Stallings graph; the subgroup is certified only when every check passes.
Failures are reported in the certificate, never raised.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import (
    Dict,
    Iterable,
    Iterator,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
)

import networkx as nx
import yaml

from freemal.errors import (
    CapabilityError,
    FreeGroupError,
    PreconditionError,
)
from freemal.freewords import (
    CyclicWord,
    ReducedWord,
    all_subwords_distinct,
    cyclic_core,
    format_word,
    frequency_profile,
    free_reduce,
    invert,
    prefix,
    profile_deviations,
    relabel_match_exists,
    to_fraction,
)
from freemal.stallings import (
    CentralDecomposition,
    StallingsGraph,
    central_decomposition,
    contains,
    fiber_product,
    from_generators,
    is_malnormal,
    rank,
)
from freemal.whitehead import (
    AutoWord,
    enumerate_relabelings,
    epsilon0,
    format_automorphism,
    is_inner,
    is_strictly_whitehead_minimal,
    subgroup_image,
)

log = logging.getLogger(__name__)

MAX_RELABELING_RANK = 8

CHECKS = (
    "free-basis",
    "malnormal",
    "prefixes",
    "subgroup-shape",
    "matching",
    "equidistribution",
    "whitehead-minimal-generators",
    "constraint-chain",
)

PASS, FAIL, SKIPPED = "pass", "fail", "skipped"


@dataclass(frozen=True)
class CertParams:
    lambda_: Fraction = Fraction(1, 20)
    beta: Fraction = Fraction(1, 5)
    epsilon_target: Optional[Fraction] = None
    min_outer: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "lambda_", to_fraction(self.lambda_))
        object.__setattr__(self, "beta", to_fraction(self.beta))
        if self.epsilon_target is not None:
            object.__setattr__(self, "epsilon_target", to_fraction(self.epsilon_target))
            if self.epsilon_target <= 0:
                raise PreconditionError("epsilon must be positive")
        if self.lambda_ <= 0 or self.beta <= 0:
            raise PreconditionError(
                f"lambda and beta must be positive, got {self.lambda_}, {self.beta}"
            )
        if self.min_outer is not None and self.min_outer < 1:
            raise PreconditionError(f"min_outer must be >= 1, got {self.min_outer}")

    @classmethod
    def from_dict(cls, values: Mapping) -> "CertParams":
        """Build from a configuration mapping using the CLI flag names."""
        epsilon = values.get("epsilon")
        min_outer = values.get("min_outer")
        return cls(
            lambda_=values.get("lambda", cls.lambda_),
            beta=values.get("beta", cls.beta),
            epsilon_target=None if epsilon is None else epsilon,
            min_outer=None if min_outer is None else int(min_outer),
        )

    def to_dict(self) -> Dict[str, Optional[str]]:
        return {
            "lambda": str(self.lambda_),
            "beta": str(self.beta),
            "epsilon": (
                None if self.epsilon_target is None else str(self.epsilon_target)
            ),
            "min_outer": self.min_outer,
        }


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    witness: Optional[str] = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "witness": self.witness,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class CertificateReport:
    checks: Dict[str, CheckResult]
    params: CertParams
    verdict: str
    scales: Dict[str, object] = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.verdict == "certified"

    def to_document(self) -> dict:
        return {
            "verdict": self.verdict,
            "params": self.params.to_dict(),
            "scales": {
                key: str(value) if isinstance(value, Fraction) else value
                for key, value in self.scales.items()
            },
            "checks": [
                self.checks[name].to_dict() for name in CHECKS if name in self.checks
            ],
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_document(), sort_keys=False)


def _both_orientations(gens: Sequence[ReducedWord]) -> List[ReducedWord]:
    return [w for g in gens for w in (g, invert(g))]


def check_prefixes(gens: Sequence[ReducedWord], m: int) -> CheckResult:
    if m < 1:
        raise PreconditionError(f"Prefix length must be at least 1, got {m}")
    seen: Dict[ReducedWord, ReducedWord] = {}
    for w in _both_orientations(gens):
        if len(w) < m:
            return CheckResult(
                "prefixes", FAIL, format_word(w), f"shorter than the prefix length {m}"
            )
        head = prefix(w, m)
        if head in seen:
            return CheckResult(
                "prefixes",
                FAIL,
                format_word(head),
                f"shared by {format_word(seen[head])} and {format_word(w)}",
            )
        seen[head] = w
    return CheckResult("prefixes", PASS, detail=f"{len(seen)} distinct {m}-prefixes")


def check_subgroup_shape(
    graph: StallingsGraph, p: int, m: int, min_outer: int = 1
) -> CheckResult:
    try:
        decomposition = central_decomposition(graph, p)
    except FreeGroupError as e:
        return CheckResult("subgroup-shape", FAIL, detail=str(e))
    if decomposition.diameter > 2 * m:
        return CheckResult(
            "subgroup-shape",
            FAIL,
            str(decomposition.diameter),
            f"central tree diameter exceeds {2 * m}",
        )
    shortest = min(decomposition.loop_lengths, default=0)
    if shortest < min_outer:
        return CheckResult(
            "subgroup-shape",
            FAIL,
            str(shortest),
            f"outer loop shorter than {min_outer}",
        )
    return CheckResult(
        "subgroup-shape",
        PASS,
        detail=f"diameter {decomposition.diameter}, "
        f"loop lengths {decomposition.loop_lengths}",
    )


def check_matching(gens: Sequence[ReducedWord], m: int) -> CheckResult:
    distinct = all_subwords_distinct(gens, m)
    if not distinct.ok:
        first, second = distinct.witness
        return CheckResult(
            "matching",
            FAIL,
            format_word(distinct.window),
            f"window repeated at {tuple(first)} and {tuple(second)}",
        )
    alphabet = gens[0].alphabet
    if alphabet.rank > MAX_RELABELING_RANK:
        raise CapabilityError(
            f"Exhaustive relabeling enumeration is limited to k <= "
            f"{MAX_RELABELING_RANK}, got k={alphabet.rank}"
        )
    relabelings = enumerate_relabelings(alphabet)
    for rho in relabelings:
        if rho.is_identity():
            continue
        match = relabel_match_exists(gens, m, rho, include_inverses=True)
        if match.found:
            return CheckResult(
                "matching",
                FAIL,
                format_word(match.u),
                f"{rho} maps it to {format_word(match.image)}",
            )
    return CheckResult(
        "matching", PASS, detail=f"{len(relabelings) - 1} relabelings excluded"
    )


def bound_equidistribution_all(
    graph: StallingsGraph, decomposition: CentralDecomposition
) -> Fraction:
    """Deviation bound valid for every nontrivial cyclic word of the subgroup.

    A cyclically reduced loop alternates full outer loop traversals (length
    at least m) with geodesics in the central tree (length at most D, the
    diameter of the part of the tree between loop endpoints). Tree letters
    and junction pairs are charged the worst possible deviation.
    """
    k = graph.alphabet.rank
    loops = decomposition.outer_loops
    if not loops:
        raise PreconditionError("The trivial subgroup has no cyclic words")
    D = decomposition.core_diameter

    if len(loops) == 1 and D == 0:
        # every cyclic word is a power of the single loop
        profile = frequency_profile(CyclicWord(loops[0].word(graph.alphabet)))
        d1, _, d2, _ = profile_deviations(profile, k)
        return max(d1, d2)

    worst_single = Fraction(1) - Fraction(1, 2 * k)
    worst_pair = Fraction(1) - Fraction(1, 2 * k * (2 * k - 1))
    single_dev, pair_dev = Fraction(0), Fraction(0)
    for loop in loops:
        profile = frequency_profile(loop.word(graph.alphabet))
        d1, _, d2, _ = profile_deviations(profile, k)
        single_dev = max(single_dev, d1)
        if len(loop) >= 2:
            pair_dev = max(pair_dev, d2)
    m = min(decomposition.loop_lengths)
    single_bound = single_dev + (worst_single - single_dev) * Fraction(D, m + D)
    pair_bound = pair_dev + (worst_pair - pair_dev) * Fraction(D + 1, m + D)
    return max(single_bound, pair_bound)


def _tree_paths(decomposition: CentralDecomposition) -> nx.Graph:
    tree = nx.Graph()
    tree.add_nodes_from(decomposition.tree_vertices)
    for s, t, label in decomposition.tree_edges:
        tree.add_edge(s, t, edge=(s, t, label))
    return tree


def _tree_letters(tree: nx.Graph, u: int, v: int) -> List[int]:
    path = nx.shortest_path(tree, u, v)
    letters = []
    for x, y in zip(path, path[1:]):
        s, _, label = tree.edges[x, y]["edge"]
        letters.append(label if x == s else -label)
    return letters


def enumerate_cyclic_loops(
    graph: StallingsGraph,
    decomposition: CentralDecomposition,
    max_traversals: int,
) -> Iterator[CyclicWord]:
    """Distinct cyclic words read by closing up at most ``max_traversals``
    outer loop traversals through the central tree."""
    tree = _tree_paths(decomposition)
    traversals = []
    for loop in decomposition.outer_loops:
        traversals.append((loop.start, loop.end, list(loop.letters)))
        traversals.append((loop.end, loop.start, [-x for x in reversed(loop.letters)]))
    seen = set()
    for count in range(1, max_traversals + 1):
        for sequence in itertools.product(traversals, repeat=count):
            letters = []
            for i, (_, end, arc) in enumerate(sequence):
                following = sequence[(i + 1) % count][0]
                letters.extend(arc)
                letters.extend(_tree_letters(tree, end, following))
            word = free_reduce(letters, graph.alphabet)
            if not len(word):
                continue
            core = cyclic_core(word)
            if core not in seen:
                seen.add(core)
                yield core


class Scales(NamedTuple):
    m_lambda: int
    m_beta: int
    min_outer: int


def scales_for(gens: Sequence[ReducedWord], params: CertParams = None) -> Scales:
    """Prefix and window lengths ceil(lambda*min|w|), ceil(beta*min|w|) and
    the outer loop floor (3*m_beta unless fixed by the parameters)."""
    params = params or CertParams()
    if not gens or any(not len(g) for g in gens):
        raise PreconditionError("Scales need nontrivial generators")
    shortest = min(len(g) for g in gens)
    m_lambda = math.ceil(params.lambda_ * shortest)
    m_beta = math.ceil(params.beta * shortest)
    min_outer = params.min_outer if params.min_outer is not None else 3 * m_beta
    return Scales(m_lambda, m_beta, min_outer)


def _run(name: str, check, *args) -> CheckResult:
    try:
        return check(*args)
    except CapabilityError as e:
        return CheckResult(name, SKIPPED, detail=str(e))
    except FreeGroupError as e:
        return CheckResult(name, FAIL, detail=str(e))


def certify(
    gens: Sequence[ReducedWord], params: CertParams = None
) -> CertificateReport:
    params = params or CertParams()
    if not gens or any(not len(g) for g in gens):
        raise PreconditionError("Certification needs nontrivial generators")
    alphabet = gens[0].alphabet
    if any(g.alphabet != alphabet for g in gens):
        raise PreconditionError("Generators are over different alphabets")

    p = len(gens)
    shortest = min(len(g) for g in gens)
    m_lambda, m_beta, min_outer = scales_for(gens, params)
    graph = from_generators(gens, alphabet)
    scales = {"m_lambda": m_lambda, "m_beta": m_beta, "min_outer": min_outer}

    def free_basis():
        r = rank(graph)
        if r != p:
            return CheckResult(
                "free-basis", FAIL, str(r), f"rank {r} != {p} generators"
            )
        return CheckResult("free-basis", PASS, detail=f"rank {r}")

    def malnormal():
        report = is_malnormal(graph)
        if report.ok:
            return CheckResult("malnormal", PASS)
        return CheckResult(
            "malnormal",
            FAIL,
            str(report.witness.rank),
            "non-basepointed fiber product component of positive rank",
        )

    def equidistribution():
        decomposition = central_decomposition(graph, p)
        target = epsilon0(alphabet.rank)
        if params.epsilon_target is not None:
            target = min(target, params.epsilon_target)
        epsilon_h = bound_equidistribution_all(graph, decomposition)
        scales["epsilon_h"] = epsilon_h
        scales["epsilon_target"] = target
        status = PASS if epsilon_h <= target else FAIL
        return CheckResult(
            "equidistribution",
            status,
            None if status == PASS else f"{float(epsilon_h):.6g}",
            f"epsilon_H={float(epsilon_h):.6g}, target={float(target):.6g}",
        )

    def whitehead_minimal():
        for g in gens:
            report = is_strictly_whitehead_minimal(cyclic_core(g))
            if not report.ok:
                return CheckResult(
                    "whitehead-minimal-generators",
                    FAIL,
                    format_word(g),
                    f"{report.witness} changes its cyclic length by {report.change}",
                )
        return CheckResult("whitehead-minimal-generators", PASS)

    def constraint_chain():
        if not 3 * params.lambda_ < params.beta:
            return CheckResult(
                "constraint-chain", FAIL, detail="3*lambda < beta does not hold"
            )
        if not params.beta * shortest <= Fraction(min_outer, 3):
            return CheckResult(
                "constraint-chain",
                FAIL,
                detail=f"beta*min|w| = {params.beta * shortest} exceeds min_outer/3",
            )
        return CheckResult("constraint-chain", PASS)

    steps = {
        "free-basis": (free_basis,),
        "malnormal": (malnormal,),
        "prefixes": (check_prefixes, gens, m_lambda),
        "subgroup-shape": (check_subgroup_shape, graph, p, m_lambda, min_outer),
        "matching": (check_matching, gens, m_beta),
        "equidistribution": (equidistribution,),
        "whitehead-minimal-generators": (whitehead_minimal,),
        "constraint-chain": (constraint_chain,),
    }
    checks = {name: _run(name, *steps[name]) for name in CHECKS}
    verdict = "certified" if all(c.passed for c in checks.values()) else "inconclusive"
    log.info(
        f"Certificate for {p} generators (min length {shortest}): {verdict}; "
        + ", ".join(f"{name}={c.status}" for name, c in checks.items())
    )
    return CertificateReport(checks, params, verdict, scales)


class ContractCheck(NamedTuple):
    intersects: bool
    basepointed: bool
    conjugator: Optional[ReducedWord]
    violation: bool


def check_aut_malnormal_contract(
    graph: StallingsGraph, alpha: AutoWord
) -> ContractCheck:
    """Test one automorphism against Aut-malnormality of the subgroup.

    If alpha(H) meets H nontrivially, alpha must be conjugation by an element
    of H. If alpha(H) only meets a conjugate of H, alpha must be inner.
    """
    image = subgroup_image(alpha, graph)
    components = fiber_product(image, graph)
    basepointed = any(c.basepointed and c.rank >= 1 for c in components)
    elsewhere = any(not c.basepointed and c.rank >= 1 for c in components)
    if not (basepointed or elsewhere):
        return ContractCheck(False, False, None, False)
    conjugator = is_inner(alpha)
    if conjugator is None:
        violation = True
    elif basepointed:
        violation = not contains(graph, conjugator)
    else:
        violation = False
    return ContractCheck(True, basepointed, conjugator, violation)


def falsify(graph: StallingsGraph, automorphisms: Iterable[AutoWord]) -> List[str]:
    """Automorphisms (as text) violating the Aut-malnormality contract."""
    violations = []
    for alpha in automorphisms:
        if check_aut_malnormal_contract(graph, alpha).violation:
            violations.append(format_automorphism(alpha))
    if violations:
        log.warning(f"{len(violations)} automorphisms violate the contract")
    return violations

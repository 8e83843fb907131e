"""Monte-Carlo estimation of event probabilities over a grid of lengths n.

Every event is a predicate that calls one library operation on a sampled
word or a sampled subgroup. Trial t at length n draws from the sub-seed
(seed, "<model>/n=<n>", t, ...), so estimates do not depend on how the
trials are spread over worker processes.
"""
import logging
import math
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import partial
from typing import (
    Callable,
    Dict,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    TextIO,
)

import numpy as np
import pandas as pd

from freemal.certifier import (
    MAX_RELABELING_RANK,
    CertParams,
    certify,
    check_matching,
    check_prefixes,
    scales_for,
)
from freemal.errors import (
    CapabilityError,
    FreeGroupError,
    PreconditionError,
    UnknownEventError,
)
from freemal.freewords import (
    ReducedWord,
    all_subwords_distinct,
    covers_all_subwords,
    cyclic_core,
    is_equidistributed,
    to_fraction,
)
from freemal.sampling import (
    RandomSubgroup,
    SamplerSpec,
    random_subgroup,
    sample_word,
)
from freemal.stallings import is_malnormal, rank
from freemal.whitehead import is_strictly_whitehead_minimal

log = logging.getLogger(__name__)

_MAX_WINDOWS_WORKERS = 61

CSV_COLUMNS = ["n", "trials", "successes", "p_hat", "stderr", "wall_ms"]


def default_workers() -> int:
    workers = (os.cpu_count() or 2) // 2 or 1
    if sys.platform == "win32":
        workers = min(_MAX_WINDOWS_WORKERS, workers)
    return workers


@dataclass(frozen=True)
class ExperimentSpec:
    event: str
    sampler: SamplerSpec
    n_grid: Sequence[int]
    trials: int
    params: CertParams = field(default_factory=CertParams)
    seed: int = 0
    epsilon: Fraction = Fraction(1, 20)
    L: int = 3

    def __post_init__(self):
        name, argument = parse_event(self.event)
        object.__setattr__(self, "event", name)
        if argument is not None:
            attribute = "epsilon" if name == "equidistributed" else "L"
            object.__setattr__(self, attribute, argument)
        object.__setattr__(self, "epsilon", to_fraction(self.epsilon))
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if self.sampler.seed != self.seed:
            object.__setattr__(self, "sampler", replace(self.sampler, seed=self.seed))

        event = resolve_event(name)
        if self.trials < 1:
            raise PreconditionError(f"Need at least one trial, got {self.trials}")
        if not self.n_grid:
            raise PreconditionError("The n grid is empty")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise PreconditionError(f"The n grid {self.n_grid} is not increasing")
        if event.subject == "subgroup" and self.sampler.k < 2:
            raise PreconditionError(f"Event '{name}' needs k >= 2")
        if event.relabels and self.sampler.k > MAX_RELABELING_RANK:
            raise CapabilityError(
                f"Event '{name}' enumerates relabelings, limited to k <= "
                f"{MAX_RELABELING_RANK}"
            )
        if self.epsilon <= 0 or self.L < 1:
            raise PreconditionError(
                f"Need epsilon > 0 and L >= 1, got {self.epsilon} and {self.L}"
            )

    @classmethod
    def from_dict(cls, values: Mapping) -> "ExperimentSpec":
        """Build from a mapping keyed by the ``stats`` flag names."""
        n_grid = values["n"]
        if isinstance(n_grid, str):
            n_grid = [int(n) for n in n_grid.split(",") if n.strip()]
        sampler = SamplerSpec(
            model=values.get("model", "walk"),
            k=int(values.get("k", 2)),
            n=int(n_grid[0]) if len(n_grid) else 0,
            p=int(values.get("p", 1)),
            seed=int(values.get("seed", 0)),
        )
        return cls(
            event=values["event"],
            sampler=sampler,
            n_grid=n_grid,
            trials=int(values.get("trials", 1000)),
            # "epsilon" is the equidistribution threshold of the event here
            params=CertParams.from_dict(
                {key: value for key, value in values.items() if key != "epsilon"}
            ),
            seed=int(values.get("seed", 0)),
            epsilon=values.get("epsilon", cls.epsilon),
            L=int(values.get("L", cls.L)),
        )

    def sampler_at(self, n: int) -> SamplerSpec:
        return self.sampler.with_n(n)

    def to_dict(self) -> dict:
        params = self.params.to_dict()
        return {
            "event": self.event,
            "model": self.sampler.model,
            "k": self.sampler.k,
            "p": self.sampler.p,
            "n": list(self.n_grid),
            "trials": self.trials,
            "seed": self.seed,
            "epsilon": str(self.epsilon),
            "L": self.L,
            "lambda": params["lambda"],
            "beta": params["beta"],
            "min_outer": params["min_outer"],
        }


def _prefixes(sample: RandomSubgroup, spec: ExperimentSpec) -> bool:
    m_lambda = scales_for(sample.words, spec.params).m_lambda
    return check_prefixes(sample.words, m_lambda).passed


def _distinct_subwords(sample: RandomSubgroup, spec: ExperimentSpec) -> bool:
    m_beta = scales_for(sample.words, spec.params).m_beta
    return all_subwords_distinct(sample.words, m_beta).ok


def _relabel_match_free(sample: RandomSubgroup, spec: ExperimentSpec) -> bool:
    m_beta = scales_for(sample.words, spec.params).m_beta
    return check_matching(sample.words, m_beta).passed


def _equidistributed(sample: ReducedWord, spec: ExperimentSpec) -> bool:
    return is_equidistributed(cyclic_core(sample), spec.epsilon).ok


def _whitehead_minimal(sample: ReducedWord, spec: ExperimentSpec) -> bool:
    return is_strictly_whitehead_minimal(cyclic_core(sample)).ok


def _coverage(sample: ReducedWord, spec: ExperimentSpec) -> bool:
    return covers_all_subwords(cyclic_core(sample), spec.L).ok


def _certified(sample: RandomSubgroup, spec: ExperimentSpec) -> bool:
    return certify(sample.words, spec.params).certified


def _free_basis(sample: RandomSubgroup, spec: ExperimentSpec) -> bool:
    return rank(sample.graph) == len(sample.words)


def _malnormal(sample: RandomSubgroup, spec: ExperimentSpec) -> bool:
    return is_malnormal(sample.graph).ok


class Event(NamedTuple):
    predicate: Callable[[object, ExperimentSpec], bool]
    subject: str
    relabels: bool = False


EVENTS: Dict[str, Event] = {
    "prefixes": Event(_prefixes, "subgroup"),
    "distinct-subwords": Event(_distinct_subwords, "subgroup"),
    "relabel-match-free": Event(_relabel_match_free, "subgroup", relabels=True),
    "equidistributed": Event(_equidistributed, "word"),
    "whitehead-minimal": Event(_whitehead_minimal, "word"),
    "coverage": Event(_coverage, "word"),
    "certified": Event(_certified, "subgroup", relabels=True),
    "free-basis": Event(_free_basis, "subgroup"),
    "malnormal": Event(_malnormal, "subgroup"),
}

_EVENT_CALL = re.compile(r"^\s*([a-z-]+)\s*(?:\(\s*([^()]*?)\s*\))?\s*$")


def parse_event(text: str):
    """Split ``coverage(3)`` or ``equidistributed(1/20)`` into name and argument."""
    match = _EVENT_CALL.match(text)
    if not match:
        raise UnknownEventError(f"Cannot read event '{text}'")
    name, argument = match.groups()
    if argument is None:
        return name, None
    if name == "equidistributed":
        return name, to_fraction(argument)
    if name == "coverage":
        try:
            return name, int(argument)
        except ValueError as e:
            raise UnknownEventError(
                f"Coverage length '{argument}' is not an integer"
            ) from e
    raise UnknownEventError(f"Event '{name}' takes no argument")


def resolve_event(name: str) -> Event:
    try:
        return EVENTS[name]
    except KeyError:
        raise UnknownEventError(
            f"Unknown event '{name}', expected one of {sorted(EVENTS)}"
        ) from None


def run_trial(spec: ExperimentSpec, n: int, trial_index: int) -> bool:
    event = resolve_event(spec.event)
    sampler = spec.sampler_at(n)
    stream = f"{sampler.model}/n={n}"
    if event.subject == "subgroup":
        sample = random_subgroup(sampler, trial_index, stream)
    else:
        sample = sample_word(sampler, trial_index, 0, stream)
    try:
        return bool(event.predicate(sample, spec))
    except FreeGroupError as e:
        # words too short for the event count as failures
        log.debug(f"Trial {trial_index} at n={n}: {e}")
        return False


@dataclass(frozen=True)
class EstimateRow:
    n: int
    trials: int
    successes: int
    p_hat: float
    standard_error: float
    wall_time: Optional[float] = None

    @classmethod
    def from_counts(
        cls, n: int, trials: int, successes: int, wall_time: float = None
    ) -> "EstimateRow":
        if not 0 <= successes <= trials:
            raise PreconditionError(f"{successes} successes out of {trials} trials")
        p_hat = successes / trials
        standard_error = math.sqrt(p_hat * (1 - p_hat) / trials)
        return cls(n, trials, successes, p_hat, standard_error, wall_time)


class DecayFit(NamedTuple):
    slope: float
    intercept: float
    censored: int


def fit_decay(rows: Sequence[EstimateRow]) -> DecayFit:
    """Least squares of log(max(1 - p_hat, 1/trials)) against n."""
    floors = [max(1 - row.p_hat, 1 / row.trials) for row in rows]
    censored = sum(1 - row.p_hat < 1 / row.trials for row in rows)
    if len({row.n for row in rows}) < 2:
        return DecayFit(math.nan, math.nan, censored)
    slope, intercept = np.polyfit(
        np.array([row.n for row in rows], dtype=float), np.log(floors), 1
    )
    return DecayFit(float(slope), float(intercept), censored)


@dataclass(frozen=True)
class ExperimentResult:
    spec: ExperimentSpec
    rows: List[EstimateRow]
    fit: DecayFit

    def frame(self) -> pd.DataFrame:
        return estimates_frame(self.rows)


def estimate(
    spec: ExperimentSpec,
    n: int,
    workers: int = 1,
    timing: bool = False,
    executor: ProcessPoolExecutor = None,
) -> EstimateRow:
    start = time.perf_counter()
    trial = partial(run_trial, spec, n)
    if executor is None:
        outcomes = [trial(t) for t in range(spec.trials)]
    else:
        chunksize = max(1, spec.trials // (4 * workers))
        outcomes = list(executor.map(trial, range(spec.trials), chunksize=chunksize))
    wall = (time.perf_counter() - start) * 1000 if timing else None
    row = EstimateRow.from_counts(n, spec.trials, sum(outcomes), wall)
    log.info(
        f"{spec.event} at n={n}: {row.successes}/{row.trials} "
        f"(p_hat={row.p_hat:.6g}, stderr={row.standard_error:.6g})"
    )
    return row


def run_experiment(
    spec: ExperimentSpec, workers: int = 1, timing: bool = False
) -> ExperimentResult:
    """Estimate the event probability at every n of the grid and fit the
    exponential decay of the failure probability."""
    if workers is None:
        workers = default_workers()
    if workers < 1:
        raise PreconditionError(f"Need at least one worker, got {workers}")
    log.info(
        f"Running '{spec.event}' on the {spec.sampler.model} model (k={spec.sampler.k}"
        f", p={spec.sampler.p}) with {spec.trials} trials on {workers} workers"
    )
    if workers == 1:
        rows = [estimate(spec, n, timing=timing) for n in spec.n_grid]
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            rows = [
                estimate(spec, n, workers, timing, executor) for n in spec.n_grid
            ]
    fit = fit_decay(rows)
    log.info(
        f"Decay fit for '{spec.event}': slope={fit.slope:.6g}, "
        f"intercept={fit.intercept:.6g}, censored={fit.censored}"
    )
    return ExperimentResult(spec, rows, fit)


def estimates_frame(rows: Sequence[EstimateRow]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "n": [row.n for row in rows],
            "trials": [row.trials for row in rows],
            "successes": [row.successes for row in rows],
            "p_hat": [row.p_hat for row in rows],
            "stderr": [row.standard_error for row in rows],
            "wall_ms": [row.wall_time for row in rows],
        },
        columns=CSV_COLUMNS,
    )


def format_fit(fit: DecayFit) -> str:
    return (
        f"#fit slope={fit.slope:.6g} intercept={fit.intercept:.6g} "
        f"censored={fit.censored}"
    )


def write_estimates_csv(result: ExperimentResult, stream: TextIO):
    result.frame().to_csv(
        stream, index=False, float_format="%.6g", na_rep="", lineterminator="\n"
    )
    stream.write(format_fit(result.fit) + "\n")


def n_grid_from_ticks(
    min_n: int, max_n: int, increment: int, type_n: str = "linear"
) -> List[int]:
    """Grid of lengths: ``linear`` counts from min to max, ``expN`` takes the
    powers N**i for i from min to max."""
    if type_n == "linear":
        ticks = list(range(min_n, max_n + 1, increment))
    elif type_n.startswith("exp"):
        base = int(type_n.split("exp")[1])
        ticks = [base**i for i in range(min_n, max_n + 1, increment)]
    else:
        raise PreconditionError(f"Unknown tick type '{type_n}'")
    return ticks

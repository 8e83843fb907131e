"""Random words and random subgroups of F_k.

Every sample is a pure function of ``(seed, stream, indices)``: the indices
and a 64-bit digest of the stream label become the spawn key of a numpy
``SeedSequence`` that seeds a counter-based Philox generator. Samples are
therefore identical whatever the order or the process they are drawn in.
"""
import hashlib
import logging
from dataclasses import dataclass, replace
from typing import List, NamedTuple

import numpy as np

from freemal.errors import PreconditionError
from freemal.freewords import Alphabet, ReducedWord, count_reduced_words, free_reduce
from freemal.stallings import StallingsGraph, from_generators
from freemal.whitehead import AutoWord, enumerate_relabelings, enumerate_whitehead

log = logging.getLogger(__name__)

MODELS = ("walk", "sphere", "ball")


def _stream_key(stream: str) -> int:
    digest = hashlib.blake2b(stream.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(seed: int, stream: str, *indices: int) -> np.random.SeedSequence:
    if seed < 0 or any(i < 0 for i in indices):
        raise PreconditionError("Seeds and trial indices must be non-negative")
    return np.random.SeedSequence(
        entropy=seed, spawn_key=(_stream_key(stream), *indices)
    )


def generator(seed: int, stream: str, *indices: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(derive_seed(seed, stream, *indices)))


def _letter(index: int) -> int:
    # index into the order a, A, b, B, ...
    return (index // 2 + 1) * (1 if index % 2 == 0 else -1)


@dataclass(frozen=True)
class SamplerSpec:
    model: str
    k: int
    n: int
    p: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise PreconditionError(
                f"Unknown model '{self.model}', expected one of {MODELS}"
            )
        if self.k < 1 or self.n < 0 or self.p < 1 or self.seed < 0:
            raise PreconditionError(
                f"Invalid sampler: k={self.k}, n={self.n}, p={self.p}, seed={self.seed}"
            )

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet(self.k)

    def with_n(self, n: int) -> "SamplerSpec":
        return replace(self, n=n)


def random_walk_word(k: int, n: int, rng: np.random.Generator) -> ReducedWord:
    steps = rng.integers(0, 2 * k, size=n)
    return free_reduce((_letter(int(i)) for i in steps), Alphabet(k))


def sphere_word(k: int, length: int, rng: np.random.Generator) -> ReducedWord:
    alphabet = Alphabet(k)
    if length == 0:
        return ReducedWord.empty(alphabet)
    order = alphabet.letters()
    letters = [_letter(int(rng.integers(0, 2 * k)))]
    for r in rng.integers(0, 2 * k - 1, size=length - 1):
        # skip the inverse of the previous letter
        forbidden = order.index(-letters[-1])
        letters.append(order[int(r) if r < forbidden else int(r) + 1])
    return ReducedWord.trusted(letters, alphabet)


def ball_length_weights(k: int, n: int) -> np.ndarray:
    """Probability of each length 0..n under the uniform law on the ball."""
    if n == 0:
        return np.ones(1)
    # log of gamma_a / gamma_n
    log_q = np.log(2 * k - 1)
    logs = (np.arange(n + 1, dtype=float) - n) * log_q
    logs[0] = -np.log(2 * k) - (n - 1) * log_q
    weights = np.exp(logs - logs.max())
    return weights / weights.sum()


def ball_word(k: int, n: int, rng: np.random.Generator) -> ReducedWord:
    length = int(rng.choice(n + 1, p=ball_length_weights(k, n)))
    return sphere_word(k, length, rng)


def walk(spec: SamplerSpec, trial_index: int, index: int = 0) -> ReducedWord:
    rng = generator(spec.seed, "walk", trial_index, index)
    return random_walk_word(spec.k, spec.n, rng)


def uniform_sphere(k: int, A: int, trial_index: int, seed: int = 0) -> ReducedWord:
    if A < 0:
        raise PreconditionError(f"Sphere radius must be non-negative, got {A}")
    return sphere_word(k, A, generator(seed, "sphere", trial_index))


def uniform_ball(k: int, n: int, trial_index: int, seed: int = 0) -> ReducedWord:
    if n < 0:
        raise PreconditionError(f"Ball radius must be non-negative, got {n}")
    return ball_word(k, n, generator(seed, "ball", trial_index))


_SAMPLERS = {"walk": random_walk_word, "sphere": sphere_word, "ball": ball_word}


def sample_word(
    spec: SamplerSpec, trial_index: int, index: int = 0, stream: str = None
) -> ReducedWord:
    rng = generator(spec.seed, stream or spec.model, trial_index, index)
    return _SAMPLERS[spec.model](spec.k, spec.n, rng)


class RandomSubgroup(NamedTuple):
    words: List[ReducedWord]
    graph: StallingsGraph


def random_subgroup(
    spec: SamplerSpec, trial_index: int = 0, stream: str = "subgroup"
) -> RandomSubgroup:
    """p independent samples, generator i drawn from sub-seed (trial_index, i)."""
    if spec.k < 2:
        raise PreconditionError(f"Subgroup experiments need k >= 2, got {spec.k}")
    words = [sample_word(spec, trial_index, i, stream) for i in range(spec.p)]
    return RandomSubgroup(words, from_generators(words, spec.alphabet))


def random_automorphism(
    k: int,
    factors: int,
    seed: int,
    trial_index: int,
    stream: str = "automorphism",
) -> AutoWord:
    """Product of 1..factors factors, each a uniformly chosen Whitehead
    automorphism or relabeling (coin flip between the two families)."""
    if factors < 1:
        raise PreconditionError(f"Need at least one factor, got {factors}")
    rng = generator(seed, stream, trial_index)
    whitehead = enumerate_whitehead(k)
    relabelings = enumerate_relabelings(Alphabet(k))
    chosen = []
    for _ in range(int(rng.integers(1, factors + 1))):
        family = whitehead if rng.integers(0, 2) == 0 else relabelings
        chosen.append(family[int(rng.integers(0, len(family)))])
    return AutoWord(tuple(chosen), Alphabet(k))


def ball_size(k: int, n: int) -> int:
    return sum(count_reduced_words(k, a) for a in range(n + 1))


def drift(spec: SamplerSpec, trials: int) -> float:
    """Mean of |w|/n over walk samples."""
    if spec.n == 0:
        return 0.0
    lengths = [len(walk(spec, t)) for t in range(trials)]
    ratio = float(np.mean(lengths)) / spec.n
    log.info(f"Drift estimate for k={spec.k}, n={spec.n}: {ratio:.4f}")
    return ratio

"""Towers of subgroups A_i, C_i of F_k giving sharp splittings A_i *_{C_i} A_{i+1}.

For k = 2 the tower starts from A_0 = <a>, A_1 = <b>, C_0 = 1. C_i is the
index-two subgroup of A_i containing C_{i-1}, read off a double cover of the
Stallings graph of A_i, and A_{i+1} = <A_{i-1}, C_i>. For k > 2 every graph
gets a loop for each extra generator at every vertex.
"""
import logging
from collections import deque
from dataclasses import dataclass
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

from freemal.errors import PreconditionError, TowerInvariantError
from freemal.freewords import (
    Alphabet,
    CyclicWord,
    Letter,
    ReducedWord,
    covers_all_subwords,
    enumerate_reduced_words,
    format_word,
    invert,
)
from freemal.stallings import (
    StallingsGraph,
    contains,
    from_generators,
    index_of,
    rank,
    read_path,
    rewrite_in_basis,
    to_document,
)

log = logging.getLogger(__name__)


def _gf2_annihilator(vectors: Sequence[int], dimension: int) -> int:
    """Nonzero chi in GF(2)^dimension with <chi, v> = 0 for all v (bitmasks),
    taken from the lowest free coordinate of the reduced row echelon form."""
    rows: Dict[int, int] = {}
    for v in vectors:
        for pivot, row in rows.items():
            if v >> pivot & 1:
                v ^= row
        if not v:
            continue
        pivot = v.bit_length() - 1
        for other in rows:
            if rows[other] >> pivot & 1:
                rows[other] ^= v
        rows[pivot] = v
    free = [bit for bit in range(dimension) if bit not in rows]
    if not free:
        raise TowerInvariantError("No index-two subgroup contains the given words")
    if len(free) > 1:
        log.debug(f"{len(free)} index-two subgroups qualify, taking the first")
    f = free[0]
    chi = 1 << f
    for pivot, row in rows.items():
        if row >> f & 1:
            chi |= 1 << pivot
    return chi


def double_cover(graph: StallingsGraph, parity: int) -> StallingsGraph:
    """Connected double cover in which basis edge j swaps the sheets iff bit
    j-1 of ``parity`` is set; its subgroup is the kernel of the parity."""
    if not parity:
        raise PreconditionError("A zero parity gives a disconnected cover")
    basis_edges = graph.basis_edges()
    edges = []
    for edge in graph.edges:
        s, t, label = edge
        j = basis_edges.get(edge)
        flip = parity >> (j - 1) & 1 if j else 0
        for sheet in (0, 1):
            edges.append((2 * s + sheet, 2 * t + (sheet ^ flip), label))
    vertices = [2 * v + sheet for v in graph.vertices for sheet in (0, 1)]
    cover = StallingsGraph(
        graph.alphabet, 2 * graph.base, vertices, edges, validate=False
    )
    return from_generators(cover.basis_words(), graph.alphabet)


def parity_vector(graph: StallingsGraph, w: ReducedWord) -> int:
    parity = 0
    for j in rewrite_in_basis(graph, w):
        parity ^= 1 << (abs(j) - 1)
    return parity


def index_two_subgroup(
    over: StallingsGraph, inside: Sequence[ReducedWord]
) -> StallingsGraph:
    """Index-two subgroup of ``over`` containing every word of ``inside``."""
    vectors = [parity_vector(over, w) for w in inside]
    return double_cover(over, _gf2_annihilator(vectors, rank(over)))


def with_extra_loops(graph: StallingsGraph, k: int) -> StallingsGraph:
    """The same graph over F_k with a loop for each new generator at every vertex."""
    current = graph.alphabet.rank
    if k < current:
        raise PreconditionError(f"Cannot lower the rank from {current} to {k}")
    if k == current:
        return graph
    loops = [
        (v, v, label) for v in graph.vertices for label in range(current + 1, k + 1)
    ]
    return StallingsGraph(
        Alphabet(k), graph.base, graph.vertices, list(graph.edges) + loops
    ).canonical()


def _rank_two_tower(
    i_max: int,
) -> Tuple[List[StallingsGraph], List[StallingsGraph]]:
    """Graphs A_0..A_{i_max+1} and C_0..C_{i_max} over F_2."""
    alphabet = Alphabet(2)
    a = ReducedWord.trusted((1,), alphabet)
    b = ReducedWord.trusted((2,), alphabet)
    A = [from_generators([a], alphabet), from_generators([b], alphabet)]
    C = [from_generators([], alphabet)]
    for i in range(1, i_max + 1):
        C.append(index_two_subgroup(A[i], C[i - 1].basis_words()))
        A.append(
            from_generators(A[i - 1].basis_words() + C[i].basis_words(), alphabet)
        )
        log.debug(
            f"Level {i}: A has {len(A[i].vertices)} vertices, "
            f"C has {len(C[i].vertices)} vertices"
        )
    return A, C


@dataclass(frozen=True)
class TowerLevel:
    i: int
    k: int
    A: StallingsGraph
    C: StallingsGraph

    @property
    def A_generators(self) -> List[ReducedWord]:
        return self.A.basis_words()

    @property
    def C_generators(self) -> List[ReducedWord]:
        return self.C.basis_words()

    def index(self):
        return index_of(self.C_generators, self.A)

    def to_document(self) -> dict:
        return {
            "i": self.i,
            "rank_A": rank(self.A),
            "rank_C": rank(self.C),
            "index": self.index(),
            "A": to_document(self.A),
            "C": to_document(self.C),
        }


def _check_level(level: TowerLevel):
    i, k = level.i, level.k
    expected = {
        "rank(A)": (rank(level.A), i * (k - 1)),
        "rank(C)": (rank(level.C), 2 * i * (k - 1) - 1),
        "index": (level.index(), 2),
    }
    for name, (measured, wanted) in expected.items():
        if measured != wanted:
            raise TowerInvariantError(
                f"Level {i} (k={k}): {name} is {measured}, expected {wanted}"
            )


def _build(k: int, i_max: int) -> Tuple[List[TowerLevel], StallingsGraph]:
    if k < 2 or i_max < 1:
        raise PreconditionError(f"Need k >= 2 and i_max >= 1, got k={k}, i={i_max}")
    A, C = _rank_two_tower(i_max)
    levels = []
    for i in range(1, i_max + 1):
        level = TowerLevel(i, k, with_extra_loops(A[i], k), with_extra_loops(C[i], k))
        _check_level(level)
        levels.append(level)
    return levels, with_extra_loops(A[i_max + 1], k)


def build_tower(k: int, i_max: int) -> List[TowerLevel]:
    levels, _ = _build(k, i_max)
    log.info(f"Built tower for k={k} up to level {i_max}")
    return levels


class BulletReport(NamedTuple):
    ok: bool
    missing: Optional[ReducedWord] = None


def readable_from_base(graph: StallingsGraph, length: int) -> BulletReport:
    """Whether every reduced word of the given length labels a path from the
    base; reports the first unreadable word in letter order."""
    alphabet = graph.alphabet
    letters = alphabet.letters()
    word: List[Letter] = []

    def extend(vertex: int) -> Optional[ReducedWord]:
        if len(word) == length:
            return None
        for x in letters:
            if word and x == -word[-1]:
                continue
            word.append(x)
            target = graph.step(vertex, x)
            if target is None:
                missing = ReducedWord.trusted(word, alphabet)
            else:
                missing = extend(target)
            word.pop()
            if missing is not None:
                return missing
        return None

    missing = extend(graph.base)
    return BulletReport(missing is None, missing)


def coverage_bullet(level: TowerLevel, length: int = None) -> BulletReport:
    """Every reduced word of length ``level.i - 1`` is readable from the base
    of A at this level."""
    return readable_from_base(level.A, level.i - 1 if length is None else length)


State = Tuple[int, Optional[Letter]]


def _route(
    graph: StallingsGraph, start: State, found: Callable[[State], object]
) -> Tuple[List[Letter], object]:
    """Shortest non-backtracking path from a (vertex, last letter) state to
    a state accepted by ``found``."""
    result = found(start)
    if result:
        return [], result
    parent: Dict[State, Tuple[State, Letter]] = {start: None}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        vertex, last = state
        for x in graph.alphabet.letters():
            if last is not None and x == -last:
                continue
            target = graph.step(vertex, x)
            if target is None or (target, x) in parent:
                continue
            following = (target, x)
            parent[following] = (state, x)
            result = found(following)
            if result:
                path = []
                while parent[following] is not None:
                    following, letter = parent[following]
                    path.append(letter)
                return path[::-1], result
            queue.append(following)
    raise TowerInvariantError("No non-backtracking route to the requested state")


class Witness(NamedTuple):
    word: ReducedWord
    cyclic: CyclicWord


def witness_word(k: int, i: int) -> Witness:
    """Cyclically reduced element of A_{i+1} containing every reduced word of
    length 2i as a subword.

    Built greedily as a closed path at the base: extend by a letter that
    completes an uncovered window when possible, otherwise walk to the start
    of the next uncovered word and read it. Word u = u1 u2 (halves of length
    i) starts at the end of the path reading u1^-1 from the base.
    """
    if i < 1:
        raise PreconditionError(f"Witness needs i >= 1, got {i}")
    _, graph = _build(k, i)
    alphabet = graph.alphabet
    L = 2 * i

    starts: Dict[Tuple[int, Letter], List[Tuple[Letter, ...]]] = {}
    for u in enumerate_reduced_words(alphabet, L):
        start = read_path(graph, invert(u[:i]))
        if start is None:
            raise TowerInvariantError(f"{format_word(u[:i])} is not readable from base")
        starts.setdefault((start, u[0]), []).append(u.letters)
    for bucket in starts.values():
        bucket.reverse()
    uncovered = {u for bucket in starts.values() for u in bucket}

    letters: List[Letter] = []
    position = [graph.base]

    def append(x: Letter):
        position[0] = graph.step(position[0], x)
        letters.append(x)
        if len(letters) >= L:
            uncovered.discard(tuple(letters[-L:]))

    def next_target(state: State) -> Optional[Tuple[Letter, ...]]:
        vertex, last = state
        for x in alphabet.letters():
            if last is not None and x == -last:
                continue
            bucket = starts.get((vertex, x))
            while bucket and bucket[-1] not in uncovered:
                bucket.pop()
            if bucket:
                return bucket[-1]
        return None

    def extension() -> Optional[Letter]:
        if len(letters) < L - 1:
            return None
        tail = tuple(letters[len(letters) - (L - 1) :])
        for x in alphabet.letters():
            if x == -letters[-1] or graph.step(position[0], x) is None:
                continue
            if tail + (x,) in uncovered:
                return x
        return None

    while uncovered:
        x = extension()
        if x is not None:
            append(x)
            continue
        state = (position[0], letters[-1] if letters else None)
        path, target = _route(graph, state, next_target)
        for x in path + list(target):
            append(x)

    first = letters[0]

    def closing(state: State) -> bool:
        vertex, last = state
        return vertex == graph.base and last is not None and last != -first

    path, _ = _route(graph, (position[0], letters[-1]), closing)
    for x in path:
        append(x)

    word = ReducedWord(letters, alphabet)
    cyclic = CyclicWord(word)
    if not contains(graph, word) or not covers_all_subwords(cyclic, L).ok:
        raise TowerInvariantError(f"Witness construction failed for k={k}, i={i}")
    log.info(f"Witness for k={k}, i={i}: length {len(word)}")
    return Witness(word, cyclic)


@dataclass(frozen=True)
class SplittingDescriptor:
    left: TowerLevel
    right: StallingsGraph
    edge: StallingsGraph
    embeddings: Tuple[ReducedWord, ...]


def splitting(k: int, i: int) -> SplittingDescriptor:
    levels, top = _build(k, i)
    level = levels[i - 1]
    embeddings = tuple(level.C_generators)
    for c in embeddings:
        if not (contains(level.A, c) and contains(top, c)):
            raise TowerInvariantError(
                f"Edge group generator {format_word(c)} is not in both vertex groups"
            )
    return SplittingDescriptor(level, top, level.C, embeddings)


@dataclass(frozen=True)
class SharpnessReport:
    k: int
    i: int
    L: int
    rank_C: int
    bound: int
    equality: bool
    bound_holds: bool
    rank_formula_holds: bool
    splitting: SplittingDescriptor
    witness: Witness

    def to_document(self) -> dict:
        return {
            "k": self.k,
            "i": self.i,
            "L": self.L,
            "rank_C": self.rank_C,
            "bound": self.bound,
            "equality": self.equality,
            "bound_holds": self.bound_holds,
            "rank_formula_holds": self.rank_formula_holds,
            "level": self.splitting.left.to_document(),
            "A_next": to_document(self.splitting.right),
            "edge_generators": [format_word(c) for c in self.splitting.embeddings],
            "witness": format_word(self.witness.word),
            "witness_length": len(self.witness.word),
        }


def verify_sharpness(k: int, i: int) -> SharpnessReport:
    """Compare rank(C_i) with the splitting bound (k-1)(L-2)+1 for L = 2i."""
    descriptor = splitting(k, i)
    L = 2 * i
    rank_c = rank(descriptor.edge)
    bound = (k - 1) * (L - 2) + 1
    report = SharpnessReport(
        k=k,
        i=i,
        L=L,
        rank_C=rank_c,
        bound=bound,
        equality=rank_c == bound,
        bound_holds=rank_c > (k - 1) * (L - 2),
        rank_formula_holds=rank_c == 2 * i * (k - 1) - 1,
        splitting=descriptor,
        witness=witness_word(k, i),
    )
    if not report.equality:
        if k == 2:
            raise TowerInvariantError(
                f"rank(C_{i}) = {rank_c} differs from {bound} for k=2"
            )
        log.warning(
            f"k={k}, i={i}: rank(C_{i}) = {rank_c}, splitting bound {bound} "
            f"(difference {rank_c - bound})"
        )
    return report

"""Stallings graphs of finitely generated subgroups of F_k.

A graph is stored with positive edge labels; an edge ``(s, t, l)`` is read as
the letter ``l`` from ``s`` to ``t`` and as ``-l`` from ``t`` to ``s``.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import yaml

from freemal.errors import (
    AlphabetError,
    DecompositionError,
    GraphFormatError,
    MembershipError,
    PreconditionError,
    WordFormatError,
)
from freemal.freewords import (
    Alphabet,
    Letter,
    ReducedWord,
    format_letter,
    free_reduce,
    parse_letters,
)

log = logging.getLogger(__name__)

Edge = Tuple[int, int, int]


class StallingsGraph:
    """Folded, connected, base-pointed core graph.

    Instances are treated as immutable. Equality and hashing go through the
    canonical form, i.e. labeled base-pointed isomorphism.
    """

    def __init__(
        self,
        alphabet: Alphabet,
        base: int,
        vertices: Iterable[int],
        edges: Iterable[Edge],
        validate: bool = True,
    ):
        self.alphabet = alphabet
        self.base = base
        self.vertices: Tuple[int, ...] = tuple(sorted(set(vertices)))
        edge_list = [tuple(e) for e in edges]
        self.edges: Tuple[Edge, ...] = tuple(sorted(set(edge_list)))

        self._out: Dict[int, Dict[int, int]] = {v: {} for v in self.vertices}
        self._in: Dict[int, Dict[int, int]] = {v: {} for v in self.vertices}
        if base not in self._out:
            raise GraphFormatError(f"Base vertex {base} is not a vertex")
        if len(edge_list) != len(self.edges):
            raise GraphFormatError("Fold violation: repeated edge")
        for s, t, label in self.edges:
            if s not in self._out or t not in self._out:
                raise GraphFormatError(f"Edge {(s, t, label)} uses an unknown vertex")
            if not 1 <= label <= alphabet.rank:
                raise GraphFormatError(
                    f"Edge label {label} outside the alphabet of rank {alphabet.rank}"
                )
            if label in self._out[s]:
                raise GraphFormatError(
                    f"Fold violation: two outgoing "
                    f"'{format_letter(label, alphabet.rank)}' edges at vertex {s}"
                )
            if label in self._in[t]:
                raise GraphFormatError(
                    f"Fold violation: two incoming "
                    f"'{format_letter(label, alphabet.rank)}' edges at vertex {t}"
                )
            self._out[s][label] = t
            self._in[t][label] = s

        if validate:
            self._validate_core()

    def _validate_core(self):
        for v in self.vertices:
            if v != self.base and self.degree(v) < 2:
                raise GraphFormatError(f"Vertex {v} has degree {self.degree(v)} < 2")
        seen = {self.base}
        queue = deque([self.base])
        while queue:
            v = queue.popleft()
            for x in self.alphabet.letters():
                w = self.step(v, x)
                if w is not None and w not in seen:
                    seen.add(w)
                    queue.append(w)
        if len(seen) != len(self.vertices):
            raise GraphFormatError("Graph is not connected")

    def step(self, vertex: int, letter: Letter) -> Optional[int]:
        if letter > 0:
            return self._out[vertex].get(letter)
        return self._in[vertex].get(-letter)

    def degree(self, vertex: int) -> int:
        return len(self._out[vertex]) + len(self._in[vertex])

    def out_edges(self, vertex: int) -> Dict[int, int]:
        return dict(self._out[vertex])

    def in_edges(self, vertex: int) -> Dict[int, int]:
        return dict(self._in[vertex])

    @cached_property
    def _canonical(self) -> Tuple[Dict[int, int], Tuple[Edge, ...]]:
        numbering = {self.base: 0}
        queue = deque([self.base])
        while queue:
            v = queue.popleft()
            for x in self.alphabet.letters():
                w = self.step(v, x)
                if w is not None and w not in numbering:
                    numbering[w] = len(numbering)
                    queue.append(w)
        edges = tuple(
            sorted((numbering[s], numbering[t], label) for s, t, label in self.edges)
        )
        return numbering, edges

    def canonical_form(self) -> Tuple[int, int, Tuple[Edge, ...]]:
        return self.alphabet.rank, len(self.vertices), self._canonical[1]

    def canonical(self) -> "StallingsGraph":
        """Copy renumbered breadth-first from the base in letter order."""
        numbering, edges = self._canonical
        return StallingsGraph(
            self.alphabet, 0, range(len(numbering)), edges, validate=False
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, StallingsGraph):
            return NotImplemented
        return self.canonical_form() == other.canonical_form()

    def __hash__(self) -> int:
        return hash(self.canonical_form())

    def __repr__(self) -> str:
        return (
            f"StallingsGraph(rank_k={self.alphabet.rank}, vertices={len(self.vertices)}"
            f", edges={len(self.edges)}, base={self.base})"
        )

    @cached_property
    def _spanning_tree(self) -> Tuple[Dict[int, Tuple[Letter, ...]], Dict[Edge, int]]:
        paths: Dict[int, Tuple[Letter, ...]] = {self.base: ()}
        tree = set()
        queue = deque([self.base])
        while queue:
            v = queue.popleft()
            for x in self.alphabet.letters():
                w = self.step(v, x)
                if w is None or w in paths:
                    continue
                paths[w] = paths[v] + (x,)
                tree.add((v, w, x) if x > 0 else (w, v, -x))
                queue.append(w)
        non_tree = [e for e in self.edges if e not in tree]
        return paths, {e: i + 1 for i, e in enumerate(non_tree)}

    def basis_edges(self) -> Dict[Edge, int]:
        """Edges off the spanning tree, numbered from 1 in edge order."""
        return dict(self._spanning_tree[1])

    def path_to(self, vertex: int) -> ReducedWord:
        """Label of the spanning tree path from the base to ``vertex``."""
        paths = self._spanning_tree[0]
        if vertex not in paths:
            raise PreconditionError(f"Vertex {vertex} is not in the graph")
        return free_reduce(paths[vertex], self.alphabet)

    def basis_words(self) -> List[ReducedWord]:
        """Free basis of the subgroup, one element per edge off a BFS tree."""
        paths, non_tree = self._spanning_tree
        basis = []
        for s, t, label in non_tree:
            letters = paths[s] + (label,) + tuple(-x for x in reversed(paths[t]))
            basis.append(free_reduce(letters, self.alphabet))
        return basis


class _Folder:
    """Union-find over vertices; label-indexed adjacency is kept on roots and
    conflicting edges queue their endpoints for merging."""

    def __init__(self):
        self.parent: List[int] = []
        self.size: List[int] = []
        self.out: List[Dict[int, int]] = []
        self.inc: List[Dict[int, int]] = []
        self.pending: List[Tuple[int, int]] = []

    def add_vertex(self) -> int:
        v = len(self.parent)
        self.parent.append(v)
        self.size.append(1)
        self.out.append({})
        self.inc.append({})
        return v

    def find(self, v: int) -> int:
        root = v
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[v] != root:
            self.parent[v], v = root, self.parent[v]
        return root

    def add_edge(self, source: int, target: int, letter: Letter):
        if letter < 0:
            source, target, letter = target, source, -letter
        self._attach(self.out[self.find(source)], self.find(target), letter)
        self._attach(self.inc[self.find(target)], self.find(source), letter)
        while self.pending:
            self._merge(*self.pending.pop())

    def _attach(self, adjacency: Dict[int, int], vertex: int, label: int):
        existing = adjacency.get(label)
        if existing is None:
            adjacency[label] = vertex
        else:
            self.pending.append((existing, vertex))

    def _merge(self, u: int, v: int):
        u, v = self.find(u), self.find(v)
        if u == v:
            return
        if self.size[u] < self.size[v]:
            u, v = v, u
        self.parent[v] = u
        self.size[u] += self.size[v]
        out, inc = self.out[v], self.inc[v]
        self.out[v], self.inc[v] = {}, {}
        for label, t in out.items():
            self._attach(self.out[u], t, label)
        for label, s in inc.items():
            self._attach(self.inc[u], s, label)

    def edges(self) -> List[Edge]:
        edges = set()
        for v in range(len(self.parent)):
            if self.parent[v] == v:
                for label, t in self.out[v].items():
                    edges.add((v, self.find(t), label))
        return sorted(edges)


def _prune(
    vertices: Iterable, edges: Iterable[Tuple], keep=None
) -> Tuple[set, List[Tuple]]:
    """Drop degree <= 1 vertices (other than ``keep``) until none are left."""
    vertices = set(vertices)
    incident: Dict = {v: [] for v in vertices}
    for e in edges:
        incident[e[0]].append(e)
        incident[e[1]].append(e)
    alive = set(edges)
    degree = {v: len(incident[v]) for v in vertices}
    queue = deque(v for v in vertices if v != keep and degree[v] <= 1)
    while queue:
        v = queue.popleft()
        if v not in vertices:
            continue
        vertices.discard(v)
        for e in incident[v]:
            if e in alive:
                alive.discard(e)
                other = e[1] if e[0] == v else e[0]
                degree[other] -= 1
                if other != keep and other in vertices and degree[other] <= 1:
                    queue.append(other)
    return vertices, sorted(alive)


def from_generators(
    words: Sequence[ReducedWord], alphabet: Optional[Alphabet] = None
) -> StallingsGraph:
    if alphabet is None:
        alphabet = words[0].alphabet if words else Alphabet(1)
    folder = _Folder()
    base = folder.add_vertex()
    for word in words:
        if word.alphabet != alphabet:
            raise AlphabetError(
                f"Generator over rank {word.alphabet.rank}, expected {alphabet.rank}"
            )
        current = base
        for i, x in enumerate(word.letters):
            target = base if i == len(word) - 1 else folder.add_vertex()
            folder.add_edge(current, target, x)
            current = target

    root = folder.find(base)
    edges = folder.edges()
    vertices = {folder.find(v) for v in range(len(folder.parent))}
    vertices, edges = _prune(vertices, edges, keep=root)
    log.debug(
        f"Folded {len(words)} generators into {len(vertices)} vertices "
        f"and {len(edges)} edges"
    )
    return StallingsGraph(alphabet, root, vertices, edges, validate=False).canonical()


def _check_alphabet(g: StallingsGraph, w: ReducedWord):
    if w.alphabet != g.alphabet:
        raise AlphabetError(
            f"Word over rank {w.alphabet.rank} read in a graph over rank "
            f"{g.alphabet.rank}"
        )


def read_path(
    g: StallingsGraph, w: ReducedWord, start: Optional[int] = None
) -> Optional[int]:
    """End vertex of the path reading w from start (default: base), or None."""
    _check_alphabet(g, w)
    vertex = g.base if start is None else start
    for x in w.letters:
        vertex = g.step(vertex, x)
        if vertex is None:
            return None
    return vertex


def contains(g: StallingsGraph, w: ReducedWord) -> bool:
    return read_path(g, w) == g.base


def rank(g: StallingsGraph) -> int:
    return len(g.edges) - len(g.vertices) + 1


def rewrite_in_basis(g: StallingsGraph, w: ReducedWord) -> List[Letter]:
    """Letters of w over the basis of ``g.basis_words()`` (index j for the
    j-th basis element, -j for its inverse)."""
    _check_alphabet(g, w)
    _, non_tree = g._spanning_tree
    vertex = g.base
    rewritten = []
    for x in w.letters:
        target = g.step(vertex, x)
        if target is None:
            raise MembershipError(f"{w} is not in the subgroup: no path")
        edge = (vertex, target, x) if x > 0 else (target, vertex, -x)
        if edge in non_tree:
            rewritten.append(non_tree[edge] if x > 0 else -non_tree[edge])
        vertex = target
    if vertex != g.base:
        raise MembershipError(f"{w} is not in the subgroup: path does not close")
    return rewritten


def index_in_ambient(g: StallingsGraph) -> Union[int, float]:
    labels = range(1, g.alphabet.rank + 1)
    for v in g.vertices:
        out, inc = g._out[v], g._in[v]
        if any(label not in out or label not in inc for label in labels):
            return math.inf
    return len(g.vertices)


def index_of(sub: Sequence[ReducedWord], over: StallingsGraph) -> Union[int, float]:
    over_rank = rank(over)
    rewritten = [rewrite_in_basis(over, w) for w in sub]
    if over_rank == 0:
        return 1
    relative_alphabet = Alphabet(over_rank)
    words = [free_reduce(letters, relative_alphabet) for letters in rewritten]
    return index_in_ambient(from_generators(words, relative_alphabet))


@dataclass(frozen=True)
class FiberComponent:
    """Core of one connected component of a fiber product; vertices are
    pairs of vertices of the two factors."""

    vertices: Tuple[Tuple[int, int], ...]
    edges: Tuple[Tuple[Tuple[int, int], Tuple[int, int], int], ...]
    basepointed: bool
    rank: int
    base: Tuple[int, int]
    alphabet: Alphabet

    def graph(self) -> StallingsGraph:
        numbering = {v: i for i, v in enumerate(self.vertices)}
        return StallingsGraph(
            self.alphabet,
            numbering[self.base],
            numbering.values(),
            [(numbering[s], numbering[t], label) for s, t, label in self.edges],
        ).canonical()


@dataclass(frozen=True)
class MalnormalityReport:
    ok: bool
    witness: Optional[FiberComponent] = None


def _cycle_seeds(g: StallingsGraph) -> List[int]:
    """Vertices that every cyclically reduced closed path of g visits at
    least one of: branch vertices of the cyclic core, or any vertex of it
    when the cyclic core is a single circle."""
    vertices, edges = _prune(g.vertices, g.edges)
    if not edges:
        return []
    degree = {v: 0 for v in vertices}
    for s, t, _ in edges:
        degree[s] += 1
        degree[t] += 1
    branch = sorted(v for v in vertices if degree[v] >= 3)
    return branch or [min(vertices)]


def _explore(g1: StallingsGraph, g2: StallingsGraph, start: Tuple[int, int]):
    seen = {start}
    edges = set()
    queue = deque([start])
    while queue:
        u, v = queue.popleft()
        for label, t1 in g1._out[u].items():
            t2 = g2._out[v].get(label)
            if t2 is not None:
                edges.add(((u, v), (t1, t2), label))
                if (t1, t2) not in seen:
                    seen.add((t1, t2))
                    queue.append((t1, t2))
        for label, s1 in g1._in[u].items():
            s2 = g2._in[v].get(label)
            if s2 is not None:
                edges.add(((s1, s2), (u, v), label))
                if (s1, s2) not in seen:
                    seen.add((s1, s2))
                    queue.append((s1, s2))
    return seen, edges


def fiber_product(g1: StallingsGraph, g2: StallingsGraph) -> List[FiberComponent]:
    """Components of the core of the product graph.

    The basepointed component is always listed first (possibly a single
    vertex); other components are listed only when they carry a cycle.
    """
    if g1.alphabet != g2.alphabet:
        raise AlphabetError(
            f"Fiber product of graphs over ranks {g1.alphabet.rank} "
            f"and {g2.alphabet.rank}"
        )
    base_pair = (g1.base, g2.base)
    starts = [base_pair] + [(u, v) for u in _cycle_seeds(g1) for v in g2.vertices]
    visited = set()
    components = []
    for start in starts:
        if start in visited:
            continue
        vertices, edges = _explore(g1, g2, start)
        visited |= vertices
        basepointed = base_pair in vertices
        core_vertices, core_edges = _prune(
            vertices, edges, keep=base_pair if basepointed else None
        )
        if not basepointed and not core_edges:
            continue
        components.append(
            FiberComponent(
                vertices=tuple(sorted(core_vertices)),
                edges=tuple(core_edges),
                basepointed=basepointed,
                rank=len(core_edges) - len(core_vertices) + 1,
                base=base_pair if basepointed else min(core_vertices),
                alphabet=g1.alphabet,
            )
        )
    return components


def is_malnormal(g: StallingsGraph) -> MalnormalityReport:
    for component in fiber_product(g, g):
        if not component.basepointed and component.rank >= 1:
            log.debug(f"Non-malnormal: component of rank {component.rank}")
            return MalnormalityReport(ok=False, witness=component)
    return MalnormalityReport(ok=True)


@dataclass(frozen=True)
class OuterLoop:
    start: int
    end: int
    edges: Tuple[Edge, ...]
    letters: Tuple[Letter, ...]

    def __len__(self) -> int:
        return len(self.letters)

    def word(self, alphabet: Alphabet) -> ReducedWord:
        return ReducedWord.trusted(self.letters, alphabet)


@dataclass(frozen=True)
class CentralDecomposition:
    tree_vertices: FrozenSet[int]
    tree_edges: Tuple[Edge, ...]
    outer_loops: Tuple[OuterLoop, ...]
    diameter: int
    core_diameter: int

    @property
    def loop_lengths(self) -> List[int]:
        return [len(loop) for loop in self.outer_loops]

    def central_tree(self) -> nx.Graph:
        tree = nx.Graph()
        tree.add_nodes_from(self.tree_vertices)
        tree.add_edges_from((s, t) for s, t, _ in self.tree_edges)
        return tree


def _tree_diameter(tree: nx.Graph) -> int:
    if tree.number_of_nodes() <= 1:
        return 0
    return nx.diameter(tree)


def central_decomposition(g: StallingsGraph, p: int) -> CentralDecomposition:
    """Split g into a central tree through the base and p outer loops.

    The tree is the union of all geodesics between the base and the
    vertices of degree >= 3; it must be a tree and its complement must be p
    arcs through degree-2 vertices. Raises DecompositionError otherwise.
    """
    if rank(g) != p:
        raise PreconditionError(f"Graph has rank {rank(g)}, expected {p}")

    multigraph = nx.MultiGraph()
    multigraph.add_nodes_from(g.vertices)
    for edge in g.edges:
        multigraph.add_edge(edge[0], edge[1], key=edge)

    marked = sorted({g.base} | {v for v in g.vertices if multigraph.degree(v) >= 3})
    distances = {
        m: nx.single_source_shortest_path_length(multigraph, m) for m in marked
    }
    tree_edges = set()
    for a, b in combinations(marked, 2):
        d = distances[a][b]
        for edge in g.edges:
            s, t, _ = edge
            if s == t:
                continue
            if (
                distances[a][s] + 1 + distances[b][t] == d
                or distances[a][t] + 1 + distances[b][s] == d
            ):
                tree_edges.add(edge)

    tree = nx.MultiGraph()
    tree.add_nodes_from(marked)
    for edge in tree_edges:
        tree.add_edge(edge[0], edge[1], key=edge)
    if not nx.is_tree(tree):
        raise DecompositionError("Geodesics between branch vertices form a cycle")
    tree_vertices = frozenset(tree.nodes)

    incident: Dict[int, List[Tuple[Edge, int, Letter]]] = {v: [] for v in g.vertices}
    for edge in g.edges:
        if edge in tree_edges:
            continue
        s, t, label = edge
        incident[s].append((edge, t, label))
        incident[t].append((edge, s, -label))

    used = set()
    loops = []
    for v in sorted(tree_vertices):
        for edge, other, letter in incident[v]:
            if edge in used:
                continue
            used.add(edge)
            path, letters, current = [edge], [letter], other
            while current not in tree_vertices:
                onward = [entry for entry in incident[current] if entry[0] not in used]
                if len(incident[current]) != 2 or len(onward) != 1:
                    raise DecompositionError(
                        f"Outer arc branches at vertex {current}"
                    )
                edge_next, current_next, letter_next = onward[0]
                used.add(edge_next)
                path.append(edge_next)
                letters.append(letter_next)
                current = current_next
            loops.append(OuterLoop(v, current, tuple(path), tuple(letters)))

    if len(loops) != p or len(used) + len(tree_edges) != len(g.edges):
        raise DecompositionError(
            f"Complement of the central tree has {len(loops)} arcs, expected {p}"
        )

    simple_tree = nx.Graph()
    simple_tree.add_nodes_from(tree_vertices)
    simple_tree.add_edges_from((s, t) for s, t, _ in tree_edges)
    endpoints = {loop.start for loop in loops} | {loop.end for loop in loops}
    core_tree = simple_tree.copy()
    leaves = [v for v in core_tree if core_tree.degree(v) <= 1 and v not in endpoints]
    while leaves and core_tree.number_of_nodes() > 1:
        core_tree.remove_nodes_from(leaves)
        leaves = [
            v for v in core_tree if core_tree.degree(v) <= 1 and v not in endpoints
        ]

    return CentralDecomposition(
        tree_vertices=tree_vertices,
        tree_edges=tuple(sorted(tree_edges)),
        outer_loops=tuple(loops),
        diameter=_tree_diameter(simple_tree),
        core_diameter=_tree_diameter(core_tree),
    )


def to_document(g: StallingsGraph) -> dict:
    rank_k = g.alphabet.rank
    return {
        "rank_k": rank_k,
        "base": g.base,
        "vertices": list(g.vertices),
        "edges": [[s, t, format_letter(label, rank_k)] for s, t, label in g.edges],
    }


def serialize(g: StallingsGraph) -> str:
    return yaml.safe_dump(to_document(g), sort_keys=False, default_flow_style=None)


def from_document(document) -> StallingsGraph:
    if not isinstance(document, dict):
        raise GraphFormatError("Graph document must be a mapping")
    missing = [
        key for key in ("rank_k", "base", "vertices", "edges") if key not in document
    ]
    if missing:
        raise GraphFormatError(f"Graph document misses keys {missing}")
    try:
        alphabet = Alphabet(int(document["rank_k"]))
        base = int(document["base"])
        vertices = [int(v) for v in document["vertices"]]
        edges = []
        for entry in document["edges"]:
            source, target, label = entry
            letters = parse_letters(str(label), alphabet)
            if len(letters) != 1 or letters[0] < 0:
                raise GraphFormatError(f"Edge label '{label}' is not a positive letter")
            edges.append((int(source), int(target), letters[0]))
    except GraphFormatError:
        raise
    except (TypeError, ValueError, WordFormatError) as e:
        raise GraphFormatError(f"Malformed graph document: {e}") from e
    if len(set(vertices)) != len(vertices):
        raise GraphFormatError("Repeated vertex in graph document")
    return StallingsGraph(alphabet, base, vertices, edges)


def deserialize(text: str) -> StallingsGraph:
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise GraphFormatError(f"Graph document is not valid YAML: {e}") from e
    return from_document(document)

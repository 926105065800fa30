"""Finite undirected multigraphs, their morphisms, and categorical constructions.

A graph is a triple (V, E, inc) where inc maps every edge to the set of its
endpoints, of size 1 (a loop) or 2.  Graphs may be typed over a type graph;
typing assigns a type-vertex name to every vertex and a type-edge name to
every edge, consistently with the type graph's own incidence.

All values are immutable after construction and safe to share.  The
constructions (pushout, pullback, pushout complement, final pullback
complement, epi-mono factorization) operate componentwise on vertex and edge
sets with induced incidence.
"""

from __future__ import annotations

import itertools
import json
from typing import Iterable, Iterator, Mapping, Optional, Sequence


class GraphError(ValueError):
    """Raised for ill-formed graphs, morphisms or incompatible typings."""


class _FreeTyping:
    """Marker typegraph: vertex/edge labels are free-form, no discipline.

    Used internally for the label graphs that back canonical rule and
    condition keys; never exposed through the model layer.
    """

    def __repr__(self):
        return "FreeTyping"


FREE_TYPING = _FreeTyping()


class TypeGraph:
    """A graph of type names: vertex types plus allowed edge types.

    ``edges`` maps an edge-type name to the set of endpoint type names it may
    connect (one name for a typed loop, two for a regular edge type).
    """

    __slots__ = ("vertices", "edges")

    def __init__(self, vertices: Iterable[str], edges: Mapping[str, Iterable[str]]):
        self.vertices = frozenset(vertices)
        self.edges = {name: frozenset(ends) for name, ends in edges.items()}
        for name, ends in self.edges.items():
            if not 1 <= len(ends) <= 2 or not ends <= self.vertices:
                raise GraphError(f"edge type {name!r} has bad endpoints {sorted(ends)}")

    def __eq__(self, other):
        return (
            isinstance(other, TypeGraph)
            and self.vertices == other.vertices
            and self.edges == other.edges
        )

    def __hash__(self):
        return hash((self.vertices, frozenset(self.edges.items())))

    def __repr__(self):
        return f"TypeGraph({sorted(self.vertices)}, {len(self.edges)} edge types)"

    def loop_types(self, vtype: str) -> list[str]:
        return sorted(t for t, ends in self.edges.items() if ends == frozenset([vtype]))


class Graph:
    """An undirected multigraph, optionally typed over a :class:`TypeGraph`.

    Vertex and edge identifiers are opaque non-negative integers local to the
    graph.  Loops are edges whose incidence set has a single element.
    """

    __slots__ = ("vertices", "edges", "incidence", "vtype", "etype", "typegraph", "_canon", "_adj")

    def __init__(
        self,
        vertices: Iterable[int],
        edges: Iterable[int],
        incidence: Mapping[int, Iterable[int]],
        vtype: Optional[Mapping[int, str]] = None,
        etype: Optional[Mapping[int, str]] = None,
        typegraph: Optional[TypeGraph] = None,
    ):
        self.vertices = tuple(sorted(vertices))
        self.edges = tuple(sorted(edges))
        if len(set(self.vertices)) != len(self.vertices):
            raise GraphError("duplicate vertex ids")
        if len(set(self.edges)) != len(self.edges):
            raise GraphError("duplicate edge ids")
        vset = set(self.vertices)
        self.incidence = {e: frozenset(incidence[e]) for e in self.edges}
        for e, ends in self.incidence.items():
            if not 1 <= len(ends) <= 2 or not ends <= vset:
                raise GraphError(f"edge {e} has bad incidence {sorted(ends)}")
        self.typegraph = typegraph
        if typegraph is None:
            if vtype or etype:
                raise GraphError("typed labels given without a type graph")
            self.vtype = None
            self.etype = None
        elif typegraph is FREE_TYPING:
            self.vtype = dict(vtype or {})
            self.etype = dict(etype or {})
        else:
            self.vtype = dict(vtype or {})
            self.etype = dict(etype or {})
            for v in self.vertices:
                t = self.vtype.get(v)
                if t not in typegraph.vertices:
                    raise GraphError(f"vertex {v} has unknown type {t!r}")
            for e in self.edges:
                t = self.etype.get(e)
                if t not in typegraph.edges:
                    raise GraphError(f"edge {e} has unknown type {t!r}")
                want = typegraph.edges[t]
                got = frozenset(self.vtype[v] for v in self.incidence[e])
                if got != want:
                    raise GraphError(
                        f"edge {e}:{t} connects {sorted(got)}, type graph wants {sorted(want)}"
                    )
        self._canon = None
        self._adj = None

    # -- basic queries -------------------------------------------------

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def size(self) -> int:
        return len(self.vertices) + len(self.edges)

    def is_loop(self, e: int) -> bool:
        return len(self.incidence[e]) == 1

    def edges_at(self, v: int) -> list[int]:
        return [e for e in self.edges if v in self.incidence[e]]

    def vtype_of(self, v: int):
        return None if self.vtype is None else self.vtype[v]

    def etype_of(self, e: int):
        return None if self.etype is None else self.etype[e]

    def same_typing(self, other: "Graph") -> bool:
        return self.typegraph == other.typegraph

    def same_as(self, other: "Graph") -> bool:
        """Structural equality on identifiers (not isomorphism)."""
        return self is other or (
            self.vertices == other.vertices
            and self.edges == other.edges
            and self.incidence == other.incidence
            and self.vtype == other.vtype
            and self.etype == other.etype
            and self.typegraph == other.typegraph
        )

    def __repr__(self):
        t = "" if self.typegraph is None else " typed"
        return f"Graph({self.num_vertices}v,{self.num_edges}e{t})"

    # -- construction helpers -------------------------------------------

    @staticmethod
    def build(
        vertex_types: Sequence,
        edge_list: Sequence,
        typegraph: Optional[TypeGraph] = None,
    ) -> "Graph":
        """Build a graph from a list of vertex types and ``(ends, type)`` pairs.

        ``vertex_types`` gives one entry per vertex (``None`` for untyped);
        ``edge_list`` entries are ``(endpoints, edge_type)`` with endpoints an
        iterable of 1 or 2 vertex indices, or just ``endpoints`` when untyped.
        """
        n = len(vertex_types)
        vt = {}
        et = {}
        inc = {}
        for i, t in enumerate(vertex_types):
            if t is not None:
                vt[i] = t
        for j, item in enumerate(edge_list):
            if typegraph is not None:
                ends, t = item
                et[j] = t
            else:
                ends = item
            inc[j] = frozenset(ends)
        if typegraph is None:
            return Graph(range(n), range(len(edge_list)), inc)
        return Graph(range(n), range(len(edge_list)), inc, vt, et, typegraph)

    def relabel(self, vmap: Mapping[int, int], emap: Mapping[int, int]) -> "Graph":
        """Return an isomorphic copy with renamed identifiers (bijective maps)."""
        inc = {emap[e]: frozenset(vmap[v] for v in ends) for e, ends in self.incidence.items()}
        vt = None if self.vtype is None else {vmap[v]: t for v, t in self.vtype.items()}
        et = None if self.etype is None else {emap[e]: t for e, t in self.etype.items()}
        return Graph(
            [vmap[v] for v in self.vertices],
            [emap[e] for e in self.edges],
            inc,
            vt,
            et,
            self.typegraph,
        )

    def subgraph(self, vs: Iterable[int], es: Iterable[int]) -> "Graph":
        vs = set(vs)
        es = set(es)
        for e in es:
            if not self.incidence[e] <= vs:
                raise GraphError(f"edge {e} has endpoints outside the vertex subset")
        vt = None if self.vtype is None else {v: self.vtype[v] for v in vs}
        et = None if self.etype is None else {e: self.etype[e] for e in es}
        return Graph(vs, es, {e: self.incidence[e] for e in es}, vt, et, self.typegraph)


def empty_graph(typegraph: Optional[TypeGraph] = None) -> Graph:
    return Graph((), (), {}, {} if typegraph else None, {} if typegraph else None, typegraph)


class Morphism:
    """A graph homomorphism: vertex and edge maps preserving incidence and types."""

    __slots__ = ("source", "target", "vmap", "emap")

    def __init__(
        self,
        source: Graph,
        target: Graph,
        vmap: Mapping[int, int],
        emap: Mapping[int, int],
        check: bool = True,
    ):
        self.source = source
        self.target = target
        self.vmap = dict(vmap)
        self.emap = dict(emap)
        if check:
            self.validate()

    def validate(self):
        s, t = self.source, self.target
        if not s.same_typing(t):
            raise GraphError("morphism between differently typed graphs")
        if set(self.vmap) != set(s.vertices) or set(self.emap) != set(s.edges):
            raise GraphError("morphism maps are not total on the source")
        tv, te = set(t.vertices), set(t.edges)
        for v, w in self.vmap.items():
            if w not in tv:
                raise GraphError(f"vertex {v} maps outside the target")
            if s.vtype is not None and s.vtype[v] != t.vtype[w]:
                raise GraphError(f"vertex {v} changes type under the morphism")
        for e, f in self.emap.items():
            if f not in te:
                raise GraphError(f"edge {e} maps outside the target")
            image = frozenset(self.vmap[v] for v in s.incidence[e])
            if image != t.incidence[f]:
                raise GraphError(f"edge {e} breaks the homomorphism law")
            if s.etype is not None and s.etype[e] != t.etype[f]:
                raise GraphError(f"edge {e} changes type under the morphism")

    @property
    def is_mono(self) -> bool:
        return len(set(self.vmap.values())) == len(self.vmap) and len(
            set(self.emap.values())
        ) == len(self.emap)

    @property
    def is_epi(self) -> bool:
        return set(self.vmap.values()) == set(self.target.vertices) and set(
            self.emap.values()
        ) == set(self.target.edges)

    @property
    def is_iso(self) -> bool:
        return self.is_mono and self.is_epi

    def then(self, other: "Morphism") -> "Morphism":
        """Composition ``other ∘ self`` (apply self first)."""
        if not self.target.same_as(other.source):
            raise GraphError("composition of non-composable morphisms")
        return Morphism(
            self.source,
            other.target,
            {v: other.vmap[w] for v, w in self.vmap.items()},
            {e: other.emap[f] for e, f in self.emap.items()},
            check=False,
        )

    def inverse(self) -> "Morphism":
        if not self.is_iso:
            raise GraphError("only isomorphisms invert")
        return Morphism(
            self.target,
            self.source,
            {w: v for v, w in self.vmap.items()},
            {f: e for e, f in self.emap.items()},
            check=False,
        )

    def key(self):
        """A hashable identity for deterministic ordering and deduplication."""
        return (tuple(sorted(self.vmap.items())), tuple(sorted(self.emap.items())))

    def __eq__(self, other):
        return (
            isinstance(other, Morphism)
            and self.source is other.source
            and self.target is other.target
            and self.vmap == other.vmap
            and self.emap == other.emap
        )

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"Morphism({self.source!r}->{self.target!r})"

    @staticmethod
    def identity(g: Graph) -> "Morphism":
        return Morphism(g, g, {v: v for v in g.vertices}, {e: e for e in g.edges}, check=False)


def initial_morphism(g: Graph) -> Morphism:
    """The unique morphism from the empty graph into ``g``."""
    return Morphism(empty_graph(g.typegraph), g, {}, {}, check=False)


# ---------------------------------------------------------------------------
# morphism enumeration


def _edge_assignments(pattern: Graph, target: Graph, vmap: dict, injective: bool):
    """All edge maps completing ``vmap`` to a homomorphism; injective optional."""
    groups: dict = {}
    for e in pattern.edges:
        sig = (frozenset(vmap[v] for v in pattern.incidence[e]), pattern.etype_of(e))
        groups.setdefault(sig, []).append(e)
    choices = []
    for (ends, t), src in groups.items():
        tgt = [f for f in target.edges if target.incidence[f] == ends and target.etype_of(f) == t]
        if injective:
            if len(tgt) < len(src):
                return
            choices.append((src, list(itertools.permutations(tgt, len(src)))))
        else:
            if not tgt:
                return
            choices.append((src, list(itertools.product(tgt, repeat=len(src)))))
    for combo in itertools.product(*(c for _, c in choices)):
        emap = {}
        for (src, _), pick in zip(choices, combo):
            for e, f in zip(src, pick):
                emap[e] = f
        yield emap


def _vertex_feasible(pattern, target, vmap, v, w, injective):
    if pattern.vtype_of(v) != target.vtype_of(w):
        return False
    trial = dict(vmap)
    trial[v] = w
    # check every pattern edge whose endpoints are now fully assigned
    for e in pattern.edges:
        ends = pattern.incidence[e]
        if v not in ends or not all(u in trial for u in ends):
            continue
        image = frozenset(trial[u] for u in ends)
        t = pattern.etype_of(e)
        needed = sum(
            1
            for e2 in pattern.edges
            if pattern.etype_of(e2) == t
            and all(u in trial for u in pattern.incidence[e2])
            and frozenset(trial[u] for u in pattern.incidence[e2]) == image
        )
        avail = sum(
            1 for f in target.edges if target.incidence[f] == image and target.etype_of(f) == t
        )
        if injective and avail < needed:
            return False
        if not injective and avail == 0:
            return False
    return True


def enumerate_monos(
    pattern: Graph,
    target: Graph,
    pinned_v: Optional[Mapping[int, int]] = None,
    pinned_e: Optional[Mapping[int, int]] = None,
) -> list[Morphism]:
    """All injective homomorphisms pattern ↪ target, optionally with pinned parts.

    The result is exhaustive, duplicate-free, and sorted deterministically by
    the map contents.
    """
    return _enumerate(pattern, target, pinned_v, pinned_e, injective=True)


def enumerate_homs(
    pattern: Graph,
    target: Graph,
    pinned_v: Optional[Mapping[int, int]] = None,
    pinned_e: Optional[Mapping[int, int]] = None,
) -> list[Morphism]:
    """All homomorphisms pattern → target (not necessarily injective)."""
    return _enumerate(pattern, target, pinned_v, pinned_e, injective=False)


def _enumerate(pattern, target, pinned_v, pinned_e, injective):
    if not pattern.same_typing(target):
        raise GraphError("pattern and target typed over different type graphs")
    pinned_v = dict(pinned_v or {})
    pinned_e = dict(pinned_e or {})
    free = [v for v in pattern.vertices if v not in pinned_v]
    results = []
    used = set(pinned_v.values()) if injective else set()
    if injective and len(used) != len(pinned_v):
        return []

    def assign(i, vmap):
        if i == len(free):
            for emap in _edge_assignments(pattern, target, vmap, injective):
                ok = all(emap.get(e) == f for e, f in pinned_e.items())
                if ok:
                    results.append(Morphism(pattern, target, vmap, emap, check=False))
            return
        v = free[i]
        for w in target.vertices:
            if injective and w in used:
                continue
            if not _vertex_feasible(pattern, target, vmap, v, w, injective):
                continue
            vmap[v] = w
            if injective:
                used.add(w)
            assign(i + 1, vmap)
            del vmap[v]
            if injective:
                used.discard(w)

    assign(0, dict(pinned_v))
    results.sort(key=Morphism.key)
    return results


# ---------------------------------------------------------------------------
# colimits and limits


def disjoint_union(a: Graph, b: Graph) -> tuple[Graph, Morphism, Morphism]:
    """Coproduct a ⊎ b with its two injections."""
    if not a.same_typing(b):
        raise GraphError("disjoint union of differently typed graphs")
    nv, ne = a.num_vertices, a.num_edges
    va = {v: i for i, v in enumerate(a.vertices)}
    ea = {e: i for i, e in enumerate(a.edges)}
    vb = {v: nv + i for i, v in enumerate(b.vertices)}
    eb = {e: ne + i for i, e in enumerate(b.edges)}
    inc = {ea[e]: frozenset(va[v] for v in a.incidence[e]) for e in a.edges}
    inc.update({eb[e]: frozenset(vb[v] for v in b.incidence[e]) for e in b.edges})
    vt = et = None
    if a.typegraph is not None:
        vt = {va[v]: a.vtype[v] for v in a.vertices}
        vt.update({vb[v]: b.vtype[v] for v in b.vertices})
        et = {ea[e]: a.etype[e] for e in a.edges}
        et.update({eb[e]: b.etype[e] for e in b.edges})
    g = Graph(range(nv + b.num_vertices), range(ne + b.num_edges), inc, vt, et, a.typegraph)
    return g, Morphism(a, g, va, ea, check=False), Morphism(b, g, vb, eb, check=False)


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x, y):
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            self.parent[max(rx, ry)] = min(rx, ry)


def pushout(f: Morphism, g: Morphism) -> tuple[Graph, Morphism, Morphism]:
    """Pushout of the span ``f.target ←f– apex –g→ g.target``.

    Returns ``(P, inl, inr)`` with ``inl: f.target → P`` and ``inr: g.target → P``.
    At least one leg should be monic for the gluing to be well behaved.
    """
    if not f.source.same_as(g.source):
        raise GraphError("pushout legs must share their source")
    a, b = f.target, g.target
    uf_v, uf_e = _UnionFind(), _UnionFind()
    for v in a.vertices:
        uf_v.find(("a", v))
    for v in b.vertices:
        uf_v.find(("b", v))
    for e in a.edges:
        uf_e.find(("a", e))
    for e in b.edges:
        uf_e.find(("b", e))
    for v in f.source.vertices:
        uf_v.union(("a", f.vmap[v]), ("b", g.vmap[v]))
    for e in f.source.edges:
        uf_e.union(("a", f.emap[e]), ("b", g.emap[e]))

    def classes(uf, items):
        byroot = {}
        for it in items:
            byroot.setdefault(uf.find(it), []).append(it)
        reps = sorted(byroot, key=lambda r: min(byroot[r]))
        return {it: i for i, r in enumerate(reps) for it in byroot[r]}

    vclass = classes(uf_v, [("a", v) for v in a.vertices] + [("b", v) for v in b.vertices])
    eclass = classes(uf_e, [("a", e) for e in a.edges] + [("b", e) for e in b.edges])

    inc = {}
    vt = {} if a.typegraph is not None else None
    et = {} if a.typegraph is not None else None
    for tag, gph in (("a", a), ("b", b)):
        for e in gph.edges:
            inc[eclass[(tag, e)]] = frozenset(vclass[(tag, v)] for v in gph.incidence[e])
        if vt is not None:
            for v in gph.vertices:
                vt[vclass[(tag, v)]] = gph.vtype[v]
            for e in gph.edges:
                et[eclass[(tag, e)]] = gph.etype[e]
    p = Graph(set(vclass.values()), set(eclass.values()), inc, vt, et, a.typegraph)
    inl = Morphism(a, p, {v: vclass[("a", v)] for v in a.vertices},
                   {e: eclass[("a", e)] for e in a.edges}, check=False)
    inr = Morphism(b, p, {v: vclass[("b", v)] for v in b.vertices},
                   {e: eclass[("b", e)] for e in b.edges}, check=False)
    return p, inl, inr


def pullback(f: Morphism, g: Morphism) -> tuple[Graph, Morphism, Morphism]:
    """Pullback of the cospan ``f.source –f→ target ←g– g.source``.

    Returns ``(P, p1, p2)`` with ``p1: P → f.source``, ``p2: P → g.source``.
    At least one leg must be monic (the only case the engine needs).
    """
    if not f.target.same_as(g.target):
        raise GraphError("pullback legs must share their target")
    if not (f.is_mono or g.is_mono):
        raise GraphError("pullback requires at least one monic leg")
    a, b = f.source, g.source
    vpairs = [(x, y) for x in a.vertices for y in b.vertices if f.vmap[x] == g.vmap[y]]
    epairs = [(x, y) for x in a.edges for y in b.edges if f.emap[x] == g.emap[y]]
    vid = {p: i for i, p in enumerate(sorted(vpairs))}
    inc = {}
    keep = []
    for j, (ex, ey) in enumerate(sorted(epairs)):
        ends = frozenset(
            vid[(x, y)]
            for (x, y) in vpairs
            if x in a.incidence[ex] and y in b.incidence[ey]
        )
        expected = max(len(a.incidence[ex]), len(b.incidence[ey]))
        if len(ends) != expected:
            raise GraphError("pullback incidence is not well defined here")
        inc[j] = ends
        keep.append((ex, ey))
    vt = et = None
    if a.typegraph is not None:
        vt = {vid[(x, y)]: a.vtype[x] for (x, y) in vpairs}
        et = {j: a.etype[ex] for j, (ex, ey) in enumerate(keep)}
    p = Graph(range(len(vpairs)), range(len(keep)), inc, vt, et, a.typegraph)
    p1 = Morphism(p, a, {vid[pr]: pr[0] for pr in vpairs},
                  {j: ex for j, (ex, ey) in enumerate(keep)}, check=False)
    p2 = Morphism(p, b, {vid[pr]: pr[1] for pr in vpairs},
                  {j: ey for j, (ex, ey) in enumerate(keep)}, check=False)
    return p, p1, p2


def pushout_complement(f: Morphism, g: Morphism) -> Optional[tuple[Morphism, Morphism]]:
    """Complement ``(A↪D, D↪C)`` of the composable monos ``f: A↪B``, ``g: B↪C``.

    Removes ``g(B ∖ f(A))`` from ``C``.  Returns ``None`` when a remaining
    edge would dangle, which is the signal that a DPO match is inadmissible.
    """
    if not (f.is_mono and g.is_mono):
        raise GraphError("pushout complement requires monic morphisms")
    b, c = f.target, g.target
    kept_bv = {f.vmap[v] for v in f.source.vertices}
    kept_be = {f.emap[e] for e in f.source.edges}
    del_v = {g.vmap[v] for v in b.vertices if v not in kept_bv}
    del_e = {g.emap[e] for e in b.edges if e not in kept_be}
    dv = [v for v in c.vertices if v not in del_v]
    de = [e for e in c.edges if e not in del_e]
    vset = set(dv)
    for e in de:
        if not c.incidence[e] <= vset:
            return None
    d = c.subgraph(dv, de)
    a_to_d = Morphism(
        f.source, d,
        {v: g.vmap[f.vmap[v]] for v in f.source.vertices},
        {e: g.emap[f.emap[e]] for e in f.source.edges},
        check=False,
    )
    d_to_c = Morphism(d, c, {v: v for v in dv}, {e: e for e in de}, check=False)
    return a_to_d, d_to_c


def final_pullback_complement(f: Morphism, g: Morphism) -> tuple[Morphism, Morphism]:
    """FPC ``(A↪D, D↪C)`` of the composable monos ``f: A↪B``, ``g: B↪C``.

    Vertices: everything in C except the deleted ones g(V_B ∖ f(V_A)).
    Edges: the non-deleted edges of C whose endpoints all survive; edges
    hanging off a deleted vertex disappear as a side effect.
    """
    if not (f.is_mono and g.is_mono):
        raise GraphError("final pullback complement requires monic morphisms")
    b, c = f.target, g.target
    kept_bv = {f.vmap[v] for v in f.source.vertices}
    kept_be = {f.emap[e] for e in f.source.edges}
    del_v = {g.vmap[v] for v in b.vertices if v not in kept_bv}
    del_e = {g.emap[e] for e in b.edges if e not in kept_be}
    dv = [v for v in c.vertices if v not in del_v]
    vset = set(dv)
    de = [e for e in c.edges if e not in del_e and c.incidence[e] <= vset]
    d = c.subgraph(dv, de)
    a_to_d = Morphism(
        f.source, d,
        {v: g.vmap[f.vmap[v]] for v in f.source.vertices},
        {e: g.emap[f.emap[e]] for e in f.source.edges},
        check=False,
    )
    d_to_c = Morphism(d, c, {v: v for v in dv}, {e: e for e in de}, check=False)
    return a_to_d, d_to_c


def epi_mono_factorize(f: Morphism) -> tuple[Morphism, Morphism]:
    """Factor ``f = m ∘ e`` with ``e`` surjective onto the image and ``m`` monic."""
    img_v = sorted({f.vmap[v] for v in f.source.vertices})
    img_e = sorted({f.emap[e] for e in f.source.edges})
    image = f.target.subgraph(img_v, img_e)
    e = Morphism(f.source, image, dict(f.vmap), dict(f.emap), check=False)
    m = Morphism(image, f.target, {v: v for v in img_v}, {e2: e2 for e2 in img_e}, check=False)
    return e, m


# ---------------------------------------------------------------------------
# subgraph and catalog enumeration (used by overlaps, oracles and tests)


def all_subgraphs(g: Graph) -> Iterator[Graph]:
    """All subgraphs (any vertex subset with any subset of supported edges)."""
    verts = list(g.vertices)
    for r in range(len(verts) + 1):
        for vs in itertools.combinations(verts, r):
            vset = set(vs)
            candidate_edges = [e for e in g.edges if g.incidence[e] <= vset]
            for s in range(len(candidate_edges) + 1):
                for es in itertools.combinations(candidate_edges, s):
                    yield g.subgraph(vs, es)


def graph_to_json(g: Graph) -> dict:
    """Deterministic JSON form: canonically sorted vertices with types and edges."""
    from .canon import canonical_graph

    _, cg, _ = canonical_graph(g)
    verts = [[v, cg.vtype_of(v)] for v in cg.vertices]
    edges = [[sorted(cg.incidence[e]), cg.etype_of(e)] for e in cg.edges]
    return {"vertices": verts, "edges": edges}


def graph_from_json(data: dict, typegraph: Optional[TypeGraph] = None) -> Graph:
    vt = {}
    inc = {}
    et = {}
    for v, t in data["vertices"]:
        if t is not None:
            vt[v] = t
    for j, (ends, t) in enumerate(data["edges"]):
        inc[j] = frozenset(ends)
        if t is not None:
            et[j] = t
    n = len(data["vertices"])
    if typegraph is None and not vt and not et:
        return Graph([v for v, _ in data["vertices"]], range(len(data["edges"])), inc)
    return Graph([v for v, _ in data["vertices"]], range(len(data["edges"])), inc, vt, et, typegraph)


def graph_digest(g: Graph) -> str:
    """Short stable digest of the canonical form, for logs and JSON exports."""
    import hashlib

    from .canon import canonical_key

    return hashlib.sha256(repr(canonical_key(g)).encode()).hexdigest()[:16]

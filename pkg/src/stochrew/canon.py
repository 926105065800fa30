"""Canonical forms for graphs up to isomorphism.

The labeling algorithm is degree/type refinement followed by
individualization backtracking: vertices are partitioned into color classes
by iterated neighborhood signatures (multiedges contribute multiplicity,
loops contribute their own type), and non-singleton cells are split by trying
each member in turn.  The certificate minimum over all leaves is the
canonical key; two graphs have equal keys iff they are isomorphic, typing
included.

Vertices may be *pinned* to fixed initial colors, which canonicalizes an
object relative to a previously fixed part - the mechanism behind canonical
keys for rules and nested conditions.
"""

from __future__ import annotations

from typing import Mapping, Optional

from .graphs import Graph, Morphism


def _adjacency(g: Graph):
    """Cached per-vertex structure: interned neighbor lists and base signatures.

    Returns ``(index, nbrs, base)`` with ``index`` mapping vertex id to a
    dense position, ``nbrs[i]`` a tuple of (edge-type-rank, neighbor-position)
    pairs, and ``base[i]`` an iso-invariant starting signature (vertex type,
    loop multiset, degree).
    """
    if g._adj is None:
        index = {v: i for i, v in enumerate(g.vertices)}
        etypes = sorted({g.etype_of(e) or "" for e in g.edges})
        erank = {t: i for i, t in enumerate(etypes)}
        n = len(index)
        nbrs = [[] for _ in range(n)]
        loops = [[] for _ in range(n)]
        for e in g.edges:
            ends = g.incidence[e]
            t = erank[g.etype_of(e) or ""]
            if len(ends) == 1:
                (v,) = ends
                loops[index[v]].append(t)
            else:
                u, v = ends
                nbrs[index[u]].append((t, index[v]))
                nbrs[index[v]].append((t, index[u]))
        base = [
            (g.vtype_of(v) or "", tuple(sorted(loops[index[v]])), len(nbrs[index[v]]))
            for v in g.vertices
        ]
        g._adj = (index, [tuple(x) for x in nbrs], base)
    return g._adj


def _refine_list(nbrs, colors: list) -> list:
    """Iterate neighborhood-signature refinement to a stable partition."""
    n = len(colors)
    ncolors = len(set(colors))
    if ncolors == n:
        return colors
    while True:
        sigs = [
            (colors[i], tuple(sorted([(t, colors[o]) for t, o in nbrs[i]])))
            for i in range(n)
        ]
        ranking = {s: r for r, s in enumerate(sorted(set(sigs)))}
        nnew = len(ranking)
        if nnew == ncolors:
            return colors
        colors = [ranking[s] for s in sigs]
        if nnew == n:
            return colors
        ncolors = nnew


def _initial_colors(g: Graph, pinned: Optional[Mapping[int, int]]) -> list:
    index, nbrs, base = _adjacency(g)
    if pinned:
        pin = {index[v]: r for v, r in pinned.items()}
        raw = [(1, base[i]) if i not in pin else (0, pin[i]) for i in range(len(base))]
    else:
        raw = [(1, b) for b in base]
    ranking = {c: r for r, c in enumerate(sorted(set(raw)))}
    return [ranking[c] for c in raw]


def _certificate(g: Graph, order: list) -> tuple:
    pos = {v: i for i, v in enumerate(order)}
    vpart = tuple(g.vtype_of(v) or "" for v in order)
    records = sorted(
        (tuple(sorted(pos[v] for v in g.incidence[e])), g.etype_of(e) or "") for e in g.edges
    )
    return (g.num_vertices, g.num_edges, vpart, tuple(records))


def _search(g: Graph, pinned, want_all: bool):
    index, nbrs, _ = _adjacency(g)
    verts = list(g.vertices)
    n = len(verts)
    best = {"cert": None, "orders": []}

    def rec(colors):
        colors = _refine_list(nbrs, colors)
        cells: dict = {}
        for i in range(n):
            cells.setdefault(colors[i], []).append(i)
        target = None
        for c in sorted(cells):
            if len(cells[c]) > 1:
                target = cells[c]
                break
        if target is None:
            order = [verts[i] for c in sorted(cells) for i in cells[c]]
            cert = _certificate(g, order)
            if best["cert"] is None or cert < best["cert"]:
                best["cert"] = cert
                best["orders"] = [order]
            elif want_all and cert == best["cert"]:
                best["orders"].append(order)
            return
        for i in target:
            rec([c * 2 + (0 if j == i else 1) for j, c in enumerate(colors)])

    rec(_initial_colors(g, pinned))
    return best["cert"], best["orders"]


def canonical_key(g: Graph, pinned: Optional[Mapping[int, int]] = None) -> tuple:
    """The canonical certificate; equal iff graphs are isomorphic (typed)."""
    if pinned is not None:
        return _search(g, pinned, want_all=False)[0]
    if g._canon is None:
        cert, orders = _search(g, None, want_all=False)
        g._canon = (cert, orders[0], None, None)
    return g._canon[0]


def _edge_order(g: Graph, order: list) -> list:
    pos = {v: i for i, v in enumerate(order)}
    return sorted(
        g.edges,
        key=lambda e: (tuple(sorted(pos[v] for v in g.incidence[e])), g.etype_of(e) or "", e),
    )


def canonical_graph(g: Graph) -> tuple[tuple, Graph, Morphism]:
    """Canonical representative of the iso class, with the relabeling iso."""
    if g._canon is None:
        cert, orders = _search(g, None, want_all=False)
        g._canon = (cert, orders[0], None, None)
    cert, order, cg, iso = g._canon
    if cg is None:
        eorder = _edge_order(g, order)
        vmap = {v: i for i, v in enumerate(order)}
        emap = {e: i for i, e in enumerate(eorder)}
        cg = g.relabel(vmap, emap)
        iso = Morphism(g, cg, vmap, emap, check=False)
        g._canon = (cert, order, cg, iso)
    return cert, cg, iso


def min_labelings(g: Graph, pinned: Optional[Mapping[int, int]] = None):
    """All vertex orders achieving the canonical certificate (automorphic ties).

    Each order induces an edge order too; returns ``(cert, [(vmap, emap), ...])``.
    """
    cert, orders = _search(g, pinned, want_all=True)
    seen = set()
    out = []
    for order in orders:
        t = tuple(order)
        if t in seen:
            continue
        seen.add(t)
        vmap = {v: i for i, v in enumerate(order)}
        emap = {e: i for i, e in enumerate(_edge_order(g, order))}
        out.append((vmap, emap))
    return cert, out


def iso_exists(a: Graph, b: Graph) -> bool:
    return canonical_key(a) == canonical_key(b)


class LabelGraphBuilder:
    """Accumulates a free-labeled graph; backs canonical rule/condition keys.

    Structured values (rule spans, condition trees) are flattened into one
    labeled graph whose canonical form is a complete isomorphism invariant,
    so a single labeling search keys the whole structure.
    """

    __slots__ = ("labels", "links")

    def __init__(self):
        self.labels = []
        self.links = []

    def node(self, label: str) -> int:
        self.labels.append(label)
        return len(self.labels) - 1

    def link(self, a: int, b: int, label: str):
        self.links.append((frozenset((a, b)), label))

    def graph(self) -> Graph:
        from .graphs import FREE_TYPING

        inc = {j: ends for j, (ends, _) in enumerate(self.links)}
        et = {j: t for j, (_, t) in enumerate(self.links)}
        return Graph(
            range(len(self.labels)),
            range(len(self.links)),
            inc,
            dict(enumerate(self.labels)),
            et,
            FREE_TYPING,
        )

"""Nested application conditions over graphs.

A condition over a root graph X is one of: true, ∃(f: X↪Y, inner) for a mono
f and an inner condition over Y, ¬c, or c₁ ∧ c₂.  A condition rooted at the
empty graph is a constraint and expresses a global property of states.

Satisfaction of ∃(f, c) by a mono h: X↪Z asks for a mono g: Y↪Z with
g∘f = h and g ⊨ c.  ``shift`` transports a condition along a mono so that
satisfaction is preserved; ``trans`` transports a condition backwards through
a rule span so that a match satisfies the transported condition exactly when
the comatch of the induced rewrite satisfies the original one.
"""

from __future__ import annotations

import itertools
from typing import Optional

from .canon import min_labelings
from .graphs import (
    Graph,
    GraphError,
    Morphism,
    empty_graph,
    enumerate_monos,
    initial_morphism,
    pushout,
    pushout_complement,
)

FALSE_PROVEN = "false-proven"
SATISFIABLE = "satisfiable-witnessed"
UNKNOWN = "unknown"

EQUIVALENT = "equivalent-up-to-bound"
INEQUIVALENT = "inequivalent-witnessed"


class Condition:
    """Base class; use the concrete constructors below."""

    __slots__ = ("root", "_ckey")

    def __init__(self, root: Graph):
        self.root = root
        self._ckey = None


class CondTrue(Condition):
    __slots__ = ()

    def __repr__(self):
        return "true"


class CondExists(Condition):
    __slots__ = ("embed", "inner")

    def __init__(self, embed: Morphism, inner: Optional[Condition] = None):
        if not embed.is_mono:
            raise GraphError("condition embeddings must be monic")
        super().__init__(embed.source)
        self.embed = embed
        self.inner = inner if inner is not None else CondTrue(embed.target)
        if not self.inner.root.same_as(embed.target):
            raise GraphError("inner condition rooted away from the embedding target")

    def __repr__(self):
        return f"exists[+{self.embed.target.size - self.root.size}]({self.inner!r})"


class CondNot(Condition):
    __slots__ = ("inner",)

    def __init__(self, inner: Condition):
        super().__init__(inner.root)
        self.inner = inner

    def __repr__(self):
        return f"not({self.inner!r})"


class CondAnd(Condition):
    __slots__ = ("left", "right")

    def __init__(self, left: Condition, right: Condition):
        if not left.root.same_as(right.root):
            raise GraphError("conjunction of conditions with different roots")
        super().__init__(left.root)
        self.left = left
        self.right = right

    def __repr__(self):
        return f"({self.left!r} and {self.right!r})"


def cond_true(root: Graph) -> Condition:
    return CondTrue(root)


def cond_false(root: Graph) -> Condition:
    return CondNot(CondTrue(root))


def cond_forall(embed: Morphism, inner: Condition) -> Condition:
    """∀(f, c) := ¬∃(f, ¬c)."""
    return CondNot(CondExists(embed, CondNot(inner)))


def cond_and_all(root: Graph, parts) -> Condition:
    parts = list(parts)
    if not parts:
        return CondTrue(root)
    out = parts[0]
    for p in parts[1:]:
        out = CondAnd(out, p)
    return out


def cond_or_all(root: Graph, parts) -> Condition:
    parts = list(parts)
    if not parts:
        return cond_false(root)
    return CondNot(cond_and_all(root, [CondNot(p) for p in parts]))


def is_true_const(c: Condition) -> bool:
    return isinstance(c, CondTrue)


def is_false_const(c: Condition) -> bool:
    return isinstance(c, CondNot) and isinstance(c.inner, CondTrue)


# ---------------------------------------------------------------------------
# satisfaction


def _check_root(h: Morphism, c: Condition):
    if not h.source.same_as(c.root):
        raise GraphError("morphism source does not match the condition root")


def satisfies(h: Morphism, c: Condition) -> bool:
    """Does the mono ``h: X↪Z`` satisfy the condition over X?"""
    _check_root(h, c)
    if isinstance(c, CondTrue):
        return True
    if isinstance(c, CondNot):
        return not satisfies(h, c.inner)
    if isinstance(c, CondAnd):
        return satisfies(h, c.left) and satisfies(h, c.right)
    assert isinstance(c, CondExists)
    f = c.embed
    pinned_v = {f.vmap[x]: h.vmap[x] for x in f.source.vertices}
    pinned_e = {f.emap[e]: h.emap[e] for e in f.source.edges}
    for g in enumerate_monos(f.target, h.target, pinned_v, pinned_e):
        if satisfies(g, c.inner):
            return True
    return False


def object_satisfies(z: Graph, constraint: Condition) -> bool:
    """Z ⊨ c_∅ via the unique morphism from the empty graph."""
    if constraint.root.size != 0:
        raise GraphError("constraints must be rooted at the empty graph")
    h = Morphism(constraint.root, z, {}, {}, check=False)
    return satisfies(h, constraint)


# ---------------------------------------------------------------------------
# shift: transport along a mono


def _overlap_cospans(f: Morphism, a: Morphism):
    """All jointly-epic mono cospans (Y↪Y', X'↪Y') commuting over X.

    ``f: X↪Y`` is the shift morphism, ``a: X↪X'`` the condition context.
    Every cospan corresponds to exactly one partial monic overlap between the
    parts of Y and X' beyond their shared X image; the trivial (empty)
    overlap yields the pushout of ``(f, a)``.
    """
    x, y, xp = f.source, f.target, a.target
    base_v = {f.vmap[v]: a.vmap[v] for v in x.vertices}
    base_e = {f.emap[e]: a.emap[e] for e in x.edges}
    free_yv = [v for v in y.vertices if v not in base_v]
    free_xv = [v for v in xp.vertices if v not in set(base_v.values())]
    free_ye = [e for e in y.edges if e not in base_e]
    free_xe = [e for e in xp.edges if e not in set(base_e.values())]

    out = []

    def edge_compatible(ey, ex, vmatch):
        if y.etype_of(ey) != xp.etype_of(ex):
            return False
        trans = []
        for v in y.incidence[ey]:
            if v in base_v:
                trans.append(base_v[v])
            elif v in vmatch:
                trans.append(vmatch[v])
            else:
                return False
        return frozenset(trans) == xp.incidence[ex]

    def match_edges(vmatch):
        pairs = [
            (ey, ex)
            for ey in free_ye
            for ex in free_xe
            if edge_compatible(ey, ex, vmatch)
        ]

        def rec_e(i, ematch, used):
            if i == len(pairs):
                out.append((dict(vmatch), dict(ematch)))
                return
            ey, ex = pairs[i]
            rec_e(i + 1, ematch, used)
            if ey not in ematch and ex not in used:
                ematch[ey] = ex
                used.add(ex)
                rec_e(i + 1, ematch, used)
                del ematch[ey]
                used.discard(ex)

        rec_e(0, {}, set())

    def rec_v(i, vmatch):
        if i == len(free_yv):
            match_edges(vmatch)
            return
        v = free_yv[i]
        rec_v(i + 1, vmatch)
        for w in free_xv:
            if w in vmatch.values():
                continue
            if y.vtype_of(v) != xp.vtype_of(w):
                continue
            vmatch[v] = w
            rec_v(i + 1, vmatch)
            del vmatch[v]

    rec_v(0, {})

    cospans = []
    for vmatch, ematch in out:
        mv = list(base_v) + list(vmatch)
        me = list(base_e) + list(ematch)
        m = y.subgraph(mv, me)
        u = Morphism(m, y, {v: v for v in mv}, {e: e for e in me}, check=False)
        wmap_v = {v: base_v.get(v, vmatch.get(v)) for v in mv}
        wmap_e = {e: base_e.get(e, ematch.get(e)) for e in me}
        w = Morphism(m, xp, wmap_v, wmap_e, check=False)
        _, inl, inr = pushout(u, w)
        cospans.append((inl, inr))
    return cospans


def shift(f: Morphism, c: Condition) -> Condition:
    """Condition over Y with:  g∘f ⊨ c  ⇔  g ⊨ shift(f, c)  for all monos g."""
    _check_root(f, c)
    y = f.target
    if isinstance(c, CondTrue):
        return CondTrue(y)
    if isinstance(c, CondNot):
        return CondNot(shift(f, c.inner))
    if isinstance(c, CondAnd):
        return CondAnd(shift(f, c.left), shift(f, c.right))
    assert isinstance(c, CondExists)
    parts = []
    for a_prime, f_prime in _overlap_cospans(f, c.embed):
        parts.append(CondExists(a_prime, shift(f_prime, c.inner)))
    return cond_or_all(y, parts)


# ---------------------------------------------------------------------------
# trans: transport backwards through a rule span


def trans(o: Morphism, i: Morphism, c: Condition) -> Condition:
    """Pull a condition over the span output O back to the span input I.

    The span is ``O ←o– K –i→ I`` with both legs monic, applied input-to-
    output.  Each ∃ layer is transported by reversing the rule on the layer's
    context object: the output square of a rewrite is a pushout in both DPO
    and SqPO semantics, so the reversal is a pushout complement; a layer whose
    complement does not exist (the context hangs an edge onto a created
    element) transports to false.
    """
    if not c.root.same_as(o.target):
        raise GraphError("condition is not rooted at the span output")
    big_i = i.target
    if isinstance(c, CondTrue):
        return CondTrue(big_i)
    if isinstance(c, CondNot):
        return CondNot(trans(o, i, c.inner))
    if isinstance(c, CondAnd):
        return CondAnd(trans(o, i, c.left), trans(o, i, c.right))
    assert isinstance(c, CondExists)
    a = c.embed  # O ↪ O'
    poc = pushout_complement(o, a)
    if poc is None:
        return cond_false(big_i)
    k_to_kp, kp_to_op = poc
    _, b, kp_to_ip = pushout(i, k_to_kp)  # b: I ↪ I'
    inner = trans(kp_to_op, kp_to_ip, c.inner)
    return CondExists(b, inner)


# ---------------------------------------------------------------------------
# normalization and canonical keys


def identity_labeling(g: Graph) -> tuple[dict, dict]:
    vrank = {v: k for k, v in enumerate(g.vertices)}
    erank = {e: k for k, e in enumerate(g.edges)}
    return vrank, erank


def encode_condition(b, c: Condition, elems: dict) -> int:
    """Add a condition tree to a label-graph builder; returns its root node.

    ``elems`` maps the root graph's elements (("v", id) / ("e", id)) to
    builder nodes.  Each ∃ layer materializes its context with ownership
    links to the layer node and map links from the parent context, so graph
    isomorphism of encodings coincides with structural condition equality up
    to context isomorphism.  Conjunctions are flattened (order independent).
    """
    if isinstance(c, CondTrue):
        return b.node("cT")
    if isinstance(c, CondNot):
        n = b.node("cN")
        b.link(n, encode_condition(b, c.inner, elems), "ch")
        return n
    if isinstance(c, CondAnd):
        n = b.node("cA")
        stack = [c.left, c.right]
        while stack:
            child = stack.pop()
            if isinstance(child, CondAnd):
                stack.extend([child.left, child.right])
            else:
                b.link(n, encode_condition(b, child, elems), "ch")
        return n
    assert isinstance(c, CondExists)
    n = b.node("cE")
    y = c.embed.target
    yelems = {}
    for v in y.vertices:
        yelems[("v", v)] = b.node(f"Cv:{y.vtype_of(v) or ''}")
    for e in y.edges:
        yelems[("e", e)] = b.node(f"Ce:{y.etype_of(e) or ''}:{len(y.incidence[e])}")
        for v in y.incidence[e]:
            b.link(yelems[("e", e)], yelems[("v", v)], "inc")
    for key, nid in yelems.items():
        b.link(n, nid, "own")
    for x in c.embed.source.vertices:
        b.link(elems[("v", x)], yelems[("v", c.embed.vmap[x])], "fm")
    for e in c.embed.source.edges:
        b.link(elems[("e", e)], yelems[("e", c.embed.emap[e])], "fm")
    b.link(n, encode_condition(b, c.inner, yelems), "ch")
    return n


def cond_key(c: Condition, vrank: Optional[dict] = None, erank: Optional[dict] = None) -> tuple:
    """Canonical key of a condition relative to a labeling of its root.

    Keys are isomorphism invariants of the pair (embedding, inner condition)
    at every ∃ layer; conjunction keys are order independent.
    """
    from .canon import LabelGraphBuilder, canonical_key

    use_cache = vrank is None
    if use_cache:
        if c._ckey is not None:
            return c._ckey
        vrank, erank = identity_labeling(c.root)
    b = LabelGraphBuilder()
    elems = {}
    for v in c.root.vertices:
        elems[("v", v)] = b.node(f"R:{vrank[v]}")
    for e in c.root.edges:
        elems[("e", e)] = b.node(f"Re:{erank[e]}")
    encode_condition(b, c, elems)
    key = canonical_key(b.graph())
    if use_cache:
        c._ckey = key
    return key


def _pull_iso(c: Condition, via: Morphism) -> Condition:
    """Re-root a condition backwards along an iso ``via: X→root(c)``."""
    root = via.source
    if isinstance(c, CondTrue):
        return CondTrue(root)
    if isinstance(c, CondNot):
        return CondNot(_pull_iso(c.inner, via))
    if isinstance(c, CondAnd):
        return CondAnd(_pull_iso(c.left, via), _pull_iso(c.right, via))
    assert isinstance(c, CondExists)
    return CondExists(via.then(c.embed), c.inner)


def _hits_forbidden(g: Graph, forbidden) -> bool:
    return any(enumerate_monos(f, g) for f in forbidden)


def normalize(c: Condition, forbidden=()) -> Condition:
    """Constant-fold, collapse double negation, flatten/sort/dedupe conjunctions.

    ∃ layers along isomorphisms are transparent and collapse into their inner
    condition.  When ``forbidden`` subgraphs are given (the model's global
    negative constraints), an ∃ layer whose context contains one is false on
    every constraint-satisfying state and is pruned to the false constant;
    this normalizes conditions to representatives of their equivalence class
    relative to the constraints.
    """
    if isinstance(c, CondTrue):
        return c
    if isinstance(c, CondNot):
        inner = normalize(c.inner, forbidden)
        if isinstance(inner, CondNot):
            return inner.inner
        return CondNot(inner)
    if isinstance(c, CondExists):
        if forbidden and _hits_forbidden(c.embed.target, forbidden):
            return cond_false(c.root)
        if c.embed.is_iso:
            return normalize(_pull_iso(c.inner, c.embed), forbidden)
        inner = normalize(c.inner, forbidden)
        if is_false_const(inner):
            return cond_false(c.root)
        return CondExists(c.embed, inner)
    assert isinstance(c, CondAnd)
    parts = []
    stack = [c.left, c.right]
    while stack:
        node = stack.pop()
        if isinstance(node, CondAnd):
            stack.extend([node.left, node.right])
        else:
            parts.append(normalize(node, forbidden))
    kept = []
    seen = set()
    vrank, erank = identity_labeling(c.root)
    for p in sorted(parts, key=lambda p: cond_key(p, vrank, erank)):
        if is_true_const(p):
            continue
        if is_false_const(p):
            return cond_false(c.root)
        k = cond_key(p, vrank, erank)
        if k in seen:
            continue
        seen.add(k)
        kept.append(p)
    return cond_and_all(c.root, kept)


def condition_size(c: Condition) -> int:
    """Total size of all context graphs in the condition."""
    if isinstance(c, CondTrue):
        return 0
    if isinstance(c, CondNot):
        return condition_size(c.inner)
    if isinstance(c, CondAnd):
        return condition_size(c.left) + condition_size(c.right)
    assert isinstance(c, CondExists)
    return c.embed.target.size + condition_size(c.inner)


# ---------------------------------------------------------------------------
# satisfiability and equivalence, bounded


def _extensions(g: Graph):
    """One-element extensions of g: a fresh vertex, or a new edge/loop."""
    tg = g.typegraph
    nv = max(g.vertices, default=-1) + 1
    ne = max(g.edges, default=-1) + 1
    exts = []
    vtypes = sorted(tg.vertices) if tg is not None else [None]
    for t in vtypes:
        vt = None if tg is None else {**g.vtype, nv: t}
        et = None if tg is None else dict(g.etype)
        exts.append(
            Graph(list(g.vertices) + [nv], g.edges, g.incidence, vt, et, tg)
        )
    if tg is None:
        pairs = [frozenset([v]) for v in g.vertices]
        pairs += [frozenset(p) for p in itertools.combinations(g.vertices, 2)]
        for ends in pairs:
            inc = dict(g.incidence)
            inc[ne] = ends
            exts.append(Graph(g.vertices, list(g.edges) + [ne], inc))
    else:
        for name, ends_t in sorted(tg.edges.items()):
            if len(ends_t) == 1:
                (t,) = ends_t
                cands = [frozenset([v]) for v in g.vertices if g.vtype[v] == t]
            else:
                t1, t2 = sorted(ends_t)
                cands = [
                    frozenset([u, v])
                    for u in g.vertices
                    for v in g.vertices
                    if u < v and {g.vtype[u], g.vtype[v]} == set(ends_t)
                ]
            for ends in cands:
                inc = dict(g.incidence)
                inc[ne] = ends
                et = dict(g.etype)
                et[ne] = name
                exts.append(Graph(g.vertices, list(g.edges) + [ne], inc, dict(g.vtype), et, tg))
    return exts


def _pair_key(h: Morphism):
    pins = {h.vmap[v]: k for k, v in enumerate(h.source.vertices)}
    cert, labelings = min_labelings(h.target, pins)
    erank = {e: k for k, e in enumerate(h.source.edges)}
    best = None
    for _, emap_l in labelings:
        epin = tuple(sorted((emap_l[h.emap[e]], erank[e]) for e in h.source.edges))
        if best is None or epin < best:
            best = epin
    return (cert, best)


def _extension_search(root: Graph, bound: int, cap: int):
    """Yield monos root↪Z over all extensions of root by at most ``bound`` elements."""
    start = Morphism.identity(root)
    frontier = [start]
    seen = {_pair_key(start)}
    yield start
    count = 1
    for _ in range(bound):
        nxt = []
        for h in frontier:
            for z in _extensions(h.target):
                h2 = Morphism(h.source, z, dict(h.vmap), dict(h.emap), check=False)
                k = _pair_key(h2)
                if k in seen:
                    continue
                seen.add(k)
                count += 1
                yield h2
                nxt.append(h2)
                if count >= cap:
                    return
        frontier = nxt


def default_bound(c: Condition) -> int:
    return c.root.size + condition_size(c) + 2


def is_provably_false(c: Condition, bound: Optional[int] = None, cap: int = 4000):
    """Sound tri-state satisfiability check.

    Returns ``(status, witness)``: FALSE_PROVEN only on syntactic
    contradiction (the bounded search never proves emptiness since the bound
    is not exhaustive in general), SATISFIABLE with a witness morphism, else
    UNKNOWN.
    """
    n = normalize(c)
    if is_false_const(n):
        return FALSE_PROVEN, None
    if bound is None:
        bound = default_bound(c)
    for h in _extension_search(c.root, bound, cap):
        if satisfies(h, c):
            return SATISFIABLE, h
    return UNKNOWN, None


def conditions_equivalent(c1: Condition, c2: Condition, bound: int = 3, cap: int = 4000):
    """Test the defining bi-implication on all monos into bounded extensions."""
    if not c1.root.same_as(c2.root):
        raise GraphError("conditions rooted at different objects")
    vrank, erank = identity_labeling(c1.root)
    if cond_key(normalize(c1), vrank, erank) == cond_key(normalize(c2), vrank, erank):
        return EQUIVALENT, None
    for h in _extension_search(c1.root, bound, cap):
        h2 = Morphism(c2.root, h.target, dict(h.vmap), dict(h.emap), check=False)
        if satisfies(h, c1) != satisfies(h2, c2):
            return INEQUIVALENT, h
    return EQUIVALENT, None


def condition_sketch(c: Condition) -> str:
    """Compact human-readable rendering used by the CLI printers."""
    if isinstance(c, CondTrue):
        return "true"
    if is_false_const(c):
        return "false"
    if isinstance(c, CondNot):
        return f"not {condition_sketch(c.inner)}"
    if isinstance(c, CondAnd):
        return f"({condition_sketch(c.left)} and {condition_sketch(c.right)})"
    assert isinstance(c, CondExists)
    y, x = c.embed.target, c.root
    extra = f"+{y.num_vertices - x.num_vertices}v+{y.num_edges - x.num_edges}e"
    if isinstance(c.inner, CondTrue):
        return f"exists[{extra}]"
    return f"exists[{extra}]({condition_sketch(c.inner)})"

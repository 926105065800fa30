"""Linear rewriting rules with conditions and their direct derivations.

A rule is a span of monos  O ←o– K –i→ I  together with an application
condition over the input I.  Rules rewrite input-to-output: a match is a mono
m: I↪X.  Two semantics are supported:

* DPO: the input square is a pushout complement (a match with dangling edges
  is rejected), the output square a pushout.
* SqPO: the input square is a final pullback complement (deleting a vertex
  silently deletes its incident edges), the output square a pushout.

The reverse direction (matching the output into a host and completing by
pushout complement) gives DPO† comatches, used by rule composition.
"""

from __future__ import annotations

from typing import Optional

from .canon import canonical_graph, canonical_key
from .conditions import Condition, cond_true, normalize, satisfies
from .graphs import (
    Graph,
    GraphError,
    Morphism,
    empty_graph,
    enumerate_monos,
    final_pullback_complement,
    pushout,
    pushout_complement,
)

DPO = "dpo"
SQPO = "sqpo"
SEMANTICS = (DPO, SQPO)


class Rule:
    """A linear rule with condition: span O ←o– K –i→ I plus cond over I."""

    __slots__ = ("output", "context", "input", "o", "i", "cond", "name", "_key", "_ncond")

    def __init__(
        self,
        o: Morphism,
        i: Morphism,
        cond: Optional[Condition] = None,
        name: Optional[str] = None,
    ):
        if not o.source.same_as(i.source):
            raise GraphError("rule legs must share the context graph")
        if not (o.is_mono and i.is_mono):
            raise GraphError("rule legs must be monic (linear rules only)")
        self.output = o.target
        self.context = o.source
        self.input = i.target
        self.o = o
        self.i = i
        self.cond = cond if cond is not None else cond_true(self.input)
        if not self.cond.root.same_as(self.input):
            raise GraphError("rule condition must be rooted at the input")
        self.name = name
        self._key = None
        self._ncond = None

    def __repr__(self):
        n = f" {self.name}" if self.name else ""
        return (
            f"Rule{n}({self.output.num_vertices}v{self.output.num_edges}e"
            f" <- {self.context.num_vertices}v{self.context.num_edges}e"
            f" -> {self.input.num_vertices}v{self.input.num_edges}e)"
        )

    def reversed(self, cond: Optional[Condition] = None, name=None) -> "Rule":
        """The opposite span; any input condition must be supplied anew."""
        return Rule(self.i, self.o, cond, name)

    def is_identity_span(self) -> bool:
        return (
            self.o.is_iso
            and self.i.is_iso
            and self.o.vmap == self.i.vmap
            and self.o.emap == self.i.emap
        )


def identity_rule(p: Graph, cond: Optional[Condition] = None, name=None) -> Rule:
    ident = Morphism.identity(p)
    return Rule(ident, ident, cond, name)


def empty_rule(typegraph=None) -> Rule:
    e = empty_graph(typegraph)
    return identity_rule(e, name="empty")


# ---------------------------------------------------------------------------
# canonical rule keys
#
# The span is encoded as a single typed graph whose nodes are the vertices
# *and edges* of O, K and I (so edge maps become vertex maps), with incidence
# links plus o-map and i-map links.  The canonical form of that encoding is a
# complete isomorphism invariant of the span; the condition key is computed
# relative to the induced labeling of I and minimized over automorphic ties.


def rule_key(rule: Rule) -> tuple:
    """Canonical key: equal iff rules are isomorphic with equal normalized conditions.

    The span and its normalized condition are flattened into one labeled
    graph (edges become nodes so the span's edge maps are expressible) whose
    canonical form is the key.
    """
    if rule._key is not None:
        return rule._key
    from .canon import LabelGraphBuilder
    from .conditions import encode_condition

    b = LabelGraphBuilder()
    ids = {}
    for tag, g in (("O", rule.output), ("K", rule.context), ("I", rule.input)):
        for v in g.vertices:
            ids[(tag, "v", v)] = b.node(f"{tag}v:{g.vtype_of(v) or ''}")
        for e in g.edges:
            ids[(tag, "e", e)] = b.node(f"{tag}e:{g.etype_of(e) or ''}:{len(g.incidence[e])}")
            for v in g.incidence[e]:
                b.link(ids[(tag, "e", e)], ids[(tag, "v", v)], "inc")
    for v in rule.context.vertices:
        b.link(ids[("K", "v", v)], ids[("O", "v", rule.o.vmap[v])], "om")
        b.link(ids[("K", "v", v)], ids[("I", "v", rule.i.vmap[v])], "im")
    for e in rule.context.edges:
        b.link(ids[("K", "e", e)], ids[("O", "e", rule.o.emap[e])], "om")
        b.link(ids[("K", "e", e)], ids[("I", "e", rule.i.emap[e])], "im")
    elems = {}
    for v in rule.input.vertices:
        elems[("v", v)] = ids[("I", "v", v)]
    for e in rule.input.edges:
        elems[("e", e)] = ids[("I", "e", e)]
    if rule._ncond is None:
        rule._ncond = normalize(rule.cond)
    encode_condition(b, rule._ncond, elems)
    rule._key = canonical_key(b.graph())
    return rule._key


def rules_equal(r1: Rule, r2: Rule) -> bool:
    return rule_key(r1) == rule_key(r2)


def rule_sketch(rule: Rule) -> str:
    from .conditions import condition_sketch

    def part(g: Graph):
        return f"{g.num_vertices}v{g.num_edges}e"

    s = f"({part(rule.output)} <- {part(rule.context)} -> {part(rule.input)})"
    c = condition_sketch(normalize(rule.cond))
    if c != "true":
        s += f" where {c}"
    if rule.name:
        s = f"{rule.name} {s}"
    return s


# ---------------------------------------------------------------------------
# matches and derivations


def admissible_matches(rule: Rule, x: Graph, semantics: str) -> list[Morphism]:
    """All admissible matches m: I↪X, deterministically ordered.

    Both semantics require the application condition to hold; DPO in addition
    requires the pushout complement of (i, m) to exist.
    """
    if semantics not in SEMANTICS:
        raise ValueError(f"unknown semantics {semantics!r}")
    out = []
    for m in enumerate_monos(rule.input, x):
        if semantics == DPO and pushout_complement(rule.i, m) is None:
            continue
        if not satisfies(m, rule.cond):
            continue
        out.append(m)
    return out


class DirectDerivation:
    """The full double square of one rewrite step.

    ``o*, i*`` are the bottom span legs C→Y and C→X; ``comatch`` embeds the
    rule output into the (canonicalized) result.
    """

    __slots__ = ("rule", "semantics", "match", "k_to_c", "c_to_x", "comatch", "c_to_y", "result")

    def __init__(self, rule, semantics, match, k_to_c, c_to_x, comatch, c_to_y, result):
        self.rule = rule
        self.semantics = semantics
        self.match = match
        self.k_to_c = k_to_c
        self.c_to_x = c_to_x
        self.comatch = comatch
        self.c_to_y = c_to_y
        self.result = result

    def to_json(self) -> dict:
        from .graphs import graph_to_json

        def mor(m):
            return {"v": {str(k): v for k, v in sorted(m.vmap.items())},
                    "e": {str(k): v for k, v in sorted(m.emap.items())}}

        return {
            "semantics": self.semantics,
            "input": graph_to_json(self.rule.input),
            "context": graph_to_json(self.rule.context),
            "output": graph_to_json(self.rule.output),
            "host": graph_to_json(self.match.target),
            "result": graph_to_json(self.result),
            "match": mor(self.match),
            "comatch": mor(self.comatch),
        }


def apply_rule(rule: Rule, m: Morphism, semantics: str) -> DirectDerivation:
    """Perform one direct derivation at an admissible match.

    The result object is canonicalized immediately, so equal inputs give
    identical (not merely isomorphic) outputs.
    """
    if semantics == DPO:
        poc = pushout_complement(rule.i, m)
        if poc is None:
            raise GraphError("match is not DPO-admissible (dangling condition)")
        k_to_c, c_to_x = poc
    elif semantics == SQPO:
        k_to_c, c_to_x = final_pullback_complement(rule.i, m)
    else:
        raise ValueError(f"unknown semantics {semantics!r}")
    if not satisfies(m, rule.cond):
        raise GraphError("match violates the application condition")
    y, o_star, c_to_y = pushout(rule.o, k_to_c)
    _, cy, iso = canonical_graph(y)
    return DirectDerivation(
        rule,
        semantics,
        m,
        k_to_c,
        c_to_x,
        o_star.then(iso),
        c_to_y.then(iso),
        cy,
    )


def dpo_dagger_matches(rule: Rule, y: Graph) -> list[Morphism]:
    """All comatches m*: O↪Y whose output square admits a pushout complement."""
    out = []
    for m in enumerate_monos(rule.output, y):
        if pushout_complement(rule.o, m) is not None:
            out.append(m)
    return out


def reverse_apply(rule: Rule, m_star: Morphism) -> Graph:
    """Reconstruct the source object of a DPO derivation from its comatch."""
    poc = pushout_complement(rule.o, m_star)
    if poc is None:
        raise GraphError("comatch is not DPO†-admissible")
    k_to_c, _ = poc
    x, _, _ = pushout(rule.i, k_to_c)
    return canonical_graph(x)[1]

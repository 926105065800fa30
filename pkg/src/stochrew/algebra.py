"""The rule algebra: formal linear combinations of rule classes.

Basis vectors are isomorphism classes of rules-with-conditions; the product
sums, over every admissible overlap of one rule's input with the other's
output, the composite rule built from the overlap diagram.  The canonical
representation turns rule vectors into operators on formal linear
combinations of graph iso-classes by summing over admissible matches.

Coefficients are exact: ``fractions.Fraction`` throughout the plain algebra,
or sympy expressions when rate parameters stay symbolic (the CTMC layer).
"""

from __future__ import annotations

import hashlib
from fractions import Fraction
from typing import Iterable, Optional

from .canon import canonical_graph, canonical_key
from .conditions import (
    CondAnd,
    _hits_forbidden,
    is_false_const,
    normalize,
    shift,
    trans,
)
from .graphs import (
    Graph,
    GraphError,
    Morphism,
    all_subgraphs,
    enumerate_monos,
    final_pullback_complement,
    pullback,
    pushout,
    pushout_complement,
)
from .rewriting import (
    DPO,
    SQPO,
    Rule,
    admissible_matches,
    apply_rule,
    empty_rule,
    rule_key,
    rule_sketch,
)


def _is_zero(c) -> bool:
    if isinstance(c, (int, Fraction)):
        return c == 0
    import sympy

    return sympy.expand(c) == 0


class RuleVector:
    """Finitely supported map from canonical rule classes to coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[dict] = None):
        self.terms = dict(terms or {})

    @staticmethod
    def delta(rule: Rule, coeff=Fraction(1)) -> "RuleVector":
        return RuleVector({rule_key(rule): (rule, coeff)})

    def __iter__(self):
        return iter(sorted(self.terms.items()))

    def __len__(self):
        return len(self.terms)

    def __bool__(self):
        return bool(self.terms)

    def coeff_of(self, rule: Rule):
        entry = self.terms.get(rule_key(rule))
        return entry[1] if entry else Fraction(0)

    def add_term(self, rule: Rule, coeff):
        key = rule_key(rule)
        if key in self.terms:
            old_rule, old = self.terms[key]
            new = old + coeff
            if _is_zero(new):
                del self.terms[key]
            else:
                self.terms[key] = (old_rule, new)
        elif not _is_zero(coeff):
            self.terms[key] = (rule, coeff)

    def __add__(self, other: "RuleVector") -> "RuleVector":
        out = RuleVector(self.terms)
        for _, (rule, coeff) in other.terms.items():
            out.add_term(rule, coeff)
        return out

    def __sub__(self, other: "RuleVector") -> "RuleVector":
        return self + other.scale(-1)

    def scale(self, factor) -> "RuleVector":
        if _is_zero(factor):
            return RuleVector()
        return RuleVector({k: (r, c * factor) for k, (r, c) in self.terms.items()})

    def __eq__(self, other):
        if not isinstance(other, RuleVector):
            return NotImplemented
        if set(self.terms) != set(other.terms):
            return False
        return all(_is_zero(self.terms[k][1] - other.terms[k][1]) for k in self.terms)

    def __hash__(self):
        raise TypeError("RuleVector is not hashable")

    def pretty(self) -> str:
        if not self.terms:
            return "0"
        bits = []
        for _, (rule, coeff) in sorted(self.terms.items()):
            bits.append(f"{coeff} * {rule_sketch(rule)}")
        return "\n".join(bits)

    def to_json(self) -> list:
        out = []
        for key, (rule, coeff) in sorted(self.terms.items()):
            digest = hashlib.sha256(repr(key).encode()).hexdigest()[:16]
            out.append({"rule": rule_sketch(rule), "digest": digest, "coeff": str(coeff)})
        return out


class StateVector:
    """Finitely supported map from canonical graph classes to coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[dict] = None):
        self.terms = dict(terms or {})

    @staticmethod
    def ket(g: Graph, coeff=Fraction(1)) -> "StateVector":
        key, cg, _ = canonical_graph(g)
        return StateVector({key: (cg, coeff)})

    def add_term(self, g: Graph, coeff):
        key, cg, _ = canonical_graph(g)
        if key in self.terms:
            old_g, old = self.terms[key]
            new = old + coeff
            if _is_zero(new):
                del self.terms[key]
            else:
                self.terms[key] = (old_g, new)
        elif not _is_zero(coeff):
            self.terms[key] = (cg, coeff)

    def __add__(self, other):
        out = StateVector(self.terms)
        for _, (g, c) in other.terms.items():
            out.add_term(g, c)
        return out

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, factor) -> "StateVector":
        if _is_zero(factor):
            return StateVector()
        return StateVector({k: (g, c * factor) for k, (g, c) in self.terms.items()})

    def __eq__(self, other):
        if not isinstance(other, StateVector):
            return NotImplemented
        if set(self.terms) != set(other.terms):
            return False
        return all(_is_zero(self.terms[k][1] - other.terms[k][1]) for k in self.terms)

    def __iter__(self):
        return iter(sorted(self.terms.items()))

    def __len__(self):
        return len(self.terms)


# ---------------------------------------------------------------------------
# rule composition


class CompositionMatch:
    """An admissible overlap of R2's input with R1's output, plus the diagram."""

    __slots__ = ("mu_i2", "mu_o1", "n21", "i21", "o21", "cond", "composite")

    def __init__(self, mu_i2, mu_o1, n21, i21, o21, cond, composite):
        self.mu_i2 = mu_i2  # M21 ↪ I2
        self.mu_o1 = mu_o1  # M21 ↪ O1
        self.n21 = n21
        self.i21 = i21
        self.o21 = o21
        self.cond = cond
        self.composite = composite


def _compose_along(r2: Rule, mu_i2: Morphism, mu_o1: Morphism, r1: Rule, semantics: str,
                   forbidden=()):
    """Build the composition diagram; returns a CompositionMatch or None.

    With ``forbidden`` given, composites whose input or output contains a
    forbidden subgraph are dropped: forbidden-pattern constraints are closed
    under subgraphs, so such rules admit no match from (and no result inside)
    any constraint-satisfying state and act as zero.
    """
    n21, inj_i2, inj_o1 = pushout(mu_i2, mu_o1)

    # reverse r1 through its comatch into N21: output squares are pushouts in
    # both semantics, so this is a pushout complement (may fail)
    poc1 = pushout_complement(r1.o, inj_o1)
    if poc1 is None:
        return None
    k1_to_kb1, kb1_to_n21 = poc1
    i21, inj_i1, kb1_to_i21 = pushout(r1.i, k1_to_kb1)

    # forward r2 at its match into N21
    if semantics == DPO:
        poc2 = pushout_complement(r2.i, inj_i2)
        if poc2 is None:
            return None
        k2_to_kb2, kb2_to_n21 = poc2
    else:
        k2_to_kb2, kb2_to_n21 = final_pullback_complement(r2.i, inj_i2)
    o21, inj_o2, kb2_to_o21 = pushout(r2.o, k2_to_kb2)

    if forbidden and (_hits_forbidden(i21, forbidden) or _hits_forbidden(o21, forbidden)):
        return None

    # composite span via span composition (pullback over N21)
    k21, to_kb2, to_kb1 = pullback(kb2_to_n21, kb1_to_n21)
    comp_o = to_kb2.then(kb2_to_o21)
    comp_i = to_kb1.then(kb1_to_i21)

    cond = CondAnd(
        shift(inj_i1, r1.cond),
        trans(kb1_to_n21, kb1_to_i21, shift(inj_i2, r2.cond)),
    )
    ncond = normalize(cond, forbidden)
    if is_false_const(ncond):
        return None
    composite = Rule(comp_o, comp_i, ncond)
    return CompositionMatch(mu_i2, mu_o1, n21, i21, o21, ncond, composite)


def enumerate_composition_matches(r2: Rule, r1: Rule, semantics: str,
                                  forbidden=()) -> list[CompositionMatch]:
    """All admissible overlaps: subgraphs of I2 mapped monically into O1.

    The index set is concrete and finite: one candidate per (subgraph of I2,
    mono into O1) pair, filtered by diagram constructability and by the
    composite condition not being provably false.
    """
    out = []
    for sub in all_subgraphs(r2.input):
        mu_i2 = Morphism(
            sub, r2.input, {v: v for v in sub.vertices}, {e: e for e in sub.edges}, check=False
        )
        for mu_o1 in enumerate_monos(sub, r1.output):
            cm = _compose_along(r2, mu_i2, mu_o1, r1, semantics, forbidden)
            if cm is not None:
                out.append(cm)
    return out


def compose(r2: Rule, mu: tuple[Morphism, Morphism], r1: Rule, semantics: str,
            forbidden=()) -> Rule:
    """Type-T composition of r2 with r1 along the overlap span mu = (M↪I2, M↪O1)."""
    mu_i2, mu_o1 = mu
    cm = _compose_along(r2, mu_i2, mu_o1, r1, semantics, forbidden)
    if cm is None:
        raise GraphError("overlap is not an admissible composition match")
    return cm.composite


def product(v2: RuleVector, v1: RuleVector, semantics: str, forbidden=()) -> RuleVector:
    """Bilinear extension of the sum over composition matches."""
    out = RuleVector()
    for _, (r2, c2) in v2.terms.items():
        for _, (r1, c1) in v1.terms.items():
            coeff = c2 * c1
            for cm in enumerate_composition_matches(r2, r1, semantics, forbidden):
                out.add_term(cm.composite, coeff)
    return out


def commutator(v1: RuleVector, v2: RuleVector, semantics: str, forbidden=()) -> RuleVector:
    return product(v1, v2, semantics, forbidden) - product(v2, v1, semantics, forbidden)


# ---------------------------------------------------------------------------
# canonical representation and jump closure


def represent(v: RuleVector, s: StateVector, semantics: str) -> StateVector:
    """ρ(v) applied to s: sum over all admissible matches of each rule term."""
    out = StateVector()
    for _, (rule, rc) in v.terms.items():
        for _, (g, gc) in s.terms.items():
            coeff = rc * gc
            for m in admissible_matches(rule, g, semantics):
                d = apply_rule(rule, m, semantics)
                out.add_term(d.result, coeff)
    return out


def jump_closure(v: RuleVector, semantics: str, forbidden=()) -> RuleVector:
    """Diagonal projection: each rule keeps its input, context and condition.

    DPO sends (O ← K → I; c) to (I ← K → I; c) with the input leg on both
    sides; SqPO sends it to the identity span on I with the same condition.
    """
    out = RuleVector()
    for _, (rule, coeff) in v.terms.items():
        cond = normalize(rule.cond, forbidden)
        if semantics == DPO:
            diag = Rule(rule.i, rule.i, cond)
        else:
            ident = Morphism.identity(rule.input)
            diag = Rule(ident, ident, cond)
        out.add_term(diag, coeff)
    return out


def dual_project(s: StateVector):
    """⟨| applied to a state vector: the sum of all coefficients."""
    total = None
    for _, (_, c) in s.terms.items():
        total = c if total is None else total + c
    return Fraction(0) if total is None else total


def observable_value(v: RuleVector, x: Graph, semantics: str):
    """Evaluate a diagonal rule vector on a state: Σ coeff · #matches."""
    total = Fraction(0)
    for _, (rule, coeff) in v.terms.items():
        total = total + coeff * len(admissible_matches(rule, x, semantics))
    return total


def is_diagonal_shape(rule: Rule) -> bool:
    """Observable shape: an iso ψ: O→I commuting with the two legs."""
    if rule.output.num_vertices != rule.input.num_vertices:
        return False
    if rule.output.num_edges != rule.input.num_edges:
        return False
    for psi in enumerate_monos(rule.output, rule.input):
        if not psi.is_iso:
            continue
        if all(psi.vmap[rule.o.vmap[v]] == rule.i.vmap[v] for v in rule.context.vertices) and all(
            psi.emap[rule.o.emap[e]] == rule.i.emap[e] for e in rule.context.edges
        ):
            return True
    return False

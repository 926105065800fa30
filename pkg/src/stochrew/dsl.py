"""Parser, compiler and formatter for the plain-text model language.

A model file declares a type graph, named patterns, global constraints,
rules with rates and optional application conditions, observables, parameter
bindings, an initial state and analysis directives.  Example::

    typegraph { vertex V; edge V - V : link; }
    semantics sqpo;

    pattern linked { a:V; b:V; e: a-b:link; }

    rule e_plus rate 1/2 eps_plus {
      input  { a:V; b:V; }
      output { a:V; b:V; e: a-b:link; }
      where not exists linked;
    }

    observable edges factor 1/2 { a:V; b:V; e: a-b:link; }
    param eps_plus = 1.0;
    init empty;

Rule inputs and outputs share a namespace: elements declared with the same
name on both sides form the preserved context.  Condition expressions extend
the current root by the named pattern, matching shared names; ``prop v : p;``
is sugar for the typed loop ``v - v : p;``.  Line comments start with ``#``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .conditions import (
    CondAnd,
    CondExists,
    CondNot,
    CondTrue,
    Condition,
    cond_false,
    cond_or_all,
)
from .graphs import Graph, Morphism, TypeGraph, empty_graph
from .rewriting import DPO, SQPO, Rule, identity_rule
from .stochastic import ModelSpec, ObservableDecl, Transition


@dataclass
class Span:
    line: int
    col: int
    end_line: int
    end_col: int

    def __str__(self):
        return f"{self.line}:{self.col}"


@dataclass
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    span: Span

    def __str__(self):
        return f"{self.span}: {self.severity}: {self.message}"


class DslError(Exception):
    def __init__(self, diagnostics):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


# ---------------------------------------------------------------------------
# tokens

_PUNCT = ("{", "}", "(", ")", ";", ":", "-", "=", ",")


@dataclass
class Token:
    kind: str  # "name" | "number" | punctuation | "eof"
    text: str
    span: Span


def tokenize(text: str):
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(text)
    diagnostics = []
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("name", text[i:j], Span(start_line, start_col, line, col + j - i)))
            col += j - i
            i = j
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                if text[j] == ".":
                    seen_dot = True
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            tokens.append(Token("number", text[i:j], Span(start_line, start_col, line, col + j - i)))
            col += j - i
            i = j
            continue
        if c in _PUNCT:
            tokens.append(Token(c, c, Span(start_line, start_col, line, col + 1)))
            i += 1
            col += 1
            continue
        diagnostics.append(
            Diagnostic("error", f"unexpected character {c!r}", Span(line, col, line, col + 1))
        )
        i += 1
        col += 1
    tokens.append(Token("eof", "", Span(line, col, line, col)))
    return tokens, diagnostics


# ---------------------------------------------------------------------------
# source AST


@dataclass
class ElemDecl:
    kind: str  # "vertex" | "edge"
    name: Optional[str]  # explicit edge name or vertex name
    vtype: Optional[str] = None  # vertex type
    ends: Optional[tuple] = None  # (name, name) for edges (equal names = loop)
    etype: Optional[str] = None
    span: Span = None


@dataclass
class CondExpr:
    kind: str  # "true" | "false" | "not" | "and" | "or" | "exists" | "forall"
    pattern: Optional[str] = None
    children: list = field(default_factory=list)
    span: Span = None


@dataclass
class TypeGraphDecl:
    vertices: list = field(default_factory=list)  # (name, span)
    edges: list = field(default_factory=list)  # (name1, name2, etype, span)
    loops: list = field(default_factory=list)  # (vname, etype, span)
    span: Span = None


@dataclass
class PatternDecl:
    name: str
    elems: list = field(default_factory=list)
    span: Span = None


@dataclass
class ConstraintDecl:
    expr: CondExpr = None
    span: Span = None


@dataclass
class RuleDecl:
    name: str
    semantics: Optional[str] = None
    rate_factor: Fraction = Fraction(1)
    rate_param: str = ""
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    where: Optional[CondExpr] = None
    span: Span = None


@dataclass
class ObservableDeclAst:
    name: str
    factor: Fraction = Fraction(1)
    elems: list = field(default_factory=list)
    where: Optional[CondExpr] = None
    span: Span = None


@dataclass
class ParamDecl:
    name: str
    value: float
    span: Span = None


@dataclass
class InitDecl:
    pattern: Optional[str]  # None = empty
    span: Span = None


@dataclass
class DeriveDecl:
    order: int = 1
    depth: int = 3
    span: Span = None


@dataclass
class SimulateDecl:
    t_max: float = 10.0
    runs: int = 100
    seed: int = 0
    grid: float = 1.0
    span: Span = None


@dataclass
class SourceModel:
    typegraph: Optional[TypeGraphDecl] = None
    semantics: Optional[str] = None
    patterns: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    rules: list = field(default_factory=list)
    observables: list = field(default_factory=list)
    params: list = field(default_factory=list)
    init: Optional[InitDecl] = None
    derive: Optional[DeriveDecl] = None
    simulate: Optional[SimulateDecl] = None


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, text: str):
        self.tokens, self.diagnostics = tokenize(text)
        self.pos = 0

    def peek(self, k=0) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def next(self) -> Token:
        t = self.peek()
        if t.kind != "eof":
            self.pos += 1
        return t

    def error(self, message: str, span: Optional[Span] = None):
        self.diagnostics.append(Diagnostic("error", message, span or self.peek().span))

    def expect(self, kind: str, what: str = "") -> Token:
        t = self.peek()
        if t.kind != kind:
            self.error(f"expected {what or kind!r}, found {t.text or t.kind!r}")
            return t
        return self.next()

    def expect_name(self, what="a name") -> str:
        t = self.peek()
        if t.kind != "name":
            self.error(f"expected {what}, found {t.text or t.kind!r}")
            return ""
        self.next()
        return t.text

    def sync(self, stops=(";", "}")):
        while self.peek().kind not in stops and self.peek().kind != "eof":
            self.next()
        if self.peek().kind in stops:
            self.next()

    # -- numbers ------------------------------------------------------

    def parse_rate_coeff(self) -> Fraction:
        # optional literal coefficient; decimals become exact rationals
        t = self.peek()
        if t.kind != "number":
            return Fraction(1)
        self.next()
        return Fraction(t.text)

    def parse_number(self) -> float:
        t = self.expect("number", "a number")
        if t.kind != "number":
            return 0.0
        return float(t.text)

    def parse_int(self) -> int:
        t = self.expect("number", "an integer")
        if t.kind != "number":
            return 0
        return int(float(t.text))

    # -- elements -----------------------------------------------------

    def parse_elem(self) -> Optional[ElemDecl]:
        start = self.peek().span
        if self.peek().kind == "name" and self.peek().text == "prop" and self.peek(1).kind == "name":
            self.next()
            v = self.expect_name("a vertex name")
            self.expect(":")
            t = self.expect_name("a property name")
            self.expect(";")
            return ElemDecl("edge", None, ends=(v, v), etype=t, span=start)
        first = self.expect_name("an element name")
        if self.peek().kind == ":":
            self.next()
            second = self.expect_name("a type or endpoint name")
            if self.peek().kind == ";":
                self.next()
                return ElemDecl("vertex", first, vtype=second, span=start)
            # named edge: first : second - third : etype ;
            self.expect("-")
            third = self.expect_name("an endpoint name")
            self.expect(":")
            etype = self.expect_name("an edge type")
            self.expect(";")
            return ElemDecl("edge", first, ends=(second, third), etype=etype, span=start)
        if self.peek().kind == "-":
            self.next()
            second = self.expect_name("an endpoint name")
            self.expect(":")
            etype = self.expect_name("an edge type")
            self.expect(";")
            return ElemDecl("edge", None, ends=(first, second), etype=etype, span=start)
        self.error("expected ':' or '-' in element declaration")
        self.sync()
        return None

    def parse_elem_block(self) -> list:
        elems = []
        self.expect("{")
        while self.peek().kind not in ("}", "eof"):
            if self.peek().kind == "name" and self.peek().text == "where":
                break
            e = self.parse_elem()
            if e is not None:
                elems.append(e)
        return elems

    # -- conditions ---------------------------------------------------

    def parse_cond_primary(self) -> CondExpr:
        t = self.peek()
        if t.kind == "(":
            self.next()
            inner = self.parse_cond()
            self.expect(")")
            return inner
        if t.kind == "name" and t.text == "true":
            self.next()
            return CondExpr("true", span=t.span)
        if t.kind == "name" and t.text == "false":
            self.next()
            return CondExpr("false", span=t.span)
        if t.kind == "name" and t.text == "not":
            self.next()
            return CondExpr("not", children=[self.parse_cond_primary()], span=t.span)
        if t.kind == "name" and t.text in ("exists", "forall"):
            self.next()
            pat = self.expect_name("a pattern name")
            inner = None
            nxt = self.peek()
            if nxt.kind == "(" or (
                nxt.kind == "name" and nxt.text in ("not", "exists", "forall", "true", "false")
            ):
                inner = self.parse_cond_primary()
            children = [inner] if inner is not None else []
            return CondExpr(t.text, pattern=pat, children=children, span=t.span)
        self.error(f"expected a condition, found {t.text or t.kind!r}")
        return CondExpr("true", span=t.span)

    def parse_cond(self) -> CondExpr:
        left = self.parse_cond_primary()
        while self.peek().kind == "name" and self.peek().text in ("and", "or"):
            op = self.next().text
            right = self.parse_cond_primary()
            left = CondExpr(op, children=[left, right], span=left.span)
        return left

    # -- declarations -------------------------------------------------

    def parse_typegraph(self) -> TypeGraphDecl:
        decl = TypeGraphDecl(span=self.peek().span)
        self.expect("{")
        while self.peek().kind not in ("}", "eof"):
            t = self.next()
            if t.kind != "name":
                self.error("expected 'vertex', 'edge', 'loop' or 'prop'", t.span)
                self.sync()
                continue
            if t.text == "vertex":
                name = self.expect_name("a vertex type name")
                decl.vertices.append((name, t.span))
                self.expect(";")
            elif t.text == "edge":
                a = self.expect_name("a vertex type")
                self.expect("-")
                b = self.expect_name("a vertex type")
                self.expect(":")
                et = self.expect_name("an edge type name")
                decl.edges.append((a, b, et, t.span))
                self.expect(";")
            elif t.text == "loop":
                v = self.expect_name("a vertex type")
                self.expect(":")
                et = self.expect_name("a loop type name")
                decl.loops.append((v, et, t.span))
                self.expect(";")
            elif t.text == "prop":
                v = self.expect_name("a vertex type")
                self.expect(":")
                names = [self.expect_name("a property name")]
                while self.peek().kind == ",":
                    self.next()
                    names.append(self.expect_name("a property name"))
                self.expect(";")
                for et in names:
                    decl.loops.append((v, et, t.span))
            else:
                self.error(f"unknown type graph item {t.text!r}", t.span)
                self.sync()
        self.expect("}")
        return decl

    def parse_rule(self) -> RuleDecl:
        span = self.peek().span
        name = self.expect_name("a rule name")
        decl = RuleDecl(name, span=span)
        if self.peek().kind == "(":
            self.next()
            sem = self.expect_name("'dpo' or 'sqpo'")
            if sem in (DPO, SQPO):
                decl.semantics = sem
            else:
                self.error(f"unknown semantics {sem!r}")
            self.expect(")")
        kw = self.expect_name("'rate'")
        if kw != "rate":
            self.error("expected 'rate'")
        decl.rate_factor = self.parse_rate_coeff()
        decl.rate_param = self.expect_name("a rate parameter name")
        self.expect("{")
        while self.peek().kind not in ("}", "eof"):
            t = self.peek()
            if t.kind != "name":
                self.error("expected 'input', 'output' or 'where'")
                self.sync()
                continue
            if t.text == "input":
                self.next()
                decl.inputs = self.parse_elem_block()
                self.expect("}")
            elif t.text == "output":
                self.next()
                decl.outputs = self.parse_elem_block()
                self.expect("}")
            elif t.text == "where":
                self.next()
                decl.where = self.parse_cond()
                self.expect(";")
            else:
                self.error(f"unexpected {t.text!r} in rule body")
                self.next()
                self.sync()
        self.expect("}")
        return decl

    def parse_observable(self) -> ObservableDeclAst:
        span = self.peek().span
        name = self.expect_name("an observable name")
        decl = ObservableDeclAst(name, span=span)
        if self.peek().kind == "name" and self.peek().text == "factor":
            self.next()
            decl.factor = self.parse_rate_coeff()
        decl.elems = self.parse_elem_block()
        if self.peek().kind == "name" and self.peek().text == "where":
            self.next()
            decl.where = self.parse_cond()
            self.expect(";")
        self.expect("}")
        return decl

    def parse_model(self) -> SourceModel:
        sm = SourceModel()
        while self.peek().kind != "eof":
            t = self.next()
            if t.kind != "name":
                self.error(f"expected a declaration, found {t.text or t.kind!r}", t.span)
                self.sync()
                continue
            if t.text == "typegraph":
                sm.typegraph = self.parse_typegraph()
            elif t.text == "semantics":
                sem = self.expect_name("'dpo' or 'sqpo'")
                if sem in (DPO, SQPO):
                    sm.semantics = sem
                else:
                    self.error(f"unknown semantics {sem!r}", t.span)
                self.expect(";")
            elif t.text == "pattern":
                span = self.peek().span
                name = self.expect_name("a pattern name")
                elems = self.parse_elem_block()
                self.expect("}")
                sm.patterns.append(PatternDecl(name, elems, span=span))
            elif t.text == "constraint":
                expr = self.parse_cond()
                self.expect(";")
                sm.constraints.append(ConstraintDecl(expr, span=t.span))
            elif t.text == "rule":
                sm.rules.append(self.parse_rule())
            elif t.text == "observable":
                sm.observables.append(self.parse_observable())
            elif t.text == "param":
                span = self.peek().span
                name = self.expect_name("a parameter name")
                self.expect("=")
                value = self.parse_number()
                self.expect(";")
                sm.params.append(ParamDecl(name, value, span=span))
            elif t.text == "init":
                nxt = self.peek()
                if nxt.kind == "name" and nxt.text == "empty":
                    self.next()
                    sm.init = InitDecl(None, span=t.span)
                else:
                    sm.init = InitDecl(self.expect_name("a pattern name or 'empty'"), span=t.span)
                self.expect(";")
            elif t.text == "derive":
                kw = self.expect_name("'moments'")
                decl = DeriveDecl(span=t.span)
                while self.peek().kind == "name" and self.peek().text in ("order", "depth"):
                    which = self.next().text
                    val = self.parse_int()
                    if which == "order":
                        decl.order = val
                    else:
                        decl.depth = val
                self.expect(";")
                sm.derive = decl
            elif t.text == "simulate":
                decl = SimulateDecl(span=t.span)
                while self.peek().kind == "name" and self.peek().text in (
                    "t_max",
                    "runs",
                    "seed",
                    "grid",
                ):
                    which = self.next().text
                    if which == "t_max":
                        decl.t_max = self.parse_number()
                    elif which == "runs":
                        decl.runs = self.parse_int()
                    elif which == "seed":
                        decl.seed = self.parse_int()
                    else:
                        decl.grid = self.parse_number()
                self.expect(";")
                sm.simulate = decl
            else:
                self.error(f"unknown declaration {t.text!r}", t.span)
                self.sync()
        return sm


def parse(text: str):
    """Parse model source; returns (SourceModel | None, diagnostics)."""
    p = _Parser(text)
    sm = p.parse_model()
    errors = [d for d in p.diagnostics if d.severity == "error"]
    return (None if errors else sm), p.diagnostics


# ---------------------------------------------------------------------------
# compiler


class _PatternBuild:
    """A graph under construction with a name environment."""

    def __init__(self, typegraph: TypeGraph):
        self.typegraph = typegraph
        self.vnames: dict = {}
        self.enames: dict = {}
        self.vtypes: dict = {}
        self.etypes: dict = {}
        self.incidence: dict = {}
        self.auto = 0

    def clone(self) -> "_PatternBuild":
        pb = _PatternBuild(self.typegraph)
        pb.vnames = dict(self.vnames)
        pb.enames = dict(self.enames)
        pb.vtypes = dict(self.vtypes)
        pb.etypes = dict(self.etypes)
        pb.incidence = dict(self.incidence)
        pb.auto = self.auto
        return pb

    def graph(self) -> Graph:
        return Graph(
            range(len(self.vtypes)),
            range(len(self.etypes)),
            self.incidence,
            self.vtypes,
            self.etypes,
            self.typegraph,
        )


class Compiler:
    def __init__(self, sm: SourceModel):
        self.sm = sm
        self.diagnostics: list = []
        self.typegraph: Optional[TypeGraph] = None
        self.patterns: dict = {}

    def error(self, message, span):
        self.diagnostics.append(Diagnostic("error", message, span or Span(1, 1, 1, 1)))

    def warn(self, message, span):
        self.diagnostics.append(Diagnostic("warning", message, span or Span(1, 1, 1, 1)))

    # -- type graph -----------------------------------------------------

    def compile_typegraph(self) -> TypeGraph:
        decl = self.sm.typegraph
        if decl is None:
            return TypeGraph([], {})
        vnames = []
        for name, span in decl.vertices:
            if name in vnames:
                self.error(f"duplicate vertex type {name!r}", span)
            vnames.append(name)
        edges = {}
        for a, b, et, span in decl.edges:
            for x in (a, b):
                if x not in vnames:
                    self.error(f"unknown vertex type {x!r}", span)
            if et in edges:
                self.error(f"duplicate edge type {et!r}", span)
            edges[et] = {a, b}
        for v, et, span in decl.loops:
            if v not in vnames:
                self.error(f"unknown vertex type {v!r}", span)
            if et in edges:
                self.error(f"duplicate edge/loop type {et!r}", span)
            edges[et] = {v}
        if self.diagnostics and any(d.severity == "error" for d in self.diagnostics):
            return TypeGraph([], {})
        return TypeGraph(vnames, edges)

    # -- patterns ---------------------------------------------------------

    def build_elems(self, elems, pb: _PatternBuild, allow_existing=True):
        for e in elems:
            if e.kind == "vertex":
                if e.name in pb.vnames:
                    if not allow_existing:
                        self.error(f"duplicate element name {e.name!r}", e.span)
                    elif pb.vtypes[pb.vnames[e.name]] != e.vtype:
                        self.error(f"element {e.name!r} redeclared with a different type", e.span)
                    continue
                if e.vtype not in self.typegraph.vertices:
                    self.error(f"unknown vertex type {e.vtype!r}", e.span)
                    continue
                vid = len(pb.vtypes)
                pb.vnames[e.name] = vid
                pb.vtypes[vid] = e.vtype
            else:
                a, b = e.ends
                missing = [x for x in {a, b} if x not in pb.vnames]
                if missing:
                    self.error(f"unknown endpoint {missing[0]!r}", e.span)
                    continue
                if e.etype not in self.typegraph.edges:
                    self.error(f"unknown edge type {e.etype!r}", e.span)
                    continue
                name = e.name
                ends = frozenset(pb.vnames[x] for x in (a, b))
                if name is not None and name in pb.enames:
                    prior = pb.enames[name]
                    same = pb.etypes[prior] == e.etype and pb.incidence[prior] == ends
                    if not allow_existing:
                        self.error(f"duplicate edge name {name!r}", e.span)
                    elif not same:
                        self.error(f"edge {name!r} redeclared differently", e.span)
                    continue
                if name is not None and name in pb.vnames:
                    self.error(f"edge name {name!r} collides with a vertex", e.span)
                    continue
                eid = len(pb.etypes)
                want = self.typegraph.edges[e.etype]
                got = frozenset(pb.vtypes[v] for v in ends)
                if got != want:
                    self.error(
                        f"edge type {e.etype!r} connects {sorted(want)}, not {sorted(got)}",
                        e.span,
                    )
                    continue
                if name is None:
                    pb.auto += 1
                    name = f"_e{pb.auto}"
                pb.enames[name] = eid
                pb.etypes[eid] = e.etype
                pb.incidence[eid] = ends

    def compile_pattern_graph(self, elems) -> _PatternBuild:
        pb = _PatternBuild(self.typegraph)
        self.build_elems(elems, pb, allow_existing=False)
        return pb

    # -- conditions -------------------------------------------------------

    def compile_cond(self, expr: Optional[CondExpr], pb: _PatternBuild) -> Condition:
        root = pb.graph()
        if expr is None:
            return CondTrue(root)
        if expr.kind == "true":
            return CondTrue(root)
        if expr.kind == "false":
            return cond_false(root)
        if expr.kind == "not":
            return CondNot(self.compile_cond(expr.children[0], pb))
        if expr.kind in ("and", "or"):
            left = self.compile_cond(expr.children[0], pb)
            right = self.compile_cond(expr.children[1], pb)
            if expr.kind == "and":
                return CondAnd(left, right)
            return cond_or_all(root, [left, right])
        assert expr.kind in ("exists", "forall")
        pat = self.patterns.get(expr.pattern)
        if pat is None:
            self.error(f"unknown pattern {expr.pattern!r}", expr.span)
            return CondTrue(root)
        extended = pb.clone()
        self.build_elems(pat, extended, allow_existing=True)
        target = extended.graph()
        embed = Morphism(
            root,
            target,
            {v: v for v in root.vertices},
            {e: e for e in root.edges},
            check=False,
        )
        inner = (
            self.compile_cond(expr.children[0], extended) if expr.children else CondTrue(target)
        )
        if expr.kind == "exists":
            return CondExists(embed, inner)
        return CondNot(CondExists(embed, CondNot(inner)))

    # -- rules --------------------------------------------------------------

    def compile_rule(self, decl: RuleDecl) -> Optional[tuple]:
        pb_in = self.compile_pattern_graph(decl.inputs)
        pb_out = self.compile_pattern_graph(decl.outputs)
        i_graph = pb_in.graph()
        o_graph = pb_out.graph()
        shared_v = sorted(set(pb_in.vnames) & set(pb_out.vnames))
        shared_e = sorted(
            n for n in set(pb_in.enames) & set(pb_out.enames) if not n.startswith("_e")
        )
        for n in shared_v:
            if pb_in.vtypes[pb_in.vnames[n]] != pb_out.vtypes[pb_out.vnames[n]]:
                self.error(f"context vertex {n!r} changes type", decl.span)
                return None
        for n in shared_e:
            ein, eout = pb_in.enames[n], pb_out.enames[n]
            if pb_in.etypes[ein] != pb_out.etypes[eout]:
                self.error(f"context edge {n!r} changes type", decl.span)
                return None
            in_ends = {k for k, v in pb_in.vnames.items() if v in pb_in.incidence[ein]}
            out_ends = {k for k, v in pb_out.vnames.items() if v in pb_out.incidence[eout]}
            if in_ends != out_ends or not in_ends <= set(shared_v):
                self.error(f"context edge {n!r} changes endpoints", decl.span)
                return None
        kv = {}
        kt = {}
        for idx, n in enumerate(shared_v):
            kv[n] = idx
            kt[idx] = pb_in.vtypes[pb_in.vnames[n]]
        ke = {}
        ket = {}
        kinc = {}
        for idx, n in enumerate(shared_e):
            ke[n] = idx
            ein = pb_in.enames[n]
            ket[idx] = pb_in.etypes[ein]
            ends_names = [k for k, v in pb_in.vnames.items() if v in pb_in.incidence[ein]]
            kinc[idx] = frozenset(kv[x] for x in ends_names)
        k_graph = Graph(range(len(kv)), range(len(ke)), kinc, kt, ket, self.typegraph)
        i_mor = Morphism(
            k_graph,
            i_graph,
            {kv[n]: pb_in.vnames[n] for n in shared_v},
            {ke[n]: pb_in.enames[n] for n in shared_e},
            check=False,
        )
        o_mor = Morphism(
            k_graph,
            o_graph,
            {kv[n]: pb_out.vnames[n] for n in shared_v},
            {ke[n]: pb_out.enames[n] for n in shared_e},
            check=False,
        )
        cond = self.compile_cond(decl.where, pb_in)
        try:
            rule = Rule(o_mor, i_mor, cond, name=decl.name)
        except Exception as exc:  # non-mono inferred embedding and kin
            self.error(f"invalid rule {decl.name!r}: {exc}", decl.span)
            return None
        return rule

    # -- whole model ---------------------------------------------------------

    def compile(self) -> Optional[ModelSpec]:
        sm = self.sm
        self.typegraph = self.compile_typegraph()
        if any(d.severity == "error" for d in self.diagnostics):
            return None
        seen = set()
        for p in sm.patterns:
            if p.name in seen:
                self.error(f"duplicate pattern {p.name!r}", p.span)
            seen.add(p.name)
            self.patterns[p.name] = p.elems
            self.compile_pattern_graph(p.elems)  # surfaces element errors early
        constraints = []
        for c in sm.constraints:
            pb = _PatternBuild(self.typegraph)
            constraints.append(self.compile_cond(c.expr, pb))
        params = {}
        for p in sm.params:
            if p.name in params:
                self.error(f"duplicate parameter {p.name!r}", p.span)
            if p.value <= 0:
                self.error(f"parameter {p.name!r} must be positive", p.span)
            params[p.name] = p.value
        transitions = []
        names = set()
        for r in sm.rules:
            if r.name in names:
                self.error(f"duplicate rule {r.name!r}", r.span)
            names.add(r.name)
            rule = self.compile_rule(r)
            if rule is None:
                continue
            if r.rate_param not in params:
                params.setdefault(r.rate_param, None)
            transitions.append(
                Transition(r.name, r.rate_param, r.rate_factor, rule, r.semantics)
            )
        observables = []
        for ob in sm.observables:
            if ob.name in names:
                self.error(f"duplicate observable {ob.name!r}", ob.span)
            names.add(ob.name)
            pb = self.compile_pattern_graph(ob.elems)
            cond = self.compile_cond(ob.where, pb)
            observables.append(ObservableDecl(ob.name, ob.factor, identity_rule(pb.graph(), cond, name=ob.name)))
        init_state = None
        if sm.init is not None and sm.init.pattern is not None:
            if sm.init.pattern not in self.patterns:
                self.error(f"unknown pattern {sm.init.pattern!r}", sm.init.span)
            else:
                init_state = self.compile_pattern_graph(self.patterns[sm.init.pattern]).graph()
        if any(d.severity == "error" for d in self.diagnostics):
            return None
        model = ModelSpec(
            typegraph=self.typegraph,
            constraints=constraints,
            transitions=transitions,
            observables=observables,
            params=params,
            semantics=sm.semantics or SQPO,
            init_state=init_state,
            derive_directive=(
                {"order": sm.derive.order, "depth": sm.derive.depth} if sm.derive else None
            ),
            simulate_directive=(
                {
                    "t_max": sm.simulate.t_max,
                    "runs": sm.simulate.runs,
                    "seed": sm.simulate.seed,
                    "grid": sm.simulate.grid,
                }
                if sm.simulate
                else None
            ),
        )
        try:
            model.validate()
        except Exception as exc:
            self.error(str(exc), Span(1, 1, 1, 1))
            return None
        return model


def compile_model(sm: SourceModel):
    """Compile a parsed model; returns (ModelSpec | None, diagnostics)."""
    c = Compiler(sm)
    model = c.compile()
    return model, c.diagnostics


def load_model(text: str) -> ModelSpec:
    """Parse and compile, raising DslError on any error diagnostic."""
    sm, diags = parse(text)
    if sm is None:
        raise DslError([d for d in diags if d.severity == "error"])
    model, diags2 = compile_model(sm)
    if model is None:
        raise DslError([d for d in diags2 if d.severity == "error"])
    return model


def model_digest(text: str) -> str:
    """Stable digest of the structural content (comments/whitespace ignored)."""
    sm, diags = parse(text)
    if sm is None:
        raise DslError([d for d in diags if d.severity == "error"])
    return hashlib.sha256(format_model(sm).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# formatter


def _fmt_rational(f: Fraction) -> str:
    if f.denominator == 1:
        return str(f.numerator)
    text = repr(float(f))
    if Fraction(text) != f:
        raise ValueError(f"coefficient {f} has no exact decimal form")
    return text


def _fmt_number(x: float) -> str:
    return repr(float(x))


def _fmt_elems(elems, indent) -> list:
    out = []
    for e in elems:
        if e.kind == "vertex":
            out.append(f"{indent}{e.name}:{e.vtype};")
        else:
            a, b = e.ends
            name = f"{e.name}: " if e.name else ""
            out.append(f"{indent}{name}{a}-{b}:{e.etype};")
    return out


def _fmt_cond(expr: CondExpr) -> str:
    if expr.kind in ("true", "false"):
        return expr.kind
    if expr.kind == "not":
        return f"not {_fmt_cond(expr.children[0])}"
    if expr.kind in ("and", "or"):
        return f"({_fmt_cond(expr.children[0])} {expr.kind} {_fmt_cond(expr.children[1])})"
    inner = f" {_fmt_cond(expr.children[0])}" if expr.children else ""
    return f"{expr.kind} {expr.pattern}{inner}"


def format_model(sm: SourceModel) -> str:
    """Canonical pretty-print; parsing the output reproduces the same AST."""
    lines = []
    if sm.typegraph is not None:
        lines.append("typegraph {")
        for name, _ in sm.typegraph.vertices:
            lines.append(f"  vertex {name};")
        for a, b, et, _ in sm.typegraph.edges:
            lines.append(f"  edge {a} - {b} : {et};")
        for v, et, _ in sm.typegraph.loops:
            lines.append(f"  loop {v} : {et};")
        lines.append("}")
    if sm.semantics:
        lines.append(f"semantics {sm.semantics};")
    for p in sm.patterns:
        lines.append(f"pattern {p.name} {{")
        lines.extend(_fmt_elems(p.elems, "  "))
        lines.append("}")
    for c in sm.constraints:
        lines.append(f"constraint {_fmt_cond(c.expr)};")
    for r in sm.rules:
        sem = f" ({r.semantics})" if r.semantics else ""
        coeff = "" if r.rate_factor == 1 else f"{_fmt_rational(r.rate_factor)} "
        lines.append(f"rule {r.name}{sem} rate {coeff}{r.rate_param} {{")
        lines.append("  input {")
        lines.extend(_fmt_elems(r.inputs, "    "))
        lines.append("  }")
        lines.append("  output {")
        lines.extend(_fmt_elems(r.outputs, "    "))
        lines.append("  }")
        if r.where is not None:
            lines.append(f"  where {_fmt_cond(r.where)};")
        lines.append("}")
    for ob in sm.observables:
        factor = "" if ob.factor == 1 else f" factor {_fmt_rational(ob.factor)}"
        lines.append(f"observable {ob.name}{factor} {{")
        lines.extend(_fmt_elems(ob.elems, "  "))
        if ob.where is not None:
            lines.append(f"  where {_fmt_cond(ob.where)};")
        lines.append("}")
    for p in sm.params:
        lines.append(f"param {p.name} = {_fmt_number(p.value)};")
    if sm.init is not None:
        lines.append(f"init {sm.init.pattern or 'empty'};")
    if sm.derive is not None:
        lines.append(f"derive moments order {sm.derive.order} depth {sm.derive.depth};")
    if sm.simulate is not None:
        s = sm.simulate
        lines.append(
            f"simulate t_max {_fmt_number(s.t_max)} runs {s.runs} seed {s.seed} grid {_fmt_number(s.grid)};"
        )
    return "\n".join(lines) + ("\n" if lines else "")

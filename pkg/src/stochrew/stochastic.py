"""CTMC semantics for stochastic rewriting models.

A model is a set of transitions (rate parameter × rule), global constraints,
and pattern-count observables.  The generator splits as H = Ĥ − Ô(Ĥ) with Ĥ
the off-diagonal rule vector and Ô its jump closure; probability conservation
⟨|H = 0 holds by construction.

First-moment evolution equations for observable averages follow from
commutators with Ĥ followed by jump closure; iterating on newly discovered
observables either closes into a finite linear ODE system or keeps growing,
which is reported rather than hidden.  Exact trajectory sampling uses the
standard direct stochastic simulation algorithm with per-match propensities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
import sympy

from .algebra import (
    RuleVector,
    commutator,
    is_diagonal_shape,
    jump_closure,
    observable_value,
)
from .conditions import CondAnd, CondExists, CondNot, CondTrue, Condition, normalize, object_satisfies
from .graphs import Graph, GraphError, Morphism, empty_graph
from .rewriting import DPO, SQPO, Rule, admissible_matches, apply_rule, rule_key, rule_sketch


class ModelError(ValueError):
    """Raised for invalid models: bad rates, non-diagonal observables, ..."""


@dataclass
class Transition:
    name: str
    rate_param: str
    rate_factor: Fraction
    rule: Rule
    semantics: Optional[str] = None


@dataclass
class ObservableDecl:
    name: str
    factor: Fraction
    rule: Rule  # identity-span rule with condition


@dataclass
class ModelSpec:
    typegraph: Optional[object]
    constraints: list = field(default_factory=list)
    transitions: list = field(default_factory=list)
    observables: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    semantics: str = SQPO
    init_state: Optional[Graph] = None
    derive_directive: Optional[dict] = None
    simulate_directive: Optional[dict] = None

    def semantics_of(self, t: Transition) -> str:
        return t.semantics or self.semantics

    def forbidden_subgraphs(self) -> tuple:
        """Contexts of negative constraints ¬∃(∅↪F), used to prune conditions."""
        out = []

        def walk(c: Condition):
            if isinstance(c, CondAnd):
                walk(c.left)
                walk(c.right)
            elif isinstance(c, CondNot) and isinstance(c.inner, CondExists):
                if c.inner.embed.source.size == 0 and isinstance(c.inner.inner, CondTrue):
                    out.append(c.inner.embed.target)

        for c in self.constraints:
            walk(c)
        return tuple(out)

    def initial_graph(self) -> Graph:
        return self.init_state if self.init_state is not None else empty_graph(self.typegraph)

    def bound_params(self, overrides: Optional[dict] = None) -> dict:
        vals = dict(self.params)
        if overrides:
            for k, v in overrides.items():
                if k not in vals:
                    raise ModelError(f"unknown parameter {k!r}")
                vals[k] = float(v)
        return vals

    def validate(self):
        for t in self.transitions:
            v = self.params.get(t.rate_param)
            if v is not None and v <= 0:
                raise ModelError(f"rate parameter {t.rate_param!r} must be positive")
            if t.rate_factor <= 0:
                raise ModelError(f"rate factor of {t.name!r} must be positive")
        for ob in self.observables:
            if not is_diagonal_shape(ob.rule):
                raise ModelError(f"observable {ob.name!r} is not diagonal")

    def state_satisfies_constraints(self, g: Graph) -> bool:
        return all(object_satisfies(g, c) for c in self.constraints)


# ---------------------------------------------------------------------------
# generator


@dataclass
class Generator:
    offdiag: RuleVector  # Ĥ, symbolic rates
    diag: RuleVector  # Ô(Ĥ)
    semantics: str


def build_generator(model: ModelSpec, semantics: Optional[str] = None) -> Generator:
    """Ĥ = Σ κ_j·factor_j·δ(R_j) with rate symbols unexpanded, and Ô(Ĥ)."""
    model.validate()
    semantics = semantics or model.semantics
    forb = model.forbidden_subgraphs()
    h = RuleVector()
    for t in model.transitions:
        coeff = sympy.Symbol(t.rate_param) * sympy.Rational(t.rate_factor.numerator, t.rate_factor.denominator)
        h.add_term(t.rule, coeff)
    return Generator(h, jump_closure(h, semantics, forb), semantics)


# ---------------------------------------------------------------------------
# moment ODE derivation


@dataclass
class OdeVariable:
    key: tuple
    rule: Rule  # diagonal basis rule, coefficient 1
    name: str
    depth: int


@dataclass
class OdeEquation:
    var: tuple
    rhs: dict  # var key -> sympy coefficient
    dropped: dict = field(default_factory=dict)  # truncated terms

    @property
    def truncated(self) -> bool:
        return bool(self.dropped)


@dataclass
class OdeSystem:
    variables: dict  # key -> OdeVariable, insertion-ordered
    equations: dict  # key -> OdeEquation
    status: str  # "closed" | "non-closing"
    rounds: list  # cumulative variable counts per derivation round
    declared: dict  # observable name -> (key, factor)
    semantics: str
    truncation_depth: int
    products: dict = field(default_factory=dict)  # (name_i, name_j) -> [(key, coeff)]

    def order(self) -> list:
        return list(self.variables)

    def equation_status(self, key) -> str:
        eq = self.equations.get(key)
        if eq is None:
            return f"truncated-at-depth-{self.truncation_depth}"
        return f"truncated-at-depth-{self.truncation_depth}" if eq.truncated else "closed"

    def pretty(self) -> str:
        lines = [f"status: {self.status}  (variables per round: {self.rounds})"]
        for key, var in self.variables.items():
            eq = self.equations.get(key)
            if eq is None:
                lines.append(f"d/dt <{var.name}> : no equation (discovered at depth {var.depth})")
                continue
            terms = []
            for k2, coeff in eq.rhs.items():
                name2 = self.variables[k2].name
                terms.append(f"({sympy.expand(coeff)})*<{name2}>")
            rhs = " + ".join(terms) if terms else "0"
            suffix = "   [truncated]" if eq.truncated else ""
            lines.append(f"d/dt <{var.name}> = {rhs}{suffix}")
        return "\n".join(lines)

    def to_json(self) -> dict:
        from .graphs import graph_to_json

        vars_json = []
        for key, var in self.variables.items():
            vars_json.append(
                {
                    "name": var.name,
                    "depth": var.depth,
                    "pattern": graph_to_json(var.rule.input),
                    "rule": rule_sketch(var.rule),
                    "status": self.equation_status(key),
                }
            )
        eqs = {}
        for key, eq in self.equations.items():
            eqs[self.variables[key].name] = {
                "rhs": {self.variables[k].name: str(sympy.expand(c)) for k, c in eq.rhs.items()},
                "dropped": {self.variables[k].name: str(sympy.expand(c)) for k, c in eq.dropped.items()},
            }
        return {
            "status": self.status,
            "semantics": self.semantics,
            "rounds": self.rounds,
            "declared": {n: {"variable": self.variables[k].name, "factor": str(f)} for n, (k, f) in self.declared.items()},
            "variables": vars_json,
            "equations": eqs,
        }


def _diag_basis_rule(rule: Rule, semantics: str, forb) -> Rule:
    """Normalize an observable rule to its diagonal basis representative."""
    vec = jump_closure(RuleVector.delta(rule), semantics, forb)
    entries = list(vec.terms.values())
    if len(entries) != 1 or entries[0][1] != 1:
        raise ModelError("observable rule does not normalize to a single basis element")
    return entries[0][0]


def derive_moment_odes(
    model: ModelSpec,
    observables: Optional[Sequence[ObservableDecl]] = None,
    max_depth: int = 3,
    semantics: Optional[str] = None,
    order: int = 1,
) -> OdeSystem:
    """Derive the linear ODE system for observable averages.

    Seeds with the declared observables (and, for ``order`` ≥ 2, products of
    pairs of them); each round computes d/dt⟨O⟩ = ⟨Ô([O, Ĥ])⟩ for every
    observable discovered in the previous round.  Newly appearing diagonal
    operators become new variables; the system is closed when a round
    discovers nothing new, otherwise reported non-closing and truncated.
    """
    semantics = semantics or model.semantics
    forb = model.forbidden_subgraphs()
    gen = build_generator(model, semantics)
    observables = list(model.observables if observables is None else observables)

    variables: dict = {}
    equations: dict = {}
    declared: dict = {}
    counter = [0]

    def add_var(rule: Rule, depth: int, name: Optional[str] = None) -> tuple:
        key = rule_key(rule)
        if key not in variables:
            if name is None:
                counter[0] += 1
                name = f"m{counter[0]}"
            variables[key] = OdeVariable(key, rule, name, depth)
        return key

    from .algebra import product as ra_product

    for ob in observables:
        diag = _diag_basis_rule(ob.rule, semantics, forb)
        key = add_var(diag, 0, name=ob.name)
        declared[ob.name] = (key, ob.factor)
    products = {}
    if order >= 2:
        base = [(n, variables[k].rule, f) for n, (k, f) in declared.items()]
        for i, (n1, r1, f1) in enumerate(base):
            for n2, r2, f2 in base[i:]:
                prod = ra_product(RuleVector.delta(r1), RuleVector.delta(r2), semantics, forb)
                combo = []
                for _, (rule, coeff) in prod.terms.items():
                    combo.append((add_var(rule, 0), f1 * f2 * coeff))
                products[(n1, n2)] = combo

    rounds = [len(variables)]
    frontier = list(variables)
    status = "closed"
    for depth in range(1, max_depth + 1):
        if not frontier:
            break
        new_frontier = []
        for key in frontier:
            var = variables[key]
            comm = commutator(RuleVector.delta(var.rule), gen.offdiag, semantics, forb)
            closed = jump_closure(comm, semantics, forb)
            rhs = {}
            for k2, (rule2, coeff) in closed.terms.items():
                if k2 not in variables:
                    add_var(rule2, depth)
                    new_frontier.append(k2)
                rhs[k2] = rhs.get(k2, 0) + coeff
            equations[key] = OdeEquation(key, rhs)
        rounds.append(len(variables))
        frontier = new_frontier
    if frontier:
        status = "non-closing"
        # drop rhs terms that reference equation-less variables
        eqless = {k for k in variables if k not in equations}
        for eq in equations.values():
            for k in list(eq.rhs):
                if k in eqless:
                    eq.dropped[k] = eq.rhs.pop(k)
    return OdeSystem(variables, equations, status, rounds, declared, semantics, max_depth, products)


# ---------------------------------------------------------------------------
# numeric integration


def initial_values(system: OdeSystem, x0: Graph) -> dict:
    """Evaluate every variable's pattern count on the initial state."""
    out = {}
    for key, var in system.variables.items():
        val = observable_value(RuleVector.delta(var.rule), x0, system.semantics)
        out[key] = float(val)
    return out


def integrate_odes(
    system: OdeSystem,
    params: dict,
    init: dict,
    t_grid: Sequence[float],
    rel_tol: float = 1e-9,
    max_halvings: int = 16,
) -> dict:
    """Integrate the (closed or truncated) linear system on the given grid.

    Classic fixed-step RK4; the substep count doubles until two successive
    refinements agree within ``rel_tol`` relative deviation.
    """
    if any(k not in system.equations for k in system.variables) and system.status == "closed":
        raise ModelError("closed system is missing equations")
    keys = [k for k in system.variables if k in system.equations]
    index = {k: i for i, k in enumerate(keys)}
    n = len(keys)
    a = np.zeros((n, n))
    subs = {sympy.Symbol(name): value for name, value in params.items()}
    for k in keys:
        eq = system.equations[k]
        for k2, coeff in eq.rhs.items():
            if k2 not in index:
                continue
            value = sympy.expand(coeff).subs(subs)
            if value.free_symbols:
                raise ModelError(f"unbound parameters {sorted(map(str, value.free_symbols))}")
            a[index[k], index[k2]] += float(value)
    x0 = np.array([init.get(k, 0.0) for k in keys], dtype=float)

    t_grid = list(t_grid)

    def rk4(substeps: int) -> np.ndarray:
        out = np.empty((len(t_grid), n))
        x = x0.copy()
        t_prev = 0.0
        for gi, t in enumerate(t_grid):
            span = t - t_prev
            if span > 0:
                m = max(1, substeps)
                h = span / m
                for _ in range(m):
                    k1 = a @ x
                    k2 = a @ (x + 0.5 * h * k1)
                    k3 = a @ (x + 0.5 * h * k2)
                    k4 = a @ (x + h * k3)
                    x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            out[gi] = x
            t_prev = t
        return out

    substeps = 4
    prev = rk4(substeps)
    for _ in range(max_halvings):
        substeps *= 2
        cur = rk4(substeps)
        scale = np.maximum(np.abs(cur), 1.0)
        if np.max(np.abs(cur - prev) / scale) < rel_tol:
            prev = cur
            break
        prev = cur
    return {k: prev[:, index[k]].tolist() for k in keys}


# ---------------------------------------------------------------------------
# closed-form solution of the vertex/edge model


def closed_form_reference(params: dict, t: float) -> tuple[float, float, float]:
    """Closed forms for the vertex/pair/edge averages of the two-rate model.

    Parameters are ``nu_plus, nu_minus, eps_plus, eps_minus``; the initial
    state is empty.  Denominators are generically nonzero for positive rates.
    """
    nup = params["nu_plus"]
    num = params["nu_minus"]
    epp = params["eps_plus"]
    epm = params["eps_minus"]
    alpha = epm + epp + 2 * num
    beta = epm + epp + num
    kappa = epm + num
    lam = epm + epp
    omega = epm + 2 * num
    if num <= 0 or min(abs(alpha), abs(beta), abs(lam)) < 1e-12:
        raise ModelError("degenerate parameters for the closed-form solution")
    overts = (nup / num) * (1.0 - math.exp(-t * num))
    pref = nup**2 * math.exp(-alpha * t) / (2 * alpha * beta * lam * num**2)
    opairs = pref * (
        alpha * beta * epm * math.exp(lam * t)
        + 2 * epp * num**2
        - 2 * alpha * kappa * lam * math.exp(beta * t)
        + beta * lam * omega * math.exp(alpha * t)
    )
    prefe = epp * nup**2 * math.exp(-alpha * t) / (2 * alpha * beta * lam * num**2)
    oedges = prefe * (
        alpha * beta * math.exp(lam * t)
        - 2 * alpha * lam * math.exp(beta * t)
        + beta * lam * math.exp(alpha * t)
        - 2 * num**2
    )
    return overts, opairs, oedges


def closed_form_asymptote(params: dict) -> tuple[float, float, float]:
    nup = params["nu_plus"]
    num = params["nu_minus"]
    epp = params["eps_plus"]
    epm = params["eps_minus"]
    alpha = epm + epp + 2 * num
    return (
        nup / num,
        nup**2 * (epm + 2 * num) / (2 * num**2 * alpha),
        epp * nup**2 / (2 * num**2 * alpha),
    )


# ---------------------------------------------------------------------------
# exact stochastic simulation


@dataclass
class Trajectory:
    seed: int
    run_index: int
    events: list  # (time, transition name, match digest)
    grid: list
    samples: dict  # observable name -> list of counts
    final_state: Graph


def _observable_counts(model: ModelSpec, g: Graph, semantics: str) -> dict:
    out = {}
    for ob in model.observables:
        val = ob.factor * Fraction(len(admissible_matches(ob.rule, g, semantics)))
        if val.denominator != 1:
            raise ModelError(f"observable {ob.name!r} evaluated to non-integer {val}")
        out[ob.name] = int(val)
    return out


def ssa_simulate(
    model: ModelSpec,
    x0: Optional[Graph] = None,
    t_max: float = 10.0,
    seed: int = 0,
    grid: Optional[Sequence[float]] = None,
    run_index: int = 0,
    semantics: Optional[str] = None,
    param_overrides: Optional[dict] = None,
    record_events: bool = True,
    audit: bool = False,
) -> Trajectory:
    """One exact sample path of the CTMC via the direct method.

    Per step, every admissible match of every transition is a channel with
    rate κ_j·factor_j; the waiting time is exponential in the total rate and
    the channel choice proportional.  The counter-based Philox generator is
    keyed on (seed, run_index) so runs replay bit-exactly.
    """
    semantics = semantics or model.semantics
    params = model.bound_params(param_overrides)
    for t in model.transitions:
        if params.get(t.rate_param) is None:
            raise ModelError(f"unbound rate parameter {t.rate_param!r}")
    x = x0 if x0 is not None else model.initial_graph()
    if audit and not model.state_satisfies_constraints(x):
        raise ModelError("initial state violates the global constraints")
    rng = np.random.Generator(np.random.Philox(key=[seed, run_index]))
    grid = sorted(grid) if grid else [t_max]
    gi = 0
    now = 0.0
    events = []
    samples = {ob.name: [] for ob in model.observables}

    def record_until(limit, inclusive=False):
        nonlocal gi
        counts = None
        while gi < len(grid) and (grid[gi] < limit or (inclusive and grid[gi] <= limit)):
            if counts is None:
                counts = _observable_counts(model, x, semantics)
            for name, val in counts.items():
                samples[name].append(val)
            gi += 1

    while now < t_max:
        channels = []
        total = 0.0
        for tr in model.transitions:
            tsem = model.semantics_of(tr)
            rate = params[tr.rate_param] * float(tr.rate_factor)
            for m in admissible_matches(tr.rule, x, tsem):
                channels.append((rate, tr, m, tsem))
                total += rate
        if audit:
            from .algebra import RuleVector as _RV

            diag_total = 0.0
            for tr in model.transitions:
                tsem = model.semantics_of(tr)
                vec = jump_closure(_RV.delta(tr.rule), tsem, model.forbidden_subgraphs())
                diag_total += params[tr.rate_param] * float(tr.rate_factor) * float(
                    observable_value(vec, x, tsem)
                )
            if abs(diag_total - total) > 1e-9 * max(1.0, total):
                raise ModelError("diagonal propensity disagrees with off-diagonal outflow")
        if total <= 0.0:
            break
        dt = rng.exponential(1.0 / total)
        if now + dt > t_max:
            break
        record_until(now + dt)
        now += dt
        pick = rng.uniform(0.0, total)
        acc = 0.0
        chosen = channels[-1]
        for ch in channels:
            acc += ch[0]
            if pick < acc:
                chosen = ch
                break
        _, tr, m, tsem = chosen
        d = apply_rule(tr.rule, m, tsem)
        x = d.result
        if audit and not model.state_satisfies_constraints(x):
            raise ModelError(f"transition {tr.name!r} broke the global constraints")
        if record_events:
            import hashlib

            digest = hashlib.sha256(repr(m.key()).encode()).hexdigest()[:12]
            events.append((now, tr.name, digest))
    record_until(t_max, inclusive=True)
    return Trajectory(seed, run_index, events, list(grid), samples, x)


@dataclass
class EnsembleResult:
    grid: list
    runs: int
    means: dict  # observable name -> np.ndarray
    stderrs: dict
    per_run: Optional[dict] = None  # observable name -> (runs, grid) array


def ssa_ensemble(
    model: ModelSpec,
    runs: int,
    t_max: float,
    seed: int,
    grid: Sequence[float],
    x0: Optional[Graph] = None,
    semantics: Optional[str] = None,
    param_overrides: Optional[dict] = None,
    keep_runs: bool = False,
) -> EnsembleResult:
    grid = sorted(grid)
    names = [ob.name for ob in model.observables]
    data = {n: np.zeros((runs, len(grid))) for n in names}
    for r in range(runs):
        tr = ssa_simulate(
            model,
            x0=x0,
            t_max=t_max,
            seed=seed,
            grid=grid,
            run_index=r,
            semantics=semantics,
            param_overrides=param_overrides,
            record_events=False,
        )
        for n in names:
            data[n][r, :] = tr.samples[n]
    means = {n: data[n].mean(axis=0) if runs else np.zeros(len(grid)) for n in names}
    ses = {
        n: (data[n].std(axis=0, ddof=1) / math.sqrt(runs) if runs > 1 else np.zeros(len(grid)))
        for n in names
    }
    return EnsembleResult(list(grid), runs, means, ses, data if keep_runs else None)

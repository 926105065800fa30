"""Stochastic rewriting of finite undirected typed multigraphs.

DPO- and SqPO-type rules with nested application conditions, the rule
algebra over iso-classes of rules (composition, products, commutators,
canonical representation, jump closure), CTMC assembly with symbolic rates,
moment-evolution ODE derivation, numeric integration, and exact stochastic
simulation; plus a small model language and a command-line front end.
"""

from .algebra import (
    CompositionMatch,
    RuleVector,
    StateVector,
    commutator,
    compose,
    dual_project,
    enumerate_composition_matches,
    is_diagonal_shape,
    jump_closure,
    observable_value,
    product,
    represent,
)
from .canon import canonical_graph, canonical_key, iso_exists
from .conditions import (
    CondAnd,
    CondExists,
    CondNot,
    CondTrue,
    Condition,
    cond_false,
    cond_forall,
    cond_true,
    conditions_equivalent,
    is_provably_false,
    normalize,
    object_satisfies,
    satisfies,
    shift,
    trans,
)
from .dsl import (
    Diagnostic,
    DslError,
    SourceModel,
    compile_model,
    format_model,
    load_model,
    model_digest,
    parse,
)
from .graphs import (
    Graph,
    GraphError,
    Morphism,
    TypeGraph,
    disjoint_union,
    empty_graph,
    enumerate_homs,
    enumerate_monos,
    epi_mono_factorize,
    final_pullback_complement,
    graph_from_json,
    graph_to_json,
    initial_morphism,
    pullback,
    pushout,
    pushout_complement,
)
from .rewriting import (
    DPO,
    SQPO,
    DirectDerivation,
    Rule,
    admissible_matches,
    apply_rule,
    dpo_dagger_matches,
    empty_rule,
    identity_rule,
    reverse_apply,
    rule_key,
    rules_equal,
)
from .stochastic import (
    Generator,
    ModelError,
    ModelSpec,
    ObservableDecl,
    OdeSystem,
    Trajectory,
    Transition,
    build_generator,
    closed_form_asymptote,
    closed_form_reference,
    derive_moment_odes,
    initial_values,
    integrate_odes,
    ssa_ensemble,
    ssa_simulate,
)

__version__ = "0.1.0"

"""provmatch: source-to-binary provenance matching over feature graphs.

The package matches functions of a stripped binary against the functions of
a source tree using per-function features (strings, integer constants,
library calls, call-graph neighbours, argument counts), iterative optimal
assignment, and a learned model of compiler inlining.  The reported
similarity is the fraction of binary functions matched to a unique source
function.
"""

from .costs import (
    BOOTSTRAP_FEATURES,
    FEATURES,
    CostVector,
    WeightVector,
    arg_cost,
    load_weights,
    pair_weight,
    save_weights,
    set_feature_cost,
    standard_jaccard,
)
from .formats import from_dot, from_json, load_graph, save_graph, to_dot, to_json
from .graph import (
    BINARY,
    SOURCE,
    VARIADIC,
    FeatureGraph,
    FunctionEntry,
    GraphError,
    MatchingFeatures,
    PredictiveFeatures,
    fn,
    normalize,
    validate,
)
from .hungarian import Assignment, AssignmentError, solve
from .inlining import (
    InlineModel,
    InlineRule,
    load_model,
    predict_all,
    predicts_inline,
    save_model,
    synthesize_pseudo_inlined,
)
from .matching import (
    LABEL_MATCHED,
    LABEL_MULTI,
    LABEL_UNMATCHED,
    MatchOptions,
    MatchReport,
    Tallies,
    match,
    match_pipeline,
    score_against_ground_truth,
)
from .simulate import (
    GraphShape,
    SimPair,
    SimProfile,
    compile_graph,
    generate_source,
    identity_profile,
    o2_profile,
    o3_profile,
    simulate,
)
from .training import (
    InlineExample,
    PairExample,
    build_inline_corpus,
    build_pair_corpus,
    evaluate_inliner,
    fit_linear_svm,
    train_inliner,
    train_weights,
)
from .whitelist import WhitelistConfig, apply_whitelists, default_whitelist

__version__ = "0.1.0"

__all__ = [
    "BINARY",
    "BOOTSTRAP_FEATURES",
    "FEATURES",
    "LABEL_MATCHED",
    "LABEL_MULTI",
    "LABEL_UNMATCHED",
    "SOURCE",
    "VARIADIC",
    "Assignment",
    "AssignmentError",
    "CostVector",
    "FeatureGraph",
    "FunctionEntry",
    "GraphError",
    "GraphShape",
    "InlineExample",
    "InlineModel",
    "InlineRule",
    "MatchOptions",
    "MatchReport",
    "MatchingFeatures",
    "PairExample",
    "PredictiveFeatures",
    "SimPair",
    "SimProfile",
    "Tallies",
    "WeightVector",
    "WhitelistConfig",
    "apply_whitelists",
    "arg_cost",
    "build_inline_corpus",
    "build_pair_corpus",
    "compile_graph",
    "default_whitelist",
    "evaluate_inliner",
    "fit_linear_svm",
    "fn",
    "from_dot",
    "from_json",
    "generate_source",
    "identity_profile",
    "load_graph",
    "load_model",
    "load_weights",
    "match",
    "match_pipeline",
    "normalize",
    "o2_profile",
    "o3_profile",
    "pair_weight",
    "predict_all",
    "predicts_inline",
    "save_graph",
    "save_model",
    "save_weights",
    "score_against_ground_truth",
    "set_feature_cost",
    "simulate",
    "solve",
    "standard_jaccard",
    "synthesize_pseudo_inlined",
    "to_dot",
    "to_json",
    "train_inliner",
    "train_weights",
    "validate",
]

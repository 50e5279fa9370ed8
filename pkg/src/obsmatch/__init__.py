"""obsmatch: matched observational studies from user event logs.

Cohorts are built from event timelines, first posts become standardized
covariates, an L1-penalized logistic regression picks the confounders,
treated units are matched to their nearest controls under weighted cosine
similarity with a caliper sweep, and effects are estimated with permutation
significance, balance checks and mediation decomposition. A synthetic-study
generator with stored counterfactuals serves as the verification oracle.
"""

from .corpus import (
    Cohort,
    Corpus,
    EventRecord,
    StudyUnit,
    assign_treatment,
    build_cohort,
    compute_outcomes,
    ingest_events,
    load_events,
    parse_badge,
    parse_inline_weight,
    select_group1,
    select_group2,
)
from .diagnostics import (
    BalanceRow,
    EffectReport,
    MediationReport,
    absolute_mean_difference,
    balance_report,
    eate,
    effect_report,
    median_ratio_effect,
    permutation_test,
    sobel_test,
    standardized_mean_difference,
)
from .matcher import (
    ConditionsNotMet,
    MatchedPair,
    MatchSet,
    SweepConditions,
    match_one_to_many,
    sweep_caliper,
    weighted_cosine_similarity,
)
from .selector import (
    CovariateSelection,
    LassoLogisticModel,
    auc,
    cross_validate,
    fit_lasso_logistic,
    lambda_max,
    select_covariates,
)
from .synthgen import (
    IntensityPlan,
    MediationPlan,
    SynthConfig,
    SynthStudy,
    generate_study,
    oracle_true_effect,
)
from .textfeat import (
    Lexicon,
    TopicModel,
    build_feature_matrix,
    lda_fit,
    lda_infer,
    lexicon_counts,
    question_word_count,
    sentiment_score,
    tokenize,
)

__version__ = "0.1.0"

"""Scene-graph rubric scoring for detailed image descriptions.

A generated description and its reference are each reduced to a scene graph
(objects, attributes, relations, all localized to character spans) that
serves as a structured checklist of presence questions for an LLM judge.
Granular 1-5 scores per component aggregate into coarse mistakes, omissions
and overall scores. The package also ships the evaluation harness used to
validate such metrics against human judgments.
"""

from .document import (
    AnnotatedDocument,
    CorefCluster,
    Mention,
    Sentence,
    Span,
    Token,
    load_document,
    load_document_file,
    serialize_document,
    validate_document,
)
from .graph import (
    SceneGraph,
    SGAttribute,
    SGObject,
    SGRelation,
    build_sentence_graph,
    extract_scene_graph,
    merge_graphs,
)
from .judge import (
    HashMockJudge,
    HttpJudge,
    JudgeConfig,
    ScoreDistribution,
    VerbatimOracleJudge,
    distribution_from_response,
    judge_from_url,
)
from .rubric import (
    Identifier,
    RubricPlan,
    RubricQuestion,
    detect_collisions,
    generate_identifiers,
    plan_passes,
    rewrite_identifier,
    template_question,
)
from .scoring import (
    EngineConfig,
    GranularScore,
    PoshResult,
    aggregate,
    pass_prompts,
    reward,
    run_passes,
    score_pair,
)
from .harness import (
    CorrelationResult,
    EloResult,
    EvalReport,
    GoldCoarse,
    GoldGranular,
    MaxF1Result,
    elo_rankings,
    granular_max_f1,
    label_to_score,
    pairwise_accuracy,
    rank_correlations,
    relaxed_f1,
)

__version__ = "0.1.0"

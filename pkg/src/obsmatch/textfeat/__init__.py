from .tokens import tokenize, question_word_count, QUESTION_WORDS
from .lexicon import Lexicon, lexicon_counts
from .sentiment import sentiment_score
from .lda import TopicModel, lda_fit, lda_infer, save_topic_model, load_topic_model
from .features import FeatureSchema, FeatureColumn, FeatureFrame, build_feature_matrix

__all__ = [
    "tokenize",
    "question_word_count",
    "QUESTION_WORDS",
    "Lexicon",
    "lexicon_counts",
    "sentiment_score",
    "TopicModel",
    "lda_fit",
    "lda_infer",
    "save_topic_model",
    "load_topic_model",
    "FeatureSchema",
    "FeatureColumn",
    "FeatureFrame",
    "build_feature_matrix",
]

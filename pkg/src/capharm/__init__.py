"""Measurement toolkit for representational harms in image-caption corpora."""

__version__ = "0.1.0"

from .errors import (CapharmError, ConfigError, DegenerateDataError, DomainError, IntegrityError,
                     NotFoundError, ParseError)
from .wordnet import SynsetId, SynsetRecord, Taxonomy, WordList, WordListPurpose, load_database, load_word_list
from .tagger import TaggedToken, Tagger, tokenize
from .scenegraph import (ResolvedWord, SceneGraph, SceneGraphParser, SceneTuple, extract_tuples,
                         union_graphs)
from .corpus import (BoundingBox, Corpus, DemographicAnnotation, StageBundle, StagePair,
                     attach_system_outputs, ingest_cc, ingest_coco, load_corpus, save_corpus)
from .stats import (CoefficientCI, LogisticRegressionGD, ProportionCI, SplitProtocol,
                    group_synset_correlation, proportion_diff_ci, split_and_estimate, train_logistic)
from .cases import HarmCase
from .stereotyping import (FPWordLists, cross_stage_divergence, find_false_positives, salience_difference,
                           tuple_distributions)
from .demeaning import (TriBound, context_specific, demeaning_words, identity_adjective_as_noun,
                        person_mention_disparity)

__all__ = [
    "CapharmError", "ConfigError", "DegenerateDataError", "DomainError", "IntegrityError",
    "NotFoundError", "ParseError", "SynsetId", "SynsetRecord", "Taxonomy", "WordList",
    "WordListPurpose", "load_database", "load_word_list", "TaggedToken", "Tagger", "tokenize",
    "ResolvedWord", "SceneGraph", "SceneGraphParser", "SceneTuple", "extract_tuples",
    "union_graphs", "BoundingBox", "Corpus", "DemographicAnnotation", "StageBundle", "StagePair",
    "attach_system_outputs", "ingest_cc", "ingest_coco", "load_corpus", "save_corpus",
    "CoefficientCI", "LogisticRegressionGD", "ProportionCI", "SplitProtocol",
    "group_synset_correlation", "proportion_diff_ci", "split_and_estimate", "train_logistic",
    "HarmCase", "FPWordLists", "cross_stage_divergence", "find_false_positives",
    "salience_difference", "tuple_distributions", "TriBound", "context_specific", "demeaning_words",
    "identity_adjective_as_noun", "person_mention_disparity",
    "__version__",
]

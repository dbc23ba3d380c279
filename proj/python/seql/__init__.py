"""Sequence labelling for Myanmar NER: corpora, CRF and BiLSTM taggers, metrics."""

from ._seql import (
    ConfigError,
    Model,
    SeqlError,
    evaluate,
    extract_entities,
    log_partition,
    marginals,
    parse_conll,
    tag_statistics,
    train,
    validate_bioes,
    viterbi,
    write_conll,
)

__all__ = [
    "ConfigError",
    "Model",
    "SeqlError",
    "evaluate",
    "extract_entities",
    "log_partition",
    "marginals",
    "parse_conll",
    "tag_statistics",
    "train",
    "validate_bioes",
    "viterbi",
    "write_conll",
]

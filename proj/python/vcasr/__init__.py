"""Visual-context-aware ASR lab: synthetic corpora, grounding, metrics and models."""

from ._vcasr import (
    ConfigError,
    Corpus,
    Error,
    FormatError,
    InputError,
    LexiconError,
    Model,
    SynthConfig,
    Utterance,
    edit_distance,
    generate_corpus,
    hash_directory,
    load_model,
    mask_corpus,
    oracle_wer,
    read_corpus,
    recovery_rate,
    relative_improvement,
    relative_improvement_rr,
    similarity_matrix,
    train,
    vg_context,
    wer,
    write_corpus,
)

__all__ = [name for name in dir() if not name.startswith("_")]

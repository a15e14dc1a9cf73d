"""Negation augmentation over dependency-parsed sentences.

Thin wrapper over the C++ core; see ``negforge._core`` for the full surface.
"""

from ._core import (
    BackendError,
    DepSentence,
    NegforgeError,
    ParseError,
    Token,
    build_prompt,
    detect_cues,
    fill_blanks,
    filter_candidates,
    levenshtein,
    match_rules,
    negate_span,
    nld_avg,
    norm_levenshtein,
    normalize,
    offline_generate,
    parse_completion,
    parse_conllu,
    perplexity,
    propose_masks,
    run_stage,
    self_bleu,
    sentence_bleu,
    tree_edit_distance,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

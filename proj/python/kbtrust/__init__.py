from ._core import (
    FusionError,
    Store,
    auc_pr,
    commit,
    compute_vote,
    coverage,
    derive_q,
    evaluate,
    extraction_posterior,
    fuse,
    ingest,
    multi_layer,
    single_layer,
    split_and_merge,
    square_loss,
    synth,
    update_alpha,
    value_posterior,
    vote_count,
    wdev,
)

__all__ = [
    "FusionError",
    "Store",
    "auc_pr",
    "commit",
    "compute_vote",
    "coverage",
    "derive_q",
    "evaluate",
    "extraction_posterior",
    "fuse",
    "ingest",
    "multi_layer",
    "single_layer",
    "split_and_merge",
    "square_loss",
    "synth",
    "update_alpha",
    "value_posterior",
    "vote_count",
    "wdev",
]

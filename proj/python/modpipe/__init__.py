"""Python bindings for the modpipe moderation pipeline."""

from ._modpipe import (
    EMBEDDING_DIM,
    ModpipeError,
    SvmModel,
    balanced_class_weights,
    class_histogram,
    fuse,
    gamma_scale,
    macro_report,
    majority_vote,
    parse_label,
    rbf_kernel,
    run_cli,
    stub_embedding,
    template_body,
    template_names,
    train_svm,
)

__all__ = [
    "EMBEDDING_DIM",
    "ModpipeError",
    "SvmModel",
    "balanced_class_weights",
    "class_histogram",
    "fuse",
    "gamma_scale",
    "macro_report",
    "majority_vote",
    "parse_label",
    "rbf_kernel",
    "run_cli",
    "stub_embedding",
    "template_body",
    "template_names",
    "train_svm",
]

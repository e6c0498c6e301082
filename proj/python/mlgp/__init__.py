"""Sparse variational GP multi-label classification with subspace inducing inputs."""

from ._core import (
    ArchiveIoError,
    Basis,
    BenchReport,
    Dataset,
    DatasetParseError,
    EvaluationReport,
    KernelKind,
    Minibatch,
    Mode,
    ModelState,
    NumericFailure,
    SynthResult,
    TrainConfig,
    build_basis,
    evaluate,
    expected_log_logistic,
    exhaustive_batch,
    finite_diff_worst,
    full_bound,
    generate_synth,
    gram_inducing_linear,
    kl_term,
    load_basis,
    load_checkpoint,
    load_xc_dataset,
    parse_xc_dataset,
    precision_at_k,
    predict_utilities,
    run_bench,
    sample_minibatch,
    save_basis,
    save_checkpoint,
    stochastic_bound,
    train,
)

__all__ = [
    "ArchiveIoError",
    "Basis",
    "BenchReport",
    "Dataset",
    "DatasetParseError",
    "EvaluationReport",
    "KernelKind",
    "Minibatch",
    "Mode",
    "ModelState",
    "NumericFailure",
    "SynthResult",
    "TrainConfig",
    "build_basis",
    "evaluate",
    "expected_log_logistic",
    "exhaustive_batch",
    "finite_diff_worst",
    "full_bound",
    "generate_synth",
    "gram_inducing_linear",
    "kl_term",
    "load_basis",
    "load_checkpoint",
    "load_xc_dataset",
    "parse_xc_dataset",
    "precision_at_k",
    "predict_utilities",
    "run_bench",
    "sample_minibatch",
    "save_basis",
    "save_checkpoint",
    "stochastic_bound",
    "train",
]

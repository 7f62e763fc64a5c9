"""Audio-visual embedding fusion heads: data generation, training, evaluation."""

from ._avfusion import (
    EerResult,
    Model,
    Sample,
    cli,
    compute_eer,
    evaluate,
    generate,
    load_checkpoint,
    read_embeddings,
    split,
    train,
    write_embeddings,
)

__all__ = [
    "EerResult",
    "Model",
    "Sample",
    "cli",
    "compute_eer",
    "evaluate",
    "generate",
    "load_checkpoint",
    "read_embeddings",
    "split",
    "train",
    "write_embeddings",
]

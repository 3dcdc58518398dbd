"""Continual contrastive text classification.

Thin Python surface over the C++ core: synthetic task generation, the hashing
MLP encoder, contrastive and relation-distillation losses, K-means exemplar
selection, the replay buffer, nearest-neighbor inference, and the full
training loop.
"""

from ._sccl import (
    Criterion,
    Encoder,
    Example,
    HashingConfig,
    MemoryBuffer,
    Prediction,
    RunConfig,
    SyntheticSpec,
    TaskSequence,
    TaskSpec,
    TemperatureConfig,
    build_criterion,
    compute_acc,
    compute_bwt,
    evaluate_task,
    gen_synthetic_tasks,
    hash_vectorize,
    ird_similarity,
    ird_value,
    kmeans,
    knn_predict,
    load_manifest,
    run_sequence,
    select_samples,
    supcon_grad,
    supcon_value,
)

__all__ = [
    "Criterion",
    "Encoder",
    "Example",
    "HashingConfig",
    "MemoryBuffer",
    "Prediction",
    "RunConfig",
    "SyntheticSpec",
    "TaskSequence",
    "TaskSpec",
    "TemperatureConfig",
    "build_criterion",
    "compute_acc",
    "compute_bwt",
    "evaluate_task",
    "gen_synthetic_tasks",
    "hash_vectorize",
    "ird_similarity",
    "ird_value",
    "kmeans",
    "knn_predict",
    "load_manifest",
    "run_sequence",
    "select_samples",
    "supcon_grad",
    "supcon_value",
]

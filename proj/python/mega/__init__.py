"""Genetic-algorithm weight merging for identically shaped neural networks."""

from ._core import (  # noqa: F401
    Dataset,
    GaConfig,
    GenerationRecord,
    Genome,
    MegaConfigError,
    MegaDataError,
    MegaNumericError,
    ModelSpec,
    TrainConfig,
    __version__,
    accuracy,
    gen_synthetic,
    load_checkpoint,
    load_csv,
    merge,
    merge_tree,
    save_checkpoint,
    split,
    train,
    weight_average,
)

from ._core import (
    Checkpoint,
    ConfigError,
    DimensionError,
    Hierarchy,
    InputDomainError,
    IoError,
    LoadError,
    NumericError,
    Shape,
    TrainConfig,
    associate_labels,
    chamfer,
    generate_shape,
    init_checkpoint,
    load_checkpoint,
    marching_cubes,
    mix_seed,
    read_tree,
    segmentation_iou,
    train,
    verify,
)

__all__ = [name for name in dir() if not name.startswith("_")]

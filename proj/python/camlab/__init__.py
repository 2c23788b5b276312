"""Python bindings for the camlab C++ core."""

from ._camlab import (
    ConfigError,
    FormatError,
    IoError,
    Model,
    ModelConfig,
    NumericError,
    ShapeError,
    cam,
    cam_entropy,
    delta,
    delta_variances,
    expected_max,
    generate_synthetic,
    lse_mean_gap,
    methods,
    rank_sum,
    sham,
    similarity_study,
    susceptibility_study,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]

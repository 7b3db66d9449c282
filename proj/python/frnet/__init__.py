"""Seismic acquisition-footprint removal with a U-Net autoencoder and a UTV loss."""

from ._frnet import (
    ConfigError,
    FormatError,
    NumericError,
    ShapeError,
    cli,
    correlation,
    denoise,
    diff_cols,
    diff_rows,
    gen_synthetic,
    gradcheck,
    load_volume,
    loss,
    parameter_count,
    save_volume,
    snr,
    tv_norm,
)

__all__ = [
    "ConfigError",
    "FormatError",
    "NumericError",
    "ShapeError",
    "cli",
    "correlation",
    "denoise",
    "diff_cols",
    "diff_rows",
    "gen_synthetic",
    "gradcheck",
    "load_volume",
    "loss",
    "parameter_count",
    "save_volume",
    "snr",
    "tv_norm",
]

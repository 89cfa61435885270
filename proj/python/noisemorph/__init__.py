"""Noise distribution transformation for denoising out-of-distribution noise."""

from ._noisemorph import (
    IoError,
    PipelineError,
    apply_noise,
    dct_denoise,
    denoise,
    ks_statistic,
    load_image,
    psnr,
    save_image,
    select_strategy,
    spectral_flatness,
    ssim,
)

__all__ = [
    "IoError",
    "PipelineError",
    "apply_noise",
    "dct_denoise",
    "denoise",
    "ks_statistic",
    "load_image",
    "psnr",
    "save_image",
    "select_strategy",
    "spectral_flatness",
    "ssim",
]

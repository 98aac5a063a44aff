"""Multi-temporal cloud removal for paired Sentinel-1/Sentinel-2 time series.

Arrays are float64 NumPy arrays: optical images are (13, H, W), SAR images
(2, H, W) in dB, masks (H, W) with 1 marking cloud. Metric and baseline
inputs are in the [0, 1] evaluation range.
"""

from ._seqcr import (
    BaselineError,
    DatasetError,
    MetricError,
    ModelError,
    PreprocessError,
    ProtocolError,
    Seq2Point,
    clip_rescale_optical,
    clip_rescale_sar,
    detect_clouds,
    detector_names,
    evaluate,
    fit_seq2seq,
    least_cloudy,
    list_patches,
    load_series,
    mosaic,
    nrmse,
    pairing_stats,
    psnr,
    sam,
    ssim,
    synth_generate,
)

__all__ = [
    "BaselineError",
    "DatasetError",
    "MetricError",
    "ModelError",
    "PreprocessError",
    "ProtocolError",
    "Seq2Point",
    "clip_rescale_optical",
    "clip_rescale_sar",
    "detect_clouds",
    "detector_names",
    "evaluate",
    "fit_seq2seq",
    "least_cloudy",
    "list_patches",
    "load_series",
    "mosaic",
    "nrmse",
    "pairing_stats",
    "psnr",
    "sam",
    "ssim",
    "synth_generate",
]

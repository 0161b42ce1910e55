"""CTU-partition-guided adaptive sharpening and rate-quality evaluation tools."""

from .degradation import (
    DEFAULT_ALPHA_TABLE,
    AlphaTable,
    build_hard_alpha_map,
    degrade_direct,
    degrade_fixed_point,
    gaussian_blur_3x3,
)
from .frame_io import Frame, Sequence, read_mask_pgm, read_y4m, write_mask_pgm, write_y4m
from .metrics import RdCurve, RdPoint, bd_rate, charbonnier, ms_ssim, overall_score, psnr, rd_cost
from .partition import PartitionMask, RdoParams, ctu_partition, leaf_distortion, partition_frame
from .sharpen import build_alpha_map, sharpen_adaptive, usm_uniform

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_ALPHA_TABLE", "AlphaTable", "build_hard_alpha_map", "degrade_direct",
    "degrade_fixed_point", "gaussian_blur_3x3",
    "Frame", "Sequence", "read_mask_pgm", "read_y4m", "write_mask_pgm", "write_y4m",
    "RdCurve", "RdPoint", "bd_rate", "charbonnier", "ms_ssim", "overall_score", "psnr", "rd_cost",
    "PartitionMask", "RdoParams", "ctu_partition", "leaf_distortion", "partition_frame",
    "build_alpha_map", "sharpen_adaptive", "usm_uniform",
]

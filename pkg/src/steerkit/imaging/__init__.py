"""Image I/O, dense optical flow, flow rendering, and augmentation."""

from .augment import AugmentPolicy, augment, resize_bilinear
from .color import hsv_to_rgb, luminance, rgb_to_hsv
from .flow import (
    FlowField,
    compute_dense_flow,
    encode_flow_hsv,
    exponential_flow_weights,
    weighted_flow_average,
)
from .ppm import Frame, encode_ppm, read_ppm, write_ppm

__all__ = [
    "AugmentPolicy",
    "FlowField",
    "Frame",
    "augment",
    "compute_dense_flow",
    "encode_flow_hsv",
    "encode_ppm",
    "exponential_flow_weights",
    "hsv_to_rgb",
    "luminance",
    "read_ppm",
    "resize_bilinear",
    "rgb_to_hsv",
    "weighted_flow_average",
    "write_ppm",
]

"""Compact-support sparse kernel weighting a measurement by distance.

The kernel is exactly zero at and beyond the length scale, which lets the
voxel map bound every neighbor query to a finite radius.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class KernelParams:
    """Sparse kernel parameters: support length scale (m) and signal scale."""

    length_scale: float = 0.3
    signal_scale: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.length_scale) and self.length_scale > 0.0):
            raise ValidationError(f"length_scale must be finite and > 0, got {self.length_scale}")
        if not (np.isfinite(self.signal_scale) and self.signal_scale > 0.0):
            raise ValidationError(f"signal_scale must be finite and > 0, got {self.signal_scale}")


def sparse_kernel(d, params: KernelParams):
    """Evaluate the sparse kernel at distance(s) d >= 0.

    For d < length_scale:
        sigma0 * [ (2 + cos(2 pi d/l)) (1 - d/l) / 3 + sin(2 pi d/l) / (2 pi) ]
    and bitwise 0.0 for d >= length_scale. Output is clamped at 0 to absorb
    the last-ulp cancellation near the support boundary.
    """
    arr = np.asarray(d, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("distance must be finite")
    if np.any(arr < 0.0):
        raise ValidationError("distance must be >= 0")
    r = arr / params.length_scale
    out = np.zeros_like(arr)
    mask = r < 1.0
    rm = r[mask] if arr.ndim else r
    val = ((2.0 + np.cos(2.0 * np.pi * rm)) * (1.0 - rm) / 3.0
           + np.sin(2.0 * np.pi * rm) / (2.0 * np.pi))
    val = params.signal_scale * np.maximum(val, 0.0)
    if arr.ndim == 0:
        return float(val) if mask else 0.0
    out[mask] = val
    return out


def support_radius(params: KernelParams) -> float:
    """Radius beyond which the kernel is exactly zero; bounds neighbor queries."""
    return params.length_scale

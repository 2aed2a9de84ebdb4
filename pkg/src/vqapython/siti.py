from typing import List
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from loguru import logger

from vqapython.common import *
from vqapython.video import PixelPlane, VideoClip, luma, frame_diff

__all__ = (
    'InsufficientFrames', 'SiTi', 'sobel_magnitude', 'spatial_info',
    'temporal_info', 'siti',
)


class InsufficientFrames(VqaError):
    """Raised when a temporal measure needs more frames than the clip has
    """
    DEFAULT_MSG = 'At least 2 frames are required'


@dataclass(frozen=True)
class SiTi:
    """Spatial and temporal information of a clip
    """
    si: float
    ti: float


def sobel_magnitude(plane: PixelPlane) -> PixelPlane:
    """Gradient magnitude ``sqrt(Gx**2 + Gy**2)`` of the standard 3x3 Sobel
    operator

    Only the interior is returned, so the result is ``(W-2) x (H-2)`` and
    never depends on border handling.
    """
    plane.require_size(3)
    arr = plane.samples
    gx = ndimage.sobel(arr, axis=1, mode='nearest')
    gy = ndimage.sobel(arr, axis=0, mode='nearest')
    mag = np.hypot(gx, gy)
    return PixelPlane(mag[1:-1, 1:-1])

def _frame_si(plane: PixelPlane) -> float:
    return float(np.std(sobel_magnitude(plane).samples))

def spatial_info(clip: VideoClip) -> float:
    """Maximum over frames of the spatial (population) standard deviation
    of the Sobel-filtered luma
    """
    values = [_frame_si(luma(frame)) for frame in clip]
    return float(max(values))

def temporal_info(clip: VideoClip) -> float:
    """Maximum over ``n`` of the spatial (population) standard deviation of
    ``F_n - F_{n+1}``

    Raises:
        InsufficientFrames: If the clip has a single frame
    """
    if len(clip) < 2:
        raise InsufficientFrames(len(clip))
    planes: List[PixelPlane] = [luma(frame) for frame in clip]
    values = [
        float(np.std(frame_diff(f_n, f_next).samples))
        for f_n, f_next in zip(planes[:-1], planes[1:])
    ]
    return float(max(values))

def siti(clip: VideoClip) -> SiTi:
    """Compute both :func:`spatial_info` and :func:`temporal_info`
    """
    result = SiTi(si=spatial_info(clip), ti=temporal_info(clip))
    logger.debug(f'{clip.id}: si={result.si:.4f}, ti={result.ti:.4f}')
    return result

from typing import Optional, Tuple, Iterator
import enum
from dataclasses import dataclass

import numpy as np
from skimage import color as skcolor

from vqapython.common import *

__all__ = (
    'Subsampling', 'ColorRange', 'PixelPlane', 'Frame', 'VideoClip',
    'chroma_size', 'luma', 'to_rgb', 'rgb_to_lab', 'rgb_to_hsv',
    'rescale_for_features', 'frame_diff',
)

#: BT.601 inverse matrix coefficients (full range)
BT601_CR_R = 1.402
BT601_CB_G = 0.344136
BT601_CR_G = 0.714136
BT601_CB_B = 1.772

LIMITED_LUMA_MIN = 16
LIMITED_LUMA_MAX = 235
LIMITED_CHROMA_MIN = 16
LIMITED_CHROMA_MAX = 240


class Subsampling(enum.Enum):
    """Chroma subsampling of a :class:`Frame`
    """
    S420 = '420'
    S422 = '422'
    S444 = '444'

class ColorRange(enum.Enum):
    """Quantisation range of the YCbCr samples
    """
    LIMITED = 'limited'
    FULL = 'full'


def chroma_size(width: int, height: int, subsampling: Subsampling) -> Tuple[int, int]:
    """Get the ``(width, height)`` of the chroma planes for a luma size
    """
    if subsampling is Subsampling.S420:
        return (width + 1) // 2, (height + 1) // 2
    elif subsampling is Subsampling.S422:
        return (width + 1) // 2, height
    return width, height


@dataclass(frozen=True)
class PixelPlane:
    """A single plane of real-valued samples stored row-major

    The :attr:`samples` array is converted to ``float64`` and made read-only,
    so planes can be shared freely.
    """
    samples: np.ndarray #: 2-d array of shape ``(height, width)``

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionError(arr.shape, 'PixelPlane samples must be 2-d')
        arr.setflags(write=False)
        object.__setattr__(self, 'samples', arr)

    @classmethod
    def filled(cls, width: int, height: int, value: float) -> 'PixelPlane':
        """Create a constant plane
        """
        return cls(np.full((height, width), value, dtype=np.float64))

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.samples.shape

    def require_size(self, min_width: int, min_height: Optional[int] = None):
        """Raise :class:`~.common.DimensionError` if the plane is smaller
        than the given size
        """
        if min_height is None:
            min_height = min_width
        if self.width < min_width or self.height < min_height:
            raise DimensionError(
                self.shape, f'Plane must be at least {min_width}x{min_height}',
            )

    def __eq__(self, other):
        if not isinstance(other, PixelPlane):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.samples, other.samples)


@dataclass(frozen=True)
class Frame:
    """A decoded YCbCr frame
    """
    y: PixelPlane       #: Luma plane
    cb: PixelPlane      #: Blue-difference chroma plane
    cr: PixelPlane      #: Red-difference chroma plane
    subsampling: Subsampling = Subsampling.S420
    range: ColorRange = ColorRange.LIMITED

    def __post_init__(self):
        expected = chroma_size(self.y.width, self.y.height, self.subsampling)
        for plane in (self.cb, self.cr):
            if (plane.width, plane.height) != expected:
                raise DimensionError(
                    (plane.width, plane.height),
                    f'Chroma plane does not match {self.subsampling.value} subsampling '
                    f'of a {self.y.width}x{self.y.height} frame',
                )

    @classmethod
    def from_arrays(cls, y: np.ndarray, cb: np.ndarray, cr: np.ndarray,
                    subsampling: Subsampling = Subsampling.S420,
                    range: ColorRange = ColorRange.LIMITED) -> 'Frame':
        return cls(
            y=PixelPlane(y), cb=PixelPlane(cb), cr=PixelPlane(cr),
            subsampling=subsampling, range=range,
        )

    @classmethod
    def gray(cls, y: np.ndarray,
             subsampling: Subsampling = Subsampling.S420,
             range: ColorRange = ColorRange.FULL) -> 'Frame':
        """Create an achromatic frame (chroma fixed at 128)
        """
        y = np.asarray(y, dtype=np.float64)
        cw, ch = chroma_size(y.shape[1], y.shape[0], subsampling)
        c = np.full((ch, cw), 128.)
        return cls.from_arrays(y, c, c, subsampling, range)

    @property
    def width(self) -> int:
        return self.y.width

    @property
    def height(self) -> int:
        return self.y.height

    def planes(self) -> Tuple[PixelPlane, PixelPlane, PixelPlane]:
        return (self.y, self.cb, self.cr)


@dataclass(frozen=True)
class VideoClip:
    """An ordered sequence of :class:`Frame` instances sharing one geometry
    """
    frames: Tuple[Frame, ...]
    fps: float
    id: str = ''

    def __post_init__(self):
        frames = tuple(self.frames)
        object.__setattr__(self, 'frames', frames)
        if not len(frames):
            raise DimensionError(0, 'A clip must contain at least one frame')
        if not self.fps > 0:
            raise VqaError(self.fps, 'Frame rate must be positive')
        f0 = frames[0]
        for ix, frame in enumerate(frames[1:], 1):
            if (frame.width, frame.height) != (f0.width, f0.height):
                raise DimensionError((ix, frame.width, frame.height), 'Frame size differs')
            if frame.subsampling is not f0.subsampling or frame.range is not f0.range:
                raise DimensionError(ix, 'Frame format differs within the clip')

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def subsampling(self) -> Subsampling:
        return self.frames[0].subsampling

    @property
    def range(self) -> ColorRange:
        return self.frames[0].range

    @property
    def duration(self) -> float:
        """Clip duration in seconds
        """
        return len(self) / self.fps

    def __len__(self):
        return len(self.frames)

    def __iter__(self) -> Iterator[Frame]:
        yield from self.frames

    def __getitem__(self, key) -> Frame:
        return self.frames[key]


def luma(frame: Frame) -> PixelPlane:
    """Get the luma plane mapped to ``[0, 255]``

    Limited range samples are stretched with ``(Y - 16) * 255 / 219``
    and clamped.
    """
    y = frame.y.samples
    if frame.range is ColorRange.LIMITED:
        y = np.clip((y - LIMITED_LUMA_MIN) * 255. / 219., 0., 255.)
    return PixelPlane(y)

def _upsample(plane: PixelPlane, width: int, height: int) -> np.ndarray:
    arr = plane.samples
    ry = -(-height // arr.shape[0])
    rx = -(-width // arr.shape[1])
    arr = np.repeat(np.repeat(arr, ry, axis=0), rx, axis=1)
    return arr[:height, :width]

def to_rgb(frame: Frame) -> Tuple[PixelPlane, PixelPlane, PixelPlane]:
    """Convert a frame to R, G, B planes in ``[0, 255]`` using the BT.601
    matrix

    Chroma is upsampled to the luma size by nearest neighbour first.
    """
    w, h = frame.width, frame.height
    y = frame.y.samples
    cb = _upsample(frame.cb, w, h)
    cr = _upsample(frame.cr, w, h)
    if frame.range is ColorRange.LIMITED:
        y = (y - LIMITED_LUMA_MIN) * 255. / 219.
        cb = (cb - 128.) * 255. / 224.
        cr = (cr - 128.) * 255. / 224.
    else:
        cb = cb - 128.
        cr = cr - 128.
    r = y + BT601_CR_R * cr
    g = y - BT601_CB_G * cb - BT601_CR_G * cr
    b = y + BT601_CB_B * cb
    return tuple(PixelPlane(np.clip(c, 0., 255.)) for c in (r, g, b))

def _stack_rgb(r: PixelPlane, g: PixelPlane, b: PixelPlane) -> np.ndarray:
    if not (r.shape == g.shape == b.shape):
        raise DimensionError((r.shape, g.shape, b.shape), 'RGB planes differ in size')
    rgb = np.stack([r.samples, g.samples, b.samples], axis=-1) / 255.
    return np.clip(rgb, 0., 1.)

def rgb_to_lab(r: PixelPlane, g: PixelPlane, b: PixelPlane) -> Tuple[PixelPlane, PixelPlane, PixelPlane]:
    """Convert RGB planes (``[0, 255]``) to CIELAB (D65 white, sRGB gamma)

    Returns native ``L*`` (``[0, 100]``), ``a*`` and ``b*`` planes.
    """
    lab = skcolor.rgb2lab(_stack_rgb(r, g, b), illuminant='D65')
    return tuple(PixelPlane(lab[..., i]) for i in range(3))

def rgb_to_hsv(r: PixelPlane, g: PixelPlane, b: PixelPlane) -> Tuple[PixelPlane, PixelPlane, PixelPlane]:
    """Convert RGB planes (``[0, 255]``) to HSV

    Returns ``H`` in ``[0, 360)`` and ``S``, ``V`` in ``[0, 1]``.
    """
    hsv = skcolor.rgb2hsv(_stack_rgb(r, g, b))
    hue = np.mod(hsv[..., 0] * 360., 360.)
    return PixelPlane(hue), PixelPlane(hsv[..., 1]), PixelPlane(hsv[..., 2])

_FEATURE_SCALES = {
    'L': lambda v: v * 2.55,
    'a': lambda v: v + 128.,
    'b': lambda v: v + 128.,
    'H': lambda v: v * 255. / 360.,
    'S': lambda v: v * 255.,
    'V': lambda v: v * 255.,
}

def rescale_for_features(component: str, plane: PixelPlane) -> PixelPlane:
    """Map a native colour component (one of ``"L", "a", "b", "H", "S", "V"``)
    onto ``[0, 255]`` before feature extraction
    """
    try:
        f = _FEATURE_SCALES[component]
    except KeyError:
        raise VqaError(component, 'Unknown colour component')
    return PixelPlane(np.clip(f(plane.samples), 0., 255.))

def frame_diff(f_n: PixelPlane, f_next: PixelPlane) -> PixelPlane:
    """The signed difference ``F_n - F_{n+1}``
    """
    if f_n.shape != f_next.shape:
        raise DimensionError((f_n.shape, f_next.shape), 'Cannot difference planes of different size')
    return PixelPlane(f_n.samples - f_next.samples)

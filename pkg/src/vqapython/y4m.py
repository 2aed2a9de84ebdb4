import builtins
from typing import Optional, Dict, List, Tuple
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from vqapython.common import *
from vqapython.video import (
    Subsampling, ColorRange, Frame, VideoClip, chroma_size,
    LIMITED_LUMA_MIN, LIMITED_LUMA_MAX,
)

__all__ = (
    'ParseError', 'MagicError', 'HeaderError', 'FrameMarkerError',
    'TruncatedError', 'UnsupportedFormat',
    'Colorspace', 'COLORSPACES', 'COLORSPACES_BY_TAG', 'Y4mHeader',
    'parse_y4m', 'build_y4m', 'parse_raw_yuv', 'build_raw_yuv',
)

MAGIC = b'YUV4MPEG2'
FRAME_MARKER = b'FRAME'
DEFAULT_COLORSPACE_TAG = '420'
RANGE_EXTENSION = 'XCOLORRANGE'


class ParseError(VqaError):
    """Raised when a Y4M stream does not follow the container grammar
    """
    DEFAULT_MSG = 'Malformed Y4M stream'
    frame_index: Optional[int]
    def __init__(self, value, msg: Optional[str] = None, frame_index: Optional[int] = None):
        super().__init__(value, msg)
        self.frame_index = frame_index
    def __str__(self):
        s = super().__str__()
        if self.frame_index is not None:
            s = f'frame {self.frame_index}: {s}'
        return s

class MagicError(ParseError):
    DEFAULT_MSG = 'Expected "YUV4MPEG2" at start of stream'

class HeaderError(ParseError):
    DEFAULT_MSG = 'Invalid stream header'

class FrameMarkerError(ParseError):
    DEFAULT_MSG = 'Expected "FRAME" marker'

class TruncatedError(ParseError):
    DEFAULT_MSG = 'Stream ended inside plane data'

class UnsupportedFormat(VqaError):
    DEFAULT_MSG = 'Unsupported colorspace'


@dataclass(frozen=True)
class Colorspace:
    """A Y4M colorspace (``C``) tag and the frame format it implies
    """
    tag: str                    #: The tag text following ``C``
    subsampling: Subsampling
    range: ColorRange

COLORSPACES = (
    Colorspace('420', Subsampling.S420, ColorRange.LIMITED),
    Colorspace('420jpeg', Subsampling.S420, ColorRange.FULL),
    Colorspace('420mpeg2', Subsampling.S420, ColorRange.LIMITED),
    Colorspace('420paldv', Subsampling.S420, ColorRange.LIMITED),
    Colorspace('422', Subsampling.S422, ColorRange.LIMITED),
    Colorspace('444', Subsampling.S444, ColorRange.FULL),
)

COLORSPACES_BY_TAG = {_cs.tag:_cs for _cs in COLORSPACES}

_BASE_TAG_BY_SUBSAMPLING = {
    Subsampling.S420: '420',
    Subsampling.S422: '422',
    Subsampling.S444: '444',
}


@dataclass
class Y4mHeader:
    """The stream header line of a Y4M file
    """
    width: int
    height: int
    fps: Fraction
    colorspace: Colorspace = COLORSPACES_BY_TAG[DEFAULT_COLORSPACE_TAG]
    interlace: str = 'p'
    aspect: str = '1:1'

    extensions: Dict[str, str] = field(default_factory=dict)
    """``X`` tags as ``{name: value}``"""

    range: Optional[ColorRange] = None
    """The resolved colour range (``XCOLORRANGE`` wins over the colorspace)"""

    def __post_init__(self):
        if self.range is None:
            self.range = self.colorspace.range

    @property
    def subsampling(self) -> Subsampling:
        return self.colorspace.subsampling

    @property
    def frame_size(self) -> int:
        """Number of payload bytes per frame
        """
        cw, ch = chroma_size(self.width, self.height, self.subsampling)
        return self.width * self.height + 2 * cw * ch

    @classmethod
    def from_clip(cls, clip: VideoClip) -> 'Y4mHeader':
        """Build a header describing ``clip``
        """
        tag = _BASE_TAG_BY_SUBSAMPLING[clip.subsampling]
        cs = COLORSPACES_BY_TAG[tag]
        extensions = {}
        if cs.range is not clip.range:
            alt = [c for c in COLORSPACES if c.subsampling is clip.subsampling and c.range is clip.range]
            if len(alt):
                cs = alt[0]
            else:
                extensions[RANGE_EXTENSION] = clip.range.name
        fps = Fraction(clip.fps).limit_denominator(1_000_000)
        return cls(
            width=clip.width, height=clip.height, fps=fps, colorspace=cs,
            extensions=extensions, range=clip.range,
        )

    @classmethod
    def parse(cls, data: bytes) -> Tuple['Y4mHeader', bytes]:
        """Parse the header line

        Returns a tuple of:
            :class:`Y4mHeader`
                The parsed header
            :class:`bytes`
                The remaining stream after the header newline
        """
        if not data.startswith(MAGIC):
            raise MagicError(data[:16])
        try:
            stop_ix = data.index(b'\n')
        except ValueError:
            raise HeaderError(data[:64], 'Header line is not terminated')
        line, remaining = data[:stop_ix], data[stop_ix+1:]
        try:
            tokens = line.decode('ascii').split(' ')
        except UnicodeDecodeError:
            raise HeaderError(line, 'Header is not ASCII')
        if tokens[0] != MAGIC.decode():
            raise MagicError(line)

        kw = {}
        extensions = {}
        cs_tag = None
        for token in tokens[1:]:
            if not len(token):
                continue
            key, value = token[0], token[1:]
            try:
                if key == 'W':
                    kw['width'] = int(value)
                elif key == 'H':
                    kw['height'] = int(value)
                elif key == 'F':
                    num, den = value.split(':')
                    kw['fps'] = Fraction(int(num), int(den))
                elif key == 'I':
                    kw['interlace'] = value
                elif key == 'A':
                    kw['aspect'] = value
                elif key == 'C':
                    cs_tag = value
                elif key == 'X':
                    name, _, ext_value = value.partition('=')
                    extensions[name] = ext_value
                else:
                    raise HeaderError(token, 'Unknown header tag')
            except (ValueError, ZeroDivisionError):
                raise HeaderError(token, 'Invalid header tag value')

        for key, name in (('width', 'W'), ('height', 'H'), ('fps', 'F')):
            if key not in kw:
                raise HeaderError(line, f'Missing "{name}" tag')
        if kw['width'] < 1 or kw['height'] < 1 or kw['fps'] <= 0:
            raise HeaderError(line, 'Frame size and rate must be positive')

        if cs_tag is None:
            cs_tag = DEFAULT_COLORSPACE_TAG
        if cs_tag not in COLORSPACES_BY_TAG:
            raise UnsupportedFormat(cs_tag)
        kw['colorspace'] = COLORSPACES_BY_TAG[cs_tag]

        rng = extensions.get(RANGE_EXTENSION)
        if rng is not None:
            try:
                kw['range'] = ColorRange[rng.upper()]
            except KeyError:
                raise UnsupportedFormat(rng, 'Unsupported color range')
        kw['extensions'] = extensions
        return cls(**kw), remaining

    def build_header(self) -> bytes:
        """Construct the header line (including the trailing newline)
        """
        tokens = [
            MAGIC.decode(),
            f'W{self.width}', f'H{self.height}',
            f'F{self.fps.numerator}:{self.fps.denominator}',
            f'I{self.interlace}', f'A{self.aspect}', f'C{self.colorspace.tag}',
        ]
        for key, value in self.extensions.items():
            tokens.append(f'X{key}={value}')
        return ' '.join(tokens).encode('ascii') + b'\n'


def _decode_planes(payload: bytes, width: int, height: int,
                   subsampling: Subsampling, range: ColorRange) -> Frame:
    cw, ch = chroma_size(width, height, subsampling)
    arr = np.frombuffer(payload, dtype=np.uint8)
    luma_size = width * height
    chroma_len = cw * ch
    y = arr[:luma_size].reshape(height, width).astype(np.float64)
    cb = arr[luma_size:luma_size+chroma_len].reshape(ch, cw)
    cr = arr[luma_size+chroma_len:luma_size+2*chroma_len].reshape(ch, cw)
    if range is ColorRange.LIMITED:
        y = np.clip(y, LIMITED_LUMA_MIN, LIMITED_LUMA_MAX)
    return Frame.from_arrays(y, cb, cr, subsampling=subsampling, range=range)

def _encode_planes(frame: Frame) -> bytes:
    return b''.join(
        np.rint(np.clip(p.samples, 0, 255)).astype(np.uint8).tobytes()
        for p in frame.planes()
    )

def parse_frame(data: bytes, header: Y4mHeader, index: int,
                offset: int = 0) -> Tuple[Frame, int]:
    """Parse one ``FRAME`` record starting at ``offset``

    Only the frame payload is sliced out of ``data``, so a whole stream can
    be walked without copying what follows each frame.

    Returns a tuple of:
        :class:`~.video.Frame`
            The decoded frame
        :class:`int`
            The offset of the first byte after the frame payload
    """
    marker_end = offset + len(FRAME_MARKER)
    if not data.startswith(FRAME_MARKER, offset):
        raise FrameMarkerError(data[offset:marker_end], frame_index=index)
    stop_ix = data.find(b'\n', offset)
    if stop_ix < 0:
        raise FrameMarkerError(data[offset:offset+32], 'Frame header is not terminated', frame_index=index)
    params = data[marker_end:stop_ix]
    if len(params) and not params.startswith(b' '):
        raise FrameMarkerError(data[offset:stop_ix], frame_index=index)
    start = stop_ix + 1
    size = header.frame_size
    available = len(data) - start
    if available < size:
        raise TruncatedError(available, f'Expected {size} payload bytes', frame_index=index)
    frame = _decode_planes(
        data[start:start+size], header.width, header.height, header.subsampling, header.range,
    )
    return frame, start + size

def parse_y4m(data: bytes, id: str = '') -> VideoClip:
    """Decode an 8-bit Y4M stream into a :class:`~.video.VideoClip`

    Raises:
        ParseError: If the stream violates the Y4M grammar (the raised
            subclass tells which part)
        UnsupportedFormat: If the colorspace tag is not an 8-bit format
            listed in :data:`COLORSPACES`
    """
    offset = data.find(b'\n') + 1 or len(data)
    header, _ = Y4mHeader.parse(data[:offset])
    frames: List[Frame] = []
    while offset < len(data):
        frame, offset = parse_frame(data, header, len(frames), offset)
        frames.append(frame)
    if not len(frames):
        raise ParseError(0, 'Stream contains no frames')
    return VideoClip(frames=frames, fps=float(header.fps), id=id)


def build_y4m(clip: VideoClip) -> bytes:
    """Serialize a clip to a Y4M byte string
    """
    header = Y4mHeader.from_clip(clip)
    parts = [header.build_header()]
    for frame in clip:
        parts.append(FRAME_MARKER + b'\n')
        parts.append(_encode_planes(frame))
    return b''.join(parts)

def parse_raw_yuv(data: bytes, width: int, height: int, fps: float, id: str = '',
                  subsampling: Subsampling = Subsampling.S420,
                  range: ColorRange = ColorRange.LIMITED) -> VideoClip:
    """Decode headerless planar 8-bit YUV whose geometry is known externally
    """
    cw, ch = chroma_size(width, height, subsampling)
    size = width * height + 2 * cw * ch
    if not len(data) or len(data) % size != 0:
        raise TruncatedError(
            len(data), f'Raw stream is not a whole number of {size}-byte frames',
            frame_index=len(data) // size,
        )
    frames = [
        _decode_planes(data[i:i+size], width, height, subsampling, range)
        for i in builtins.range(0, len(data), size)
    ]
    return VideoClip(frames=frames, fps=fps, id=id)

def build_raw_yuv(clip: VideoClip) -> bytes:
    """Serialize a clip to headerless planar YUV
    """
    return b''.join(_encode_planes(frame) for frame in clip)

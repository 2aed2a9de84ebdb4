"""Natural scene statistics features

The per-plane features follow the BRISQUE layout: a GGD fit of the MSCN
coefficients and AGGD fits of the four paired products, repeated on a half
resolution copy of the plane.
"""
from typing import List, Tuple, Sequence
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.special import gamma
from loguru import logger

from vqapython.common import *
from vqapython.video import (
    PixelPlane, VideoClip, Frame, luma, to_rgb, rgb_to_lab, rgb_to_hsv,
    rescale_for_features, frame_diff,
)
from vqapython.siti import InsufficientFrames, spatial_info, temporal_info

__all__ = (
    'GgdFit', 'AggdFit', 'mscn', 'fit_ggd', 'fit_aggd', 'downsample',
    'brisque_frame_features', 'brisque_feature_names', 'sample_frame_indices',
    'nss_bag', 'nss_feature_names', 'brisque_bag', 'NSS_FEATURE_COUNT',
)

SHAPE_MIN = 0.2
SHAPE_MAX = 10.
SHAPE_STEP = 0.001

#: Shape values searched by the moment-matching fits
SHAPE_GRID = np.round(
    np.linspace(SHAPE_MIN, SHAPE_MAX, int(round((SHAPE_MAX - SHAPE_MIN) / SHAPE_STEP)) + 1), 3,
)
SHAPE_GRID.setflags(write=False)

#: ``Γ(2/ν)² / (Γ(1/ν)Γ(3/ν))`` evaluated on :data:`SHAPE_GRID`
RHO_GRID = gamma(2. / SHAPE_GRID) ** 2 / (gamma(1. / SHAPE_GRID) * gamma(3. / SHAPE_GRID))
RHO_GRID.setflags(write=False)

MIN_VARIANCE = 1e-8
MSCN_SIGMA = 7. / 6.
MSCN_RADIUS = 3
MSCN_C = 1.

ORIENTATIONS = ('h', 'v', 'd1', 'd2')

#: Spatial channels of :func:`nss_bag`, in output order
SPATIAL_CHANNELS = ('y', 'a', 'b', 's')
TEMPORAL_CHANNEL = 'dy'

MIN_SAMPLED_FRAMES = 8

NSS_FEATURE_COUNT = 326


@dataclass(frozen=True)
class GgdFit:
    """Generalized Gaussian fit
    """
    alpha: float    #: Shape
    sigma: float    #: Scale (root mean square)

@dataclass(frozen=True)
class AggdFit:
    """Asymmetric generalized Gaussian fit
    """
    nu: float       #: Shape
    sigma_l: float  #: Left scale
    sigma_r: float  #: Right scale
    eta: float      #: Mean offset


def _as_samples(samples, min_samples: int) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < min_samples:
        raise DegenerateInput(x.size, f'At least {min_samples} samples required')
    if not np.all(np.isfinite(x)):
        raise DegenerateInput(x.size, 'Samples must be finite')
    if np.var(x) < MIN_VARIANCE:
        raise DegenerateInput(float(np.var(x)), 'Sample variance is too small')
    return x

def _match_shape(rho: float) -> float:
    ix = int(np.argmin(np.abs(RHO_GRID - rho)))
    return float(SHAPE_GRID[ix])

def fit_ggd(samples: Sequence[float], min_samples: int = 100) -> GgdFit:
    """Moment-matching GGD estimate

    ``rho = mean(|x|)**2 / mean(x**2)`` is matched against :data:`RHO_GRID`
    and ``sigma = sqrt(mean(x**2))``.

    Raises:
        DegenerateInput: If there are fewer than ``min_samples`` samples or
            their variance is below ``1e-8``
    """
    x = _as_samples(samples, min_samples)
    m2 = np.mean(x * x)
    rho = np.mean(np.abs(x)) ** 2 / m2
    return GgdFit(alpha=_match_shape(rho), sigma=float(np.sqrt(m2)))

def fit_aggd(samples: Sequence[float], min_samples: int = 100) -> AggdFit:
    """Moment-matching AGGD estimate

    Raises:
        DegenerateInput: If the samples are one-sided, too few, or have
            (near) zero variance
    """
    x = _as_samples(samples, min_samples)
    left = x[x < 0]
    right = x[x > 0]
    if not left.size or not right.size:
        raise DegenerateInput((left.size, right.size), 'Samples must take both signs')
    sigma_l = float(np.sqrt(np.mean(left * left)))
    sigma_r = float(np.sqrt(np.mean(right * right)))
    g = sigma_l / sigma_r
    r_hat = np.mean(np.abs(x)) ** 2 / np.mean(x * x)
    r_norm = r_hat * (g ** 3 + 1) * (g + 1) / (g ** 2 + 1) ** 2
    ix = int(np.argmin((RHO_GRID - r_norm) ** 2))
    nu = float(SHAPE_GRID[ix])
    eta = (sigma_r - sigma_l) * gamma(2. / nu) / gamma(1. / nu)
    return AggdFit(nu=nu, sigma_l=sigma_l, sigma_r=sigma_r, eta=float(eta))


def mscn(plane: PixelPlane) -> PixelPlane:
    """Mean-subtracted contrast-normalized coefficients

    ``(I - mu) / (sigma + 1)`` where ``mu`` and ``sigma`` are the local mean
    and deviation under a 7x7 Gaussian window (std 7/6) with symmetric
    border extension.
    """
    plane.require_size(2 * MSCN_RADIUS + 1)
    img = plane.samples
    kw = dict(sigma=MSCN_SIGMA, mode='reflect', truncate=MSCN_RADIUS / MSCN_SIGMA)
    mu = ndimage.gaussian_filter(img, **kw)
    var = ndimage.gaussian_filter(img * img, **kw) - mu * mu
    sigma = np.sqrt(np.abs(var))
    return PixelPlane((img - mu) / (sigma + MSCN_C))

def downsample(plane: PixelPlane) -> PixelPlane:
    """Half-resolution plane

    Each output sample is the mean of a 2x2 block, i.e. bilinear
    interpolation at the centre of the block. An odd last row or column is
    dropped.
    """
    arr = plane.samples
    h, w = (arr.shape[0] // 2) * 2, (arr.shape[1] // 2) * 2
    arr = arr[:h, :w]
    out = (arr[0::2, 0::2] + arr[1::2, 0::2] + arr[0::2, 1::2] + arr[1::2, 1::2]) / 4.
    return PixelPlane(out)

def _paired_products(coefs: np.ndarray) -> Tuple[np.ndarray, ...]:
    return (
        coefs[:, :-1] * coefs[:, 1:],
        coefs[:-1, :] * coefs[1:, :],
        coefs[:-1, :-1] * coefs[1:, 1:],
        coefs[1:, :-1] * coefs[:-1, 1:],
    )

def brisque_feature_names(scales: int = 2) -> Tuple[str, ...]:
    """Names of :func:`brisque_frame_features` in output order
    """
    names = []
    for s in range(1, scales + 1):
        names.extend([f's{s}_mscn_alpha', f's{s}_mscn_sigma2'])
        for o in ORIENTATIONS:
            names.extend([f's{s}_{o}_nu', f's{s}_{o}_eta', f's{s}_{o}_lvar', f's{s}_{o}_rvar'])
    return tuple(names)

def _scale_features(plane: PixelPlane) -> List[float]:
    if np.var(plane.samples) < MIN_VARIANCE:
        return [2., 0.] + [2., 0., 0., 0.] * len(ORIENTATIONS)
    coefs = mscn(plane).samples
    try:
        g = fit_ggd(coefs, min_samples=2)
        values = [g.alpha, g.sigma ** 2]
    except DegenerateInput:
        values = [2., 0.]
    for prod in _paired_products(coefs):
        try:
            a = fit_aggd(prod, min_samples=2)
            values.extend([a.nu, a.eta, a.sigma_l ** 2, a.sigma_r ** 2])
        except DegenerateInput:
            values.extend([2., 0., 0., 0.])
    return values

def brisque_frame_features(plane: PixelPlane, scales: int = 2) -> FeatureVector:
    """BRISQUE features of one plane (18 per scale)

    For each scale the order is ``mscn_alpha, mscn_sigma2`` followed by
    ``nu, eta, lvar, rvar`` for the horizontal, vertical and two diagonal
    paired products. A flat plane (variance below ``1e-8``) yields shapes
    of 2 and zeros everywhere else.
    """
    plane.require_size(7 * 2 ** (scales - 1))
    values = []
    for s in range(scales):
        if s > 0:
            plane = downsample(plane)
        values.extend(_scale_features(plane))
    return FeatureVector(names=brisque_feature_names(scales), values=values)


def sample_frame_indices(n_frames: int, fps: float, sample_fps: float = 1.) -> List[int]:
    """Evenly spaced frame indices at ``sample_fps`` (at least 8)

    ``k = max(8, round(duration * sample_fps))`` frames at
    ``floor(m * n / k)``; every frame when ``k >= n``.
    """
    duration = n_frames / fps
    k = max(MIN_SAMPLED_FRAMES, int(round(duration * sample_fps)))
    if k >= n_frames:
        return list(range(n_frames))
    return [(m * n_frames) // k for m in range(k)]

def _per_frame_names() -> Tuple[str, ...]:
    names = []
    for ch in SPATIAL_CHANNELS:
        names.extend(f'{ch}_{n}' for n in brisque_feature_names(2))
    names.extend(f'{TEMPORAL_CHANNEL}_{n}' for n in brisque_feature_names(1))
    return tuple(names)

def _pooled_names(per_frame: Sequence[str]) -> List[str]:
    names = []
    for n in per_frame:
        names.extend([f'{n}_mean', f'{n}_std'])
    return names

def nss_feature_names() -> Tuple[str, ...]:
    """The 326 column names produced by :func:`nss_bag`

    Each of the 162 per-frame features contributes ``<name>_mean`` and
    ``<name>_std`` (in that order), followed by ``si`` and ``ti``.
    """
    return tuple(_pooled_names(_per_frame_names()) + ['si', 'ti'])

def _spatial_channels(frame: Frame) -> Tuple[PixelPlane, ...]:
    rgb = to_rgb(frame)
    _, a, b = rgb_to_lab(*rgb)
    _, s, _ = rgb_to_hsv(*rgb)
    return (
        luma(frame),
        rescale_for_features('a', a),
        rescale_for_features('b', b),
        rescale_for_features('S', s),
    )

def _frame_features(clip: VideoClip, ix: int, lumas: List[PixelPlane]) -> List[float]:
    values = []
    for plane in _spatial_channels(clip[ix]):
        values.extend(brisque_frame_features(plane, scales=2).values)
    if ix + 1 < len(clip):
        diff = frame_diff(lumas[ix], lumas[ix+1])
    else:
        diff = frame_diff(lumas[ix-1], lumas[ix])
    values.extend(brisque_frame_features(diff, scales=1).values)
    return values

def _pool(rows: List[List[float]]) -> List[float]:
    arr = np.asarray(rows, dtype=np.float64)
    means = np.mean(arr, axis=0)
    stds = np.std(arr, axis=0)
    return list(np.column_stack([means, stds]).ravel())

def nss_bag(clip: VideoClip, sample_fps: float = 1.) -> FeatureVector:
    """The 326-value NSS feature bag of a clip

    BRISQUE features of the luma, ``a*``, ``b*`` and saturation planes plus
    single-scale BRISQUE features of the luma frame difference are computed
    on the sampled frames (see :func:`sample_frame_indices`), pooled by mean
    and standard deviation, and followed by SI and TI over every frame.

    Raises:
        InsufficientFrames: If the clip has fewer than 2 frames
    """
    if len(clip) < 2:
        raise InsufficientFrames(len(clip))
    indices = sample_frame_indices(len(clip), clip.fps, sample_fps)
    lumas = [luma(frame) for frame in clip]
    rows = [_frame_features(clip, ix, lumas) for ix in indices]
    values = _pool(rows) + [spatial_info(clip), temporal_info(clip)]
    logger.debug(f'{clip.id}: nss features from {len(indices)} of {len(clip)} frames')
    return FeatureVector(names=nss_feature_names(), values=values)

def brisque_bag(clip: VideoClip, sample_fps: float = 1.) -> FeatureVector:
    """Luma BRISQUE features averaged over the sampled frames

    This is the 36-value BRISQUE baseline, retrained on video by pooling
    frame features with the mean.
    """
    indices = sample_frame_indices(len(clip), clip.fps, sample_fps)
    rows = [brisque_frame_features(luma(clip[ix]), scales=2).values for ix in indices]
    means = np.mean(np.asarray(rows, dtype=np.float64), axis=0)
    return FeatureVector(
        names=[f'y_{n}_mean' for n in brisque_feature_names(2)], values=means,
    )

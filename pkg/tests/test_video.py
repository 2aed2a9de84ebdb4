import numpy as np
import pytest

from vqapython import (
    Frame, PixelPlane, VideoClip, Subsampling, ColorRange, DimensionError, VqaError,
    luma, to_rgb, rgb_to_lab, rgb_to_hsv, rescale_for_features, frame_diff, chroma_size,
)


def full_444(y, cb, cr, size=2):
    return Frame.from_arrays(
        np.full((size, size), y), np.full((size, size), cb), np.full((size, size), cr),
        subsampling=Subsampling.S444, range=ColorRange.FULL,
    )

def test_chroma_size():
    assert chroma_size(64, 48, Subsampling.S420) == (32, 24)
    assert chroma_size(63, 47, Subsampling.S420) == (32, 24)
    assert chroma_size(64, 48, Subsampling.S422) == (32, 48)
    assert chroma_size(64, 48, Subsampling.S444) == (64, 48)

def test_frame_validation():
    y = np.zeros((4, 4))
    with pytest.raises(DimensionError):
        Frame.from_arrays(y, np.zeros((4, 4)), np.zeros((4, 4)), subsampling=Subsampling.S420)
    with pytest.raises(DimensionError):
        PixelPlane(np.zeros(16))
    with pytest.raises(DimensionError):
        VideoClip(frames=[], fps=30.)
    with pytest.raises(VqaError):
        VideoClip(frames=[Frame.gray(y)], fps=0.)
    with pytest.raises(DimensionError):
        VideoClip(frames=[Frame.gray(y), Frame.gray(np.zeros((4, 6)))], fps=30.)

def test_plane_is_read_only():
    plane = PixelPlane(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        plane.samples[0, 0] = 1

def test_luma():
    full = Frame.gray(np.full((2, 2), 128.))
    assert np.all(luma(full).samples == 128.)

    limited = Frame.gray(np.array([[16., 235.], [125.5, 0.]]), range=ColorRange.LIMITED)
    y = luma(limited).samples
    assert y[0, 0] == 0.
    assert y[0, 1] == pytest.approx(255.)
    assert y[1, 0] == pytest.approx(127.5)
    assert y[1, 1] == 0.

def test_to_rgb():
    r, g, b = to_rgb(full_444(81, 90, 240))
    assert r.samples[0, 0] == pytest.approx(238.024, abs=1e-3)
    assert g.samples[0, 0] == pytest.approx(14.094, abs=1e-3)
    assert b.samples[0, 0] == pytest.approx(13.664, abs=1e-3)

    for v in (0., 255.):
        rgb = to_rgb(full_444(v, 128, 128))
        for p in rgb:
            assert np.all(p.samples == v)

    # limited range black and white
    black = Frame.gray(np.full((2, 2), 16.), range=ColorRange.LIMITED)
    white = Frame.gray(np.full((2, 2), 235.), range=ColorRange.LIMITED)
    for p in to_rgb(black):
        assert np.allclose(p.samples, 0.)
    for p in to_rgb(white):
        assert np.allclose(p.samples, 255.)

def test_to_rgb_upsamples_chroma():
    y = np.full((4, 4), 128.)
    cb = np.full((2, 2), 128.)
    cr = np.array([[128., 228.], [128., 128.]])
    r, g, b = to_rgb(Frame.from_arrays(y, cb, cr, range=ColorRange.FULL))
    assert r.shape == (4, 4)
    assert np.all(r.samples[:2, 2:] > 128.)
    assert np.all(r.samples[:2, :2] == 128.)
    assert np.all(r.samples[2:, :] == 128.)

def test_lab_and_hsv():
    red = [PixelPlane(np.full((2, 2), v)) for v in (255., 0., 0.)]
    L, a, b = rgb_to_lab(*red)
    assert L.samples[0, 0] == pytest.approx(53.24, abs=.05)
    assert a.samples[0, 0] == pytest.approx(80.09, abs=.05)
    assert b.samples[0, 0] == pytest.approx(67.20, abs=.05)

    h, s, v = rgb_to_hsv(*red)
    assert h.samples[0, 0] == pytest.approx(0.)
    assert s.samples[0, 0] == pytest.approx(1.)
    assert v.samples[0, 0] == pytest.approx(1.)

def test_achromatic_frames(rng):
    y = rng.integers(0, 256, size=(8, 8)).astype(np.float64)
    rgb = to_rgb(Frame.gray(y))
    _, s, _ = rgb_to_hsv(*rgb)
    assert np.all(s.samples == 0.)
    _, a, b = rgb_to_lab(*rgb)
    assert np.max(np.abs(a.samples)) < .01
    assert np.max(np.abs(b.samples)) < .01

def test_rescale_for_features():
    plane = PixelPlane(np.array([[0., 50., 100.]]))
    assert np.allclose(rescale_for_features('L', plane).samples, [[0., 127.5, 255.]])
    ab = PixelPlane(np.array([[-128., 0., 127.]]))
    assert np.allclose(rescale_for_features('a', ab).samples, [[0., 128., 255.]])
    sat = PixelPlane(np.array([[0., .5, 1.]]))
    assert np.allclose(rescale_for_features('S', sat).samples, [[0., 127.5, 255.]])
    hue = PixelPlane(np.array([[0., 180.]]))
    assert np.allclose(rescale_for_features('H', hue).samples, [[0., 127.5]])
    with pytest.raises(VqaError):
        rescale_for_features('Q', plane)

def test_frame_diff(rng):
    a = PixelPlane(rng.normal(size=(5, 6)))
    b = PixelPlane(rng.normal(size=(5, 6)))
    assert np.all(frame_diff(a, a).samples == 0.)
    assert np.array_equal(frame_diff(a, b).samples, -frame_diff(b, a).samples)
    with pytest.raises(DimensionError):
        frame_diff(a, PixelPlane(np.zeros((6, 5))))
    with pytest.raises(DimensionError):
        frame_diff(PixelPlane(np.zeros((4, 4))), PixelPlane(np.zeros((4, 5))))

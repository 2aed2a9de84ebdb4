import numpy as np
import pytest

from vqapython import (
    PixelPlane, ColorRange, DimensionError, InsufficientFrames,
    sobel_magnitude, spatial_info, temporal_info, siti,
)

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = SOBEL_X.T


def brute_sobel(arr):
    h, w = arr.shape
    out = np.zeros((h - 2, w - 2))
    for i in range(1, h - 1):
        for j in range(1, w - 1):
            win = arr[i-1:i+2, j-1:j+2]
            gx = float(np.sum(win * SOBEL_X))
            gy = float(np.sum(win * SOBEL_Y))
            out[i-1, j-1] = np.sqrt(gx * gx + gy * gy)
    return out

def brute_si(arrays):
    return max(float(np.std(brute_sobel(a))) for a in arrays)

def brute_ti(arrays):
    return max(float(np.std(a - b)) for a, b in zip(arrays[:-1], arrays[1:]))


def test_sobel_magnitude():
    const = PixelPlane(np.full((5, 6), 77.))
    mag = sobel_magnitude(const)
    assert mag.shape == (3, 4)
    assert np.all(mag.samples == 0.)

    ramp = PixelPlane(np.tile(np.arange(6, dtype=np.float64), (5, 1)))
    assert np.allclose(sobel_magnitude(ramp).samples, 8.)

    with pytest.raises(DimensionError):
        sobel_magnitude(PixelPlane(np.zeros((2, 2))))

def test_si_examples(gray_clip):
    assert spatial_info(gray_clip([np.full((8, 8), 100.)] * 3)) == 0.
    ramp = np.tile(np.arange(8, dtype=np.float64) * 10., (8, 1))
    assert spatial_info(gray_clip([ramp, ramp])) == pytest.approx(0., abs=1e-12)

def test_ti_examples(gray_clip):
    frame = np.full((4, 4), 50.)
    assert temporal_info(gray_clip([frame] * 4)) == 0.
    assert temporal_info(gray_clip([frame, frame + 7.])) == pytest.approx(0., abs=1e-12)

    a = np.zeros((2, 2))
    b = a.copy()
    b[0, 0] = 10.
    assert temporal_info(gray_clip([a, b])) == pytest.approx(4.3301, abs=1e-4)

    with pytest.raises(InsufficientFrames):
        temporal_info(gray_clip([frame]))

def test_against_brute_force(rng, gray_clip):
    for _ in range(50):
        arrays = [rng.integers(0, 256, size=(16, 16)).astype(np.float64) for _ in range(8)]
        result = siti(gray_clip(arrays))
        assert result.si == pytest.approx(brute_si(arrays), abs=1e-9)
        assert result.ti == pytest.approx(brute_ti(arrays), abs=1e-9)

def test_against_brute_force_small_shapes(rng, gray_clip):
    for _ in range(20):
        h, w = rng.integers(3, 12, size=2)
        n = int(rng.integers(2, 6))
        arrays = [rng.integers(0, 256, size=(h, w)).astype(np.float64) for _ in range(n)]
        clip = gray_clip(arrays)
        result = siti(clip)
        assert result.si == pytest.approx(brute_si(arrays), abs=1e-9)
        assert result.ti == pytest.approx(brute_ti(arrays), abs=1e-9)

def test_si_uses_luma_range(noise_clip):
    clip = noise_clip(n_frames=2, width=8, height=8, range=ColorRange.LIMITED)
    planes = [np.clip((f.y.samples - 16.) * 255. / 219., 0., 255.) for f in clip]
    assert spatial_info(clip) == pytest.approx(brute_si(planes), abs=1e-9)

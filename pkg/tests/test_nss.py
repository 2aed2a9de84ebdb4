import numpy as np
import pytest
from scipy import ndimage, stats

from vqapython import (
    PixelPlane, ColorRange, Subsampling, DegenerateInput, DimensionError,
    InsufficientFrames, mscn, fit_ggd, fit_aggd, downsample, brisque_frame_features,
    brisque_feature_names, sample_frame_indices, nss_bag, nss_feature_names, brisque_bag,
    NSS_FEATURE_COUNT,
)

FLAT_FEATURES = ([2., 0.] + [2., 0., 0., 0.] * 4) * 2


def test_mscn(rng):
    const = mscn(PixelPlane(np.full((16, 16), 93.)))
    assert np.allclose(const.samples, 0., atol=1e-9)

    noise = PixelPlane(rng.normal(128., 20., size=(256, 256)))
    assert abs(float(np.mean(mscn(noise).samples))) < .05

    with pytest.raises(DimensionError):
        mscn(PixelPlane(np.zeros((6, 6))))

def test_mscn_contrast(rng):
    base = rng.integers(0, 2, size=(64, 64)).astype(np.float64) * 127.
    a = mscn(PixelPlane(base)).samples
    b = mscn(PixelPlane(base * 2.)).samples

    kw = dict(sigma=7. / 6., mode='reflect', truncate=3. / (7. / 6.))
    mu = ndimage.gaussian_filter(base, **kw)
    sigma = np.sqrt(np.abs(ndimage.gaussian_filter(base * base, **kw) - mu * mu))
    mask = sigma >= 57.
    assert mask.mean() > .5
    assert np.max(np.abs(a - b)[mask]) <= .02

def test_fit_ggd(rng):
    g = fit_ggd(rng.normal(size=100_000))
    assert 1.9 <= g.alpha <= 2.1
    assert .97 <= g.sigma <= 1.03

    g = fit_ggd(rng.laplace(size=100_000))
    assert .9 <= g.alpha <= 1.1

    with pytest.raises(DegenerateInput):
        fit_ggd(np.zeros(1000))
    with pytest.raises(DegenerateInput):
        fit_ggd(rng.normal(size=50))

@pytest.mark.parametrize('shape', [.5, 1., 2., 4.])
def test_ggd_shape_recovery(shape):
    # the moment ratio flattens out for large shapes, so more samples are needed there
    size = 1_000_000 if shape > 2 else 100_000
    for seed in range(10):
        gen = np.random.default_rng(seed)
        x = stats.gennorm.rvs(shape, size=size, random_state=gen)
        assert abs(fit_ggd(x).alpha - shape) <= .1

def test_fit_aggd(rng):
    a = fit_aggd(rng.normal(size=100_000))
    assert abs(a.sigma_l - a.sigma_r) <= .05 * a.sigma_l
    assert abs(a.eta) <= .05

    x = np.concatenate([
        -np.abs(rng.normal(size=1000)), 2. * np.abs(rng.normal(size=2000)),
    ])
    a = fit_aggd(x)
    assert a.sigma_r > a.sigma_l
    assert a.eta > 0

    with pytest.raises(DegenerateInput):
        fit_aggd(np.abs(rng.normal(size=1000)) + .1)
    with pytest.raises(DegenerateInput):
        fit_aggd(np.zeros(1000))

def test_downsample():
    arr = np.arange(20, dtype=np.float64).reshape(4, 5)
    out = downsample(PixelPlane(arr)).samples
    assert out.shape == (2, 2)
    assert out[0, 0] == pytest.approx((0 + 1 + 5 + 6) / 4.)
    assert out[1, 1] == pytest.approx((12 + 13 + 17 + 18) / 4.)

def test_brisque_frame_features(rng):
    names = brisque_feature_names(2)
    assert len(names) == 36
    assert names[:3] == ('s1_mscn_alpha', 's1_mscn_sigma2', 's1_h_nu')
    assert names[18] == 's2_mscn_alpha'

    flat = brisque_frame_features(PixelPlane(np.full((32, 32), 40.)))
    assert flat.names == names
    assert list(flat.values) == FLAT_FEATURES

    plane = PixelPlane(np.clip(rng.normal(128., 20., size=(64, 64)), 0., 255.))
    fv = brisque_frame_features(plane)
    assert np.all(np.isfinite(fv.as_array()))
    assert 1. <= fv['s1_mscn_alpha'] <= 4.
    assert fv == brisque_frame_features(plane)

    with pytest.raises(DimensionError):
        brisque_frame_features(PixelPlane(np.zeros((13, 13))))
    assert len(brisque_frame_features(PixelPlane(np.zeros((7, 7))), scales=1)) == 18

def test_brisque_shift_invariance(rng):
    base = rng.uniform(20., 235., size=(48, 48))
    fv = brisque_frame_features(PixelPlane(base)).as_array()
    for c in (-10., 3.5, 10.):
        shifted = brisque_frame_features(PixelPlane(base + c)).as_array()
        assert np.allclose(fv, shifted, rtol=0., atol=1e-6)

def test_sample_frame_indices():
    assert sample_frame_indices(30, 30.) == [0, 3, 7, 11, 15, 18, 22, 26]
    assert sample_frame_indices(5, 30.) == [0, 1, 2, 3, 4]
    assert sample_frame_indices(300, 30.) == list(range(0, 300, 30))
    assert sample_frame_indices(300, 30., sample_fps=2.) == list(range(0, 300, 15))

def test_feature_names():
    names = nss_feature_names()
    assert len(names) == NSS_FEATURE_COUNT == 326
    assert len(set(names)) == len(names)
    assert names[:2] == ('y_s1_mscn_alpha_mean', 'y_s1_mscn_alpha_std')
    assert names[-2:] == ('si', 'ti')
    assert 'dy_s1_h_rvar_std' in names
    assert not any(n.startswith('dy_s2_') for n in names)

def test_nss_bag_static_clip(gray_clip):
    clip = gray_clip([np.full((32, 32), 90.)] * 12)
    fv = nss_bag(clip)
    assert fv.names == nss_feature_names()
    for name, value in fv:
        if name.endswith('_std'):
            assert value == 0.
    assert fv['si'] == 0.
    assert fv['ti'] == 0.
    assert fv['y_s1_mscn_alpha_mean'] == 2.

def test_nss_bag_duplicated_frames(rng, gray_clip):
    arrays = [rng.integers(0, 256, size=(32, 32)).astype(np.float64) for _ in range(16)]
    clip = gray_clip(arrays, fps=2.)
    doubled = gray_clip([a for a in arrays for _ in range(2)], fps=4.)
    assert sample_frame_indices(len(clip), clip.fps) == [2 * i for i in range(8)]
    assert sample_frame_indices(len(doubled), doubled.fps) == [4 * i for i in range(8)]

    fv = nss_bag(clip)
    fv2 = nss_bag(doubled)
    for name, value in fv:
        if name.split('_', 1)[0] in ('y', 'a', 'b', 's'):
            assert fv2[name] == value, name
    assert fv['dy_s1_mscn_sigma2_mean'] > 0
    assert fv2['dy_s1_mscn_sigma2_mean'] == 0.
    assert fv2['si'] == pytest.approx(fv['si'])

def test_nss_bag_random_clips(noise_clip):
    for subsampling in Subsampling:
        for range in ColorRange:
            clip = noise_clip(
                n_frames=10, width=16, height=16, subsampling=subsampling, range=range,
            )
            fv = nss_bag(clip)
            assert len(fv) == NSS_FEATURE_COUNT
            assert np.all(np.isfinite(fv.as_array()))

def test_nss_bag_errors(gray_clip):
    with pytest.raises(InsufficientFrames):
        nss_bag(gray_clip([np.zeros((32, 32))]))
    with pytest.raises(DimensionError):
        nss_bag(gray_clip([np.zeros((8, 8))] * 4))

def test_brisque_bag(noise_clip):
    clip = noise_clip(n_frames=10, width=16, height=16)
    fv = brisque_bag(clip)
    assert len(fv) == 36
    assert fv.names[0] == 'y_s1_mscn_alpha_mean'

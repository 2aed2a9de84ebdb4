import builtins

import numpy as np
import pytest

from vqapython import (
    Frame, VideoClip, Subsampling, ColorRange, FeatureTable, RatingMatrix,
)


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run slow tests')

def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

@pytest.fixture
def video_ids(faker):
    def build(n):
        return sorted(faker.unique.bothify('vid-####-??') for _ in range(n))
    return build

@pytest.fixture
def noise_clip(rng):
    """Factory for clips of uniform noise
    """
    def build(n_frames=10, width=32, height=32, fps=30., id='noise',
              subsampling=Subsampling.S420, range=ColorRange.FULL, gray=False):
        frames = []
        for _ in builtins.range(n_frames):
            y = rng.integers(0, 256, size=(height, width)).astype(np.float64)
            if gray:
                frames.append(Frame.gray(y, subsampling=subsampling, range=range))
                continue
            cw, ch = {
                Subsampling.S420: ((width + 1) // 2, (height + 1) // 2),
                Subsampling.S422: ((width + 1) // 2, height),
                Subsampling.S444: (width, height),
            }[subsampling]
            cb = rng.integers(0, 256, size=(ch, cw))
            cr = rng.integers(0, 256, size=(ch, cw))
            frames.append(Frame.from_arrays(y, cb, cr, subsampling=subsampling, range=range))
        return VideoClip(frames=frames, fps=fps, id=id)
    return build

@pytest.fixture
def gray_clip():
    """Factory for achromatic full range clips from a list of luma arrays
    """
    def build(arrays, fps=30., id='gray'):
        frames = [Frame.gray(np.asarray(a, dtype=np.float64)) for a in arrays]
        return VideoClip(frames=frames, fps=fps, id=id)
    return build

@pytest.fixture
def synthetic_ratings():
    """Factory for rating studies with a shared latent quality per video

    Every subject rates every video; video ``j`` belongs to session
    ``1 + j % n_sessions``. Subjects listed in ``random_subjects`` rate
    uniformly at random instead of following the latent quality.
    """
    def build(n_subjects=20, n_videos=30, noise=3., seed=0, random_subjects=0,
              n_sessions=3):
        gen = np.random.default_rng(seed)
        latent = gen.uniform(10., 90., size=n_videos)
        videos = [f'v{j:03d}' for j in range(n_videos)]
        items = []
        for i in range(n_subjects + random_subjects):
            subject = f's{i:03d}'
            if i < n_subjects:
                scores = np.clip(latent + gen.normal(0., noise, size=n_videos), 0., 100.)
            else:
                scores = gen.uniform(0., 100., size=n_videos)
            for j, vid in enumerate(videos):
                items.append((subject, vid, 1 + j % n_sessions, float(scores[j])))
        return RatingMatrix.from_tuples(items), dict(zip(videos, latent))
    return build

@pytest.fixture
def learnable_table():
    """Factory for a feature table whose MOS is a smooth monotone function
    of the first feature
    """
    def build(n=40, d=3, seed=0):
        gen = np.random.default_rng(seed)
        ids = [f'v{i:03d}' for i in range(n)]
        X = gen.uniform(0., 1., size=(n, d))
        mos = {vid:float(100. * X[i, 0] ** 2) for i, vid in enumerate(ids)}
        table = FeatureTable(names=[f'f{i}' for i in range(d)], ids=ids, values=X)
        return table, mos
    return build

import numpy as np
import pytest
from scipy import ndimage

from vqapython import (
    FeatureTable, SvrParams, GameVqpSpec, SplitProtocol, nss_bag,
)

N_SOURCES = 12
N_LEVELS = 5
SIZE = 64
N_FRAMES = 30


def source_texture(gen, index):
    base = gen.normal(size=(SIZE + N_FRAMES, SIZE + N_FRAMES))
    smooth = ndimage.gaussian_filter(base, sigma=1. + .25 * index)
    smooth = (smooth - smooth.min()) / (smooth.max() - smooth.min())
    return 30. + 190. * smooth

def distorted_frames(texture, level, gen):
    frames = []
    for t in range(N_FRAMES):
        frame = texture[t:t + SIZE, t:t + SIZE]
        if level:
            frame = ndimage.gaussian_filter(frame, sigma=.6 * level)
            frame = frame + gen.normal(0., 3. * level, size=frame.shape)
        frames.append(np.clip(frame, 0., 255.))
    return frames


@pytest.mark.slow
def test_distortion_ladder(gray_clip):
    gen = np.random.default_rng(99)
    items, mos = [], {}
    for i in range(N_SOURCES):
        texture = source_texture(gen, i)
        for level in range(N_LEVELS):
            vid = f'src{i:02d}_l{level}'
            clip = gray_clip(distorted_frames(texture, level, gen), fps=30., id=vid)
            items.append((vid, nss_bag(clip)))
            mos[vid] = 100. - 20. * level
    table = FeatureTable.from_vectors(items)

    spec = GameVqpSpec(params=SvrParams(), use_grid_search=True)
    report = SplitProtocol(spec, iterations=20, seed=5).run(table, mos)
    assert report.median.srocc >= .9

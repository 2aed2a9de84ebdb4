import numpy as np
import pytest

from vqapython import (
    FeatureVector, FeatureTable, DimensionError, SvrParams, SvrModel, ScalerParams,
    SchemaError, ModelFormatError, JoinError, DeepFeatureTable, GameVqpMode, GameVqpModel,
    GameVqpSpec, train_gamevqp, predict_gamevqp,
)


def constant_model(value, names):
    d = len(names)
    return SvrModel(
        feature_names=names, support_vectors=np.zeros((0, d)), dual_coefs=[], bias=value,
        params=SvrParams().resolve(1, d), scaler=ScalerParams([0.] * d, [1.] * d),
    )

@pytest.fixture
def tables(rng, video_ids):
    ids = video_ids(30)
    nss = FeatureTable(names=['n0', 'n1', 'n2'], ids=ids, values=rng.uniform(size=(30, 3)))
    deep = DeepFeatureTable(
        names=[f'd_{i}' for i in range(4)], ids=ids, values=rng.normal(size=(30, 4)),
    )
    mos = {vid:float(100. * nss.vector(vid)['n0']) for vid in ids}
    return ids, nss, deep, mos


def test_deep_table_names(rng):
    with pytest.raises(DimensionError):
        DeepFeatureTable(names=['d_1', 'd_0'], ids=['a'], values=[[1., 2.]])
    with pytest.raises(DimensionError):
        DeepFeatureTable(names=['x0'], ids=['a'], values=[[1.]])
    table = DeepFeatureTable(names=['d_0', 'd_1'], ids=['a'], values=[[1., 2.]])
    assert table.dimension == 2

def test_branch_average():
    model = GameVqpModel(
        nss_branch=constant_model(50., ['n0']), deep_branch=constant_model(70., ['d_0']),
    )
    assert model.mode is GameVqpMode.FULL
    nss = FeatureVector.from_pairs([('n0', .3)])
    deep = FeatureVector.from_pairs([('d_0', -1.)])
    assert predict_gamevqp(model, nss, deep) == 60.
    assert model.predict_branches(nss, deep) == (50., 70.)
    with pytest.raises(SchemaError):
        model.predict(nss)

def test_nss_only(tables):
    ids, nss, deep, mos = tables
    model = train_gamevqp(nss, mos)
    assert model.mode is GameVqpMode.NSS_ONLY
    assert model.deep_branch is None
    fv = nss.vector(ids[0])
    assert model.predict(fv) == model.nss_branch.predict(fv)
    with pytest.raises(SchemaError):
        model.predict(fv, deep.vector(ids[0]))

def test_full_mode_bounds(rng, tables):
    ids, nss, deep, mos = tables
    model = train_gamevqp(nss, mos, deep=deep, params=SvrParams(C=50.))
    assert model.mode is GameVqpMode.FULL
    for _ in range(100):
        fv = FeatureVector(names=nss.names, values=rng.uniform(size=3))
        dv = FeatureVector(names=deep.names, values=rng.normal(size=4))
        a, b = model.predict_branches(fv, dv)
        out = predict_gamevqp(model, fv, dv)
        assert min(a, b) - 1e-9 <= out <= max(a, b) + 1e-9

    pred = model.predict_tables(ids, nss, deep)
    expected = [model.predict(nss.vector(vid), deep.vector(vid)) for vid in ids]
    assert np.allclose(pred, expected)

def test_join_errors(tables):
    ids, nss, deep, mos = tables
    partial = DeepFeatureTable(names=deep.names, ids=ids[1:], values=deep.matrix(ids[1:]))
    with pytest.raises(JoinError) as excinfo:
        train_gamevqp(nss, mos, deep=partial)
    assert excinfo.value.ids == (ids[0],)

    with pytest.raises(JoinError) as excinfo:
        train_gamevqp(nss, mos, ids=ids + ['no-such-video'])
    assert excinfo.value.ids == ('no-such-video',)

    model = train_gamevqp(nss, mos, deep=deep)
    with pytest.raises(JoinError):
        model.predict_tables(ids, nss, partial)
    with pytest.raises(SchemaError):
        model.predict_tables(ids, nss)

def test_save_load(tables):
    ids, nss, deep, mos = tables
    for d in (None, deep):
        model = train_gamevqp(nss, mos, deep=d, seed=3)
        data = model.save()
        loaded = GameVqpModel.load(data)
        assert loaded.mode is model.mode
        assert loaded.save() == data
        assert np.array_equal(loaded.predict_tables(ids, nss, d), model.predict_tables(ids, nss, d))

    with pytest.raises(ModelFormatError):
        GameVqpModel.load(data.replace(b'"mode": "full"', b'"mode": "nss_only"'))
    with pytest.raises(ModelFormatError):
        GameVqpModel.load(b'not json')

def test_spec_fit_uses_given_ids(tables):
    ids, nss, deep, mos = tables
    spec = GameVqpSpec(params=SvrParams(C=10.))
    model = spec.fit(nss, mos, ids[:10], seed=0)
    assert sorted(model.nss_branch.support_indices) == list(model.nss_branch.support_indices)
    assert all(i < 10 for i in model.nss_branch.support_indices)
    assert model.nss_branch.scaler == train_gamevqp(nss, mos, ids=ids[:10]).nss_branch.scaler

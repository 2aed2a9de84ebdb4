from typing import Optional, Sequence, Mapping, Dict, Tuple, Any
from dataclasses import dataclass
import enum
import json

import numpy as np
from loguru import logger

from vqapython.common import *
from vqapython.tables import FeatureTable, TableError, PathLike
from vqapython.svr import (
    SvrParams, SvrModel, SchemaError, ModelFormatError, svr_train, grid_search,
)

__all__ = (
    'JoinError', 'DeepFeatureTable', 'GameVqpMode', 'GameVqpModel',
    'GameVqpSpec', 'train_gamevqp', 'predict_gamevqp',
)

MODEL_VERSION = 1
DEEP_PREFIX = 'd_'


class JoinError(VqaError):
    """Raised when video ids do not line up across the input tables

    The offending ids are available as :attr:`ids`.
    """
    DEFAULT_MSG = 'Video ids missing from input table'
    def __init__(self, ids: Sequence[str], msg: Optional[str] = None):
        self.ids = tuple(ids)
        super().__init__(self.ids, msg)


class DeepFeatureTable(FeatureTable):
    """Externally extracted deep feature vectors (``video_id,d_0,...,d_{k-1}``)
    """
    def __post_init__(self):
        super().__post_init__()
        expected = tuple(f'{DEEP_PREFIX}{i}' for i in range(len(self.names)))
        if self.names != expected:
            raise DimensionError(self.names[:3], f'Deep feature columns must be named {DEEP_PREFIX}0..{DEEP_PREFIX}{len(self.names)-1}')

    @classmethod
    def read_csv(cls, filename: PathLike) -> 'DeepFeatureTable':
        table = FeatureTable.read_csv(filename)
        try:
            return cls(names=table.names, ids=table.ids, values=table.values)
        except DimensionError as exc:
            raise TableError(exc.value, exc.msg, filename=str(filename), line=None, column=2)


class GameVqpMode(enum.Enum):
    FULL = 'full'
    NSS_ONLY = 'nss_only'


@dataclass
class GameVqpModel:
    """An NSS branch SVR and an optional deep feature branch SVR

    In :attr:`~GameVqpMode.FULL` mode the prediction is the mean of the two
    branch predictions; otherwise it is the NSS branch prediction.
    """
    nss_branch: SvrModel
    deep_branch: Optional[SvrModel] = None

    @property
    def mode(self) -> GameVqpMode:
        if self.deep_branch is None:
            return GameVqpMode.NSS_ONLY
        return GameVqpMode.FULL

    def predict_branches(self, nss_vector: FeatureVector,
                         deep_vector: Optional[FeatureVector] = None) -> Tuple[float, Optional[float]]:
        if self.mode is GameVqpMode.FULL:
            if deep_vector is None:
                raise SchemaError(None, 'A deep feature vector is required in full mode')
            return self.nss_branch.predict(nss_vector), self.deep_branch.predict(deep_vector)
        if deep_vector is not None:
            raise SchemaError(len(deep_vector), 'Model has no deep branch')
        return self.nss_branch.predict(nss_vector), None

    def predict(self, nss_vector: FeatureVector,
                deep_vector: Optional[FeatureVector] = None) -> float:
        nss, deep = self.predict_branches(nss_vector, deep_vector)
        if deep is None:
            return nss
        return (nss + deep) / 2.

    def predict_tables(self, ids: Sequence[str], nss: FeatureTable,
                       deep: Optional[FeatureTable] = None) -> np.ndarray:
        """Predict many videos at once

        Raises:
            JoinError: If any id lacks a row in a required table
        """
        ids = list(ids)
        _check_join(ids, nss, deep if self.mode is GameVqpMode.FULL else None)
        if nss.names != self.nss_branch.feature_names:
            raise SchemaError(nss.dimension, 'NSS table columns differ from the model')
        pred = self.nss_branch.predict_array(nss.matrix(ids))
        if self.mode is GameVqpMode.FULL:
            if deep is None:
                raise SchemaError(None, 'A deep feature table is required in full mode')
            if deep.names != self.deep_branch.feature_names:
                raise SchemaError(deep.dimension, 'Deep table columns differ from the model')
            pred = (pred + self.deep_branch.predict_array(deep.matrix(ids))) / 2.
        return pred

    def to_dict(self) -> Dict[str, Any]:
        return {
            'version': MODEL_VERSION,
            'mode': self.mode.value,
            'nss_branch': self.nss_branch.to_dict(),
            'deep_branch': None if self.deep_branch is None else self.deep_branch.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> 'GameVqpModel':
        if not isinstance(d, dict) or d.get('version') != MODEL_VERSION:
            raise ModelFormatError(d.get('version') if isinstance(d, dict) else d, 'Unsupported model version')
        try:
            mode = GameVqpMode(d['mode'])
            nss = SvrModel.from_dict(d['nss_branch'])
            deep = d['deep_branch']
        except (KeyError, ValueError) as exc:
            raise ModelFormatError(str(exc))
        if deep is not None:
            deep = SvrModel.from_dict(deep)
        model = cls(nss_branch=nss, deep_branch=deep)
        if model.mode is not mode:
            raise ModelFormatError(mode.value, 'Mode does not match the stored branches')
        return model

    def save(self) -> bytes:
        return json.dumps(self.to_dict(), indent=2).encode('utf-8') + b'\n'

    @classmethod
    def load(cls, data: bytes) -> 'GameVqpModel':
        try:
            d = json.loads(data.decode('utf-8'))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ModelFormatError(str(exc), 'Model file is not valid JSON')
        return cls.from_dict(d)


def _check_join(ids: Sequence[str], nss: FeatureTable, deep: Optional[FeatureTable] = None,
                mos: Optional[Mapping[str, float]] = None):
    missing = []
    for name, table in (('nss', nss), ('deep', deep)):
        if table is None:
            continue
        m = table.missing(ids)
        if len(m):
            missing.extend(m)
            logger.debug(f'{len(m)} ids missing from the {name} table')
    if mos is not None:
        missing.extend(vid for vid in ids if vid not in mos)
    if len(missing):
        uniq = list(dict.fromkeys(missing))
        raise JoinError(uniq, f'{len(uniq)} video ids lack a row: {", ".join(uniq[:10])}')

def _train_branch(X: np.ndarray, y: np.ndarray, names: Sequence[str],
                  params: SvrParams, seed: int, use_grid: bool) -> SvrModel:
    if use_grid and X.shape[0] >= 2:
        params = grid_search(X, y, params, seed=seed).best
    return svr_train(X, y, params, seed=seed, feature_names=names)

def train_gamevqp(nss: FeatureTable, mos: Mapping[str, float],
                  deep: Optional[FeatureTable] = None,
                  params: Optional[SvrParams] = None, seed: int = 0,
                  ids: Optional[Sequence[str]] = None,
                  use_grid_search: bool = False) -> GameVqpModel:
    """Train the branch SVRs independently on the same ``(video, MOS)`` pairs

    Arguments:
        nss: NSS feature table
        mos: MOS of each training video
        deep: Optional deep feature table. Without it the model is in
            :attr:`~GameVqpMode.NSS_ONLY` mode
        params: Branch SVR parameters
        seed: Seed for the solvers (and grid search folds)
        ids: Training ids (all ids of ``mos`` by default, in sorted order)
        use_grid_search: Choose ``C`` and ``gamma`` per branch by
            :func:`~.svr.grid_search`

    Raises:
        JoinError: If a training id has no NSS row, no deep row (when
            ``deep`` is given) or no MOS
    """
    if ids is None:
        ids = sorted(mos.keys())
    ids = list(ids)
    _check_join(ids, nss, deep, mos)
    if params is None:
        params = SvrParams()
    y = np.asarray([mos[vid] for vid in ids], dtype=np.float64)
    nss_model = _train_branch(nss.matrix(ids), y, nss.names, params, seed, use_grid_search)
    deep_model = None
    if deep is not None:
        deep_model = _train_branch(deep.matrix(ids), y, deep.names, params, seed, use_grid_search)
    model = GameVqpModel(nss_branch=nss_model, deep_branch=deep_model)
    logger.debug(f'GAME-VQP trained on {len(ids)} videos ({model.mode.value})')
    return model

def predict_gamevqp(model: GameVqpModel, nss_vector: FeatureVector,
                    deep_vector: Optional[FeatureVector] = None) -> float:
    """Predict one video

    Raises:
        SchemaError: If a vector does not match its branch or the deep
            vector is missing in full mode
    """
    return model.predict(nss_vector, deep_vector)


@dataclass
class GameVqpSpec:
    """What to train inside an evaluation protocol

    A single SVR on any feature table is the :attr:`~GameVqpMode.NSS_ONLY`
    case (no deep table).
    """
    params: SvrParams
    use_grid_search: bool = False

    def fit(self, features: FeatureTable, mos: Mapping[str, float], ids: Sequence[str],
            seed: int, deep: Optional[FeatureTable] = None) -> GameVqpModel:
        return train_gamevqp(
            features, mos, deep=deep, params=self.params, seed=seed, ids=ids,
            use_grid_search=self.use_grid_search,
        )

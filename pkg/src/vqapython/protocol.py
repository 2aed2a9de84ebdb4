from typing import Optional, Sequence, Mapping, List, Dict, Tuple, Any
from dataclasses import dataclass, asdict
from concurrent.futures import ProcessPoolExecutor
import json

import numpy as np
from pydispatch import Dispatcher
from loguru import logger

from vqapython.common import *
from vqapython.tables import FeatureTable, PathLike, write_csv, ID_COLUMN
from vqapython.gamevqp import GameVqpSpec
from vqapython.evalstats import MetricTriple, METRICS, evaluate

__all__ = (
    'SplitConfig', 'SplitReport', 'SplitProtocol', 'KFoldProtocol',
    'ScatterRow', 'split_protocol', 'kfold_predictions', 'write_scatter',
)

REPORT_VERSION = 1
MIN_VIDEOS = 10
MIN_TEST_VIDEOS = 3


@dataclass(frozen=True)
class SplitConfig:
    iterations: int
    train_frac: float
    seed: int
    n_videos: int
    n_train: int
    n_test: int
    grid_search: bool = False
    model: str = 'gamevqp'


@dataclass
class SplitReport:
    """Per-iteration metrics of a :class:`SplitProtocol` run and their medians
    """
    metrics: List[MetricTriple]
    config: SplitConfig
    name: str = ''

    @property
    def median(self) -> MetricTriple:
        return MetricTriple(**{k:median(self.distribution(k)) for k in METRICS})

    def distribution(self, metric: str) -> List[float]:
        return [getattr(m, metric) for m in self.metrics]

    def spread(self) -> Dict[str, Dict[str, float]]:
        """Standard deviation and quartiles of each metric
        """
        d = {}
        for k in METRICS:
            arr = np.asarray(self.distribution(k))
            d[k] = {
                'std': float(np.std(arr)),
                'p25': float(np.percentile(arr, 25)),
                'p75': float(np.percentile(arr, 75)),
            }
        return d

    def to_dict(self) -> Dict[str, Any]:
        return {
            'version': REPORT_VERSION,
            'name': self.name,
            'config': asdict(self.config),
            'median': self.median.as_dict(),
            'spread': self.spread(),
            'iterations': {k:self.distribution(k) for k in METRICS},
        }

    def to_json(self) -> bytes:
        return json.dumps(self.to_dict(), indent=2).encode('utf-8') + b'\n'

    @classmethod
    def from_json(cls, data: bytes) -> 'SplitReport':
        try:
            d = json.loads(data.decode('utf-8'))
            if d['version'] != REPORT_VERSION:
                raise VqaError(d['version'], 'Unsupported report version')
            its = d['iterations']
            metrics = [
                MetricTriple(srocc=s, lcc=l, rmse=r)
                for s, l, r in zip(its['srocc'], its['lcc'], its['rmse'])
            ]
            return cls(metrics=metrics, config=SplitConfig(**d['config']), name=d.get('name', ''))
        except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise VqaError(str(exc), 'Invalid split report')


def _joined_ids(features: FeatureTable, mos: Mapping[str, float]) -> List[str]:
    return sorted(vid for vid in features.ids if vid in mos)

def _split(ids: Sequence[str], n_train: int, seed: int, index: int) -> Tuple[List[str], List[str]]:
    perm = derive_rng(seed, index).permutation(len(ids))
    return [ids[k] for k in perm[:n_train]], [ids[k] for k in perm[n_train:]]

def _run_iteration(spec: GameVqpSpec, features: FeatureTable, mos: Mapping[str, float],
                   deep: Optional[FeatureTable], ids: Sequence[str], n_train: int,
                   seed: int, index: int) -> MetricTriple:
    train, test = _split(ids, n_train, seed, index)
    model = spec.fit(features, mos, train, seed=seed + index, deep=deep)
    pred = model.predict_tables(test, features, deep)
    return evaluate(pred, [mos[vid] for vid in test])


class SplitProtocol(Dispatcher):
    """Repeated random train/test evaluation

    Iteration ``t`` shuffles the sorted video ids with a generator derived
    from ``(seed, t)``,
    trains on the first ``floor(train_frac * n)`` and evaluates on the rest.

    :Events:

        .. event:: on_iteration(index: int, metrics: MetricTriple)

            Fired after each iteration, in iteration order
    """
    _events_ = ['on_iteration']

    def __init__(self, spec: GameVqpSpec, iterations: int = 100, train_frac: float = .8,
                 seed: int = 0, workers: int = 1, name: str = ''):
        if iterations < 1:
            raise VqaError(iterations, 'iterations must be positive')
        if not 0 < train_frac < 1:
            raise VqaError(train_frac, 'train_frac must lie in (0, 1)')
        self.spec = spec
        self.iterations = iterations
        self.train_frac = train_frac
        self.seed = seed
        self.workers = workers
        self.name = name

    def split_sizes(self, n: int) -> Tuple[int, int]:
        n_train = int(np.floor(self.train_frac * n))
        return n_train, n - n_train

    def split(self, ids: Sequence[str], index: int) -> Tuple[List[str], List[str]]:
        """The (train, test) ids of iteration *index* over the sorted *ids*
        """
        n_train, _ = self.split_sizes(len(ids))
        return _split(sorted(ids), n_train, self.seed, index)

    def run(self, features: FeatureTable, mos: Mapping[str, float],
            deep: Optional[FeatureTable] = None) -> SplitReport:
        """
        Raises:
            DimensionError: With fewer than 10 videos having both features
                and MOS, or fewer than 3 test videos per split
        """
        ids = _joined_ids(features, mos)
        n = len(ids)
        if n < MIN_VIDEOS:
            raise DimensionError(n, f'At least {MIN_VIDEOS} videos with features and MOS are required')
        n_train, n_test = self.split_sizes(n)
        if n_test < MIN_TEST_VIDEOS or n_train < 2:
            raise DimensionError((n_train, n_test), f'Splits need at least {MIN_TEST_VIDEOS} test videos')
        logger.info(f'split protocol: {self.iterations} iterations, {n_train} train / {n_test} test')

        args = [
            (self.spec, features, mos, deep, ids, n_train, self.seed, t)
            for t in range(self.iterations)
        ]
        metrics = []
        if self.workers > 1:
            with ProcessPoolExecutor(max_workers=self.workers) as ex:
                futures = [ex.submit(_run_iteration, *a) for a in args]
                for t, fut in enumerate(futures):
                    m = fut.result()
                    metrics.append(m)
                    self.emit('on_iteration', t, m)
        else:
            for t, a in enumerate(args):
                m = _run_iteration(*a)
                metrics.append(m)
                self.emit('on_iteration', t, m)

        config = SplitConfig(
            iterations=self.iterations, train_frac=self.train_frac, seed=self.seed,
            n_videos=n, n_train=n_train, n_test=n_test,
            grid_search=self.spec.use_grid_search,
            model='gamevqp' if deep is not None else 'nss_only',
        )
        return SplitReport(metrics=metrics, config=config, name=self.name)


@dataclass(frozen=True)
class ScatterRow:
    video_id: str
    prediction: float
    mos: float


class KFoldProtocol(Dispatcher):
    """k-fold cross-validated predictions (every video predicted exactly once)

    :Events:

        .. event:: on_fold(index: int, n_test: int)

            Fired after the videos of a fold have been predicted
    """
    _events_ = ['on_fold']

    def __init__(self, spec: GameVqpSpec, k: int = 5, seed: int = 0):
        if k < 2:
            raise VqaError(k, 'k must be at least 2')
        self.spec = spec
        self.k = k
        self.seed = seed

    def folds(self, ids: Sequence[str]) -> List[List[str]]:
        perm = derive_rng(self.seed).permutation(len(ids))
        return [[ids[i] for i in part] for part in np.array_split(perm, self.k)]

    def run(self, features: FeatureTable, mos: Mapping[str, float],
            deep: Optional[FeatureTable] = None) -> List[ScatterRow]:
        ids = _joined_ids(features, mos)
        if len(ids) < self.k:
            raise DimensionError(len(ids), f'At least k={self.k} videos are required')
        predictions = {}
        for index, test in enumerate(self.folds(ids)):
            test_set = set(test)
            train = [vid for vid in ids if vid not in test_set]
            model = self.spec.fit(features, mos, train, seed=self.seed + index, deep=deep)
            for vid, p in zip(test, model.predict_tables(test, features, deep)):
                predictions[vid] = float(p)
            self.emit('on_fold', index, len(test))
        return [ScatterRow(vid, predictions[vid], float(mos[vid])) for vid in ids]


def split_protocol(features: FeatureTable, mos: Mapping[str, float], spec: GameVqpSpec,
                   iterations: int = 100, train_frac: float = .8, seed: int = 0,
                   deep: Optional[FeatureTable] = None) -> SplitReport:
    return SplitProtocol(spec, iterations, train_frac, seed).run(features, mos, deep)

def kfold_predictions(features: FeatureTable, mos: Mapping[str, float], spec: GameVqpSpec,
                      k: int = 5, seed: int = 0,
                      deep: Optional[FeatureTable] = None) -> List[ScatterRow]:
    return KFoldProtocol(spec, k, seed).run(features, mos, deep)

def write_scatter(filename: PathLike, rows: Sequence[ScatterRow], provenance: Optional[str] = None):
    write_csv(
        filename, (ID_COLUMN, 'prediction', 'mos'),
        ((r.video_id, r.prediction, r.mos) for r in rows), provenance,
    )

"""Prediction accuracy metrics and significance testing
"""
from typing import Optional, Sequence, Mapping, Tuple, Dict
from dataclasses import dataclass
import itertools
import math

import numpy as np
from scipy import stats, optimize
from loguru import logger

from vqapython.common import *
from vqapython.tables import PathLike, write_csv

__all__ = (
    'MetricTriple', 'LogisticFit', 'RankSumResult', 'SignificanceMatrix',
    'srocc', 'pearson_lcc', 'rmse', 'logistic', 'fit_logistic', 'evaluate',
    'wilcoxon_rank_sum', 'significance_matrix',
)

METRICS = ('srocc', 'lcc', 'rmse')
LOGISTIC_MIN_SAMPLES = 5
LOGISTIC_MAX_ITER = 200
LOGISTIC_XTOL = 1e-8
EXACT_RANK_SUM_MAX = 16


@dataclass(frozen=True)
class MetricTriple:
    srocc: float
    lcc: float
    rmse: float

    def as_dict(self) -> Dict[str, float]:
        return {'srocc': self.srocc, 'lcc': self.lcc, 'rmse': self.rmse}


def _pair(x, y, min_len: int) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise DimensionError((x.size, y.size), 'Lists differ in length')
    if x.size < min_len:
        raise DimensionError(x.size, f'At least {min_len} values required')
    return x, y

def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    dx = x - np.mean(x)
    dy = y - np.mean(y)
    sxx = np.dot(dx, dx)
    syy = np.dot(dy, dy)
    if not sxx > 0 or not syy > 0:
        raise DegenerateInput((float(sxx), float(syy)), 'Correlation of a constant list')
    r = np.dot(dx, dy) / math.sqrt(sxx * syy)
    return float(min(1., max(-1., r)))

def srocc(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation (Pearson correlation of the midranks)

    Raises:
        DegenerateInput: If either list is constant
    """
    x, y = _pair(x, y, 3)
    return _pearson(stats.rankdata(x), stats.rankdata(y))

def pearson_lcc(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson linear correlation

    Raises:
        DegenerateInput: If either list is constant
    """
    x, y = _pair(x, y, 3)
    return _pearson(x, y)

def rmse(x: Sequence[float], y: Sequence[float]) -> float:
    x, y = _pair(x, y, 1)
    return float(math.sqrt(np.mean((x - y) ** 2)))


def logistic(x: np.ndarray, beta1: float, beta2: float, beta3: float, beta4: float) -> np.ndarray:
    """``beta2 + (beta1 - beta2) / (1 + exp(-(x - beta3) / |beta4|))``
    """
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(over='ignore'):
        return beta2 + (beta1 - beta2) / (1. + np.exp(-(x - beta3) / abs(beta4)))


@dataclass(frozen=True)
class LogisticFit:
    """A fitted monotone logistic map

    If the logistic curve correlated worse with the MOS than the
    predictions themselves, or left a squared error no smaller than the
    least squares line, the line is used instead and its
    ``(slope, intercept)`` is stored in :attr:`linear`.
    """
    beta1: float
    beta2: float
    beta3: float
    beta4: float
    converged: bool
    residual: float                             #: Final sum of squared errors
    linear: Optional[Tuple[float, float]] = None

    def apply(self, x: Sequence[float]) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.linear is not None:
            slope, intercept = self.linear
            return slope * x + intercept
        return logistic(x, self.beta1, self.beta2, self.beta3, self.beta4)


def _logistic_jac(b: np.ndarray, x: np.ndarray) -> np.ndarray:
    b1, b2, b3, b4 = b
    s = abs(b4) if b4 != 0 else 1e-12
    with np.errstate(over='ignore', invalid='ignore'):
        e = np.exp(-(x - b3) / s)
        d = 1. / (1. + e)
        dd = np.where(np.isfinite(e), e * d * d, 0.)
    j = np.empty((x.size, 4))
    j[:, 0] = d
    j[:, 1] = 1. - d
    j[:, 2] = -(b1 - b2) * dd / s
    j[:, 3] = -(b1 - b2) * dd * (x - b3) / (s * s) * math.copysign(1., b4 if b4 != 0 else 1.)
    return j

def fit_logistic(pred: Sequence[float], mos: Sequence[float]) -> LogisticFit:
    """Fit the 4-parameter monotone logistic from predictions to MOS

    Levenberg-Marquardt least squares, started from ``beta1 = max(mos)``,
    ``beta2 = min(mos)``, ``beta3 = median(pred)`` and
    ``beta4 = std(pred) / 4``.

    Raises:
        DimensionError: With fewer than 5 points
        DegenerateInput: If the predictions are constant
    """
    x, y = _pair(pred, mos, LOGISTIC_MIN_SAMPLES)
    sx = float(np.std(x))
    if not sx > 0:
        raise DegenerateInput(x[0], 'Predictions are constant')
    x0 = np.array([np.max(y), np.min(y), np.median(x), sx / 4.])

    def resid(b):
        return logistic(x, *b) - y

    res = optimize.least_squares(
        resid, x0, jac=lambda b: _logistic_jac(b, x), method='lm',
        xtol=LOGISTIC_XTOL, max_nfev=LOGISTIC_MAX_ITER,
    )
    b1, b2, b3, b4 = (float(v) for v in res.x)
    converged = bool(res.success) and bool(np.all(np.isfinite(res.x)))
    if not converged:
        logger.warning(f'logistic fit did not converge: {res.message}')
    fit = LogisticFit(
        beta1=b1, beta2=b2, beta3=b3, beta4=abs(b4), converged=converged,
        residual=float(np.sum(res.fun ** 2)),
    )

    raw_lcc = _pearson(x, y) if np.std(y) > 0 else 0.
    try:
        mapped_lcc = _pearson(fit.apply(x), y)
    except DegenerateInput:
        mapped_lcc = -np.inf
    slope, intercept = np.polyfit(x, y, 1)
    line_residual = float(np.sum((slope * x + intercept - y) ** 2))
    if not mapped_lcc >= raw_lcc or line_residual <= fit.residual:
        fit = LogisticFit(
            beta1=b1, beta2=b2, beta3=b3, beta4=abs(b4), converged=converged,
            residual=line_residual, linear=(float(slope), float(intercept)),
        )
    return fit

def evaluate(pred: Sequence[float], mos: Sequence[float]) -> MetricTriple:
    """SROCC on raw predictions, LCC and RMSE after the logistic mapping

    Constant predictions carry no ranking information and score
    ``srocc = lcc = 0`` with ``rmse`` equal to the deviation of the MOS.
    """
    x, y = _pair(pred, mos, 3)
    if not np.std(x) > 0:
        return MetricTriple(srocc=0., lcc=0., rmse=float(np.std(y)))
    if x.size < LOGISTIC_MIN_SAMPLES:
        slope, intercept = np.polyfit(x, y, 1)
        mapped = slope * x + intercept
    else:
        mapped = fit_logistic(x, y).apply(x)
    try:
        lcc = pearson_lcc(mapped, y)
    except DegenerateInput:
        lcc = 0.
    try:
        s = srocc(x, y)
    except DegenerateInput:
        s = 0.
    return MetricTriple(srocc=s, lcc=lcc, rmse=rmse(mapped, y))


@dataclass(frozen=True)
class RankSumResult:
    u_statistic: float  #: Mann-Whitney U of ``a`` (rank sum minus its minimum)
    p_greater: float    #: One-sided p for ``a`` tending to exceed ``b``
    p_less: float       #: One-sided p for ``a`` tending to fall below ``b``
    exact: bool

def wilcoxon_rank_sum(a: Sequence[float], b: Sequence[float],
                      exact: Optional[bool] = None) -> RankSumResult:
    """One-sided Wilcoxon rank-sum test with midranks

    By default the null distribution is enumerated when ``len(a) + len(b)``
    is at most 16; otherwise the normal approximation with tie and
    continuity corrections is used. ``exact`` forces either mode.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if not a.size or not b.size:
        raise DimensionError((a.size, b.size), 'Both samples must be non-empty')
    na, nb = a.size, b.size
    n = na + nb
    ranks = stats.rankdata(np.concatenate([a, b]))
    w = float(np.sum(ranks[:na]))
    u = w - na * (na + 1) / 2.
    if exact is None:
        exact = n <= EXACT_RANK_SUM_MAX

    if exact:
        sums = np.fromiter(
            (ranks[list(c)].sum() for c in itertools.combinations(range(n), na)),
            dtype=np.float64,
        )
        eps = 1e-9
        p_greater = float(np.mean(sums >= w - eps))
        p_less = float(np.mean(sums <= w + eps))
        return RankSumResult(u_statistic=u, p_greater=p_greater, p_less=p_less, exact=True)

    mean_w = na * (n + 1) / 2.
    _, counts = np.unique(ranks, return_counts=True)
    ties = float(np.sum(counts ** 3 - counts))
    var_w = na * nb / 12. * ((n + 1) - ties / (n * (n - 1)))
    if not var_w > 0:
        return RankSumResult(u_statistic=u, p_greater=1., p_less=1., exact=False)
    sd = math.sqrt(var_w)
    p_greater = float(stats.norm.sf((w - mean_w - .5) / sd))
    p_less = float(stats.norm.cdf((w - mean_w + .5) / sd))
    return RankSumResult(u_statistic=u, p_greater=p_greater, p_less=p_less, exact=False)


@dataclass
class SignificanceMatrix:
    """Pairwise one-sided rank-sum outcomes

    ``matrix[r][c]`` is 1 when the row model is significantly greater than
    the column model, -1 when it is significantly lower and 0 otherwise.
    """
    names: Tuple[str, ...]
    matrix: np.ndarray
    metric: str = 'srocc'

    def entry(self, row: str, col: str) -> int:
        return int(self.matrix[self.names.index(row), self.names.index(col)])

    def write_csv(self, filename: PathLike, provenance: Optional[str] = None):
        header = (self.metric,) + tuple(self.names)
        rows = (
            [name] + [int(v) for v in self.matrix[i]]
            for i, name in enumerate(self.names)
        )
        write_csv(filename, header, rows, provenance)


def significance_matrix(distributions: Mapping[str, Sequence[float]], alpha: float = .05,
                        metric: str = 'srocc') -> SignificanceMatrix:
    """Compare every pair of metric distributions with :func:`wilcoxon_rank_sum`

    A p-value equal to ``alpha`` counts as significant.
    """
    names = tuple(distributions.keys())
    lists = [np.asarray(distributions[k], dtype=np.float64) for k in names]
    lengths = {v.size for v in lists}
    if len(lengths) > 1:
        raise DimensionError(sorted(lengths), 'Distributions differ in length')
    m = np.zeros((len(names), len(names)), dtype=np.int64)
    for r, c in itertools.combinations(range(len(names)), 2):
        res = wilcoxon_rank_sum(lists[r], lists[c])
        if res.p_greater <= alpha:
            v = 1
        elif res.p_less <= alpha:
            v = -1
        else:
            v = 0
        m[r, c] = v
        m[c, r] = -v
    return SignificanceMatrix(names=names, matrix=m, metric=metric)

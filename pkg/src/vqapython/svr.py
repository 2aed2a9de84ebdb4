"""Epsilon-insensitive support vector regression with an RBF kernel

The dual is solved over ``2l`` variables ``[alpha; alpha*]`` with labels
``[+1; -1]`` and linear term ``[eps - z; eps + z]``, two variables at a time
(sequential minimal optimization with second order working set selection).
"""
from typing import Optional, Sequence, Tuple, Dict, Any, Union
from dataclasses import dataclass, field, asdict
import json
import math

import numpy as np
from scipy.spatial.distance import cdist
from loguru import logger

from vqapython.common import *

__all__ = (
    'InputError', 'SchemaError', 'ModelFormatError',
    'ScalerParams', 'SvrParams', 'SvrDiagnostics', 'SvrModel', 'KktAudit',
    'GridSearchResult', 'rbf_kernel', 'rbf_matrix', 'svr_train', 'svr_predict',
    'model_save', 'model_load', 'audit_kkt', 'dual_objective', 'grid_search',
    'GRID_C', 'GRID_GAMMA',
)

MODEL_VERSION = 1

#: Smallest curvature used when the kernel is not strictly positive definite
TAU = 1e-12

GRID_C = tuple(2. ** e for e in range(-3, 10))
GRID_GAMMA = tuple(2. ** e for e in range(-9, 4))
GRID_FOLDS = 5


class InputError(VqaError):
    DEFAULT_MSG = 'Invalid training input'

class SchemaError(VqaError):
    DEFAULT_MSG = 'Feature vector does not match the model'

class ModelFormatError(VqaError):
    DEFAULT_MSG = 'Invalid model file'


@dataclass
class ScalerParams:
    """Per-dimension min-max scaling onto ``[-1, 1]``

    Dimensions with zero width map to 0.
    """
    minimum: Tuple[float, ...]
    maximum: Tuple[float, ...]

    def __post_init__(self):
        self.minimum = tuple(float(v) for v in self.minimum)
        self.maximum = tuple(float(v) for v in self.maximum)
        if len(self.minimum) != len(self.maximum):
            raise DimensionError((len(self.minimum), len(self.maximum)))

    @classmethod
    def fit(cls, X: np.ndarray) -> 'ScalerParams':
        X = np.asarray(X, dtype=np.float64)
        return cls(minimum=X.min(axis=0), maximum=X.max(axis=0))

    @property
    def ndim(self) -> int:
        return len(self.minimum)

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.ndim:
            raise DimensionError((X.shape[1], self.ndim), 'Feature count differs from scaler')
        lo = np.asarray(self.minimum)
        width = np.asarray(self.maximum) - lo
        safe = np.where(width > 0, width, 1.)
        out = 2. * (X - lo) / safe - 1.
        return np.where(width > 0, out, 0.)


@dataclass
class SvrParams:
    """Training parameters

    ``gamma`` and ``max_passes`` may be ``None``, meaning ``1/d`` and
    ``10·n`` respectively (resolved by :func:`svr_train`).
    """
    C: float = 1.
    epsilon: float = .1
    gamma: Optional[float] = None
    tol: float = 1e-3

    max_passes: Optional[int] = None
    """Iteration budget in passes, one pass being ``n`` pair updates"""

    def __post_init__(self):
        if not self.C > 0:
            raise InputError(self.C, 'C must be positive')
        if not self.epsilon >= 0:
            raise InputError(self.epsilon, 'epsilon must be non-negative')
        if self.gamma is not None and not self.gamma > 0:
            raise InputError(self.gamma, 'gamma must be positive')
        if not self.tol > 0:
            raise InputError(self.tol, 'tol must be positive')
        if self.max_passes is not None and int(self.max_passes) < 1:
            raise InputError(self.max_passes, 'max_passes must be a positive integer')

    def resolve(self, n_samples: int, n_features: int) -> 'SvrParams':
        """Copy with ``gamma`` and ``max_passes`` filled in
        """
        gamma = self.gamma
        if gamma is None:
            gamma = 1. / max(n_features, 1)
        max_passes = self.max_passes
        if max_passes is None:
            max_passes = 10 * n_samples
        return SvrParams(
            C=float(self.C), epsilon=float(self.epsilon), gamma=float(gamma),
            tol=float(self.tol), max_passes=int(max_passes),
        )


@dataclass
class SvrDiagnostics:
    converged: bool = True
    iterations: int = 0
    kkt_gap: float = 0.
    degenerate: bool = False


@dataclass
class KktAudit:
    """Result of :func:`audit_kkt`
    """
    gap: float      #: Largest KKT violation (``m - M``)
    tol: float
    @property
    def ok(self) -> bool:
        return self.gap <= self.tol + 1e-9


@dataclass
class SvrModel:
    """A trained epsilon-SVR
    """
    feature_names: Tuple[str, ...]
    support_vectors: np.ndarray     #: Scaled support vectors, one per row
    dual_coefs: np.ndarray          #: ``alpha - alpha*`` of each support vector
    bias: float
    params: SvrParams               #: Resolved training parameters
    scaler: ScalerParams
    diagnostics: SvrDiagnostics = field(default_factory=SvrDiagnostics)

    support_indices: Tuple[int, ...] = field(default_factory=tuple)
    """Row indices of the support vectors within the training matrix"""

    def __post_init__(self):
        self.feature_names = tuple(self.feature_names)
        d = len(self.feature_names)
        self.support_vectors = np.asarray(self.support_vectors, dtype=np.float64).reshape(-1, d)
        self.dual_coefs = np.asarray(self.dual_coefs, dtype=np.float64).ravel()
        self.support_indices = tuple(int(i) for i in self.support_indices)
        if self.support_vectors.shape[0] != self.dual_coefs.size:
            raise DimensionError(
                (self.support_vectors.shape[0], self.dual_coefs.size),
                'support_vectors and dual_coefs differ in length',
            )
        if self.scaler.ndim != d:
            raise DimensionError((self.scaler.ndim, d), 'Scaler does not match feature_names')

    @property
    def n_support(self) -> int:
        return self.dual_coefs.size

    def predict_array(self, X: np.ndarray) -> np.ndarray:
        """Predict rows of a raw feature matrix (columns in :attr:`feature_names` order)
        """
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != len(self.feature_names):
            raise SchemaError(X.shape[1], f'Expected {len(self.feature_names)} features')
        if not self.n_support:
            return np.full(X.shape[0], self.bias)
        Xs = self.scaler.transform(X)
        K = rbf_matrix(Xs, self.support_vectors, self.params.gamma)
        return K @ self.dual_coefs + self.bias

    def predict(self, x: FeatureVector) -> float:
        """Predict one named feature vector

        Raises:
            SchemaError: If the names differ from :attr:`feature_names`
        """
        if x.names != self.feature_names:
            missing = set(self.feature_names) - set(x.names)
            extra = set(x.names) - set(self.feature_names)
            msg = 'Feature names differ from the model'
            if missing:
                msg = f'{msg}; missing {sorted(missing)[:5]}'
            if extra:
                msg = f'{msg}; unexpected {sorted(extra)[:5]}'
            raise SchemaError(len(x), msg)
        return float(self.predict_array(x.as_array()[np.newaxis, :])[0])

    def to_dict(self) -> Dict[str, Any]:
        return {
            'version': MODEL_VERSION,
            'feature_names': list(self.feature_names),
            'scaler': {'min': list(self.scaler.minimum), 'max': list(self.scaler.maximum)},
            'params': asdict(self.params),
            'support_vectors': self.support_vectors.tolist(),
            'support_indices': list(self.support_indices),
            'dual_coefs': self.dual_coefs.tolist(),
            'bias': float(self.bias),
            'diagnostics': asdict(self.diagnostics),
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> 'SvrModel':
        if not isinstance(d, dict):
            raise ModelFormatError(type(d), 'Model must be a JSON object')
        if d.get('version') != MODEL_VERSION:
            raise ModelFormatError(d.get('version'), f'Unsupported model version')
        try:
            return cls(
                feature_names=d['feature_names'],
                support_vectors=d['support_vectors'],
                dual_coefs=d['dual_coefs'],
                bias=float(d['bias']),
                params=SvrParams(**d['params']),
                scaler=ScalerParams(minimum=d['scaler']['min'], maximum=d['scaler']['max']),
                diagnostics=SvrDiagnostics(**d['diagnostics']),
                support_indices=d.get('support_indices', ()),
            )
        except ModelFormatError:
            raise
        except (KeyError, TypeError, ValueError, VqaError) as exc:
            raise ModelFormatError(str(exc))

    def save(self) -> bytes:
        return model_save(self)

    @classmethod
    def load(cls, data: bytes) -> 'SvrModel':
        return model_load(data)


def rbf_kernel(x: Sequence[float], z: Sequence[float], gamma: float) -> float:
    """``exp(-gamma * ||x - z||**2)``
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    z = np.asarray(z, dtype=np.float64).ravel()
    if x.shape != z.shape:
        raise DimensionError((x.size, z.size))
    d = x - z
    return math.exp(-gamma * float(np.dot(d, d)))

def rbf_matrix(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """Kernel matrix ``K[i, j] = rbf_kernel(A[i], B[j], gamma)``
    """
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    if A.shape[1] != B.shape[1]:
        raise DimensionError((A.shape[1], B.shape[1]))
    return np.exp(-gamma * cdist(A, B, 'sqeuclidean'))


def _kkt_gap(y: np.ndarray, G: np.ndarray, alpha: np.ndarray, C: float) -> float:
    yg = y * G
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    if not up.any() or not low.any():
        return 0.
    return float(np.max(-yg[up]) + np.max(yg[low]))

def dual_objective(K: np.ndarray, z: np.ndarray, alpha: np.ndarray,
                   alpha_star: np.ndarray, epsilon: float) -> float:
    """The epsilon-SVR dual objective (to be maximized)

    ``-1/2 (a - a*)' K (a - a*) - eps * sum(a + a*) + z' (a - a*)``
    """
    beta = alpha - alpha_star
    return float(
        -.5 * beta @ K @ beta - epsilon * np.sum(alpha + alpha_star) + z @ beta
    )


class SmoSolver:
    """Pairwise coordinate ascent on the epsilon-SVR dual

    Arguments:
        K: Kernel matrix of the (scaled) training rows
        z: Targets
        C, epsilon, tol: As in :class:`SvrParams`
        max_iter: Maximum number of pair updates
        rng: Generator used for tie-breaking between equally good indices
        check_objective: Assert after every update that the dual objective
            did not decrease
    """
    def __init__(self, K: np.ndarray, z: np.ndarray, C: float, epsilon: float,
                 tol: float, max_iter: int, rng: np.random.Generator,
                 check_objective: bool = False):
        l = z.size
        self.l = l
        self.C = C
        self.tol = tol
        self.max_iter = max_iter
        self.check_objective = check_objective
        self.y = np.concatenate([np.ones(l), -np.ones(l)])
        self.p = np.concatenate([epsilon - z, epsilon + z])
        Kx = np.block([[K, K], [K, K]])
        self.Q = np.outer(self.y, self.y) * Kx
        self.QD = np.diag(Kx).copy()
        self.alpha = np.zeros(2 * l)
        self.G = self.p.copy()
        self.order = rng.permutation(2 * l)

    def objective(self) -> float:
        """Value of the minimized form ``1/2 a'Qa + p'a``
        """
        return float(.5 * self.alpha @ (self.G + self.p))

    def select_working_set(self) -> Tuple[Optional[int], Optional[int], float]:
        y, G, alpha, C = self.y, self.G, self.alpha, self.C
        order = self.order
        yg = y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            return None, None, 0.

        vals = np.where(up, -yg, -np.inf)[order]
        i = int(order[np.argmax(vals)])
        gmax = -yg[i]
        gap = float(gmax + np.max(yg[low]))
        if gap < self.tol:
            return None, None, gap

        grad_diff = gmax + yg
        quad = self.QD[i] + self.QD - 2. * y[i] * y * self.Q[i]
        quad = np.where(quad > 0, quad, TAU)
        obj = np.where(low & (grad_diff > 0), -grad_diff ** 2 / quad, np.inf)[order]
        j = int(order[np.argmin(obj)])
        return i, j, gap

    def update_pair(self, i: int, j: int):
        y, Q, C, G = self.y, self.Q, self.C, self.G
        a = self.alpha
        old_i, old_j = a[i], a[j]
        if y[i] != y[j]:
            quad = Q[i, i] + Q[j, j] + 2. * Q[i, j]
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j] = 0.
                    a[i] = diff
            else:
                if a[i] < 0:
                    a[i] = 0.
                    a[j] = -diff
            if diff > 0:
                if a[i] > C:
                    a[i] = C
                    a[j] = C - diff
            else:
                if a[j] > C:
                    a[j] = C
                    a[i] = C + diff
        else:
            quad = Q[i, i] + Q[j, j] - 2. * Q[i, j]
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = total - C
            else:
                if a[j] < 0:
                    a[j] = 0.
                    a[i] = total
            if total > C:
                if a[j] > C:
                    a[j] = C
                    a[i] = total - C
            else:
                if a[i] < 0:
                    a[i] = 0.
                    a[j] = total
        G += Q[:, i] * (a[i] - old_i) + Q[:, j] * (a[j] - old_j)

    def calculate_rho(self) -> float:
        y, C, a = self.y, self.C, self.alpha
        yg = y * self.G
        at_upper = a >= C
        at_lower = a <= 0
        free = ~(at_upper | at_lower)
        if free.any():
            return float(np.mean(yg[free]))
        ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
        lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
        ub = np.min(yg[ub_mask]) if ub_mask.any() else np.inf
        lb = np.max(yg[lb_mask]) if lb_mask.any() else -np.inf
        if not np.isfinite(ub):
            return float(lb)
        if not np.isfinite(lb):
            return float(ub)
        return float((ub + lb) / 2.)

    def solve(self) -> Tuple[np.ndarray, float, SvrDiagnostics]:
        """Run until the maximal violating pair gap is below ``tol``

        Returns a tuple of:
            :class:`numpy.ndarray`
                ``alpha - alpha*`` for every training row
            :class:`float`
                The bias (``-rho``)
            :class:`SvrDiagnostics`
        """
        iterations = 0
        converged = False
        gap = 0.
        obj = self.objective()
        while True:
            i, j, gap = self.select_working_set()
            if i is None:
                converged = True
                break
            if iterations >= self.max_iter:
                break
            self.update_pair(i, j)
            iterations += 1
            if self.check_objective:
                new_obj = self.objective()
                assert new_obj <= obj + 1e-9 * max(1., abs(obj)), (
                    f'dual objective decreased at iteration {iterations}'
                )
                obj = new_obj
        l = self.l
        beta = self.alpha[:l] - self.alpha[l:]
        bias = -self.calculate_rho()
        diag = SvrDiagnostics(
            converged=converged, iterations=iterations, kkt_gap=max(float(gap), 0.),
        )
        return beta, bias, diag


def _check_input(X, y) -> Tuple[np.ndarray, np.ndarray]:
    try:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        y = np.asarray(y, dtype=np.float64).ravel()
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc))
    if X.shape[0] != y.size:
        raise InputError((X.shape[0], y.size), 'X and y differ in length')
    if not y.size:
        raise InputError(0, 'No training samples')
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise InputError(X.shape, 'Training data must be finite')
    return X, y

def _solve_scaled(K: np.ndarray, z: np.ndarray, params: SvrParams, seed: int,
                  check_objective: bool = False) -> Tuple[np.ndarray, float, SvrDiagnostics]:
    n = z.size
    solver = SmoSolver(
        K, z, C=params.C, epsilon=params.epsilon, tol=params.tol,
        max_iter=params.max_passes * n, rng=derive_rng(seed),
        check_objective=check_objective,
    )
    return solver.solve()

def svr_train(X: np.ndarray, y: Sequence[float], params: Optional[SvrParams] = None,
              seed: int = 0, feature_names: Optional[Sequence[str]] = None,
              check_objective: bool = False) -> SvrModel:
    """Train an epsilon-SVR

    The scaler is fit on ``X`` first. Rows that are all identical after
    scaling produce the mean-fit model (no support vectors, bias equal to
    the mean target) with ``diagnostics.degenerate`` set.

    Raises:
        InputError: If the inputs are empty, of unequal length or not finite
    """
    X, z = _check_input(X, y)
    n, d = X.shape
    if feature_names is None:
        feature_names = [f'f{i}' for i in range(d)]
    if len(feature_names) != d:
        raise InputError(len(feature_names), f'Expected {d} feature names')
    if params is None:
        params = SvrParams()
    params = params.resolve(n, d)
    scaler = ScalerParams.fit(X)
    Xs = scaler.transform(X)

    if np.all(Xs == Xs[0]):
        logger.debug(f'identical training rows, using the mean-fit model')
        return SvrModel(
            feature_names=feature_names, support_vectors=np.zeros((0, d)),
            dual_coefs=[], bias=float(np.mean(z)), params=params, scaler=scaler,
            diagnostics=SvrDiagnostics(degenerate=True),
        )

    K = rbf_matrix(Xs, Xs, params.gamma)
    beta, bias, diag = _solve_scaled(K, z, params, seed, check_objective)
    if not diag.converged:
        logger.warning(
            f'SVR stopped after {diag.iterations} iterations with KKT gap {diag.kkt_gap:.3g}',
        )
    sv = np.flatnonzero(beta != 0)
    logger.debug(f'SVR trained: n={n}, d={d}, support={sv.size}, iterations={diag.iterations}')
    return SvrModel(
        feature_names=feature_names, support_vectors=Xs[sv], dual_coefs=beta[sv],
        bias=bias, params=params, scaler=scaler, diagnostics=diag,
        support_indices=sv,
    )

def svr_predict(model: SvrModel, x: Union[FeatureVector, np.ndarray]) -> Union[float, np.ndarray]:
    """Predict a :class:`~.common.FeatureVector` (returns a float) or the rows
    of a raw feature matrix (returns an array)
    """
    if isinstance(x, FeatureVector):
        return model.predict(x)
    return model.predict_array(x)

def model_save(model: SvrModel) -> bytes:
    """Serialize a model to canonical JSON (floats at full precision)
    """
    return json.dumps(model.to_dict(), indent=2).encode('utf-8') + b'\n'

def model_load(data: bytes) -> SvrModel:
    """
    Raises:
        ModelFormatError: If the data is not a complete model of the
            supported version
    """
    try:
        d = json.loads(data.decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(str(exc), 'Model file is not valid JSON')
    return SvrModel.from_dict(d)

def audit_kkt(model: SvrModel, X: np.ndarray, y: Sequence[float]) -> KktAudit:
    """Recompute the maximal KKT violation of a model on its training data

    The dual variables are recovered from the dual coefficients
    (``alpha = max(beta, 0)``, ``alpha* = max(-beta, 0)``); the gradient only
    depends on the kernel expansion without bias, so the audit is
    independent of how the bias was chosen.
    """
    X, z = _check_input(X, y)
    params = model.params
    n = z.size
    if model.diagnostics.degenerate:
        return KktAudit(gap=0., tol=params.tol)
    beta = np.zeros(n)
    if len(model.support_indices):
        beta[list(model.support_indices)] = model.dual_coefs
    Xs = model.scaler.transform(X)
    f = rbf_matrix(Xs, Xs, params.gamma) @ beta
    yy = np.concatenate([np.ones(n), -np.ones(n)])
    G = np.concatenate([f + params.epsilon - z, -f + params.epsilon + z])
    alpha = np.concatenate([np.maximum(beta, 0.), np.maximum(-beta, 0.)])
    return KktAudit(gap=_kkt_gap(yy, G, alpha, params.C), tol=params.tol)


@dataclass
class GridSearchResult:
    """Outcome of :func:`grid_search`
    """
    best: SvrParams

    scores: Dict[Tuple[float, float], float] = field(default_factory=dict)
    """Cross-validated mean squared error for each ``(C, gamma)``"""

def grid_search(X: np.ndarray, y: Sequence[float], params: Optional[SvrParams] = None,
                seed: int = 0, folds: int = GRID_FOLDS,
                grid_c: Sequence[float] = GRID_C,
                grid_gamma: Sequence[float] = GRID_GAMMA) -> GridSearchResult:
    """Choose ``C`` and ``gamma`` by k-fold cross-validated mean squared error

    The data is scaled once and each kernel matrix is shared by every fold
    and every ``C``. Ties keep the earliest grid point (``C`` ascending, then
    ``gamma`` ascending).
    """
    X, z = _check_input(X, y)
    if params is None:
        params = SvrParams()
    n, d = X.shape
    folds = min(folds, n)
    if folds < 2:
        raise InputError(n, 'Grid search needs at least 2 samples')
    Xs = ScalerParams.fit(X).transform(X)
    perm = derive_rng(seed).permutation(n)
    fold_ix = np.array_split(perm, folds)
    sq_dist = cdist(Xs, Xs, 'sqeuclidean')

    scores = {}
    best_key, best_score = None, np.inf
    for C in grid_c:
        for gamma in grid_gamma:
            p = SvrParams(
                C=C, epsilon=params.epsilon, gamma=gamma, tol=params.tol,
                max_passes=params.max_passes,
            )
            K = np.exp(-gamma * sq_dist)
            err = np.zeros(n)
            for fold, test in enumerate(fold_ix):
                train = np.setdiff1d(perm, test)
                Xt = Xs[train]
                if np.all(Xt == Xt[0]):
                    pred = np.full(test.size, np.mean(z[train]))
                else:
                    rp = p.resolve(train.size, d)
                    beta, bias, _ = _solve_scaled(K[np.ix_(train, train)], z[train], rp, seed)
                    pred = K[np.ix_(test, train)] @ beta + bias
                err[test] = pred - z[test]
            score = float(np.mean(err ** 2))
            scores[(C, gamma)] = score
            if score < best_score:
                best_key, best_score = (C, gamma), score
    logger.debug(f'grid search best C={best_key[0]}, gamma={best_key[1]}, mse={best_score:.6g}')
    best = SvrParams(
        C=best_key[0], epsilon=params.epsilon, gamma=best_key[1], tol=params.tol,
        max_passes=params.max_passes,
    )
    return GridSearchResult(best=best, scores=scores)

from typing import Optional, Dict, Any, Union
from dataclasses import dataclass, fields, replace
from pathlib import Path
import typing

from vqapython.common import *
from vqapython.svr import SvrParams
from vqapython.evalstats import METRICS

__all__ = ('ConfigError', 'RunConfig')

SEED_MAX = (1 << 64) - 1
FEATURE_SETS = ('nss', 'brisque')

#: Fields that do not change results (left out of the digest)
EXCLUDED_FIELDS = ('out', 'workers')

_TRUE = ('1', 'true', 'yes', 'on')
_FALSE = ('0', 'false', 'no', 'off')


class ConfigError(VqaError):
    DEFAULT_MSG = 'Invalid configuration'
    def __init__(self, value, msg: Optional[str] = None, line: Optional[int] = None):
        super().__init__(value, msg)
        self.line = line
    def __str__(self):
        s = super().__str__()
        if self.line is not None:
            s = f'line {self.line}: {s}'
        return s


def _base_type(tp):
    args = typing.get_args(tp)
    if type(None) in args:
        return [a for a in args if a is not type(None)][0], True
    return tp, False

def _convert(name: str, tp, text: str) -> Any:
    base, optional = _base_type(tp)
    s = text.strip()
    if optional and s.lower() in ('', 'none'):
        return None
    try:
        if base is bool:
            if s.lower() in _TRUE:
                return True
            if s.lower() in _FALSE:
                return False
            raise ValueError(s)
        return base(s)
    except ValueError:
        raise ConfigError(s, f'Invalid value for "{name}"')


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings of one command line run
    """
    seed: int = 0
    iterations: int = 100
    train_frac: float = .8
    folds: int = 5
    alpha: float = .05
    grid_search: bool = False
    sample_fps: float = 1.
    svr_c: float = 1.
    svr_epsilon: float = .1
    svr_gamma: Optional[float] = None
    svr_tol: float = 1e-3
    svr_max_passes: Optional[int] = None
    feature_set: str = 'nss'
    bins: int = 10
    splits: int = 100
    metric: str = 'srocc'
    name: Optional[str] = None
    workers: int = 1
    out: Optional[str] = None

    def __post_init__(self):
        if not 0 <= self.seed <= SEED_MAX:
            raise ConfigError(self.seed, 'seed must be an unsigned 64-bit integer')
        if self.iterations < 1:
            raise ConfigError(self.iterations, 'iterations must be positive')
        if not 0 < self.train_frac < 1:
            raise ConfigError(self.train_frac, 'train_frac must lie in (0, 1)')
        if self.folds < 2:
            raise ConfigError(self.folds, 'folds must be at least 2')
        if not 0 < self.alpha < 1:
            raise ConfigError(self.alpha, 'alpha must lie in (0, 1)')
        if not self.sample_fps > 0:
            raise ConfigError(self.sample_fps, 'sample_fps must be positive')
        if self.feature_set not in FEATURE_SETS:
            raise ConfigError(self.feature_set, f'feature_set must be one of {", ".join(FEATURE_SETS)}')
        if self.bins < 1:
            raise ConfigError(self.bins, 'bins must be positive')
        if self.splits < 1:
            raise ConfigError(self.splits, 'splits must be positive')
        if self.metric not in METRICS:
            raise ConfigError(self.metric, f'metric must be one of {", ".join(METRICS)}')
        if self.workers < 1:
            raise ConfigError(self.workers, 'workers must be positive')
        try:
            self.svr_params()
        except VqaError as exc:
            raise ConfigError(exc.value, exc.msg)

    @classmethod
    def parse(cls, text: str) -> 'RunConfig':
        """Parse flat ``key = value`` text (``#`` comments and blank lines
        are ignored)
        """
        types = typing.get_type_hints(cls)
        kw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ConfigError(line, 'Expected "key = value"', line=lineno)
            key, value = (s.strip() for s in line.split('=', 1))
            if key not in types:
                raise ConfigError(key, 'Unknown key', line=lineno)
            try:
                kw[key] = _convert(key, types[key], value)
            except ConfigError as exc:
                exc.line = lineno
                raise
        return cls(**kw)

    @classmethod
    def read(cls, filename: Union[str, Path]) -> 'RunConfig':
        try:
            text = Path(filename).read_text(encoding='utf-8')
        except OSError as exc:
            raise ConfigError(str(filename), f'Cannot read config file: {exc.strerror}')
        return cls.parse(text)

    def with_overrides(self, **kwargs) -> 'RunConfig':
        """Copy with every non-``None`` keyword applied
        """
        return replace(self, **{k:v for k, v in kwargs.items() if v is not None})

    def svr_params(self) -> SvrParams:
        return SvrParams(
            C=self.svr_c, epsilon=self.svr_epsilon, gamma=self.svr_gamma,
            tol=self.svr_tol, max_passes=self.svr_max_passes,
        )

    def render(self) -> str:
        """Canonical sorted ``key=value`` lines of the result-affecting fields
        """
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            if f.name in EXCLUDED_FIELDS:
                continue
            value = getattr(self, f.name)
            if isinstance(value, bool):
                s = 'true' if value else 'false'
            elif isinstance(value, float):
                s = format_float(value)
            else:
                s = str(value)
            lines.append(f'{f.name}={s}')
        return '\n'.join(lines) + '\n'

    def digest(self) -> str:
        return sha256_bytes(self.render().encode('utf-8'))

    def as_dict(self) -> Dict[str, Any]:
        return {f.name:getattr(self, f.name) for f in fields(self) if f.name not in EXCLUDED_FIELDS}

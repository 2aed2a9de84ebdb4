from typing import Optional, ClassVar, Any, Union, Iterable, Sequence, Tuple
from dataclasses import dataclass, field
import hashlib
import math

import numpy as np

__all__ = (
    'VqaError', 'DegenerateInput', 'DimensionError',
    'FeatureVector', 'derive_rng', 'format_float', 'sha256_bytes',
    'sha256_file', 'median',
)

#: Format used for every float written to a CSV or report
FLOAT_FORMAT = '.17g'

Number = Union[int, float]


class VqaError(Exception):
    """Base class for all errors raised by :mod:`vqapython`
    """
    DEFAULT_MSG: ClassVar[Optional[str]] = None
    msg: Optional[str]
    def __init__(self, value: Any, msg: Optional[str] = None):
        self.value = value
        if msg is None:
            msg = self.DEFAULT_MSG
        self.msg = msg
    def __str__(self):
        s = f'value = "{self.value!r}"'
        if self.msg is not None:
            s = f'{self.msg} ({s})'
        return s

class DegenerateInput(VqaError):
    """Raised when input data has no spread (zero variance, constant lists,
    one-sided samples) and a statistic is undefined
    """
    DEFAULT_MSG = 'Degenerate input'

class DimensionError(VqaError, ValueError):
    """Raised when planes, vectors or lists have incompatible shapes
    """
    DEFAULT_MSG = 'Dimension mismatch'


@dataclass
class FeatureVector:
    """Named, ordered real-valued features for one video
    """
    names: Tuple[str, ...] = field(default_factory=tuple)
    """Feature names (unique)"""

    values: Tuple[float, ...] = field(default_factory=tuple)
    """Feature values, parallel to :attr:`names`"""

    def __post_init__(self):
        self.names = tuple(self.names)
        self.values = tuple(float(v) for v in self.values)
        if len(self.names) != len(self.values):
            raise DimensionError(
                (len(self.names), len(self.values)), 'names and values differ in length',
            )
        if len(set(self.names)) != len(self.names):
            raise DimensionError(self.names, 'Feature names must be unique')
        for name, value in self:
            if not math.isfinite(value):
                raise DegenerateInput(value, f'Feature "{name}" is not finite')

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[str, Number]]) -> 'FeatureVector':
        """Create a :class:`FeatureVector` from ``(name, value)`` pairs
        """
        pairs = list(pairs)
        return cls(names=[p[0] for p in pairs], values=[p[1] for p in pairs])

    def concat(self, other: 'FeatureVector') -> 'FeatureVector':
        """Return a new vector with the features of ``other`` appended
        """
        return FeatureVector(
            names=self.names + other.names, values=self.values + other.values,
        )

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def __getitem__(self, key: str) -> float:
        try:
            ix = self.names.index(key)
        except ValueError:
            raise KeyError(key)
        return self.values[ix]

    def __len__(self):
        return len(self.names)

    def __iter__(self):
        yield from zip(self.names, self.values)


def derive_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Create the generator for sub-task ``index`` of a run seeded with ``seed``

    Every sub-task uses ``seed + index`` so that results do not depend on
    scheduling order.
    """
    return np.random.default_rng(np.random.PCG64(int(seed) + int(index)))

def format_float(value: Number) -> str:
    """Render a float with full precision (``%.17g``)
    """
    return format(float(value), FLOAT_FORMAT)

def median(values: Sequence[Number]) -> float:
    """Median, averaging the two central order statistics for even lengths
    """
    if not len(values):
        raise DegenerateInput(values, 'Median of an empty list')
    return float(np.median(np.asarray(values, dtype=np.float64)))

def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()

def sha256_file(filename) -> str:
    h = hashlib.sha256()
    with open(filename, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b''):
            h.update(chunk)
    return h.hexdigest()

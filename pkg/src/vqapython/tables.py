"""CSV file contracts

Every table is UTF-8 with LF line endings. Lines starting with ``#`` are
comments (the provenance line written by the command line tools is one).
Floats are written with :func:`~.common.format_float`.
"""
from typing import Optional, Sequence, Iterable, Iterator, List, Tuple, Any, Union
from dataclasses import dataclass, field
from pathlib import Path
import csv
import io
import math

import numpy as np

from vqapython.common import *
from vqapython.video import VideoClip
from vqapython import y4m

__all__ = (
    'TableError', 'ManifestError', 'CsvRecord', 'read_csv', 'write_csv',
    'format_cell', 'FeatureTable', 'ManifestRow', 'ClipManifest',
)

PathLike = Union[str, Path]

ID_COLUMN = 'video_id'
FPS_TOLERANCE = 1e-3


class TableError(VqaError):
    """Raised when a table violates its schema

    The file name, line and column (both 1-based) are included in the
    message when known.
    """
    DEFAULT_MSG = 'Invalid table'
    def __init__(self, value, msg: Optional[str] = None,
                 filename: Optional[PathLike] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        super().__init__(value, msg)
        self.filename = filename
        self.line = line
        self.column = column
    def __str__(self):
        s = super().__str__()
        loc = [str(v) for v in (self.filename, self.line, self.column) if v is not None]
        if len(loc):
            s = f'{":".join(loc)}: {s}'
        return s

class ManifestError(TableError):
    DEFAULT_MSG = 'Video does not match its manifest row'


@dataclass
class CsvRecord:
    """One data row of a table along with its location
    """
    filename: str
    line: int
    header: Tuple[str, ...]
    cells: Tuple[str, ...]

    def column_number(self, name: str) -> int:
        return self.header.index(name) + 1

    def get(self, name: str) -> str:
        return self.cells[self.header.index(name)]

    def error(self, name: Optional[str], value: Any, msg: str) -> TableError:
        col = self.column_number(name) if name is not None else None
        return TableError(value, msg, filename=self.filename, line=self.line, column=col)

    def get_float(self, name: str, finite: bool = True) -> float:
        s = self.get(name)
        try:
            value = float(s)
        except ValueError:
            raise self.error(name, s, f'Column "{name}" is not a number')
        if finite and not math.isfinite(value):
            raise self.error(name, s, f'Column "{name}" is not finite')
        return value

    def get_int(self, name: str) -> int:
        s = self.get(name)
        try:
            return int(s)
        except ValueError:
            raise self.error(name, s, f'Column "{name}" is not an integer')


def read_csv(filename: PathLike, required: Sequence[str] = ()) -> Tuple[Tuple[str, ...], List[CsvRecord]]:
    """Read a table, skipping comment and blank lines

    Returns a tuple of:
        :class:`tuple`
            The header
        :class:`list`
            A :class:`CsvRecord` for each data row

    Raises:
        TableError: If the file is empty, a required column is missing, or
            a row has the wrong number of cells
    """
    filename = str(filename)
    header = None
    records = []
    with open(filename, 'r', encoding='utf-8', newline='') as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip() or line.startswith('#'):
                continue
            cells = tuple(c.strip() for c in next(csv.reader([line])))
            if header is None:
                header = cells
                for name in required:
                    if name not in header:
                        raise TableError(
                            name, 'Missing required column', filename=filename, line=lineno,
                        )
                continue
            if len(cells) != len(header):
                raise TableError(
                    len(cells), f'Expected {len(header)} cells',
                    filename=filename, line=lineno, column=min(len(cells), len(header)) + 1,
                )
            records.append(CsvRecord(filename=filename, line=lineno, header=header, cells=cells))
    if header is None:
        raise TableError(filename, 'Table has no header', filename=filename)
    return header, records

def format_cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    return str(value)

def write_csv(filename: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]],
              provenance: Optional[str] = None):
    """Write a table (LF line endings, optional leading ``#`` provenance lines)

    Each line of ``provenance`` becomes its own comment line.
    """
    buf = io.StringIO()
    if provenance is not None:
        for line in provenance.splitlines():
            buf.write(f'# {line}\n')
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    with open(str(filename), 'w', encoding='utf-8', newline='') as f:
        f.write(buf.getvalue())


@dataclass
class FeatureTable:
    """Feature vectors of many videos sharing one set of names

    Rows are kept in file (insertion) order.
    """
    names: Tuple[str, ...]
    ids: Tuple[str, ...]
    values: np.ndarray  #: Array of shape ``(len(ids), len(names))``

    def __post_init__(self):
        self.names = tuple(self.names)
        self.ids = tuple(self.ids)
        self.values = np.asarray(self.values, dtype=np.float64).reshape(len(self.ids), len(self.names))
        if len(set(self.ids)) != len(self.ids):
            raise DimensionError(self.ids, 'Video ids must be unique')
        if len(set(self.names)) != len(self.names):
            raise DimensionError(self.names, 'Feature names must be unique')
        if not np.all(np.isfinite(self.values)):
            raise DegenerateInput(self.values.shape, 'Feature values must be finite')
        self._index = {vid:i for i, vid in enumerate(self.ids)}

    @classmethod
    def from_vectors(cls, items: Iterable[Tuple[str, FeatureVector]]) -> 'FeatureTable':
        ids, rows = [], []
        names = None
        for vid, fv in items:
            if names is None:
                names = fv.names
            elif fv.names != names:
                raise DimensionError(vid, 'Feature names differ between videos')
            ids.append(vid)
            rows.append(fv.values)
        if names is None:
            raise DimensionError(0, 'No feature vectors')
        return cls(names=names, ids=ids, values=rows)

    @property
    def dimension(self) -> int:
        return len(self.names)

    def missing(self, ids: Iterable[str]) -> List[str]:
        """Ids of ``ids`` that have no row, in the given order
        """
        return [vid for vid in ids if vid not in self._index]

    def vector(self, video_id: str) -> FeatureVector:
        return FeatureVector(names=self.names, values=self.values[self._index[video_id]])

    def matrix(self, ids: Sequence[str]) -> np.ndarray:
        """Rows for ``ids`` stacked in the given order
        """
        return self.values[[self._index[vid] for vid in ids]]

    def __contains__(self, video_id):
        return video_id in self._index

    def __len__(self):
        return len(self.ids)

    def __iter__(self) -> Iterator[Tuple[str, FeatureVector]]:
        for vid in self.ids:
            yield vid, self.vector(vid)

    @classmethod
    def read_csv(cls, filename: PathLike) -> 'FeatureTable':
        """Read ``video_id,<name_1>,...,<name_d>``
        """
        header, records = read_csv(filename, required=[ID_COLUMN])
        if header[0] != ID_COLUMN:
            raise TableError(header[0], f'First column must be "{ID_COLUMN}"', filename=str(filename), column=1)
        names = header[1:]
        if not len(names):
            raise TableError(str(filename), 'Table has no feature columns', filename=str(filename))
        ids, rows, seen = [], [], set()
        for rec in records:
            vid = rec.get(ID_COLUMN)
            if vid in seen:
                raise rec.error(ID_COLUMN, vid, 'Duplicate video_id')
            seen.add(vid)
            ids.append(vid)
            rows.append([rec.get_float(n) for n in names])
        return cls(names=names, ids=ids, values=np.asarray(rows).reshape(len(ids), len(names)))

    def write_csv(self, filename: PathLike, provenance: Optional[str] = None):
        rows = ([vid] + list(self.values[i]) for i, vid in enumerate(self.ids))
        write_csv(filename, (ID_COLUMN,) + self.names, rows, provenance)


@dataclass(frozen=True)
class ManifestRow:
    video_id: str
    path: str
    width: int
    height: int
    fps: float


@dataclass
class ClipManifest:
    """Rows of ``manifest.csv`` (``video_id,path,width,height,fps``)

    Relative paths are resolved against :attr:`base_dir`.
    """
    rows: Tuple[ManifestRow, ...]
    base_dir: Path = field(default_factory=Path)
    filename: Optional[str] = None

    def __post_init__(self):
        self.rows = tuple(self.rows)
        self.base_dir = Path(self.base_dir)
        seen = set()
        for row in self.rows:
            if row.video_id in seen:
                raise TableError(row.video_id, 'Duplicate video_id', filename=self.filename)
            seen.add(row.video_id)

    @classmethod
    def read_csv(cls, filename: PathLike) -> 'ClipManifest':
        cols = ('video_id', 'path', 'width', 'height', 'fps')
        _, records = read_csv(filename, required=cols)
        rows, seen = [], set()
        for rec in records:
            vid = rec.get('video_id')
            if vid in seen:
                raise rec.error('video_id', vid, 'Duplicate video_id')
            seen.add(vid)
            row = ManifestRow(
                video_id=vid, path=rec.get('path'), width=rec.get_int('width'),
                height=rec.get_int('height'), fps=rec.get_float('fps'),
            )
            if row.width < 1 or row.height < 1 or not row.fps > 0:
                raise rec.error(None, row, 'Frame size and rate must be positive')
            rows.append(row)
        return cls(rows=rows, base_dir=Path(filename).parent, filename=str(filename))

    def resolve(self, row: ManifestRow) -> Path:
        p = Path(row.path)
        if not p.is_absolute():
            p = self.base_dir / p
        return p

    def load_clip(self, row: ManifestRow) -> VideoClip:
        """Decode the video of a row

        ``.y4m`` files are parsed with their own header and checked against
        the row; anything else is read as headerless 4:2:0 limited range
        planar YUV of the row's geometry.

        Raises:
            ManifestError: If a Y4M header disagrees with the row
        """
        p = self.resolve(row)
        data = p.read_bytes()
        if p.suffix.lower() == '.y4m':
            clip = y4m.parse_y4m(data, id=row.video_id)
            if (clip.width, clip.height) != (row.width, row.height):
                raise ManifestError(
                    (clip.width, clip.height), f'Expected {row.width}x{row.height}',
                    filename=str(p),
                )
            if abs(clip.fps - row.fps) > FPS_TOLERANCE * row.fps:
                raise ManifestError(clip.fps, f'Expected {row.fps} fps', filename=str(p))
            return clip
        return y4m.parse_raw_yuv(data, row.width, row.height, row.fps, id=row.video_id)

    def __len__(self):
        return len(self.rows)

    def __iter__(self) -> Iterator[ManifestRow]:
        yield from self.rows

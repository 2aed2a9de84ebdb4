"""Subjective study processing

Raw ratings are standardized per subject and session, screened for outlier
subjects, rescaled globally onto ``[0, 100]`` and averaged into MOS.
"""
from typing import Optional, Sequence, Iterable, Dict, List, Tuple, FrozenSet, Any
from dataclasses import dataclass, asdict
from collections import defaultdict
import json
import math

import numpy as np
from scipy import stats
from loguru import logger

from vqapython.common import *
from vqapython.tables import TableError, PathLike, read_csv, write_csv, ID_COLUMN
from vqapython.evalstats import srocc

__all__ = (
    'RatingError', 'DegenerateSession', 'EmptyVideo', 'DegenerateRange',
    'Rating', 'RatingMatrix', 'SessionStats', 'ZScoreMatrix',
    'SubjectScreening', 'VideoScreening', 'RejectionReport',
    'MosRow', 'MosTable', 'ConsistencyResult',
    'session_zscores', 'bt500_reject', 'rescale_and_mos',
    'inter_subject_consistency', 'intra_subject_consistency', 'mos_histogram',
)

SCORE_MIN = 0.
SCORE_MAX = 100.
MIN_SUBJECTS = 3
MIN_INTRA_RATINGS = 3
REJECT_RATIO = 0.05
REJECT_BALANCE = 0.3


class RatingError(VqaError):
    DEFAULT_MSG = 'Invalid ratings'

class DegenerateSession(VqaError):
    """Raised when a subject's session cannot be standardized (fewer than 2
    ratings or zero deviation)
    """
    def __init__(self, subject: str, session: int, msg: Optional[str] = None):
        self.subject = subject
        self.session = session
        if msg is None:
            msg = f'Cannot standardize subject "{subject}", session {session}'
        super().__init__((subject, session), msg)

class EmptyVideo(VqaError):
    """Raised when rejection leaves videos without any rating
    """
    def __init__(self, ids: Sequence[str]):
        self.ids = tuple(ids)
        super().__init__(self.ids, f'No retained ratings for: {", ".join(self.ids[:10])}')

class DegenerateRange(VqaError):
    DEFAULT_MSG = 'All retained z-scores are equal'


@dataclass(frozen=True)
class Rating:
    subject: str
    video: str
    session: int
    score: float


@dataclass
class RatingMatrix:
    """Sparse raw ratings (at most one per subject and video)
    """
    entries: Tuple[Rating, ...]

    def __post_init__(self):
        self.entries = tuple(self.entries)
        seen = set()
        for r in self.entries:
            key = (r.subject, r.video)
            if key in seen:
                raise RatingError(key, 'Subject rated the video more than once')
            seen.add(key)
            if not (SCORE_MIN <= r.score <= SCORE_MAX):
                raise RatingError(r.score, f'Score outside [{SCORE_MIN:g}, {SCORE_MAX:g}]')

    @classmethod
    def from_tuples(cls, items: Iterable[Tuple[str, str, int, float]]) -> 'RatingMatrix':
        return cls(entries=[Rating(str(s), str(v), int(k), float(x)) for s, v, k, x in items])

    @property
    def subjects(self) -> List[str]:
        return sorted({r.subject for r in self.entries})

    @property
    def videos(self) -> List[str]:
        return sorted({r.video for r in self.entries})

    def scores_by_video(self, exclude: Iterable[str] = ()) -> Dict[str, List[Tuple[str, float]]]:
        """``{video: [(subject, score), ...]}`` with subjects sorted
        """
        exclude = set(exclude)
        d = defaultdict(list)
        for r in self.entries:
            if r.subject not in exclude:
                d[r.video].append((r.subject, r.score))
        return {vid:sorted(d[vid]) for vid in sorted(d)}

    def scores_by_subject(self, exclude: Iterable[str] = ()) -> Dict[str, Dict[str, float]]:
        exclude = set(exclude)
        d = defaultdict(dict)
        for r in self.entries:
            if r.subject not in exclude:
                d[r.subject][r.video] = r.score
        return {s:d[s] for s in sorted(d)}

    def without(self, subjects: Iterable[str]) -> 'RatingMatrix':
        subjects = set(subjects)
        return RatingMatrix([r for r in self.entries if r.subject not in subjects])

    def __len__(self):
        return len(self.entries)

    @classmethod
    def read_csv(cls, filename: PathLike) -> 'RatingMatrix':
        """Read ``subject_id,video_id,session,score``
        """
        cols = ('subject_id', 'video_id', 'session', 'score')
        _, records = read_csv(filename, required=cols)
        entries, seen = [], set()
        for rec in records:
            subject, video = rec.get('subject_id'), rec.get('video_id')
            if (subject, video) in seen:
                raise rec.error('video_id', (subject, video), 'Subject rated the video more than once')
            seen.add((subject, video))
            session = rec.get_int('session')
            if session < 1:
                raise rec.error('session', session, 'Session must be a positive integer')
            score = rec.get_float('score')
            if not (SCORE_MIN <= score <= SCORE_MAX):
                raise rec.error('score', score, f'Score outside [{SCORE_MIN:g}, {SCORE_MAX:g}]')
            entries.append(Rating(subject, video, session, score))
        return cls(entries)


@dataclass(frozen=True)
class SessionStats:
    mean: float
    std: float      #: Sample (N-1) standard deviation
    n: int


@dataclass
class ZScoreMatrix:
    """Per-rating z-scores plus the session statistics used to compute them
    """
    z: Dict[Tuple[str, str], float]                     #: ``{(subject, video): z}``
    sessions: Dict[Tuple[str, int], SessionStats]       #: ``{(subject, session): stats}``

    @property
    def subjects(self) -> List[str]:
        return sorted({s for s, _ in self.z})

    @property
    def videos(self) -> List[str]:
        return sorted({v for _, v in self.z})

    def by_video(self, exclude: Iterable[str] = ()) -> Dict[str, List[Tuple[str, float]]]:
        exclude = set(exclude)
        d = defaultdict(list)
        for (s, v), value in self.z.items():
            if s not in exclude:
                d[v].append((s, value))
        return {vid:sorted(d[vid]) for vid in sorted(d)}


def session_zscores(ratings: RatingMatrix) -> ZScoreMatrix:
    """Standardize each (subject, session) with its mean and sample deviation

    Raises:
        DegenerateSession: If a session has fewer than 2 ratings or zero
            deviation
    """
    groups = defaultdict(list)
    for r in ratings.entries:
        groups[(r.subject, r.session)].append(r)
    z = {}
    sessions = {}
    for key in sorted(groups):
        entries = sorted(groups[key], key=lambda r: r.video)
        scores = np.asarray([r.score for r in entries], dtype=np.float64)
        if scores.size < 2:
            raise DegenerateSession(*key)
        mean = float(np.mean(scores))
        std = float(np.std(scores, ddof=1))
        if not std > 0:
            raise DegenerateSession(*key)
        sessions[key] = SessionStats(mean=mean, std=std, n=scores.size)
        for r, s in zip(entries, scores):
            z[(r.subject, r.video)] = float((s - mean) / std)
    return ZScoreMatrix(z=z, sessions=sessions)


@dataclass
class SubjectScreening:
    p: int          #: Ratings above the video's upper threshold
    q: int          #: Ratings below the video's lower threshold
    total: int
    rejected: bool

@dataclass
class VideoScreening:
    mean: float
    std: float
    kurtosis: float
    threshold: float

@dataclass
class RejectionReport:
    subjects: Dict[str, SubjectScreening]
    videos: Dict[str, VideoScreening]

    @property
    def rejected(self) -> FrozenSet[str]:
        return frozenset(s for s, v in self.subjects.items() if v.rejected)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'rejected': sorted(self.rejected),
            'subjects': {k:asdict(v) for k, v in sorted(self.subjects.items())},
            'videos': {k:asdict(v) for k, v in sorted(self.videos.items())},
        }

    def to_json(self) -> bytes:
        return json.dumps(self.to_dict(), indent=2).encode('utf-8') + b'\n'


def _kurtosis(values: np.ndarray) -> float:
    d = values - np.mean(values)
    m2 = np.mean(d ** 2)
    if not m2 > 0:
        return 0.
    return float(np.mean(d ** 4) / m2 ** 2)

def bt500_reject(z: ZScoreMatrix) -> RejectionReport:
    """Kurtosis-gated outlier subject screening on z-scores (single pass)

    Per video the threshold is ``2σ`` when the kurtosis lies in ``[2, 4]``
    and ``√20·σ`` otherwise. A subject is rejected when more than 5% of
    their ratings fall outside the thresholds and the excursions are not
    one-sided (``|P - Q| / (P + Q) < 0.3``).

    Raises:
        RatingError: If fewer than 3 subjects rated
    """
    subjects = z.subjects
    if len(subjects) < MIN_SUBJECTS:
        raise RatingError(len(subjects), f'At least {MIN_SUBJECTS} subjects are required')
    videos = {}
    p = dict.fromkeys(subjects, 0)
    q = dict.fromkeys(subjects, 0)
    total = dict.fromkeys(subjects, 0)
    for vid, items in z.by_video().items():
        values = np.asarray([v for _, v in items])
        mean = float(np.mean(values))
        std = float(np.std(values, ddof=1)) if values.size > 1 else 0.
        kurt = _kurtosis(values)
        if 2. <= kurt <= 4.:
            t = 2. * std
        else:
            t = math.sqrt(20.) * std
        videos[vid] = VideoScreening(mean=mean, std=std, kurtosis=kurt, threshold=t)
        spread = np.ptp(values) > 0
        for subject, value in items:
            total[subject] += 1
            if not spread:
                continue
            if value > mean + t:
                p[subject] += 1
            elif value < mean - t:
                q[subject] += 1
    screening = {}
    for s in subjects:
        pq = p[s] + q[s]
        rejected = (
            total[s] > 0 and pq / total[s] > REJECT_RATIO
            and abs(p[s] - q[s]) / pq < REJECT_BALANCE
        )
        screening[s] = SubjectScreening(p=p[s], q=q[s], total=total[s], rejected=rejected)
    report = RejectionReport(subjects=screening, videos=videos)
    logger.info(f'{len(report.rejected)} of {len(subjects)} subjects rejected')
    return report


@dataclass(frozen=True)
class MosRow:
    mos: float
    n: int          #: Number of retained ratings
    std: float      #: Sample deviation of the rescaled scores
    ci95: float     #: 95% confidence half-width (t distribution)

@dataclass
class MosTable:
    """MOS of each video (rows sorted by video id)
    """
    rows: Dict[str, MosRow]

    def __post_init__(self):
        self.rows = {k:self.rows[k] for k in sorted(self.rows)}

    def as_dict(self) -> Dict[str, float]:
        return {k:v.mos for k, v in self.rows.items()}

    @property
    def ids(self) -> List[str]:
        return list(self.rows.keys())

    def __getitem__(self, video_id: str) -> MosRow:
        return self.rows[video_id]

    def __contains__(self, video_id):
        return video_id in self.rows

    def __len__(self):
        return len(self.rows)

    def write_csv(self, filename: PathLike, provenance: Optional[str] = None):
        header = (ID_COLUMN, 'mos', 'n_ratings', 'std', 'ci95')
        rows = ((k, v.mos, v.n, v.std, v.ci95) for k, v in self.rows.items())
        write_csv(filename, header, rows, provenance)

    @classmethod
    def read_csv(cls, filename: PathLike) -> 'MosTable':
        """Read ``mos.csv``; only ``video_id`` and ``mos`` are required
        """
        header, records = read_csv(filename, required=(ID_COLUMN, 'mos'))
        rows = {}
        for rec in records:
            vid = rec.get(ID_COLUMN)
            if vid in rows:
                raise rec.error(ID_COLUMN, vid, 'Duplicate video_id')
            rows[vid] = MosRow(
                mos=rec.get_float('mos'),
                n=rec.get_int('n_ratings') if 'n_ratings' in header else 1,
                std=rec.get_float('std') if 'std' in header else 0.,
                ci95=rec.get_float('ci95') if 'ci95' in header else 0.,
            )
        if not len(rows):
            raise TableError(str(filename), 'No MOS rows', filename=str(filename))
        return cls(rows)


def rescale_and_mos(z: ZScoreMatrix, rejected: Iterable[str] = ()) -> MosTable:
    """Map retained z-scores globally onto ``[0, 100]`` and average per video

    Raises:
        EmptyVideo: If a video has no retained rating
        DegenerateRange: If all retained z-scores are equal
    """
    rejected = set(rejected)
    all_videos = z.videos
    by_video = z.by_video(exclude=rejected)
    empty = [vid for vid in all_videos if vid not in by_video]
    if len(empty):
        raise EmptyVideo(empty)
    retained = np.asarray([v for items in by_video.values() for _, v in items])
    lo, hi = float(np.min(retained)), float(np.max(retained))
    if not hi > lo:
        raise DegenerateRange(lo)
    scale = SCORE_MAX - SCORE_MIN
    rows = {}
    for vid, items in by_video.items():
        values = np.asarray([v for _, v in items])
        rescaled = SCORE_MIN + scale * (values - lo) / (hi - lo)
        n = rescaled.size
        std = float(np.std(rescaled, ddof=1)) if n > 1 else 0.
        ci = float(stats.t.ppf(.975, n - 1) * std / math.sqrt(n)) if n > 1 else 0.
        rows[vid] = MosRow(mos=float(np.mean(rescaled)), n=n, std=std, ci95=ci)
    return MosTable(rows)


@dataclass
class ConsistencyResult:
    """SROCC values of a consistency analysis and their median
    """
    values: Dict[Any, float]    #: Split index or subject id to SROCC
    median: float

    def to_dict(self) -> Dict[str, Any]:
        return {'median': self.median, 'values': {str(k):v for k, v in self.values.items()}}


def inter_subject_consistency(ratings: RatingMatrix, n_splits: int = 100, seed: int = 0,
                              exclude: Iterable[str] = ()) -> ConsistencyResult:
    """Split-half agreement between groups of raters

    For each split (seeded with ``seed + index``) the raters of every video
    are shuffled and divided into two equal halves (one rating is dropped
    at random for odd counts); the SROCC between the two group means over
    videos is recorded. A split where either half has the same mean on every
    video scores 0.

    Raises:
        RatingError: If a video has fewer than 2 ratings
    """
    by_video = ratings.scores_by_video(exclude=exclude)
    for vid, items in by_video.items():
        if len(items) < 2:
            raise RatingError(vid, 'Every video needs at least 2 ratings')
    scores = [np.asarray([s for _, s in items]) for items in by_video.values()]
    values = {}
    for split in range(n_splits):
        rng = derive_rng(seed, split)
        a, b = [], []
        for arr in scores:
            perm = rng.permutation(arr.size)
            half = arr.size // 2
            a.append(np.mean(arr[perm[:half]]))
            b.append(np.mean(arr[perm[half:2*half]]))
        try:
            values[split] = srocc(a, b)
        except DegenerateInput:
            logger.debug(f'split {split}: a half has constant video means, scored 0')
            values[split] = 0.
    return ConsistencyResult(values=values, median=median(list(values.values())))

def intra_subject_consistency(ratings: RatingMatrix, mos: MosTable,
                              exclude: Iterable[str] = ()) -> ConsistencyResult:
    """SROCC between each subject's raw scores and the MOS of the videos
    they rated

    Subjects with fewer than 3 rated videos (or constant scores) are skipped
    with a warning.
    """
    values = {}
    for subject, scored in ratings.scores_by_subject(exclude=exclude).items():
        vids = [vid for vid in sorted(scored) if vid in mos]
        if len(vids) < MIN_INTRA_RATINGS:
            logger.warning(f'subject "{subject}" skipped: only {len(vids)} rated videos')
            continue
        try:
            values[subject] = srocc([scored[v] for v in vids], [mos[v].mos for v in vids])
        except DegenerateInput:
            logger.warning(f'subject "{subject}" skipped: constant scores')
    if not len(values):
        raise DegenerateInput(0, 'No subject could be evaluated')
    return ConsistencyResult(values=values, median=median(list(values.values())))

def mos_histogram(mos: MosTable, bins: int = 10) -> List[Tuple[float, float, int]]:
    """Counts of MOS values over ``bins`` equal-width bins of ``[0, 100]``

    Returns a list of ``(lower, upper, count)``
    """
    counts, edges = np.histogram(
        [row.mos for row in mos.rows.values()], bins=bins, range=(SCORE_MIN, SCORE_MAX),
    )
    return [(float(edges[i]), float(edges[i+1]), int(c)) for i, c in enumerate(counts)]

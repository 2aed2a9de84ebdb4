"""Command line interface

Each subcommand reads its inputs, writes one output (plus optional side
outputs) and exits with 0 on success, 1 on invalid input and 2 on any other
failure.
"""
from typing import Optional, Sequence, List, Dict, Set, Any, Callable
from pathlib import Path
from concurrent.futures import ProcessPoolExecutor
import argparse
import json
import sys

from loguru import logger

from vqapython import __version__
from vqapython.common import *
from vqapython.config import RunConfig, FEATURE_SETS
from vqapython.tables import FeatureTable, ClipManifest, write_csv, ID_COLUMN
from vqapython.nss import nss_bag, brisque_bag
from vqapython.siti import siti
from vqapython.subjective import (
    RatingMatrix, MosTable, session_zscores, bt500_reject, rescale_and_mos,
    inter_subject_consistency, intra_subject_consistency, mos_histogram,
)
from vqapython.gamevqp import DeepFeatureTable, GameVqpModel, GameVqpSpec, train_gamevqp
from vqapython.protocol import SplitProtocol, SplitReport, KFoldProtocol, write_scatter
from vqapython.evalstats import significance_matrix, METRICS

__all__ = ('main', 'build_parser')

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

LOG_FORMAT = '<level>{level: <8}</level> | {name}:{function} - {message}'


def provenance(config: RunConfig, inputs: Sequence[Path]) -> str:
    """The comment text written at the top of every output
    """
    parts = [f'{Path(p).name}:{sha256_file(p)}' for p in inputs]
    return f'vqapython {__version__} config={config.digest()} inputs={",".join(parts)}'

def _csv_comment(config: RunConfig, inputs: Sequence[Path]) -> str:
    settings = ' '.join(config.render().splitlines())
    return f'{provenance(config, inputs)}\nconfig {settings}'

def _write_json(filename: Path, config: RunConfig, inputs: Sequence[Path], data: Dict[str, Any]):
    d = {'provenance': provenance(config, inputs), 'run_config': config.as_dict()}
    d.update(data)
    Path(filename).write_bytes(json.dumps(d, indent=2).encode('utf-8') + b'\n')

def _resolve_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig()
    if args.config is not None:
        config = RunConfig.read(args.config)
    return config.with_overrides(
        seed=args.seed, iterations=args.iterations, train_frac=args.train_frac,
        grid_search=args.grid_search, out=args.out, workers=args.workers,
        sample_fps=args.sample_fps, folds=getattr(args, 'folds', None),
        alpha=getattr(args, 'alpha', None), feature_set=getattr(args, 'feature_set', None),
        bins=getattr(args, 'bins', None), splits=getattr(args, 'splits', None),
        metric=getattr(args, 'metric', None), name=getattr(args, 'name', None),
    )

def _out(config: RunConfig, default: str) -> Path:
    return Path(config.out if config.out is not None else default)

def _read_deep(args) -> Optional[DeepFeatureTable]:
    if getattr(args, 'deep', None) is None:
        return None
    return DeepFeatureTable.read_csv(args.deep)

def _inputs(*paths) -> List[Path]:
    return [Path(p) for p in paths if p is not None]

def _spec(config: RunConfig) -> GameVqpSpec:
    return GameVqpSpec(params=config.svr_params(), use_grid_search=config.grid_search)


def _extract(job) -> FeatureVector:
    manifest, row, kind, sample_fps = job
    clip = manifest.load_clip(row)
    if kind == 'brisque':
        return brisque_bag(clip, sample_fps)
    return nss_bag(clip, sample_fps)

def cmd_features(args, config: RunConfig) -> int:
    manifest = ClipManifest.read_csv(args.manifest)
    jobs = [(manifest, row, config.feature_set, config.sample_fps) for row in manifest]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as ex:
            vectors = list(ex.map(_extract, jobs))
    else:
        vectors = [_extract(job) for job in jobs]
    table = FeatureTable.from_vectors(zip((row.video_id for row in manifest), vectors))
    inputs = _inputs(args.manifest, *(manifest.resolve(row) for row in manifest))
    out = _out(config, 'features.csv')
    table.write_csv(out, _csv_comment(config, inputs))
    logger.info(f'{len(table)} feature rows written to {out}')
    return EXIT_OK

def cmd_siti(args, config: RunConfig) -> int:
    manifest = ClipManifest.read_csv(args.manifest)
    rows = []
    for row in manifest:
        result = siti(manifest.load_clip(row))
        rows.append((row.video_id, result.si, result.ti))
    inputs = _inputs(args.manifest, *(manifest.resolve(row) for row in manifest))
    out = _out(config, 'siti.csv')
    write_csv(out, (ID_COLUMN, 'si', 'ti'), rows, _csv_comment(config, inputs))
    return EXIT_OK

def cmd_mos(args, config: RunConfig) -> int:
    ratings = RatingMatrix.read_csv(args.ratings)
    z = session_zscores(ratings)
    report = bt500_reject(z)
    mos = rescale_and_mos(z, report.rejected)
    inputs = _inputs(args.ratings)
    prov = _csv_comment(config, inputs)
    out = _out(config, 'mos.csv')
    mos.write_csv(out, prov)
    report_path = Path(args.report) if args.report else out.with_suffix('.rejection.json')
    _write_json(report_path, config, inputs, report.to_dict())
    if args.histogram:
        write_csv(
            args.histogram, ('lower', 'upper', 'count'), mos_histogram(mos, config.bins), prov,
        )
    logger.info(f'MOS of {len(mos)} videos written to {out}')
    return EXIT_OK

def _read_rejected(filename) -> Set[str]:
    try:
        d = json.loads(Path(filename).read_bytes().decode('utf-8'))
        rejected = d.get('rejected', [])
    except (UnicodeDecodeError, json.JSONDecodeError, AttributeError) as exc:
        raise VqaError(str(filename), f'Invalid rejection report: {exc}')
    if not isinstance(rejected, list) or not all(isinstance(s, str) for s in rejected):
        raise VqaError(str(filename), 'Invalid rejection report: "rejected" must list subject ids')
    return set(rejected)

def cmd_consistency(args, config: RunConfig) -> int:
    ratings = RatingMatrix.read_csv(args.ratings)
    mos = MosTable.read_csv(args.mos)
    exclude = set()
    if args.rejection is not None:
        exclude = _read_rejected(args.rejection)
    inter = inter_subject_consistency(ratings, config.splits, seed=config.seed, exclude=exclude)
    intra = intra_subject_consistency(ratings, mos, exclude=exclude)
    inputs = _inputs(args.ratings, args.mos, args.rejection)
    _write_json(_out(config, 'consistency.json'), config, inputs, {
        'excluded': sorted(exclude),
        'inter_subject': inter.to_dict(),
        'intra_subject': intra.to_dict(),
    })
    logger.info(f'inter-subject median {inter.median:.4f}, intra-subject median {intra.median:.4f}')
    return EXIT_OK

def cmd_train(args, config: RunConfig) -> int:
    features = FeatureTable.read_csv(args.features)
    deep = _read_deep(args)
    mos = MosTable.read_csv(args.mos).as_dict()
    model = train_gamevqp(
        features, mos, deep=deep, params=config.svr_params(), seed=config.seed,
        use_grid_search=config.grid_search,
    )
    inputs = _inputs(args.features, args.deep, args.mos)
    _write_json(_out(config, 'model.json'), config, inputs, model.to_dict())
    return EXIT_OK

def cmd_predict(args, config: RunConfig) -> int:
    model = GameVqpModel.load(Path(args.model).read_bytes())
    features = FeatureTable.read_csv(args.features)
    deep = _read_deep(args)
    ids = list(features.ids)
    pred = model.predict_tables(ids, features, deep)
    prov = _csv_comment(config, _inputs(args.model, args.features, args.deep))
    write_csv(_out(config, 'predictions.csv'), (ID_COLUMN, 'prediction'), zip(ids, pred), prov)
    return EXIT_OK

def _log_iteration(index, metrics):
    logger.debug(f'iteration {index}: srocc={metrics.srocc:.4f} lcc={metrics.lcc:.4f} rmse={metrics.rmse:.4f}')

def cmd_eval(args, config: RunConfig) -> int:
    features = FeatureTable.read_csv(args.features)
    deep = _read_deep(args)
    mos = MosTable.read_csv(args.mos).as_dict()
    if config.name is None:
        config = config.with_overrides(name=Path(args.features).stem)
    protocol = SplitProtocol(
        _spec(config), iterations=config.iterations, train_frac=config.train_frac,
        seed=config.seed, workers=config.workers, name=config.name,
    )
    protocol.bind(on_iteration=_log_iteration)
    report = protocol.run(features, mos, deep)
    inputs = _inputs(args.features, args.deep, args.mos)
    _write_json(_out(config, 'splitreport.json'), config, inputs, report.to_dict())
    m = report.median
    logger.info(f'median srocc={m.srocc:.4f} lcc={m.lcc:.4f} rmse={m.rmse:.4f}')
    return EXIT_OK

def _log_fold(index, n_test):
    logger.debug(f'fold {index}: {n_test} videos predicted')

def cmd_kfold(args, config: RunConfig) -> int:
    features = FeatureTable.read_csv(args.features)
    deep = _read_deep(args)
    mos = MosTable.read_csv(args.mos).as_dict()
    protocol = KFoldProtocol(_spec(config), k=config.folds, seed=config.seed)
    protocol.bind(on_fold=_log_fold)
    rows = protocol.run(features, mos, deep)
    prov = _csv_comment(config, _inputs(args.features, args.deep, args.mos))
    write_scatter(_out(config, 'scatter.csv'), rows, prov)
    return EXIT_OK

def cmd_significance(args, config: RunConfig) -> int:
    if len(args.reports) < 2:
        raise VqaError(len(args.reports), 'At least 2 split reports are required')
    distributions = {}
    for filename in args.reports:
        report = SplitReport.from_json(Path(filename).read_bytes())
        name = report.name or Path(filename).stem
        if name in distributions:
            raise VqaError(name, 'Duplicate model name among reports')
        distributions[name] = report.distribution(config.metric)
    matrix = significance_matrix(distributions, alpha=config.alpha, metric=config.metric)
    prov = _csv_comment(config, _inputs(*args.reports))
    matrix.write_csv(_out(config, 'significance.csv'), prov)
    return EXIT_OK


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument('--config', help='Flat "key = value" config file')
    p.add_argument('--seed', type=int)
    p.add_argument('--iterations', type=int)
    p.add_argument('--train-frac', dest='train_frac', type=float)
    p.add_argument('--grid-search', dest='grid_search', action='store_const', const=True)
    p.add_argument('--sample-fps', dest='sample_fps', type=float)
    p.add_argument('--workers', type=int)
    p.add_argument('--out', help='Output file')
    p.add_argument('-v', '--verbose', action='store_true')
    return p

def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog='vqapython', description=__doc__.splitlines()[0])
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', required=True)

    def add(name: str, func: Callable, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(func=func)
        return p

    p = add('features', cmd_features, 'manifest -> features.csv')
    p.add_argument('--manifest', required=True)
    p.add_argument('--set', dest='feature_set', choices=FEATURE_SETS)

    p = add('siti', cmd_siti, 'manifest -> siti.csv')
    p.add_argument('--manifest', required=True)

    p = add('mos', cmd_mos, 'ratings.csv -> mos.csv and rejection report')
    p.add_argument('--ratings', required=True)
    p.add_argument('--report', help='Rejection report (JSON)')
    p.add_argument('--histogram', help='Optional MOS histogram CSV')
    p.add_argument('--bins', type=int)

    p = add('consistency', cmd_consistency, 'ratings.csv + mos.csv -> consistency report')
    p.add_argument('--ratings', required=True)
    p.add_argument('--mos', required=True)
    p.add_argument('--rejection', help='Rejection report whose subjects are excluded')
    p.add_argument('--splits', type=int)

    for name, func, help in (
        ('train', cmd_train, 'features [+ deep] + mos -> model file'),
        ('eval', cmd_eval, 'features [+ deep] + mos -> splitreport.json'),
        ('kfold', cmd_kfold, 'features [+ deep] + mos -> scatter.csv'),
    ):
        p = add(name, func, help)
        p.add_argument('--features', required=True)
        p.add_argument('--deep')
        p.add_argument('--mos', required=True)
        if name == 'eval':
            p.add_argument('--name', help='Model name stored in the report')
        if name == 'kfold':
            p.add_argument('--folds', type=int)

    p = add('predict', cmd_predict, 'model + features [+ deep] -> predictions.csv')
    p.add_argument('--model', required=True)
    p.add_argument('--features', required=True)
    p.add_argument('--deep')

    p = add('significance', cmd_significance, 'split reports -> significance.csv')
    p.add_argument('reports', nargs='+')
    p.add_argument('--metric', choices=METRICS)
    p.add_argument('--alpha', type=float)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logger.remove()
    logger.add(sys.stderr, level='DEBUG' if args.verbose else 'INFO', format=LOG_FORMAT)
    try:
        config = _resolve_config(args)
        return args.func(args, config)
    except (VqaError, FileNotFoundError) as exc:
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:
        logger.exception(exc)
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_RUNTIME

def run():
    sys.exit(main())

"""Wave-equation benchmark: basis generation time and reduction error vs. basis size.

Usage::

    rsmor run --grid 100x10 --nt 200 --basis-sizes 10,20,40 \\
              --methods cSVDFull rcSVD:povs=10,qpow=1 --out results/

Each method writes ``plot_<tag>[_povs<p>_qpow<q>].dat`` with the columns
``rbsize,runtime,relerr``.
"""

import argparse
import csv
import logging
import os
import sys
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from rsmor.exceptions import (DimensionError, NumericalError, RankDeficiencyError,
                              SymplecticityError, ValidationError)
from rsmor.hamsys import GridConfig, collect_snapshots, discretize_wave, integrate_midpoint
from rsmor.reduce import integrate_reduced, reduce_system, relative_error
from rsmor.sympbasis import METHOD_TAGS, RANDOMIZED_TAGS, generate_basis

logger = logging.getLogger('rsmor.bench')

CSV_HEADER = 'rbsize,runtime,relerr'
FULL_SCALE_N = 20000

BasisFailure = (RankDeficiencyError, SymplecticityError, ValidationError, NumericalError)


@dataclass(frozen=True)
class MethodSpec:
    tag: str
    p_ovs: int = 0
    q_pow: int = 0

    def __post_init__(self):
        if self.tag not in METHOD_TAGS:
            raise ValidationError(f'unknown method {self.tag!r}; choose from {", ".join(METHOD_TAGS)}')
        if self.p_ovs < 0 or self.q_pow < 0:
            raise ValidationError('povs and qpow must be nonnegative')

    @property
    def randomized(self):
        return self.tag in RANDOMIZED_TAGS

    @property
    def key(self):
        if self.randomized:
            return f'{self.tag}_povs{self.p_ovs}_qpow{self.q_pow}'
        return self.tag

    @property
    def filename(self):
        return f'plot_{self.key}.dat'

    @classmethod
    def parse(cls, text):
        """``'rcSVD:povs=10,qpow=1'`` or a bare tag like ``'SVDLike'``."""
        tag, _, opts = text.strip().partition(':')
        kwargs = {}
        for item in filter(None, opts.split(',')):
            name, sep, value = item.partition('=')
            name = name.strip()
            if not sep or name not in ('povs', 'qpow'):
                raise ValidationError(f'bad method option {item!r} in {text!r}')
            try:
                kwargs['p_ovs' if name == 'povs' else 'q_pow'] = int(value)
            except ValueError:
                raise ValidationError(f'bad integer {value!r} in {text!r}') from None
        return cls(tag, **kwargs)

    def __str__(self):
        if self.randomized:
            return f'{self.tag}:povs={self.p_ovs},qpow={self.q_pow}'
        return self.tag


def default_methods():
    methods = [MethodSpec(t) for t in METHOD_TAGS if t not in RANDOMIZED_TAGS]
    for tag in RANDOMIZED_TAGS:
        methods += [MethodSpec(tag, p, q) for p in (0, 10, 30) for q in (0, 1)]
    return methods


@dataclass
class ExperimentConfig:
    grid: GridConfig = field(default_factory=lambda: GridConfig(100, 10))
    n_t: int = 200
    training_mus: Tuple[float, ...] = (1.0, 2.0)
    test_mu_count: int = 10
    test_mu_range: Tuple[float, float] = (1.0, 2.0)
    sketch_seed_count: int = 5
    basis_sizes: Tuple[int, ...] = (10, 20, 40, 80, 160)
    methods: Tuple[MethodSpec, ...] = field(default_factory=lambda: tuple(default_methods()))
    master_seed: int = 0
    output_path: str = 'results'
    sketch_kind: str = 'srft'

    def __post_init__(self):
        if self.n_t < 1:
            raise ValidationError('nt must be >= 1')
        if not self.training_mus:
            raise ValidationError('need at least one training parameter')
        if self.test_mu_count < 1 or self.sketch_seed_count < 1:
            raise ValidationError('test_mu_count and sketch_seed_count must be >= 1')
        lo, hi = self.test_mu_range
        if not 0 < lo <= hi:
            raise ValidationError(f'invalid parameter range {self.test_mu_range}')
        for b in self.basis_sizes:
            if b < 2 or b % 2:
                raise ValidationError(f'basis sizes must be even and positive, got {b}')
        if self.sketch_kind not in ('srft', 'gaussian'):
            raise ValidationError(f'unknown sketch kind {self.sketch_kind!r}')
        if not 0 <= self.master_seed < 2**64:
            raise ValidationError('seed must fit in 64 bits')

    @property
    def full_scale(self):
        return self.grid.N >= FULL_SCALE_N

    def seeds(self):
        """Test parameters and sketch seeds, both derived from ``master_seed``."""
        mu_ss, sketch_ss = np.random.SeedSequence(self.master_seed).spawn(2)
        lo, hi = self.test_mu_range
        mus = np.random.default_rng(mu_ss).uniform(lo, hi, self.test_mu_count)
        sketch_seeds = [int(s) for s in sketch_ss.generate_state(self.sketch_seed_count, dtype=np.uint64)]
        return [float(m) for m in mus], sketch_seeds


@dataclass(frozen=True)
class ResultRow:
    rbsize: int
    runtime: float
    relerr: float


def run_experiment(cfg):
    """Sweep methods and basis sizes; returns ``{method key: [ResultRow, ...]}``.

    Snapshots are computed once, FOM trajectories once per test parameter.
    Basis generation is timed on its own; randomized methods are repeated for
    every sketch seed and averaged.
    """
    if cfg.full_scale:
        logger.warning('full-scale configuration (N=%d); expect minutes-to-hours', cfg.grid.N)
    results = OrderedDict()
    if not cfg.methods:
        return results

    fom = discretize_wave(cfg.grid)
    tic = time.perf_counter()
    Xs = collect_snapshots(fom, cfg.training_mus, cfg.n_t).matrix
    logger.info('snapshots %s in %.2fs', Xs.shape, time.perf_counter() - tic)
    test_mus, sketch_seeds = cfg.seeds()
    full = {mu: integrate_midpoint(fom, mu, cfg.n_t) for mu in test_mus}

    for method in cfg.methods:
        rows = []
        seeds = sketch_seeds if method.randomized else [0]
        for rbsize in cfg.basis_sizes:
            k = rbsize // 2
            runtimes, errors, rom_times = [], [], []
            try:
                for seed in seeds:
                    tic = time.perf_counter()
                    basis = generate_basis(method.tag, Xs, k, method.p_ovs, method.q_pow, seed,
                                           sketch_kind=cfg.sketch_kind)
                    runtimes.append(time.perf_counter() - tic)
                    rsys = reduce_system(fom, basis)
                    for mu in test_mus:
                        tic = time.perf_counter()
                        red = integrate_reduced(rsys, mu, cfg.n_t)
                        rom_times.append(time.perf_counter() - tic)
                        errors.append(relative_error(full[mu], basis, red))
            except BasisFailure as e:
                logger.warning('%s rbsize=%d skipped: %s', method.key, rbsize, e)
                continue
            row = ResultRow(rbsize, float(np.mean(runtimes)), float(np.mean(errors)))
            logger.info('%s rbsize=%d runtime=%.3es relerr=%.3e rom_solve=%.3es',
                        method.key, rbsize, row.runtime, row.relerr, float(np.mean(rom_times)))
            rows.append(row)
        results[method.key] = rows
    return results


def _fmt(x):
    return repr(float(x))


def emit_csv(rows, path):
    """Write ``rbsize,runtime,relerr`` rows; refuses to write an empty table."""
    if not rows:
        raise ValidationError(f'no rows to write to {path}')
    lines = [CSV_HEADER] + [f'{int(r.rbsize)},{_fmt(r.runtime)},{_fmt(r.relerr)}' for r in rows]
    with open(path, 'w', newline='') as f:
        f.write('\n'.join(lines) + '\n')


def read_csv(path):
    with open(path, newline='') as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != CSV_HEADER.split(','):
            raise ValidationError(f'{path}: unexpected header {reader.fieldnames}')
        return [ResultRow(int(r['rbsize']), float(r['runtime']), float(r['relerr'])) for r in reader]


def write_results(results, methods, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for method in methods:
        rows = results.get(method.key)
        if not rows:
            logger.warning('%s produced no rows; no file written', method.key)
            continue
        path = os.path.join(out_dir, method.filename)
        emit_csv(rows, path)
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

CONFIG_KEYS = ('grid', 'nt', 'seed', 'basis_sizes', 'methods', 'training_mus', 'test_mu_count',
               'test_mu_range', 'sketch_seed_count', 'sketch_kind', 'out', 'paper_scale')


def _parse_grid(text):
    try:
        a, b = text.lower().split('x')
        return GridConfig(int(a), int(b))
    except ValueError:
        raise ValidationError(f'grid must look like 100x10, got {text!r}') from None


def _parse_list(text, conv):
    try:
        return tuple(conv(t) for t in text.replace(',', ' ').split())
    except ValueError:
        raise ValidationError(f'malformed list {text!r}') from None


def _parse_int(text, name):
    try:
        return int(text)
    except ValueError:
        raise ValidationError(f'{name} must be an integer, got {text!r}') from None


def read_config_file(path):
    """``key = value`` lines, ``#`` starts a comment."""
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition('=')
            key = key.strip().replace('-', '_')
            if not sep:
                raise ValidationError(f'{path}:{lineno}: expected key = value')
            if key not in CONFIG_KEYS:
                raise ValidationError(f'{path}:{lineno}: unknown key {key!r}')
            values[key] = value.strip()
    return values


def _apply(cfg_kwargs, key, value):
    if key == 'grid':
        cfg_kwargs['grid'] = _parse_grid(value)
    elif key == 'nt':
        cfg_kwargs['n_t'] = _parse_int(value, 'nt')
    elif key == 'seed':
        cfg_kwargs['master_seed'] = _parse_int(value, 'seed')
    elif key == 'basis_sizes':
        cfg_kwargs['basis_sizes'] = _parse_list(value, int)
    elif key == 'methods':
        cfg_kwargs['methods'] = tuple(MethodSpec.parse(m) for m in value.split())
    elif key == 'training_mus':
        cfg_kwargs['training_mus'] = _parse_list(value, float)
    elif key == 'test_mu_count':
        cfg_kwargs['test_mu_count'] = _parse_int(value, key)
    elif key == 'test_mu_range':
        rng = _parse_list(value, float)
        if len(rng) != 2:
            raise ValidationError('test_mu_range needs two values')
        cfg_kwargs['test_mu_range'] = rng
    elif key == 'sketch_seed_count':
        cfg_kwargs['sketch_seed_count'] = _parse_int(value, key)
    elif key == 'sketch_kind':
        cfg_kwargs['sketch_kind'] = value
    elif key == 'out':
        cfg_kwargs['output_path'] = value
    elif key == 'paper_scale':
        if value.lower() in ('1', 'true', 'yes'):
            cfg_kwargs.update(PAPER_SCALE)
    else:
        raise ValidationError(f'unknown key {key!r}')


PAPER_SCALE = dict(grid=GridConfig(1000, 20), n_t=1000, training_mus=(1.0, 2.0))


def build_parser():
    parser = argparse.ArgumentParser(prog='rsmor', description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest='command', required=True)
    run = sub.add_parser('run', help='run the wave benchmark and write CSV plot data')
    run.add_argument('--config', help='key = value configuration file')
    run.add_argument('--seed', help='master seed (64-bit integer)')
    run.add_argument('--grid', help='interior grid, e.g. 100x10')
    run.add_argument('--nt', help='number of time steps')
    run.add_argument('--basis-sizes', help='comma separated even basis sizes 2k')
    run.add_argument('--methods', nargs='*', metavar='METHOD',
                     help='method specs such as SVDLike or rcSVD:povs=10,qpow=1')
    run.add_argument('--test-mu-count', help='number of random test parameters')
    run.add_argument('--sketch-seed-count', help='number of sketch seeds for randomized methods')
    run.add_argument('--paper-scale', action='store_true', help='1000x20 grid, nt=1000')
    run.add_argument('--out', help='output directory')
    run.add_argument('-v', '--verbose', action='store_true')
    return parser


def parse_config(args=None, file=None):
    """Defaults, then the config file, then ``--paper-scale``, then explicit flags."""
    if args is None or isinstance(args, (list, tuple)):
        args = build_parser().parse_args(['run'] + list(args or []))
    kwargs = {}
    path = file if file is not None else getattr(args, 'config', None)
    if path is not None:
        for key, value in read_config_file(path).items():
            _apply(kwargs, key, value)
    if getattr(args, 'paper_scale', False):
        kwargs.update(PAPER_SCALE)
    for flag, key in (('grid', 'grid'), ('nt', 'nt'), ('seed', 'seed'), ('basis_sizes', 'basis_sizes'),
                      ('test_mu_count', 'test_mu_count'), ('sketch_seed_count', 'sketch_seed_count'),
                      ('out', 'out')):
        value = getattr(args, flag, None)
        if value is not None:
            _apply(kwargs, key, value)
    if getattr(args, 'methods', None) is not None:
        kwargs['methods'] = tuple(MethodSpec.parse(m) for m in args.methods)
    return ExperimentConfig(**kwargs)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format='%(asctime)s %(levelname)s %(message)s', stream=sys.stderr)
    try:
        cfg = parse_config(args)
    except (ValidationError, DimensionError, OSError) as e:
        print(f'rsmor: configuration error: {e}', file=sys.stderr)
        return 2
    logger.info('config: grid=%dx%d nt=%d seed=%d methods=%s', cfg.grid.n_x1, cfg.grid.n_x2,
                cfg.n_t, cfg.master_seed, ' '.join(map(str, cfg.methods)))
    results = run_experiment(cfg)
    try:
        for path in write_results(results, cfg.methods, cfg.output_path):
            logger.info('wrote %s', path)
    except OSError as e:
        print(f'rsmor: cannot write results: {e}', file=sys.stderr)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())

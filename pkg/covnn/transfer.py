# -*- coding: utf-8 -*-
# @Time    : 2024/10/16 09:20
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : transfer.py

import logging
from itertools import combinations

import numpy as np
import pandas as pd

from .covariance import sample_covariance, normalize_spectrum
from .synthcohort import sample_multiscale_cohort
from .training import TrainConfig, train, evaluate
from .vnn import VnnConfig, init, forward
from .utils import parallel_map, derive_seed
from .utils.errors import DegenerateEmbedding, DimensionError, InvalidMatrix

logger = logging.getLogger(__name__)


def _check_partition(breakpoints):
    b = np.asarray(breakpoints, dtype=float)
    if b.ndim != 1 or len(b) < 2 or b[0] != 0.0 or b[-1] != 1.0 or np.any(np.diff(b) <= 0):
        raise InvalidMatrix('breakpoints must increase strictly from 0 to 1')
    return b


class StepFunction1D(object):
    def __init__(self, breakpoints, values):
        """
        Piecewise constant function on [0, 1]

        :param breakpoints: array-like, 0 = b_0 < b_1 < ... < b_M = 1
        :param values: array-like, length M, value on [b_i, b_{i+1})
        """
        self.breakpoints = _check_partition(breakpoints)
        self.values = np.asarray(values, dtype=float).reshape(-1)
        if len(self.values) != len(self.breakpoints) - 1:
            raise DimensionError(f'{len(self.breakpoints) - 1} intervals but {len(self.values)} values')

    def __repr__(self):
        return f"StepFunction1D(intervals={len(self.values)})"

    def __call__(self, a):
        a = np.asarray(a, dtype=float)
        idx = np.clip(np.searchsorted(self.breakpoints, a, side='right') - 1, 0, len(self.values) - 1)
        return self.values[idx]

    @property
    def widths(self):
        return np.diff(self.breakpoints)


class StepFunction2D(object):
    def __init__(self, row_breakpoints, col_breakpoints, values):
        self.row_breakpoints = _check_partition(row_breakpoints)
        self.col_breakpoints = _check_partition(col_breakpoints)
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (len(self.row_breakpoints) - 1, len(self.col_breakpoints) - 1):
            raise DimensionError(f'block values of shape {self.values.shape} do not match the partitions')

    def __repr__(self):
        return f"StepFunction2D(blocks={self.values.shape})"

    def __call__(self, a, b):
        rows = np.clip(np.searchsorted(self.row_breakpoints, np.asarray(a, dtype=float), side='right') - 1,
                       0, self.values.shape[0] - 1)
        cols = np.clip(np.searchsorted(self.col_breakpoints, np.asarray(b, dtype=float), side='right') - 1,
                       0, self.values.shape[1] - 1)
        return self.values[np.ix_(np.atleast_1d(rows), np.atleast_1d(cols))]


def variance_partition(cov):
    """Breakpoints of [0, 1] with interval i of width C_ii / trace(C), in region order"""
    d = np.diag(np.asarray(cov.matrix if hasattr(cov, 'matrix') else cov, dtype=float))
    total = float(np.sum(d))
    if not total > 0 or np.any(d <= 0):
        raise DegenerateEmbedding('every region needs a positive variance to get an interval')
    breakpoints = np.concatenate([[0.0], np.cumsum(d) / total])
    breakpoints[-1] = 1.0
    return breakpoints


def embed_signal(x, cov):
    """
    Step function of a graph signal, interval widths proportional to the marginal variances

    :param x: array-like, length M signal
    :param cov: CovarianceGraph (or M x M matrix) fixing the partition
    :return: StepFunction1D
    """
    x = np.asarray(x, dtype=float)
    breakpoints = variance_partition(cov)
    if x.shape != (len(breakpoints) - 1,):
        raise DimensionError(f'signal of shape {x.shape} does not match a {len(breakpoints) - 1}-region covariance')
    return StepFunction1D(breakpoints, x)


def embed_operator(cov):
    """Block function W(a, b) = C_ij on the product of the variance partition with itself"""
    breakpoints = variance_partition(cov)
    matrix = np.asarray(cov.matrix if hasattr(cov, 'matrix') else cov, dtype=float)
    return StepFunction2D(breakpoints, breakpoints, matrix)


def recover_signal(step):
    return step.values.copy()


def l2_distance(f, g):
    """
    Exact L2 distance of two step functions, integrated on the common refinement of both partitions
    """
    grid = np.union1d(f.breakpoints, g.breakpoints)
    mid = (grid[:-1] + grid[1:]) / 2.0
    diff = f(mid) - g(mid)
    return float(np.sqrt(np.sum(diff * diff * np.diff(grid))))


def l2_distance_2d(f, g):
    rows = np.union1d(f.row_breakpoints, g.row_breakpoints)
    cols = np.union1d(f.col_breakpoints, g.col_breakpoints)
    row_mid, col_mid = (rows[:-1] + rows[1:]) / 2.0, (cols[:-1] + cols[1:]) / 2.0
    diff = f(row_mid, col_mid) - g(row_mid, col_mid)
    return float(np.sqrt(np.sum(diff * diff * np.outer(np.diff(rows), np.diff(cols)))))


class TransferReport(object):
    def __init__(self, dims, train_dims, mae, distances, config):
        """
        :param dims: list of evaluation dimensions
        :param train_dims: list of dimensions a model was trained at
        :param mae: dict, (train_dim, eval_dim) -> test MAE
        :param distances: dict, (train_dim, M1, M2) -> per-subject L2 distances of the embedded readouts
        :param config: dict, echo of the experiment settings
        """
        self.dims = list(dims)
        self.train_dims = list(train_dims)
        self.mae = mae
        self.distances = distances
        self.config = config

    def __repr__(self):
        return f"TransferReport(train_dims={self.train_dims}, dims={self.dims})"

    def mae_matrix(self):
        """Rows are training dimensions, columns evaluation dimensions"""
        return pd.DataFrame([[self.mae[(t, m)] for m in self.dims] for t in self.train_dims],
                            index=pd.Index(self.train_dims, name='train_dim'),
                            columns=pd.Index(self.dims, name='eval_dim'))

    def median_distance(self, train_dim, m1, m2):
        return float(np.median(self.distances[(train_dim, m1, m2)]))

    def relative_drift(self):
        """(train_dim, eval_dim) -> |MAE - native MAE| / native MAE"""
        return {(t, m): abs(self.mae[(t, m)] - self.mae[(t, t)]) / self.mae[(t, t)]
                for t in self.train_dims for m in self.dims if (t, t) in self.mae}

    def to_dict(self):
        return {
            'dims': self.dims,
            'train_dims': self.train_dims,
            'mae': [{'train_dim': t, 'eval_dim': m, 'mae': v} for (t, m), v in sorted(self.mae.items())],
            'distances': [{'train_dim': t, 'dims': [m1, m2], 'median': float(np.median(v)),
                           'values': np.asarray(v).tolist()} for (t, m1, m2), v in sorted(self.distances.items())],
            'config': self.config,
        }

    def to_frame(self):
        return pd.DataFrame([{'train_dim': t, 'eval_dim': m, 'mae': v} for (t, m), v in sorted(self.mae.items())])


def _readout_distances(model, covs, cohorts, pair, n_matched):
    m1, m2 = pair
    n = min(n_matched, cohorts[m1].n_subjects)
    p1 = np.atleast_2d(forward(model, covs[m1], cohorts[m1].features[:n]).p_x)
    p2 = np.atleast_2d(forward(model, covs[m2], cohorts[m2].features[:n]).p_x)
    return np.array([l2_distance(embed_signal(p1[i], covs[m1]), embed_signal(p2[i], covs[m2])) for i in range(n)])


def transfer_table(spec, dims, train_dims, cfg=None, seed=0, model_config=None, n_train=500, n_test=100,
                   n_matched=20, age_range=(50.0, 90.0), threads=None):
    """
    Train one VNN per training dimension and evaluate every model at every dimension

    All cohorts come from one set of continuous subjects resampled at each M, so the
    covariance at M is estimated from the same training subjects observed at M.

    :param spec: CortexSpec
    :param dims: list of ints, evaluation dimensions (>= 2 each)
    :param train_dims: list of ints, training dimensions
    :param cfg: TrainConfig, default is TrainConfig(seed=seed)
    :param seed: int
    :param model_config: VnnConfig, default is VnnConfig()
    :param n_matched: int, test subjects used for the readout distances
    :return: TransferReport
    """
    dims = sorted(set(int(m) for m in dims))
    train_dims = sorted(set(int(m) for m in train_dims))
    if not dims or dims[0] < 2:
        raise DimensionError(f'evaluation dimensions must be >= 2, got {dims}')
    cfg = cfg or TrainConfig(seed=seed)
    model_config = model_config or VnnConfig()
    every = sorted(set(dims) | set(train_dims))
    train_cohorts = sample_multiscale_cohort(spec, None, every, n_train, age_range, derive_seed(seed, 'transfer', 'train'),
                                             id_prefix='HC-TR-')
    test_cohorts = sample_multiscale_cohort(spec, None, every, n_test, age_range, derive_seed(seed, 'transfer', 'test'),
                                            id_prefix='HC-TE-')
    covs = dict(zip(every, parallel_map(lambda m: normalize_spectrum(sample_covariance(train_cohorts[m])), every,
                                        threads)))
    mae, distances = {}, {}
    for t in train_dims:
        model = train(init(model_config, derive_seed(seed, 'init')), covs[t], train_cohorts[t], cfg, threads).model
        scores = parallel_map(lambda m: evaluate(model, covs[m], test_cohorts[m])['mae'], dims, threads)
        for m, value in zip(dims, scores):
            mae[(t, m)] = value
            logger.info('trained at M=%d, evaluated at M=%d: MAE %.4f', t, m, value)
        for pair in combinations(dims, 2):
            distances[(t,) + pair] = _readout_distances(model, covs, test_cohorts, pair, n_matched)
            logger.info('trained at M=%d, readout distance M=%d vs M=%d: median %.4g',
                        t, pair[0], pair[1], float(np.median(distances[(t,) + pair])))
    config = {'spec': spec.to_dict(), 'train': cfg.to_dict(), 'model': model_config.to_dict(), 'seed': seed,
              'n_train': n_train, 'n_test': n_test, 'n_matched': n_matched, 'age_range': list(age_range)}
    return TransferReport(dims, train_dims, mae, distances, config)


def transfer_experiment(spec, dims, train_dim, cfg=None, seed=0, **kwargs):
    """
    Train at train_dim and evaluate at every dimension in dims (see transfer_table)

    :return: TransferReport
    """
    return transfer_table(spec, dims, [train_dim], cfg, seed, **kwargs)

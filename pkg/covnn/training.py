# -*- coding: utf-8 -*-
# @Time    : 2024/10/11 10:20
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : training.py

import time
import logging
from dataclasses import dataclass, field, asdict

import numpy as np

from .vnn import forward, backward
from .utils import parallel_map, derive_rng, chunked
from .utils.errors import ConfigError, DimensionError, DivergenceError

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = 'adam'
    betas: list = field(default_factory=lambda: [0.9, 0.999])
    eps: float = 1e-8
    seed: int = 0
    early_stop_patience: int = 20
    validation_fraction: float = 0.2
    zscore_features: bool = False
    center_features: bool = True
    init_readout_bias: bool = True
    chunk_size: int = 8

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f'epochs must be >= 1, got {self.epochs}')
        if self.batch_size < 1 or self.chunk_size < 1:
            raise ConfigError('batch_size and chunk_size must be >= 1')
        if not 0 < self.validation_fraction < 0.5:
            raise ConfigError(f'validation_fraction must lie in (0, 0.5), got {self.validation_fraction}')
        if not self.learning_rate > 0:
            raise ConfigError(f'learning_rate must be > 0, got {self.learning_rate}')
        if self.optimizer not in ('sgd', 'adam'):
            raise ConfigError(f'optimizer must be sgd or adam, got {self.optimizer!r}')
        self.betas = [float(b) for b in self.betas]
        if len(self.betas) != 2 or not all(0 <= b < 1 for b in self.betas):
            raise ConfigError(f'adam betas must be two numbers in [0, 1), got {self.betas}')

    def to_dict(self):
        return asdict(self)


class TrainReport(object):
    def __init__(self, model, history, best_epoch, train_ids, validation_ids, wall_clock):
        self.model = model
        self.history = history
        self.best_epoch = best_epoch
        self.train_ids = train_ids
        self.validation_ids = validation_ids
        self.wall_clock = wall_clock

    def __repr__(self):
        return f"TrainReport(epochs={len(self.history)}, best_epoch={self.best_epoch}, " \
               f"best_val_mae={self.best_validation_mae:.4f})"

    @property
    def best_validation_mae(self):
        return self.history[self.best_epoch - 1]['val_mae']

    def to_dict(self):
        # wall-clock stays out of the document so reruns are byte-identical
        return {'history': self.history, 'best_epoch': self.best_epoch,
                'best_validation_mae': self.best_validation_mae,
                'train_ids': list(self.train_ids), 'validation_ids': list(self.validation_ids)}


class Sgd(object):
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


class Adam(object):
    def __init__(self, lr, betas=(0.9, 0.999), eps=1e-8):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params, grads):
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(cfg):
    if cfg.optimizer == 'sgd':
        return Sgd(cfg.learning_rate)
    return Adam(cfg.learning_rate, cfg.betas, cfg.eps)


def split_subjects(data, fraction, seed):
    """
    Seeded subject-level split stratified by age decile

    Subjects are ordered by id before anything random happens, so the split depends on
    who is in the cohort and not on row order.

    :param data: FeatureMatrix
    :param fraction: float, share of every decile sent to validation
    :param seed: int
    :return: (train positions, validation positions), both sorted by subject id
    """
    ids = np.asarray(data.subject_ids, dtype=object)
    order = np.argsort(ids, kind='stable')
    ages = data.ages[order]
    edges = np.quantile(data.ages, np.linspace(0.1, 0.9, 9))
    decile = np.searchsorted(edges, ages, side='right')
    rng = derive_rng(seed, 'split')
    is_val = np.zeros(len(order), dtype=bool)
    for d in range(10):
        members = np.flatnonzero(decile == d)
        if members.size == 0:
            continue
        members = members[rng.permutation(members.size)]
        is_val[members[:int(round(fraction * members.size))]] = True
    if not is_val.any():
        is_val[rng.integers(len(order))] = True
    if is_val.all():
        raise ConfigError('validation split left no training subjects')
    return order[~is_val], order[is_val]


def predict(model, cov, data, chunk_size=64, threads=None):
    """
    Age estimates for every subject, in input order

    :return: numpy.ndarray of shape (n,)
    """
    if data.n_regions != cov.size:
        raise DimensionError(f'cohort has {data.n_regions} regions, covariance has {cov.size}')
    if data.n_subjects == 0:
        return np.zeros(0)
    parts = parallel_map(lambda idx: forward(model, cov, data.features[idx]).y_hats,
                         chunked(np.arange(data.n_subjects), chunk_size), threads)
    return np.concatenate(parts)


def evaluate(model, cov, data, threads=None):
    """
    MAE / MSE of the model against chronological age

    :param model: VnnModel
    :param cov: CovarianceGraph, same dimension as the cohort
    :param data: FeatureMatrix
    :return: dict with 'mae', 'mse' and per-subject 'predictions' in input order
    """
    predictions = predict(model, cov, data, threads=threads)
    err = predictions - data.ages
    return {'mae': float(np.mean(np.abs(err))), 'mse': float(np.mean(err * err)), 'predictions': predictions}


def _batch_gradient(model, cov, features, ages, scale, chunk_size, threads):
    def one(idx):
        trace = forward(model, cov, features[idx])
        err = trace.y_hats - ages[idx]
        return backward(model, trace, 2.0 * err * scale), float(np.sum(err * err))

    results = parallel_map(one, chunked(np.arange(len(ages)), chunk_size), threads)
    grads, sse = results[0]
    for g, s in results[1:]:
        grads = grads + g
        sse += s
    return grads, sse


def train(model, cov, healthy, cfg, threads=None):
    """
    Fit the VNN to chronological age by mini-batch gradient descent on the mean-squared error

    The covariance stays fixed. The returned report carries the model with the best validation MAE.

    :param model: VnnModel, initial parameters (not modified)
    :param cov: CovarianceGraph, built from the same healthy training cohort
    :param healthy: FeatureMatrix, healthy cohort
    :param cfg: TrainConfig
    :param threads: int, gradient fan-out width, default resolves from $COVNN_THREADS
    :return: TrainReport
    """
    if healthy.n_regions != cov.size:
        raise DimensionError(f'cohort has {healthy.n_regions} regions, covariance has {cov.size}')
    start = time.perf_counter()
    train_idx, val_idx = split_subjects(healthy, cfg.validation_fraction, cfg.seed)
    train_data, val_data = healthy.subset(train_idx), healthy.subset(val_idx)
    model = model.copy()
    if cfg.center_features:
        model.input_offset = float(train_data.features.mean())
    if cfg.init_readout_bias:
        if model.config.nonlinearity == 'tanh' and not model.config.final_linear:
            logger.warning('bounded final layer (tanh) cannot reach age targets, readout bias left at 0')
        else:
            model.biases[-1][:] = float(train_data.ages.mean())
    optimizer = make_optimizer(cfg)
    logger.info('training %r on %d subjects (%d validation), %d parameters',
                model, train_data.n_subjects, val_data.n_subjects, model.parameter_count)

    history, best, best_epoch, stale = [], None, 0, 0
    last_stable = model.copy()
    for epoch in range(1, cfg.epochs + 1):
        order = derive_rng(cfg.seed, 'shuffle', epoch).permutation(train_data.n_subjects)
        for batch in chunked(order, cfg.batch_size):
            grads, sse = _batch_gradient(model, cov, train_data.features[batch], train_data.ages[batch],
                                         1.0 / len(batch), cfg.chunk_size, threads)
            if not np.isfinite(sse) or not all(np.all(np.isfinite(g)) for g in grads.parameters()):
                raise DivergenceError(f'non-finite loss in epoch {epoch}', last_stable_epoch=epoch - 1)
            optimizer.step(model.parameters(), grads.parameters())
        train_eval = evaluate(model, cov, train_data, threads)
        val_eval = evaluate(model, cov, val_data, threads)
        row = {'epoch': epoch, 'train_mae': train_eval['mae'], 'train_mse': train_eval['mse'],
               'val_mae': val_eval['mae'], 'val_mse': val_eval['mse']}
        if not all(np.isfinite(v) for v in row.values()):
            raise DivergenceError(f'non-finite loss after epoch {epoch}', last_stable_epoch=epoch - 1)
        history.append(row)
        last_stable = model.copy()
        logger.info('epoch %d: train MAE %.4f MSE %.4f | val MAE %.4f MSE %.4f',
                    epoch, row['train_mae'], row['train_mse'], row['val_mae'], row['val_mse'])
        if best is None or row['val_mae'] < history[best_epoch - 1]['val_mae']:
            best, best_epoch, stale = last_stable, epoch, 0
        else:
            stale += 1
            if stale >= cfg.early_stop_patience:
                logger.info('early stop at epoch %d, best epoch %d', epoch, best_epoch)
                break
    wall_clock = time.perf_counter() - start
    logger.info('training done in %.1fs, best validation MAE %.4f at epoch %d',
                wall_clock, history[best_epoch - 1]['val_mae'], best_epoch)
    return TrainReport(best, history, best_epoch,
                       [healthy.subject_ids[i] for i in train_idx], [healthy.subject_ids[i] for i in val_idx],
                       wall_clock)

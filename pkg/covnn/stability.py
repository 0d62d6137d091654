# -*- coding: utf-8 -*-
# @Time    : 2024/10/17 11:05
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : stability.py

import logging

import numpy as np
import pandas as pd

from .gsp import FilterTaps, operator_from_spectrum, filter_matrix, lipschitz_bound
from .covariance import FeatureMatrix, CovarianceGraph, sample_covariance, subsample_index
from .vnn import VnnConfig, VnnModel, forward, normalize_taps
from .utils import parallel_map, derive_rng, derive_seed
from .utils.errors import DimensionError, InvalidSubsample, ConfigError

logger = logging.getLogger(__name__)

NEAR_DEGENERATE_RATIO = 1.02
RESAMPLES = 20


def _decay(start, count):
    return start * 0.7 ** np.arange(count) if count > 0 else np.zeros(0)


def near_degenerate_spectrum(m=20):
    """phi_1 = 1, phi_2 = 0.6, phi_3 = phi_2 / 1.02, geometric tail"""
    if m < 4:
        raise DimensionError(f'need M >= 4, got {m}')
    return np.concatenate([[1.0, 0.6, 0.6 / NEAR_DEGENERATE_RATIO], _decay(0.3, m - 3)])


def separated_spectrum(m=20):
    """phi_1 = 1, phi_2 = 0.6, phi_3 = 0.3, geometric tail from 0.15"""
    if m < 4:
        raise DimensionError(f'need M >= 4, got {m}')
    return np.concatenate([[1.0, 0.6, 0.3], _decay(0.15, m - 3)])


def ensemble_covariance(eigvals, seed=0, second_direction=None):
    """
    C = V diag(phi) V^T with a seeded orthonormal V

    :param eigvals: array-like, the spectrum phi (non-negative)
    :param seed: int
    :param second_direction: array-like, optional vector the second eigenvector is built from
    :return: CovarianceGraph
    """
    eigvals = np.asarray(eigvals, dtype=float)
    if eigvals.ndim != 1 or len(eigvals) < 2 or np.any(eigvals < 0):
        raise DimensionError('ensemble spectrum must be a non-negative vector of length >= 2')
    m = len(eigvals)
    z = derive_rng(seed, 'ensemble').standard_normal((m, m))
    order = np.argsort(-eigvals, kind='stable')
    if second_direction is not None:
        z[:, 1] = np.asarray(second_direction, dtype=float) + 0.1 * z[:, 1]
    q, r = np.linalg.qr(z)
    q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
    v = np.empty_like(q)
    v[:, order] = q
    return CovarianceGraph(None, 0, operator=operator_from_spectrum(eigvals, v))


def trial_covariance(cov, n, seed, trial):
    """Sample covariance of n Gaussian draws with covariance cov, stream (seed, n, trial)"""
    rng = derive_rng(seed, n, trial)
    factor = cov.eigvecs * np.sqrt(np.maximum(cov.eigvals, 0.0))
    samples = rng.standard_normal((n, cov.size)) @ factor.T
    c = np.cov(samples, rowvar=False, ddof=1)
    return CovarianceGraph((c + c.T) / 2.0, n)


def operator_norm(a):
    """Spectral norm of a symmetric matrix (or a stack of them)"""
    return np.max(np.abs(np.linalg.eigvalsh(a)), axis=-1)


class StabilityReport(object):
    def __init__(self, experiment, ns, values, config):
        """
        :param experiment: str, 'filter' or 'vnn'
        :param ns: list of sample sizes, strictly increasing
        :param values: dict, metric -> array of shape (len(ns), trials)
        :param config: dict, echo of the sweep settings
        """
        self.experiment = experiment
        self.ns = list(ns)
        self.values = values
        self.config = config

    def __repr__(self):
        return f"StabilityReport(experiment={self.experiment!r}, ns={self.ns})"

    @property
    def metric(self):
        return 'filter_deviation' if self.experiment == 'filter' else 'vnn_deviation'

    def medians(self, metric=None):
        return np.median(self.values[metric or self.metric], axis=1)

    def iqr(self, metric=None):
        q25, q75 = np.percentile(self.values[metric or self.metric], [25, 75], axis=1)
        return q75 - q25

    def slope(self, metric=None):
        """Least-squares slope of log median deviation against log n, nan when a median is 0"""
        medians = self.medians(metric)
        if np.any(medians <= 0):
            return float('nan')
        return float(np.polyfit(np.log(self.ns), np.log(medians), 1)[0])

    def envelope_rate(self):
        """Share of trials whose deviation stays inside the envelope (vnn sweeps only)"""
        return float(np.mean(self.values['within_envelope'])) if 'within_envelope' in self.values else float('nan')

    def to_dict(self):
        rows = []
        for i, n in enumerate(self.ns):
            row = {'n': n}
            for metric in sorted(self.values):
                row[f'{metric}_median'] = float(np.median(self.values[metric][i]))
            row['iqr'] = float(self.iqr()[i])
            rows.append(row)
        return {'experiment': self.experiment, 'ns': self.ns, 'slope': self.slope(), 'summary': rows,
                'envelope_rate': self.envelope_rate(), 'config': self.config}

    def to_frame(self):
        rows = [{'experiment': self.experiment, 'n': n, 'trial': t, 'metric': metric,
                 'value': float(self.values[metric][i][t])}
                for metric in sorted(self.values) for i, n in enumerate(self.ns)
                for t in range(self.values[metric].shape[1])]
        return pd.DataFrame(rows, columns=['experiment', 'n', 'trial', 'metric', 'value'])


def _check_ns(ns, trials):
    ns = [int(n) for n in ns]
    if not ns or ns[0] < 2 or any(b <= a for a, b in zip(ns, ns[1:])):
        raise InvalidSubsample(f'sample sizes must be >= 2 and strictly increasing, got {ns}')
    if trials < 1:
        raise ConfigError(f'trials must be >= 1, got {trials}')
    return ns


def filter_stability_sweep(cov, h, ns, trials=20, seed=0, threads=None):
    """
    Operator-norm deviation ||H(C_n) - H(C)|| of a polynomial filter over sample sizes n

    :param cov: CovarianceGraph, the ensemble covariance C
    :param h: FilterTaps or array-like of taps
    :param ns: list of ints, strictly increasing sample sizes
    :param trials: int, independent draws per n
    :param seed: int
    :return: StabilityReport
    """
    h = h if isinstance(h, FilterTaps) else FilterTaps(h)
    ns = _check_ns(ns, trials)
    lipschitz = lipschitz_bound(h, (0.0, 2.0 * float(cov.eigvals[0])))
    reference = filter_matrix(cov.operator, h)

    def one(job):
        n, t = job
        return float(operator_norm(filter_matrix(trial_covariance(cov, n, seed, t).operator, h) - reference))

    jobs = [(n, t) for n in ns for t in range(trials)]
    deviations = np.array(parallel_map(one, jobs, threads)).reshape(len(ns), trials)
    for n, row in zip(ns, deviations):
        logger.info('filter sweep n=%d: median deviation %.4g', n, float(np.median(row)))
    config = {'taps': h.taps.tolist(), 'trials': trials, 'seed': seed, 'dimension': cov.size,
              'lipschitz': lipschitz}
    return StabilityReport('filter', ns, {'filter_deviation': deviations}, config)


def _filter_bank(taps, matrix):
    """H_fg(C) for every filter of a layer, shape (F_out, F_in, M, M)"""
    powers = [np.eye(matrix.shape[0])]
    for _ in range(taps.shape[2] - 1):
        powers.append(matrix @ powers[-1])
    return np.tensordot(taps, np.stack(powers), axes=([2], [0]))


def _channel_deviation(a, b):
    """Largest per-channel l2 deviation, per subject: inputs of shape (B, M, F)"""
    return np.max(np.linalg.norm(a - b, axis=1), axis=1)


def vnn_stability_sweep(model, cov, ns, trials=20, seed=0, signals=None, n_signals=8, normalize=True, threads=None):
    """
    Deviation of the VNN representation when C is replaced by a sample covariance C_n

    Every trial is checked against L F^(L-1) alpha_n B, with alpha_n the largest filter
    deviation ||H_fg(C_n) - H_fg(C)|| and B the largest channel norm on the unperturbed path.

    :param model: VnnModel
    :param cov: CovarianceGraph, the ensemble covariance C
    :param ns: list of ints, strictly increasing sample sizes
    :param trials: int
    :param seed: int
    :param signals: array-like, B x M reference signals, default draws n_signals from N(0, C)
    :param normalize: bool, rescale taps so |h| <= 1 and Lipschitz <= 1 on the spectra, default is True
    :return: StabilityReport
    """
    ns = _check_ns(ns, trials)
    if signals is None:
        factor = cov.eigvecs * np.sqrt(np.maximum(cov.eigvals, 0.0))
        signals = derive_rng(seed, 'signals').standard_normal((n_signals, cov.size)) @ factor.T
    signals = np.atleast_2d(np.asarray(signals, dtype=float))
    jobs = [(n, t) for n in ns for t in range(trials)]
    perturbed = parallel_map(lambda job: trial_covariance(cov, job[0], seed, job[1]), jobs, threads)
    if normalize:
        upper = max(float(cov.eigvals[0]), max(float(c.eigvals[0]) for c in perturbed))
        model = normalize_taps(model, (0.0, upper))
    layers = model.config.layers
    width = max(model.config.widths)
    reference = forward(model, cov, signals)
    bank = [_filter_bank(h, cov.matrix) for h in model.taps]
    inputs = np.max([np.max(np.linalg.norm(s[:, 0], axis=1), axis=1) for s in reference.shifted], axis=0)

    def one(c_hat):
        trace = forward(model, c_hat, signals)
        deviation = _channel_deviation(trace.representation, reference.representation)
        alpha = max(float(np.max(operator_norm(_filter_bank(h, c_hat.matrix) - ref)))
                    for h, ref in zip(model.taps, bank))
        envelope = layers * width ** (layers - 1) * alpha * inputs
        within = bool(np.all(deviation <= envelope * (1.0 + 1e-9) + 1e-12))
        return float(np.max(deviation)), alpha, float(np.max(envelope)), within

    results = np.array(parallel_map(one, perturbed, threads), dtype=float).reshape(len(ns), trials, 4)
    values = {'vnn_deviation': results[:, :, 0], 'alpha': results[:, :, 1], 'envelope': results[:, :, 2],
              'within_envelope': results[:, :, 3]}
    for i, n in enumerate(ns):
        logger.info('vnn sweep n=%d: median deviation %.4g, median envelope %.4g, inside %d/%d',
                    n, float(np.median(values['vnn_deviation'][i])), float(np.median(values['envelope'][i])),
                    int(values['within_envelope'][i].sum()), trials)
    config = {'model': model.config.to_dict(), 'trials': trials, 'seed': seed, 'dimension': cov.size,
              'signals': len(signals), 'normalized': bool(normalize)}
    return StabilityReport('vnn', ns, values, config)


class PcaContrastReport(object):
    def __init__(self, levels, pca_variance, vnn_variance, config):
        self.levels = list(levels)
        self.pca_variance = np.asarray(pca_variance, dtype=float)
        self.vnn_variance = np.asarray(vnn_variance, dtype=float)
        self.config = config

    def __repr__(self):
        return f"PcaContrastReport(levels={self.levels})"

    @property
    def ratio(self):
        with np.errstate(divide='ignore', invalid='ignore'):
            return np.where(self.vnn_variance > 0, self.pca_variance / np.where(self.vnn_variance > 0,
                                                                                self.vnn_variance, 1.0), np.nan)

    def to_dict(self):
        return {'levels': [{'keep': keep, 'pca_variance': float(p), 'vnn_variance': float(v), 'ratio': float(r)}
                           for keep, p, v, r in zip(self.levels, self.pca_variance, self.vnn_variance, self.ratio)],
                'config': self.config}

    def to_frame(self):
        rows = []
        for keep, p, v, r in zip(self.levels, self.pca_variance, self.vnn_variance, self.ratio):
            for metric, value in (('pca_variance', p), ('vnn_variance', v), ('variance_ratio', r)):
                rows.append({'experiment': 'pca_contrast', 'n': keep, 'trial': 0, 'metric': metric,
                             'value': float(value)})
        return pd.DataFrame(rows, columns=['experiment', 'n', 'trial', 'metric', 'value'])


def contrast_cohort(cov, n=200, seed=0, noise_sd=0.05):
    """
    Gaussian cohort with covariance cov; the target is 60 + 10 sqrt(M) mean(C x) plus noise,
    stored as the age column

    :return: FeatureMatrix
    """
    rng = derive_rng(seed, 'contrast')
    factor = cov.eigvecs * np.sqrt(np.maximum(cov.eigvals, 0.0))
    x = rng.standard_normal((n, cov.size)) @ factor.T
    y = 60.0 + 10.0 * np.sqrt(cov.size) * (x @ cov.matrix).mean(axis=1) + noise_sd * rng.standard_normal(n)
    return FeatureMatrix(x, y, ['HC'] * n, [f'{i:03d}' for i in range(cov.size)])


def fit_pca_regression(cov, data, rank):
    """Least squares of the target on [1, top-rank principal component scores]"""
    design = np.column_stack([np.ones(data.n_subjects), data.features @ cov.eigvecs[:, :rank]])
    beta, *_ = np.linalg.lstsq(design, data.ages, rcond=None)
    return beta


def fit_linear_vnn(cov, data, taps=2):
    """
    One-layer, one-channel VNN with a linear output fitted by least squares: the readout
    mean_j [sum_k h_k C^k x]_j + b is linear in (h, b)

    :return: VnnModel
    """
    features = [data.features]
    for _ in range(taps - 1):
        features.append(features[-1] @ cov.matrix)
    design = np.column_stack([np.ones(data.n_subjects)] + [f.mean(axis=1) for f in features])
    beta, *_ = np.linalg.lstsq(design, data.ages, rcond=None)
    config = VnnConfig([taps], [1, 1], 'relu', final_linear=True)
    return VnnModel(config, [beta[1:].reshape(1, 1, taps)], [beta[:1]])


def pca_contrast(data, rank, perturb_levels, seed=0, resamples=RESAMPLES, n_tracked=20, taps=2, threads=None):
    """
    Prediction variance of frozen PCA regression and a frozen VNN when the covariance is
    re-estimated from random subsets of the cohort

    Both models are fitted once on the full cohort; each resample recomputes the principal
    components (PCA) or the shift operator (VNN) and keeps the weights.

    :param data: FeatureMatrix, target in the age column
    :param rank: int, number of principal components (<= M)
    :param perturb_levels: list of keep-fractions in (0, 1]
    :param seed: int
    :param resamples: int, subsets per level, default is 20
    :param n_tracked: int, subjects whose predictions are tracked
    :return: PcaContrastReport
    """
    if not 1 <= rank <= data.n_regions:
        raise DimensionError(f'rank must lie in [1, {data.n_regions}], got {rank}')
    cov = sample_covariance(data)
    beta = fit_pca_regression(cov, data, rank)
    model = fit_linear_vnn(cov, data, taps)
    tracked = data.features[:n_tracked]
    pca_var, vnn_var = [], []
    for level_index, keep in enumerate(perturb_levels):
        if not 0 < keep <= 1:
            raise InvalidSubsample(f'keep-fraction must lie in (0, 1], got {keep}')
        size = max(2, int(round(keep * data.n_subjects)))

        def one(r):
            index = subsample_index(data.n_subjects, size, derive_seed(seed, 'pca', level_index, r))
            c_hat = sample_covariance(data.subset(index))
            pca = beta[0] + tracked @ c_hat.eigvecs[:, :rank] @ beta[1:]
            return pca, forward(model, c_hat, tracked).y_hats

        results = parallel_map(one, range(resamples), threads)
        pca_var.append(float(np.mean(np.var([p for p, _ in results], axis=0))))
        vnn_var.append(float(np.mean(np.var([v for _, v in results], axis=0))))
        logger.info('pca contrast keep=%.2f: PCA variance %.4g, VNN variance %.4g', keep, pca_var[-1], vnn_var[-1])
    config = {'rank': rank, 'resamples': resamples, 'seed': seed, 'tracked': len(tracked), 'taps': taps,
              'n': data.n_subjects, 'dimension': data.n_regions}
    return PcaContrastReport(perturb_levels, pca_var, vnn_var, config)


def contrast_design(spectrum='near_degenerate', m=20, n=200, seed=0):
    """Ensemble covariance whose second eigenvector leans on the all-ones direction, and its cohort"""
    eigvals = near_degenerate_spectrum(m) if spectrum == 'near_degenerate' else separated_spectrum(m)
    cov = ensemble_covariance(eigvals, seed, second_direction=np.ones(m))
    return cov, contrast_cohort(cov, n, seed)

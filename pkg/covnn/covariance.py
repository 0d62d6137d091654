# -*- coding: utf-8 -*-
# @Time    : 2024/10/9 09:40
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : covariance.py

import hashlib
import logging

import numpy as np

from .gsp import eigendecompose, SymmetricOperator
from .utils.errors import (InvalidMatrix, DimensionError, InsufficientSamples, InvalidThreshold,
                           DegenerateCovariance, InvalidSubsample)

logger = logging.getLogger(__name__)

PSD_TOL = 1e-8
EIG_METHOD = 'jacobi'


class FeatureMatrix(object):
    def __init__(self, features, ages, group, region_ids, subject_ids=None, scores=None):
        """
        Subjects x regions table of anatomical features

        :param features: array-like, n x M feature values (rows are subjects)
        :param ages: array-like, length n chronological ages in years
        :param group: array-like, length n group labels (e.g. 'HC', 'AD')
        :param region_ids: list, length M unique region identifiers
        :param subject_ids: list, length n unique subject identifiers, default is S0000, S0001, ...
        :param scores: array-like, optional length n clinical scores, default is None
        """
        features = np.asarray(features, dtype=float)
        region_ids = [str(r) for r in region_ids]
        if not region_ids:
            raise DimensionError('at least one region id is required')
        if features.ndim != 2:
            features = features.reshape(-1, len(region_ids))
        n, m = features.shape
        if m != len(region_ids) or m < 1:
            raise DimensionError(f'{m} feature columns but {len(region_ids)} region ids')
        if len(set(region_ids)) != m:
            raise InvalidMatrix('region ids must be unique')
        ages = np.asarray(ages, dtype=float).reshape(-1)
        group = np.asarray(group, dtype=object).reshape(-1)
        if subject_ids is None:
            subject_ids = [f'S{i:04d}' for i in range(n)]
        subject_ids = [str(s) for s in subject_ids]
        if not (len(ages) == len(group) == len(subject_ids) == n):
            raise DimensionError('ages, group and subject ids must have one entry per subject')
        if len(set(subject_ids)) != n:
            raise InvalidMatrix('subject ids must be unique')
        if not np.all(np.isfinite(features)) or not np.all(np.isfinite(ages)):
            raise InvalidMatrix('features and ages must be finite')
        if np.any(ages <= 0):
            raise InvalidMatrix('ages must be positive')
        if scores is not None:
            scores = np.asarray(scores, dtype=float).reshape(-1)
            if len(scores) != n or not np.all(np.isfinite(scores)):
                raise InvalidMatrix('scores must be finite, one per subject')
        self.features = features
        self.ages = ages
        self.group = group.astype(str).astype(object)
        self.region_ids = region_ids
        self.subject_ids = subject_ids
        self.scores = scores

    def __repr__(self):
        return f"FeatureMatrix(n={self.n_subjects}, M={self.n_regions})"

    def __len__(self):
        return self.n_subjects

    @property
    def n_subjects(self):
        return self.features.shape[0]

    @property
    def n_regions(self):
        return self.features.shape[1]

    def subset(self, index):
        """
        Select subjects by position

        :param index: array-like of ints or booleans
        :return: FeatureMatrix
        """
        index = np.asarray(index)
        if index.dtype == bool:
            index = np.flatnonzero(index)
        index = index.astype(int)
        return FeatureMatrix(self.features[index], self.ages[index], self.group[index], self.region_ids,
                             [self.subject_ids[i] for i in index],
                             None if self.scores is None else self.scores[index])

    def select_group(self, label):
        return self.subset(self.group == label)

    def zscore(self, mean=None, std=None):
        """
        Z-score every region, optionally with externally given mean/std (e.g. from a training cohort)

        :return: (FeatureMatrix, mean, std)
        """
        if mean is None:
            mean = self.features.mean(axis=0)
        if std is None:
            std = self.features.std(axis=0, ddof=1)
        std = np.where(std > 0, std, 1.0)
        scaled = FeatureMatrix((self.features - mean) / std, self.ages, self.group, self.region_ids,
                               self.subject_ids, self.scores)
        return scaled, mean, std


class CovarianceGraph(object):
    def __init__(self, matrix, n_samples, scale=1.0, operator=None, check_psd=True):
        """
        A covariance matrix used as graph shift operator

        :param matrix: array-like, M x M symmetric matrix
        :param n_samples: int, number of samples it was estimated from (0 for analytic ensembles)
        :param scale: float, spectral normalization applied so far
        :param operator: SymmetricOperator, precomputed decomposition, default is None
        :param check_psd: bool, reject eigenvalues below -1e-8 * phi_1, default is True
        """
        if operator is None:
            matrix = np.asarray(matrix, dtype=float)
            operator = eigendecompose((matrix + matrix.T) / 2.0, method=EIG_METHOD)
        eigvals = operator.eigvals
        top = max(float(np.max(np.abs(eigvals))), 0.0)
        if check_psd and eigvals[-1] < -PSD_TOL * max(top, 1e-300):
            raise InvalidMatrix(f'covariance is not PSD (smallest eigenvalue {eigvals[-1]:.3e})')
        if not check_psd and eigvals[-1] < -PSD_TOL * max(top, 1e-300):
            logger.warning('covariance is indefinite (smallest eigenvalue %.3e)', eigvals[-1])
        else:
            # round-off negatives clamped to 0
            clamped = np.where(eigvals < 0, 0.0, eigvals)
            if np.any(clamped != eigvals):
                operator = SymmetricOperator(operator.entries, clamped, operator.eigvecs)
        self.operator = operator
        self.n_samples = int(n_samples)
        self.scale = float(scale)

    def __repr__(self):
        return f"CovarianceGraph(M={self.size}, n={self.n_samples}, scale={self.scale:.6g})"

    def __len__(self):
        return self.size

    @property
    def size(self):
        return self.operator.size

    @property
    def matrix(self):
        return self.operator.entries

    @property
    def eigvals(self):
        return self.operator.eigvals

    @property
    def eigvecs(self):
        return self.operator.eigvecs

    def fingerprint(self):
        """
        Identify the matrix: dimension and SHA-256 of its float64 little-endian bytes

        :return: dict
        """
        data = np.ascontiguousarray(self.matrix, dtype='<f8').tobytes()
        return {'dimension': self.size, 'sha256': hashlib.sha256(data).hexdigest()}


def sample_covariance(data, zscore=False):
    """
    Unbiased sample covariance of the rows of a FeatureMatrix

    :param data: FeatureMatrix
    :param zscore: bool, z-score every region first (correlation matrix), default is False
    :return: CovarianceGraph
    """
    if data.n_subjects < 2:
        raise InsufficientSamples(f'need at least 2 subjects for a covariance, got {data.n_subjects}')
    features = data.zscore()[0].features if zscore else data.features
    c = np.cov(features, rowvar=False, ddof=1).reshape(data.n_regions, data.n_regions)
    return CovarianceGraph((c + c.T) / 2.0, data.n_subjects)


def sparsify(cov, mode='hard', tau=0.0):
    """
    Threshold the off-diagonal covariance entries

    :param cov: CovarianceGraph
    :param mode: str, 'hard' (zero |c| <= tau) or 'soft' (sign(c) * max(|c| - tau, 0))
    :param tau: float, non-negative threshold
    :return: CovarianceGraph, re-decomposed
    """
    if tau < 0 or not np.isfinite(tau):
        raise InvalidThreshold(f'threshold must be non-negative, got {tau}')
    c = np.array(cov.matrix)
    off = ~np.eye(cov.size, dtype=bool)
    if mode == 'hard':
        c[off & (np.abs(c) <= tau)] = 0.0
    elif mode == 'soft':
        c[off] = np.sign(c[off]) * np.maximum(np.abs(c[off]) - tau, 0.0)
    else:
        raise InvalidThreshold(f'unknown thresholding mode {mode!r}')
    kept = int(np.count_nonzero(c[off]))
    logger.info('%s thresholding at tau=%g keeps %d of %d off-diagonal entries', mode, tau, kept, int(off.sum()))
    return CovarianceGraph((c + c.T) / 2.0, cov.n_samples, cov.scale, check_psd=False)


def normalize_spectrum(cov):
    """
    Divide the covariance by its largest eigenvalue, eigenvectors are kept as they are

    :param cov: CovarianceGraph
    :return: CovarianceGraph with eigenvalues in [0, 1] and scale multiplied by phi_1
    """
    phi = float(cov.eigvals[0])
    if not phi > 0:
        raise DegenerateCovariance('largest eigenvalue is not positive, cannot normalize')
    op = SymmetricOperator(cov.matrix / phi, cov.eigvals / phi, cov.eigvecs)
    return CovarianceGraph(None, cov.n_samples, cov.scale * phi, operator=op, check_psd=False)


def perturb_by_subsampling(data, keep, seed):
    """
    Covariance of a seeded random subset of subjects, drawn without replacement

    :param data: FeatureMatrix
    :param keep: int, subset size, 2 <= keep <= n
    :param seed: int
    :return: CovarianceGraph
    """
    n = data.n_subjects
    if not 2 <= keep <= n:
        raise InvalidSubsample(f'keep must lie in [2, {n}], got {keep}')
    index = subsample_index(n, keep, seed)
    return sample_covariance(data.subset(index))


def subsample_index(n, keep, seed):
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=keep, replace=False))

# -*- coding: utf-8 -*-
# @Time    : 2024/10/14 09:55
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : synthcohort.py

import math
import logging
from dataclasses import dataclass, field, asdict

import numpy as np

from .covariance import FeatureMatrix
from .formats.cohort import read_cohort, write_cohort
from .utils import derive_seed
from .utils.errors import KernelError, ConfigError, DimensionError

logger = logging.getLogger(__name__)

REFERENCE_AGE = 60.0
SCORE_NOISE_SD = 0.5
PSD_TOL = 1e-8


@dataclass
class CortexSpec:
    """
    Continuous model of a cortex on [0, 1]

    kernel W(a, b) = sigma2 * exp(-|a - b|^2 / length_scale^2) + nugget * 1[a = b],
    baseline m(a) = baseline_mean + baseline_amplitude * sin(2 pi a) (mm),
    aging slope beta(a) = aging_slope + aging_amplitude * cos(2 pi a) (mm / year),
    noise_sd: independent measurement noise per region (mm).
    """
    sigma2: float = 0.0025
    length_scale: float = 0.15
    nugget: float = 1e-4
    baseline_mean: float = 2.5
    baseline_amplitude: float = 0.2
    aging_slope: float = -0.01
    aging_amplitude: float = 0.0
    noise_sd: float = 0.1

    def __post_init__(self):
        if self.sigma2 < 0 or self.nugget < 0 or self.noise_sd < 0 or self.length_scale <= 0:
            raise ConfigError('kernel variances and noise must be >= 0, length_scale > 0')
        low = self.baseline_mean - abs(self.baseline_amplitude)
        high = self.baseline_mean + abs(self.baseline_amplitude)
        if low < 1.0 or high > 5.0:
            raise ConfigError(f'baseline profile must stay within [1, 5] mm, got [{low}, {high}]')
        if self.aging_slope + abs(self.aging_amplitude) > 0:
            raise ConfigError('aging slope must be <= 0 everywhere on the cortex')

    def baseline(self, a):
        return self.baseline_mean + self.baseline_amplitude * np.sin(2 * np.pi * np.asarray(a, dtype=float))

    def slope(self, a):
        return self.aging_slope + self.aging_amplitude * np.cos(2 * np.pi * np.asarray(a, dtype=float))

    def smooth_kernel(self, a, b=None):
        a = np.asarray(a, dtype=float)
        b = a if b is None else np.asarray(b, dtype=float)
        return self.sigma2 * np.exp(-((a[:, None] - b[None, :]) / self.length_scale) ** 2)

    def kernel(self, a):
        """Grid kernel W(a_i, a_j) including the nugget on the diagonal"""
        return self.smooth_kernel(a) + self.nugget * np.eye(len(a))

    def to_dict(self):
        return asdict(self)


@dataclass
class DiseaseSpec:
    """
    Accelerated atrophy: excess_slope (mm / year, <= 0) inside the atrophy intervals,
    accumulated from onset_age on. score_slope drives a synthetic clinical score.
    """
    atrophy_regions: list = field(default_factory=lambda: [[0.4, 0.5]])
    excess_slope: float = -0.02
    onset_age: float = 55.0
    label: str = 'AD'
    score_slope: float = 0.1

    def __post_init__(self):
        self.atrophy_regions = [[float(lo), float(hi)] for lo, hi in self.atrophy_regions]
        if self.excess_slope > 0:
            raise ConfigError('excess atrophy slope must be <= 0')
        for lo, hi in self.atrophy_regions:
            if not 0.0 <= lo < hi <= 1.0:
                raise ConfigError(f'atrophy interval [{lo}, {hi}] must lie inside [0, 1]')

    def mask(self, a):
        a = np.asarray(a, dtype=float)
        inside = np.zeros(a.shape, dtype=bool)
        for lo, hi in self.atrophy_regions:
            inside |= (a >= lo) & (a < hi)
        return inside

    def years_affected(self, ages):
        return np.maximum(np.asarray(ages, dtype=float) - self.onset_age, 0.0)

    def to_dict(self):
        return asdict(self)


def default_cortex():
    return CortexSpec()


def default_disease():
    return DiseaseSpec()


def mild_disease():
    """MCI-like cohort: same regions, half the excess atrophy"""
    base = DiseaseSpec()
    return DiseaseSpec(base.atrophy_regions, base.excess_slope / 2.0, base.onset_age, 'MCI', base.score_slope / 2.0)


def region_centers(m):
    """Centers of M equal-width cells of [0, 1]"""
    return (np.arange(m) + 0.5) / m


def region_ids(m):
    width = max(3, len(str(m - 1)))
    return [f'{i:0{width}d}' for i in range(m)]


def kernel_factor(kernel, tol=PSD_TOL):
    """
    Square-root factor F with F F^T = kernel, eigenvalues down to -tol * lambda_max clamped to 0

    Singular PSD kernels (no nugget, no noise) are fine; anything more negative raises KernelError.
    """
    eigvals, eigvecs = np.linalg.eigh(np.asarray(kernel, dtype=float))
    if eigvals[0] < -tol * max(eigvals[-1], 0.0):
        raise KernelError(f'grid kernel is not PSD, smallest eigenvalue {eigvals[0]:.3g}')
    return eigvecs * np.sqrt(np.maximum(eigvals, 0.0))


def _scores(rng, disease, ages):
    noise = SCORE_NOISE_SD * np.abs(rng.standard_normal(len(ages)))
    if disease is None:
        return noise
    return disease.score_slope * disease.years_affected(ages) + noise


def sample_cohort(spec, disease=None, m=50, n=100, age_range=(50.0, 90.0), seed=0, group=None,
                  id_prefix=None, scores=False):
    """
    Draw a cohort on M equal-width regions

    x_i = m(a) + (y - 60) beta(a) + disease term + N(0, W(a_i, a_j) + noise_sd^2 I)

    :param spec: CortexSpec
    :param disease: DiseaseSpec or None for a healthy cohort
    :param m: int, number of regions (>= 2)
    :param n: int, number of subjects (>= 2)
    :param age_range: (low, high) ages drawn uniformly
    :param seed: int
    :param group: str, group label, default is the disease label or 'HC'
    :param id_prefix: str, subject id prefix, default is '<group>-'
    :param scores: bool, attach a synthetic clinical score, default is False
    :return: FeatureMatrix
    """
    if m < 2 or n < 2:
        raise DimensionError(f'need M >= 2 and n >= 2, got M={m}, n={n}')
    low, high = age_range
    if not 0 < low <= high:
        raise ConfigError(f'invalid age range {age_range}')
    rng = np.random.default_rng(seed)
    a = region_centers(m)
    ages = rng.uniform(low, high, size=n)
    features = spec.baseline(a)[None, :] + (ages - REFERENCE_AGE)[:, None] * spec.slope(a)[None, :]
    if disease is not None:
        features = features + disease.excess_slope * np.outer(disease.years_affected(ages), disease.mask(a))
    cov = spec.kernel(a) + spec.noise_sd ** 2 * np.eye(m)
    if np.any(cov != 0):
        features = features + rng.standard_normal((n, m)) @ kernel_factor(cov).T
    group = group or (disease.label if disease is not None else 'HC')
    prefix = f'{group}-' if id_prefix is None else id_prefix
    subject_scores = _scores(rng, disease, ages) if scores else None
    logger.debug('sampled %s cohort: n=%d, M=%d, seed=%d', group, n, m, seed)
    return FeatureMatrix(features, ages, [group] * n, region_ids(m), [f'{prefix}{i:04d}' for i in range(n)],
                         subject_scores)


def _lcm(values):
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out


def sample_multiscale_cohort(spec, disease=None, dims=(50, 100, 200), n=100, age_range=(50.0, 90.0), seed=0,
                             group=None, id_prefix=None, measurement_noise=False):
    """
    The same subjects observed at several resolutions

    Every subject gets one continuous profile on a fine grid (the lcm of dims) drawn from the
    smooth part of the kernel; region values at resolution M are cell averages of that profile.

    :param dims: list of ints, the resolutions M
    :param measurement_noise: bool, add independent noise_sd per region at each resolution, default is False
    :return: dict, M -> FeatureMatrix (same subject ids and ages at every M)
    """
    dims = sorted(set(int(d) for d in dims))
    if not dims or dims[0] < 2 or n < 2:
        raise DimensionError(f'need every M >= 2 and n >= 2, got dims={dims}, n={n}')
    fine = _lcm(dims)
    if fine > 20000:
        raise DimensionError(f'resolutions {dims} need a {fine}-cell fine grid, pick nested dims')
    rng = np.random.default_rng(seed)
    b = region_centers(fine)
    ages = rng.uniform(age_range[0], age_range[1], size=n)
    profile = spec.baseline(b)[None, :] + (ages - REFERENCE_AGE)[:, None] * spec.slope(b)[None, :]
    if disease is not None:
        profile = profile + disease.excess_slope * np.outer(disease.years_affected(ages), disease.mask(b))
    if spec.sigma2 > 0:
        profile = profile + rng.standard_normal((n, fine)) @ kernel_factor(spec.smooth_kernel(b)).T
    group = group or (disease.label if disease is not None else 'HC')
    prefix = f'{group}-' if id_prefix is None else id_prefix
    ids = [f'{prefix}{i:04d}' for i in range(n)]
    cohorts = {}
    for m in dims:
        features = profile.reshape(n, m, fine // m).mean(axis=2)
        if measurement_noise and spec.noise_sd > 0:
            features = features + spec.noise_sd * rng.standard_normal((n, m))
        cohorts[m] = FeatureMatrix(features, ages, [group] * n, region_ids(m), ids)
    return cohorts


def default_protocol(seed=0, m=50, n_train=500, n_test=100, spec=None, disease=None, age_range=(50.0, 90.0),
                     scores=True):
    """
    Healthy training cohort, healthy test cohort and disease test cohort, all seeded from one seed

    :return: dict with 'spec', 'disease', 'train', 'test_hc', 'test_dis'
    """
    spec = spec or default_cortex()
    disease = disease or default_disease()
    return {
        'spec': spec,
        'disease': disease,
        'train': sample_cohort(spec, None, m, n_train, age_range, derive_seed(seed, 'train'),
                               id_prefix='HC-TR-', scores=scores),
        'test_hc': sample_cohort(spec, None, m, n_test, age_range, derive_seed(seed, 'test_hc'),
                                 id_prefix='HC-TE-', scores=scores),
        'test_dis': sample_cohort(spec, disease, m, n_test, age_range, derive_seed(seed, 'test_dis'),
                                  scores=scores),
    }


def export_csv(data, path):
    """Write a cohort in the covnn CSV schema (see covnn.formats.cohort)"""
    return write_cohort(data, path)


def read_csv(path):
    """Read a cohort CSV back into a FeatureMatrix"""
    return read_cohort(path)

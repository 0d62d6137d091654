# -*- coding: utf-8 -*-
# @Time    : 2024/10/19 09:30
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : conftest.py

import numpy as np
import pytest

from covnn.covariance import sample_covariance, normalize_spectrum
from covnn.synthcohort import CortexSpec, default_disease, sample_cohort
from covnn.vnn import VnnConfig, init


@pytest.fixture
def rng():
    return np.random.default_rng(20241019)


@pytest.fixture
def small_config():
    return VnnConfig(taps_per_layer=[2, 3], widths=[1, 4, 3])


@pytest.fixture
def small_cohort():
    return sample_cohort(CortexSpec(), None, m=12, n=60, seed=1, scores=True)


@pytest.fixture
def disease_cohort():
    return sample_cohort(CortexSpec(), default_disease(), m=12, n=40, seed=2, scores=True)


@pytest.fixture
def small_cov(small_cohort):
    return normalize_spectrum(sample_covariance(small_cohort))


@pytest.fixture
def small_model(small_config, small_cohort):
    model = init(small_config, seed=7)
    model.input_offset = float(small_cohort.features.mean())
    model.biases[-1][:] = float(small_cohort.ages.mean())
    return model


def random_symmetric(rng, m, scale=1.0):
    a = rng.standard_normal((m, m))
    return scale * (a + a.T) / 2.0

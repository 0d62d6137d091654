# -*- coding: utf-8 -*-
# @Time    : 2024/10/19 14:05
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : test_synthcohort.py

import numpy as np
import pytest
from scipy import stats

from covnn.synthcohort import (CortexSpec, DiseaseSpec, default_disease, mild_disease, region_centers, region_ids,
                               sample_cohort, sample_multiscale_cohort, default_protocol, export_csv, read_csv,
                               kernel_factor)
from covnn.utils.errors import ConfigError, DimensionError, KernelError


def _noise_free():
    return CortexSpec(sigma2=0.0, nugget=0.0, noise_sd=0.0)


class TestSpecs:
    def test_invalid_cortex(self):
        with pytest.raises(ConfigError):
            CortexSpec(baseline_mean=0.5)
        with pytest.raises(ConfigError):
            CortexSpec(aging_slope=0.01)
        with pytest.raises(ConfigError):
            CortexSpec(length_scale=0.0)

    def test_invalid_disease(self):
        with pytest.raises(ConfigError):
            DiseaseSpec(excess_slope=0.1)
        with pytest.raises(ConfigError):
            DiseaseSpec(atrophy_regions=[[0.6, 0.4]])

    def test_mild_disease_halves_excess(self):
        assert mild_disease().excess_slope == default_disease().excess_slope / 2
        assert mild_disease().label == 'MCI'

    def test_grid(self):
        np.testing.assert_allclose(region_centers(4), [0.125, 0.375, 0.625, 0.875])
        assert region_ids(5) == ['000', '001', '002', '003', '004']
        assert region_ids(2000)[-1] == '1999'


class TestSample:
    def test_shapes_and_labels(self):
        data = sample_cohort(CortexSpec(), default_disease(), m=20, n=15, seed=3, scores=True)
        assert (data.n_subjects, data.n_regions) == (15, 20)
        assert set(data.group) == {'AD'}
        assert data.subject_ids[0] == 'AD-0000'
        assert np.all((data.ages >= 50) & (data.ages <= 90))
        assert np.all(data.scores >= 0)

    def test_seeded(self):
        a = sample_cohort(CortexSpec(), None, m=10, n=5, seed=8)
        b = sample_cohort(CortexSpec(), None, m=10, n=5, seed=8)
        np.testing.assert_array_equal(a.features, b.features)

    def test_noise_free_disease_difference(self):
        disease = DiseaseSpec(atrophy_regions=[[0.4, 0.5]], excess_slope=-0.02, onset_age=55.0)
        hc = sample_cohort(_noise_free(), None, m=20, n=10, seed=4)
        dis = sample_cohort(_noise_free(), disease, m=20, n=10, seed=4)
        np.testing.assert_array_equal(hc.ages, dis.ages)
        diff = dis.features - hc.features
        expected = -0.02 * np.maximum(hc.ages - 55.0, 0.0)
        np.testing.assert_allclose(diff[:, 8], expected, atol=1e-12)
        np.testing.assert_allclose(diff[:, 9], expected, atol=1e-12)
        np.testing.assert_allclose(np.delete(diff, [8, 9], axis=1), 0.0, atol=1e-12)

    def test_noise_free_aging(self):
        data = sample_cohort(_noise_free(), None, m=8, n=6, seed=1)
        a = region_centers(8)
        expected = 2.5 + 0.2 * np.sin(2 * np.pi * a)[None, :] - 0.01 * (data.ages[:, None] - 60.0)
        np.testing.assert_allclose(data.features, expected, atol=1e-12)

    def test_singular_kernel_is_accepted(self):
        spec = CortexSpec(sigma2=1.0, length_scale=0.5, nugget=0.0, noise_sd=0.0)
        data = sample_cohort(spec, None, m=200, n=3, seed=0)
        assert np.all(np.isfinite(data.features))
        data = sample_cohort(CortexSpec(nugget=0.0, noise_sd=0.0), None, m=50, n=5, seed=0)
        assert data.n_regions == 50

    def test_kernel_factor(self, rng):
        a = rng.standard_normal((6, 3))
        kernel = a @ a.T
        factor = kernel_factor(kernel)
        np.testing.assert_allclose(factor @ factor.T, kernel, atol=1e-10)
        with pytest.raises(KernelError):
            kernel_factor([[1.0, 2.0], [2.0, 1.0]])

    def test_mean_thickness_falls_with_age(self):
        data = sample_cohort(CortexSpec(), None, m=50, n=500, seed=9)
        assert np.corrcoef(data.features.mean(axis=1), data.ages)[0, 1] < -0.9

    def test_atrophy_regions_are_thinner(self):
        disease = default_disease()
        hc = sample_cohort(CortexSpec(), None, m=50, n=200, seed=21)
        dis = sample_cohort(CortexSpec(), disease, m=50, n=200, seed=22)
        mask = disease.mask(region_centers(50))
        assert mask.sum() == 5
        test = stats.ttest_ind(dis.features[:, mask].mean(axis=1), hc.features[:, mask].mean(axis=1),
                               alternative='less')
        assert test.pvalue < 0.01

    def test_too_small(self):
        with pytest.raises(DimensionError):
            sample_cohort(CortexSpec(), None, m=1, n=10)


class TestMultiscale:
    def test_cell_averages_are_consistent(self):
        cohorts = sample_multiscale_cohort(CortexSpec(), None, dims=(10, 20, 40), n=7, seed=5)
        assert sorted(cohorts) == [10, 20, 40]
        fine, coarse = cohorts[40].features, cohorts[10].features
        np.testing.assert_allclose(fine.reshape(7, 10, 4).mean(axis=2), coarse, atol=1e-12)
        np.testing.assert_allclose(cohorts[20].features.reshape(7, 10, 2).mean(axis=2), coarse, atol=1e-12)
        assert cohorts[10].subject_ids == cohorts[40].subject_ids
        np.testing.assert_array_equal(cohorts[10].ages, cohorts[40].ages)

    def test_grid_too_fine(self):
        with pytest.raises(DimensionError):
            sample_multiscale_cohort(CortexSpec(), None, dims=(997, 991), n=3)


class TestProtocol:
    def test_cohorts(self):
        protocol = default_protocol(seed=1, m=10, n_train=30, n_test=12)
        assert protocol['train'].n_subjects == 30
        assert protocol['test_hc'].n_subjects == 12
        assert set(protocol['test_dis'].group) == {'AD'}
        train_ids, test_ids = set(protocol['train'].subject_ids), set(protocol['test_hc'].subject_ids)
        assert train_ids.isdisjoint(test_ids)

    def test_seeded(self):
        a = default_protocol(seed=1, m=10, n_train=20, n_test=5)
        b = default_protocol(seed=1, m=10, n_train=20, n_test=5)
        np.testing.assert_array_equal(a['test_dis'].features, b['test_dis'].features)


def test_csv_roundtrip(tmp_path):
    data = sample_cohort(CortexSpec(), default_disease(), m=6, n=4, seed=2, scores=True)
    path = export_csv(data, tmp_path / 'ad.csv')
    again = read_csv(path)
    np.testing.assert_array_equal(again.features, data.features)
    assert list(again.group) == ['AD'] * 4

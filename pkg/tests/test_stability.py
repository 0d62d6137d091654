# -*- coding: utf-8 -*-
# @Time    : 2024/10/19 16:00
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : test_stability.py

import numpy as np
import pytest

from covnn.stability import (near_degenerate_spectrum, separated_spectrum, ensemble_covariance, trial_covariance,
                             operator_norm, filter_stability_sweep, vnn_stability_sweep, contrast_design,
                             contrast_cohort, fit_linear_vnn, fit_pca_regression, pca_contrast)
from covnn.covariance import sample_covariance
from covnn.gsp import FilterTaps, lipschitz_bound
from covnn.vnn import VnnConfig, VnnModel, init, forward
from covnn.utils.errors import DimensionError, InvalidSubsample, ConfigError


@pytest.fixture
def ensemble():
    return ensemble_covariance(separated_spectrum(12), seed=3)


class TestEnsemble:
    def test_spectra(self):
        near = near_degenerate_spectrum(6)
        np.testing.assert_allclose(near[:3], [1.0, 0.6, 0.6 / 1.02])
        np.testing.assert_allclose(near[3:], [0.3, 0.21, 0.147])
        np.testing.assert_allclose(separated_spectrum(5), [1.0, 0.6, 0.3, 0.15, 0.105])
        with pytest.raises(DimensionError):
            separated_spectrum(3)

    def test_covariance_has_the_spectrum(self, ensemble):
        np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(ensemble.matrix))[::-1], separated_spectrum(12),
                                   atol=1e-12)
        np.testing.assert_allclose(ensemble.eigvecs.T @ ensemble.eigvecs, np.eye(12), atol=1e-12)

    def test_second_direction(self):
        cov = ensemble_covariance(separated_spectrum(20), seed=0, second_direction=np.ones(20))
        v2 = cov.eigvecs[:, 1]
        assert abs(v2 @ np.ones(20)) / np.sqrt(20) > 0.7

    def test_trial_covariance_is_seeded(self, ensemble):
        a, b = trial_covariance(ensemble, 50, 1, 0), trial_covariance(ensemble, 50, 1, 0)
        c = trial_covariance(ensemble, 50, 1, 1)
        np.testing.assert_array_equal(a.matrix, b.matrix)
        assert not np.array_equal(a.matrix, c.matrix)
        assert a.n_samples == 50

    def test_operator_norm(self, rng):
        a = rng.standard_normal((5, 5))
        a = a + a.T
        assert operator_norm(a) == pytest.approx(np.linalg.norm(a, 2))


class TestFilterSweep:
    def test_constant_filter_does_not_move(self, ensemble):
        report = filter_stability_sweep(ensemble, [0.5], [20, 80], trials=3, seed=0)
        np.testing.assert_array_equal(report.values['filter_deviation'], 0.0)
        assert np.isnan(report.slope())

    def test_identity_filter_is_covariance_error(self, ensemble):
        report = filter_stability_sweep(ensemble, [0.0, 1.0], [30], trials=2, seed=4)
        expected = np.linalg.norm(trial_covariance(ensemble, 30, 4, 1).matrix - ensemble.matrix, 2)
        assert report.values['filter_deviation'][0, 1] == pytest.approx(expected, rel=1e-9)

    def test_invalid_sizes(self, ensemble):
        with pytest.raises(InvalidSubsample):
            filter_stability_sweep(ensemble, [0.1, 0.4], [100, 50])
        with pytest.raises(InvalidSubsample):
            filter_stability_sweep(ensemble, [0.1, 0.4], [1, 50])
        with pytest.raises(ConfigError):
            filter_stability_sweep(ensemble, [0.1, 0.4], [50], trials=0)

    def test_report_tables(self, ensemble):
        report = filter_stability_sweep(ensemble, [0.1, 0.4, 0.1], [20, 40], trials=3, seed=0)
        frame = report.to_frame()
        assert len(frame) == 6
        assert list(frame.columns) == ['experiment', 'n', 'trial', 'metric', 'value']
        doc = report.to_dict()
        assert [row['n'] for row in doc['summary']] == [20, 40]

    def test_report_carries_lipschitz_constant(self, ensemble):
        taps = [0.1, 0.4, 0.1]
        report = filter_stability_sweep(ensemble, taps, [20], trials=2, seed=0)
        expected = lipschitz_bound(FilterTaps(taps), (0.0, 2.0 * float(ensemble.eigvals[0])))
        assert report.to_dict()['config']['lipschitz'] == pytest.approx(expected)

    @pytest.mark.slow
    def test_deviation_shrinks_like_inverse_sqrt_n(self):
        cov = ensemble_covariance(separated_spectrum(20), seed=0)
        report = filter_stability_sweep(cov, [0.1, 0.4, 0.1], [100, 400, 1600, 6400], trials=20, seed=0)
        assert report.slope() <= -0.35
        assert np.all(np.diff(report.medians()) < 0)


class TestVnnSweep:
    def test_zero_taps_do_not_move(self, ensemble):
        config = VnnConfig([2, 2], [1, 3, 2])
        model = VnnModel(config, [np.zeros((3, 1, 2)), np.zeros((2, 3, 2))], [np.ones(3), np.ones(2)])
        report = vnn_stability_sweep(model, ensemble, [20, 80], trials=2, seed=0)
        np.testing.assert_array_equal(report.values['vnn_deviation'], 0.0)
        assert report.envelope_rate() == 1.0

    def test_single_channel_alpha_is_filter_deviation(self, ensemble):
        model = VnnModel(VnnConfig([2], [1, 1]), [np.array([[[0.1, 0.4]]])], [np.zeros(1)])
        vnn = vnn_stability_sweep(model, ensemble, [20, 80], trials=3, seed=6, normalize=False)
        filt = filter_stability_sweep(ensemble, [0.1, 0.4], [20, 80], trials=3, seed=6)
        np.testing.assert_allclose(vnn.values['alpha'], filt.values['filter_deviation'], rtol=1e-9)

    def test_envelope_holds(self, ensemble):
        model = init(VnnConfig([2, 3], [1, 4, 3]), seed=2)
        report = vnn_stability_sweep(model, ensemble, [30, 120, 480], trials=5, seed=1)
        assert report.envelope_rate() >= 0.95
        assert np.all(report.values['vnn_deviation'] <= report.values['envelope'] * (1 + 1e-9) + 1e-12)
        assert report.config['normalized'] is True


class TestPcaContrast:
    def test_linear_vnn_fit(self):
        cov, data = contrast_design('separated', m=10, n=150, seed=0)
        model = fit_linear_vnn(cov, data, taps=2)
        predicted = forward(model, cov, data.features).y_hats
        assert np.mean(np.abs(predicted - data.ages)) < 0.1
        assert model.taps[0][0, 0, 1] == pytest.approx(10.0 * np.sqrt(10), rel=0.1)
        assert model.biases[0][0] == pytest.approx(60.0, abs=0.5)

    def test_linear_vnn_residual_is_orthogonal(self):
        _, data = contrast_design('separated', m=10, n=150, seed=0)
        c = sample_covariance(data)
        model = fit_linear_vnn(c, data, taps=3)
        residual = forward(model, c, data.features).y_hats - data.ages
        assert abs(residual.mean()) < 1e-8
        assert abs(residual @ data.features.mean(axis=1)) < 1e-6
        beta = fit_pca_regression(c, data, 3)
        assert beta.shape == (4,)

    def test_contrast_cohort_is_seeded(self, ensemble):
        a, b = contrast_cohort(ensemble, n=10, seed=1), contrast_cohort(ensemble, n=10, seed=1)
        np.testing.assert_array_equal(a.ages, b.ages)

    def test_full_cohort_has_no_variance(self):
        _, data = contrast_design('separated', m=8, n=60, seed=0)
        report = pca_contrast(data, 2, [1.0], seed=0, resamples=2)
        assert report.pca_variance[0] == 0.0
        assert report.vnn_variance[0] == 0.0
        assert np.isnan(report.ratio[0])

    def test_invalid(self):
        _, data = contrast_design('separated', m=8, n=60, seed=0)
        with pytest.raises(DimensionError):
            pca_contrast(data, 9, [0.9])
        with pytest.raises(InvalidSubsample):
            pca_contrast(data, 2, [1.5])

    @pytest.mark.slow
    def test_near_degenerate_spectrum_hurts_pca(self):
        near, control = [], []
        for seed in range(20):
            _, data = contrast_design('near_degenerate', seed=seed)
            near.append(pca_contrast(data, 3, [0.9, 0.8], seed=seed).ratio)
            _, data = contrast_design('separated', seed=seed)
            control.append(pca_contrast(data, 3, [0.9, 0.8], seed=seed).ratio)
        near_ratio = np.median(np.array(near), axis=0)
        control_ratio = np.median(np.array(control), axis=0)
        assert np.all(near_ratio > 3.0)
        assert np.all(control_ratio < near_ratio)
        assert np.all((control_ratio >= 0.5) & (control_ratio <= 2.0))

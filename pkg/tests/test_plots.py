# -*- coding: utf-8 -*-
# @Time    : 2024/10/19 18:40
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : test_plots.py

import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt
import pytest

from covnn.brainage import AgeBiasModel, build_report, compare_reports
from covnn.plots.brainage import plot_delta_age, plot_alignment, plot_region_stats


@pytest.fixture
def reports(small_model, small_cov, small_cohort, disease_cohort):
    bias = AgeBiasModel(0.0, 0.0, 3)
    hc = build_report(small_model, small_cov, bias, small_cohort, top_k=4, cohort='HC')
    dis = build_report(small_model, small_cov, bias, disease_cohort, top_k=4, cohort='AD')
    return hc, dis


def test_plot_delta_age(reports):
    fig, ax = plt.subplots()
    assert plot_delta_age(ax, list(reports)) is ax
    assert [t.get_text() for t in ax.get_xticklabels()] == ['HC', 'AD']
    plt.close(fig)


def test_plot_alignment(reports):
    fig, ax = plt.subplots()
    plot_alignment(ax, reports[0], top_k=3)
    assert len(ax.patches) == 3
    assert ax.get_title() == 'HC'
    plt.close(fig)


def test_plot_region_stats(reports):
    residual_stats, _ = compare_reports(*reports)
    fig, ax = plt.subplots()
    plot_region_stats(ax, residual_stats)
    assert len(ax.patches) == 12
    assert ax.get_title().startswith('AD vs HC')
    plt.close(fig)


def test_missing_axes(reports):
    with pytest.raises(ValueError):
        plot_delta_age(None, list(reports))

# -*- coding: utf-8 -*-
# @Time    : 2024/10/18 16:25
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : brainage.py

import numpy as np
from matplotlib import axes, patches, lines


def _check_ax(ax):
    if ax is None:
        raise ValueError("ax is None")


def _style(ax, grid_axis='y'):
    ax.spines[["top", "right"]].set_visible(False)
    getattr(ax, f'{grid_axis}axis').grid(True, linestyle='--', which='major', color='lightgrey', alpha=.5)
    # grid behind the data
    ax.set_axisbelow(True)


def plot_delta_age(ax: axes.Axes, reports, colors=None, width=0.6, alpha=0.7):
    """
    Delta-age distribution per cohort: a box from the quartiles, a median line, whiskers to the
    5th / 95th percentiles and the subjects as jittered points

    :param ax: matplotlib Axes to draw on
    :param reports: list of DeltaAgeReport
    :param colors: list of colors, one per cohort, default is C0, C1, ...
    :return: ax
    """
    _check_ax(ax)
    colors = colors or [f'C{i}' for i in range(len(reports))]
    rng = np.random.default_rng(0)
    for i, (report, color) in enumerate(zip(reports, colors)):
        d = report.delta_age
        p5, q1, median, q3, p95 = np.percentile(d, [5, 25, 50, 75, 95])
        ax.add_patch(patches.Rectangle((i - width / 2, q1), width, q3 - q1, fc=color, ec=color, alpha=alpha * 0.5))
        ax.add_artist(lines.Line2D([i - width / 2, i + width / 2], [median, median], color=color, linewidth=2))
        ax.add_artist(lines.Line2D([i, i], [p5, q1], color=color))
        ax.add_artist(lines.Line2D([i, i], [q3, p95], color=color))
        ax.scatter(i + rng.uniform(-width / 4, width / 4, len(d)), d, s=6, color=color, alpha=alpha, zorder=3)
    ax.axhline(0.0, color='C7', linestyle='--', linewidth=1)
    ax.set_xticks(range(len(reports)))
    ax.set_xticklabels([r.cohort for r in reports])
    ax.set_xlim(-0.5, len(reports) - 0.5)
    ax.autoscale(enable=True, axis='y')
    ax.set_ylabel('Delta-Age (years)')
    _style(ax)
    return ax


def plot_alignment(ax: axes.Axes, report, top_k=None, color='C0'):
    """
    Mean alignment of the regional residuals with each covariance eigenvector, sd whiskers

    :param ax: matplotlib Axes
    :param report: DeltaAgeReport
    :param top_k: int, number of eigenvectors shown, default is all stored
    :return: ax
    """
    _check_ax(ax)
    valid = report.aligned[~report.zero_residual]
    k = report.aligned.shape[1] if top_k is None else min(top_k, report.aligned.shape[1])
    mean = valid[:, :k].mean(axis=0)
    sd = valid[:, :k].std(axis=0, ddof=1) if len(valid) > 1 else np.zeros(k)
    x = np.arange(1, k + 1)
    ax.bar(x, mean, color=color, alpha=0.8)
    ax.errorbar(x, mean, yerr=sd, fmt='none', ecolor='C7', capsize=3)
    ax.axhline(0.0, color='C7', linewidth=1)
    ax.set_xticks(x)
    ax.set_xticklabels([f'v{i}' for i in x])
    ax.set_ylabel('residual / eigenvector alignment')
    ax.set_title(report.cohort)
    _style(ax)
    return ax


def plot_region_stats(ax: axes.Axes, stats, alpha=0.05, color='C0', highlight='C3'):
    """
    ANCOVA F per region in region order, Bonferroni-significant regions highlighted

    :param ax: matplotlib Axes
    :param stats: GroupStatsReport
    :param alpha: float, significance level on the corrected p-values
    :return: ax
    """
    _check_ax(ax)
    significant = stats.significant(alpha)
    x = np.arange(len(stats.labels))
    ax.bar(x, stats.f_values, color=[highlight if s else color for s in significant])
    ax.set_xticks(x[::max(1, len(x) // 10)])
    ax.set_xticklabels([str(stats.labels[i]) for i in x[::max(1, len(x) // 10)]], rotation=90)
    ax.set_xlabel('region')
    ax.set_ylabel('F')
    ax.set_title(f'{stats.groups[1]} vs {stats.groups[0]}: {int(significant.sum())} significant')
    _style(ax)
    return ax

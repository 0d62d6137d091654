# -*- coding: utf-8 -*-
# @Time    : 2024/10/12 15:48
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : brainage.py

import logging

import numpy as np
import pandas as pd
from scipy import special, stats

from .vnn import forward
from .utils import parallel_map, chunked
from .utils.errors import DegenerateFit, DegenerateDesign, DegenerateInput, DimensionError

logger = logging.getLogger(__name__)


class AgeBiasModel(object):
    def __init__(self, omega, rho, fit_n):
        """
        Linear age-bias model y_hat - y ~ omega * y + rho

        :param omega: float, slope
        :param rho: float, intercept
        :param fit_n: int, number of subjects it was fit on
        """
        self.omega = float(omega)
        self.rho = float(rho)
        self.fit_n = int(fit_n)
        if not (np.isfinite(self.omega) and np.isfinite(self.rho)):
            raise DegenerateFit('age-bias coefficients must be finite')

    def __repr__(self):
        return f"AgeBiasModel(omega={self.omega:.6g}, rho={self.rho:.6g}, fit_n={self.fit_n})"

    def to_dict(self):
        return {'omega': self.omega, 'rho': self.rho, 'fit_n': self.fit_n}


def fit_bias(y, y_hat):
    """
    Ordinary least squares of the prediction error on chronological age

    :param y: array-like, chronological ages
    :param y_hat: array-like, model predictions
    :return: AgeBiasModel
    """
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape or y.ndim != 1:
        raise DimensionError('ages and predictions must be vectors of the same length')
    if y.size < 3:
        raise DegenerateFit(f'need at least 3 subjects to fit the age bias, got {y.size}')
    if np.var(y) == 0:
        raise DegenerateFit('chronological age has zero variance')
    design = np.column_stack([y, np.ones_like(y)])
    (omega, rho), *_ = np.linalg.lstsq(design, y_hat - y, rcond=None)
    return AgeBiasModel(omega, rho, y.size)


def apply_bias(bias, y, y_hat):
    """
    Brain age y_B = y_hat - (omega * y + rho) and gap delta_age = y_B - y

    :return: (y_brain, delta_age), scalars or arrays following the input
    """
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    y_brain = y_hat - (bias.omega * y + bias.rho)
    delta_age = y_brain - y
    if y_brain.ndim == 0:
        return float(y_brain), float(delta_age)
    return y_brain, delta_age


def regional_residuals(trace):
    """
    r_j = [p_x]_j - y_hat, one row per subject of the trace (a vector for a single-signal trace)
    """
    r = trace.readout - trace.y_hats[:, None]
    return r[0] if trace.single else r


class Alignment(object):
    def __init__(self, coefficients, zero_residual):
        self.coefficients = coefficients
        # ZeroResidualFlag: a perfectly flat p_x has no direction to explain
        self.zero_residual = zero_residual

    def __repr__(self):
        return f"Alignment(k={self.coefficients.shape[-1]}, zero_residual={self.zero_residual})"


def eigen_alignment(r, cov, top_k=None):
    """
    Inner products of the unit-normalized residual with the leading covariance eigenvectors

    :param r: array-like, residual vector (M,) or one row per subject (n x M)
    :param cov: CovarianceGraph
    :param top_k: int, number of eigenvectors (descending eigenvalue), default is M
    :return: Alignment, coefficients of shape (top_k,) or (n, top_k); zero rows flagged
    """
    r = np.asarray(r, dtype=float)
    single = r.ndim == 1
    rows = np.atleast_2d(r)
    if rows.shape[1] != cov.size:
        raise DimensionError(f'residual has {rows.shape[1]} regions, covariance has {cov.size}')
    top_k = cov.size if top_k is None else int(top_k)
    if not 1 <= top_k <= cov.size:
        raise DimensionError(f'top_k must lie in [1, {cov.size}], got {top_k}')
    norms = np.linalg.norm(rows, axis=1)
    zero = norms == 0
    unit = rows / np.where(zero, 1.0, norms)[:, None]
    coefficients = unit @ cov.eigvecs[:, :top_k]
    if np.any(zero):
        logger.warning('%d subject(s) with a zero residual vector', int(zero.sum()))
    if single:
        return Alignment(coefficients[0], bool(zero[0]))
    return Alignment(coefficients, zero)


class DeltaAgeReport(object):
    def __init__(self, subject_ids, group, y, y_hat, y_brain, delta_age, residuals, aligned, zero_residual,
                 region_ids, cohort, scores=None):
        self.subject_ids = list(subject_ids)
        self.group = np.asarray(group, dtype=object)
        self.y = np.asarray(y, dtype=float)
        self.y_hat = np.asarray(y_hat, dtype=float)
        self.y_brain = np.asarray(y_brain, dtype=float)
        self.delta_age = np.asarray(delta_age, dtype=float)
        self.residuals = np.asarray(residuals, dtype=float)
        self.aligned = np.asarray(aligned, dtype=float)
        self.zero_residual = np.asarray(zero_residual, dtype=bool)
        self.region_ids = list(region_ids)
        self.cohort = cohort
        self.scores = None if scores is None else np.asarray(scores, dtype=float)

    def __repr__(self):
        return f"DeltaAgeReport(cohort={self.cohort!r}, n={len(self)}, mean_delta_age={self.delta_age.mean():.3f})"

    def __len__(self):
        return len(self.subject_ids)

    def subset(self, mask):
        mask = np.asarray(mask)
        return DeltaAgeReport([s for s, keep in zip(self.subject_ids, mask) if keep], self.group[mask],
                              self.y[mask], self.y_hat[mask], self.y_brain[mask], self.delta_age[mask],
                              self.residuals[mask], self.aligned[mask], self.zero_residual[mask],
                              self.region_ids, self.cohort, None if self.scores is None else self.scores[mask])

    def to_dict(self):
        subjects = []
        for i, sid in enumerate(self.subject_ids):
            row = {'subject_id': sid, 'group': str(self.group[i]), 'age': float(self.y[i]),
                   'y_hat': float(self.y_hat[i]), 'y_brain': float(self.y_brain[i]),
                   'delta_age': float(self.delta_age[i]), 'residuals': self.residuals[i].tolist(),
                   'aligned': self.aligned[i].tolist(), 'zero_residual': bool(self.zero_residual[i])}
            if self.scores is not None:
                row['score'] = float(self.scores[i])
            subjects.append(row)
        return {'cohort': self.cohort, 'region_ids': self.region_ids, 'subjects': subjects}

    @classmethod
    def from_dict(cls, doc):
        subjects = doc['subjects']
        m = len(doc['region_ids'])
        k = len(subjects[0]['aligned']) if subjects else 0
        scores = [s['score'] for s in subjects] if subjects and all('score' in s for s in subjects) else None
        return cls([s['subject_id'] for s in subjects], [s['group'] for s in subjects],
                   [s['age'] for s in subjects], [s['y_hat'] for s in subjects], [s['y_brain'] for s in subjects],
                   [s['delta_age'] for s in subjects],
                   np.asarray([s['residuals'] for s in subjects], dtype=float).reshape(len(subjects), m),
                   np.asarray([s['aligned'] for s in subjects], dtype=float).reshape(len(subjects), k),
                   [s['zero_residual'] for s in subjects], doc['region_ids'], doc['cohort'], scores)

    def to_frame(self):
        """Flat table, one row per subject"""
        columns = {'subject_id': self.subject_ids, 'group': self.group, 'age': self.y, 'y_hat': self.y_hat,
                   'y_brain': self.y_brain, 'delta_age': self.delta_age, 'zero_residual': self.zero_residual}
        if self.scores is not None:
            columns['score'] = self.scores
        frame = pd.DataFrame(columns)
        res = pd.DataFrame(self.residuals, columns=[f'res_{r}' for r in self.region_ids])
        ali = pd.DataFrame(self.aligned, columns=[f'align_v{i + 1}' for i in range(self.aligned.shape[1])])
        return pd.concat([frame, res, ali], axis=1)


def build_report(model, cov, bias, data, top_k=10, cohort=None, threads=None):
    """
    Run a trained model on a cohort and assemble the per-subject brain-age-gap report

    :param model: VnnModel
    :param cov: CovarianceGraph used during training
    :param bias: AgeBiasModel fitted on the healthy training cohort
    :param data: FeatureMatrix
    :param top_k: int, number of eigen-alignment coefficients kept per subject
    :param cohort: str, cohort label, default is the joined group labels
    :return: DeltaAgeReport
    """
    if data.n_regions != cov.size:
        raise DimensionError(f'cohort has {data.n_regions} regions, model covariance has {cov.size}')
    top_k = min(int(top_k), cov.size)

    def one(idx):
        trace = forward(model, cov, data.features[idx])
        return trace.y_hats, regional_residuals(trace)

    parts = parallel_map(one, chunked(np.arange(data.n_subjects), 64), threads)
    y_hat = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0)
    residuals = np.concatenate([p[1] for p in parts]) if parts else np.zeros((0, cov.size))
    y_brain, delta_age = apply_bias(bias, data.ages, y_hat)
    alignment = eigen_alignment(residuals, cov, top_k)
    if cohort is None:
        cohort = '+'.join(sorted(set(data.group)))
    return DeltaAgeReport(data.subject_ids, data.group, data.ages, y_hat, y_brain, delta_age, residuals,
                          alignment.coefficients, alignment.zero_residual, data.region_ids, cohort, data.scores)


def f_sf(f, d1, d2):
    """Upper tail of the F(d1, d2) distribution through the regularized incomplete beta function"""
    f = np.asarray(f, dtype=float)
    x = d2 / (d2 + d1 * np.maximum(f, 0.0))
    return special.betainc(d2 / 2.0, d1 / 2.0, x)


def t_two_sided(t, df):
    """Two-sided p-value of a t statistic with df degrees of freedom"""
    t = np.asarray(t, dtype=float)
    return special.betainc(df / 2.0, 0.5, df / (df + t * t))


def f_statistic(rss_full, rss_red, df):
    """F of one dropped term; an exact fit of the full model gives inf when the term explains anything"""
    rss_full, rss_red = np.asarray(rss_full, dtype=float), np.asarray(rss_red, dtype=float)
    gain = np.maximum(rss_red - rss_full, 0.0)
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(rss_full > 0, gain / (np.where(rss_full > 0, rss_full, 1.0) / df),
                        np.where(gain > 0, np.inf, 0.0))


class GroupStatsReport(object):
    def __init__(self, labels, f_values, p_raw, p_corrected, effects, adjusted_means, groups, n_per_group,
                 correlations=None):
        self.labels = list(labels)
        self.f_values = np.asarray(f_values, dtype=float)
        self.p_raw = np.asarray(p_raw, dtype=float)
        self.p_corrected = np.asarray(p_corrected, dtype=float)
        self.effects = np.asarray(effects, dtype=float)
        self.adjusted_means = np.asarray(adjusted_means, dtype=float)
        self.groups = list(groups)
        self.n_per_group = list(n_per_group)
        self.correlations = correlations or {}

    def __repr__(self):
        return f"GroupStatsReport(tests={len(self.labels)}, significant={int(np.sum(self.significant()))})"

    def significant(self, alpha=0.05):
        return self.p_corrected < alpha

    def ranking(self):
        """Labels ordered by decreasing F"""
        return [self.labels[i] for i in np.argsort(-self.f_values, kind='stable')]

    def to_dict(self):
        return {'groups': self.groups, 'n_per_group': [int(n) for n in self.n_per_group],
                'tests': self.to_frame().to_dict(orient='records'),
                'correlations': {k: {'r': float(r), 'p': float(p)} for k, (r, p) in sorted(self.correlations.items())}}

    def to_frame(self):
        return pd.DataFrame({'label': self.labels, 'f_value': self.f_values, 'p_raw': self.p_raw,
                             'p_bonferroni': self.p_corrected, 'effect': self.effects,
                             f'adj_mean_{self.groups[0]}': self.adjusted_means[:, 0],
                             f'adj_mean_{self.groups[1]}': self.adjusted_means[:, 1]})


def ancova_region_test(hc, dis, hc_ages, dis_ages, labels=None, groups=('HC', 'DIS')):
    """
    Per-column ANCOVA: value ~ intercept + age + group, F test of the group term on (1, n - 3)
    degrees of freedom, Bonferroni over all columns.

    :param hc: array-like, n_hc x M values (e.g. regional residuals) of the reference group
    :param dis: array-like, n_dis x M values of the comparison group
    :param hc_ages: array-like, ages of the reference group (covariate)
    :param dis_ages: array-like, ages of the comparison group
    :param labels: list, column labels, default is 0..M-1
    :param groups: tuple, names of the two groups
    :return: GroupStatsReport
    """
    hc, dis = np.atleast_2d(np.asarray(hc, dtype=float)), np.atleast_2d(np.asarray(dis, dtype=float))
    hc_ages, dis_ages = np.asarray(hc_ages, dtype=float), np.asarray(dis_ages, dtype=float)
    if hc.shape[1] != dis.shape[1] or len(hc_ages) != hc.shape[0] or len(dis_ages) != dis.shape[0]:
        raise DimensionError('group tables and age vectors do not line up')
    if hc.shape[0] < 3 or dis.shape[0] < 3:
        raise DegenerateDesign('each group needs at least 3 subjects')
    values = np.vstack([hc, dis])
    ages = np.concatenate([hc_ages, dis_ages])
    indicator = np.concatenate([np.zeros(len(hc_ages)), np.ones(len(dis_ages))])
    n, m = values.shape
    full = np.column_stack([np.ones(n), ages, indicator])
    if np.linalg.matrix_rank(full) < 3:
        raise DegenerateDesign('design [1, age, group] is rank deficient (constant age or confounded groups)')
    reduced = full[:, :2]
    beta_full, *_ = np.linalg.lstsq(full, values, rcond=None)
    beta_red, *_ = np.linalg.lstsq(reduced, values, rcond=None)
    rss_full = np.sum((values - full @ beta_full) ** 2, axis=0)
    rss_red = np.sum((values - reduced @ beta_red) ** 2, axis=0)
    df = n - 3
    f = f_statistic(rss_full, rss_red, df)
    p = f_sf(f, 1, df)
    corrected = np.minimum(1.0, p * m)
    mean_age = ages.mean()
    adjusted = np.column_stack([beta_full[0] + beta_full[1] * mean_age,
                                beta_full[0] + beta_full[1] * mean_age + beta_full[2]])
    labels = list(range(m)) if labels is None else list(labels)
    return GroupStatsReport(labels, f, p, corrected, beta_full[2], adjusted, groups,
                            [len(hc_ages), len(dis_ages)])


def pearson(x, y):
    """
    Pearson correlation with the two-sided p-value from t = r sqrt((n - 2) / (1 - r^2))

    :return: (r, p)
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionError('pearson needs two vectors of the same length')
    if x.size < 3:
        raise DegenerateInput(f'need at least 3 pairs, got {x.size}')
    xc, yc = x - x.mean(), y - y.mean()
    sxx, syy = np.dot(xc, xc), np.dot(yc, yc)
    if sxx == 0 or syy == 0:
        raise DegenerateInput('zero variance input')
    r = float(np.clip(np.dot(xc, yc) / np.sqrt(sxx * syy), -1.0, 1.0))
    return r, pearson_pvalue(r, x.size)


def pearson_pvalue(r, n):
    if abs(r) >= 1.0:
        return 0.0
    df = n - 2
    t = r * np.sqrt(df / (1.0 - r * r))
    return float(t_two_sided(t, df))


def summarize_groups(reports, reference='HC'):
    """
    Delta-Age distribution summary per cohort and a one-sided Welch test of each cohort against the reference

    :param reports: list of DeltaAgeReport
    :param reference: str, cohort label of the healthy reference
    :return: pandas.DataFrame, one row per cohort
    """
    rows = []
    ref = next((r for r in reports if r.cohort == reference), None)
    for report in reports:
        d = report.delta_age
        row = {'cohort': report.cohort, 'n': len(d), 'mean': float(d.mean()), 'sd': float(d.std(ddof=1)),
               'median': float(np.median(d)), 'diff_vs_reference': np.nan, 't': np.nan, 'p_greater': np.nan}
        if ref is not None and report is not ref and len(d) >= 2:
            test = stats.ttest_ind(d, ref.delta_age, equal_var=False, alternative='greater')
            row.update(diff_vs_reference=float(d.mean() - ref.delta_age.mean()),
                       t=float(test.statistic), p_greater=float(test.pvalue))
        rows.append(row)
    return pd.DataFrame(rows)


def alignment_stats(report):
    """Per-eigenvector mean and standard deviation of the alignment coefficients over a cohort"""
    valid = report.aligned[~report.zero_residual]
    k = report.aligned.shape[1]
    return pd.DataFrame({'eigenvector': [f'v{i + 1}' for i in range(k)],
                         'mean': valid.mean(axis=0) if len(valid) else np.zeros(k),
                         'sd': valid.std(axis=0, ddof=1) if len(valid) > 1 else np.zeros(k),
                         'mean_abs': np.abs(valid).mean(axis=0) if len(valid) else np.zeros(k)})


def compare_reports(hc, dis, score_pairs=True):
    """
    Group analysis of two reports: ANCOVA on regional residuals and on alignment coefficients,
    plus Pearson of delta-age against the clinical score when both cohorts carry one.

    :return: (residual GroupStatsReport, alignment GroupStatsReport)
    """
    groups = (hc.cohort, dis.cohort)
    residual_stats = ancova_region_test(hc.residuals, dis.residuals, hc.y, dis.y, hc.region_ids, groups)
    k = min(hc.aligned.shape[1], dis.aligned.shape[1])
    alignment = ancova_region_test(hc.aligned[:, :k], dis.aligned[:, :k], hc.y, dis.y,
                                   [f'v{i + 1}' for i in range(k)], groups)
    if score_pairs and hc.scores is not None and dis.scores is not None:
        delta = np.concatenate([hc.delta_age, dis.delta_age])
        scores = np.concatenate([hc.scores, dis.scores])
        try:
            residual_stats.correlations['delta_age~score'] = pearson(delta, scores)
        except DegenerateInput as e:
            logger.warning('skipping delta-age/score correlation: %s', e)
        try:
            residual_stats.correlations[f'delta_age~score[{dis.cohort}]'] = pearson(dis.delta_age, dis.scores)
        except DegenerateInput as e:
            logger.warning('skipping %s delta-age/score correlation: %s', dis.cohort, e)
    return residual_stats, alignment

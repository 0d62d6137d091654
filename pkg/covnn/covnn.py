# -*- coding: utf-8 -*-
# @Time    : 2024/10/18 10:10
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : covnn.py

import os
import sys
import json
import logging
import argparse
from dataclasses import replace

import numpy as np

from . import __version__
from .config import load_config, read_document
from .covariance import CovarianceGraph, sample_covariance, normalize_spectrum, sparsify
from .vnn import init
from .training import train, predict
from .brainage import fit_bias, build_report, compare_reports, summarize_groups, alignment_stats, ancova_region_test
from .synthcohort import CortexSpec, DiseaseSpec, default_protocol, mild_disease, sample_cohort
from .transfer import transfer_table
from .stability import (ensemble_covariance, separated_spectrum, filter_stability_sweep, vnn_stability_sweep,
                        contrast_design, pca_contrast)
from .formats.cohort import read_cohort, write_cohort, read_matrix, write_matrix
from .formats.model import save_model, load_model, save_bias, load_bias, dump_json
from .formats.report import write_report, write_json, write_frame, write_summary, read_delta_age_report, history_frame
from .utils import setup_logging, derive_seed, atomic_write
from .utils.errors import CovnnError, ConfigError, DimensionError, InvalidMatrix

logger = logging.getLogger(__name__)


def _out(config, *parts):
    return os.path.join(config.paths.out, *parts)


def _load_synth_spec(file_path):
    """Cortex and disease settings from a JSON/TOML file with optional [cortex] and [disease] tables"""
    if file_path is None:
        return CortexSpec(), DiseaseSpec()
    doc = read_document(file_path)
    unknown = sorted(set(doc) - {'cortex', 'disease'})
    if unknown:
        raise ConfigError(f'{file_path}: unknown section(s) {unknown}')
    try:
        return CortexSpec(**doc.get('cortex', {})), DiseaseSpec(**doc.get('disease', {}))
    except TypeError as e:
        raise ConfigError(f'{file_path}: {e}')


def cmd_synth(config, spec_path=None):
    """
    Write the synthetic protocol cohorts: train.csv, test_hc.csv and test_<label>.csv

    :return: dict, cohort name -> written path
    """
    spec, disease = _load_synth_spec(spec_path)
    protocol = default_protocol(config.seed, config.regions, config.n_train, config.n_test, spec, disease)
    written = {}
    for name, key in (('train', 'train'), ('test_hc', 'test_hc'), (f'test_{disease.label.lower()}', 'test_dis')):
        written[name] = write_cohort(protocol[key], _out(config, f'{name}.csv'))
    atomic_write(_out(config, 'synth_spec.json'),
                 dump_json({'cortex': spec.to_dict(), 'disease': disease.to_dict(), 'seed': config.seed,
                            'regions': config.regions, 'n_train': config.n_train, 'n_test': config.n_test}))
    return written


def fit_pipeline(config, data, threads=None):
    """
    Covariance, spectral normalization, optional thresholding, training and the age-bias fit

    :return: (VnnModel, CovarianceGraph, AgeBiasModel, TrainReport, zscore (mean, std) or None)
    """
    zscore = None
    if config.zscore_features:
        data, mean, std = data.zscore()
        zscore = (mean, std)
    cov = normalize_spectrum(sample_covariance(data))
    if config.sparsify != 'none':
        cov = sparsify(cov, config.sparsify, config.tau)
    train_cfg = replace(config.train, seed=config.seed)
    model = init(config.model, derive_seed(config.seed, 'init'))
    report = train(model, cov, data, train_cfg, threads)
    # the age bias is fitted after training, on the whole healthy training cohort
    bias = fit_bias(data.ages, predict(report.model, cov, data, threads=threads))
    logger.info('fitted %r', bias)
    return report.model, cov, bias, report, zscore


def cmd_train(config, threads=None):
    config.check_inputs('train')
    data = read_cohort(config.paths.train)
    model, cov, bias, report, zscore = fit_pipeline(config, data, threads)
    save_model(model, cov, _out(config, 'model.json'), zscore)
    save_bias(bias, _out(config, 'bias.json'))
    write_matrix(cov.matrix, _out(config, 'covariance.csv'))
    write_json(report.to_dict(), _out(config, 'train_report.json'))
    write_frame(history_frame(report), _out(config, 'train_history.csv'))
    return model, cov, bias, zscore


def load_trained(config):
    """Model, covariance and bias from the files named in the config, fingerprints checked"""
    paths = config.paths
    model_path = paths.model or _out(config, 'model.json')
    model, fingerprint, zscore = load_model(model_path)
    bias = load_bias(paths.bias or _out(config, 'bias.json'))
    matrix = read_matrix(paths.covariance or _out(config, 'covariance.csv'))
    cov = CovarianceGraph(matrix, fingerprint['n_samples'], fingerprint['scale'], check_psd=False)
    found = cov.fingerprint()
    if found['dimension'] != fingerprint['dimension']:
        raise DimensionError(f'covariance has dimension {found["dimension"]}, '
                             f'model was trained with {fingerprint["dimension"]}')
    if found['sha256'] != fingerprint['sha256']:
        raise InvalidMatrix(f'covariance does not match the fingerprint stored in {model_path}')
    return model, cov, bias, zscore


def run_predict(model, cov, bias, data, zscore=None, top_k=10, cohort=None, threads=None):
    if data.n_regions != cov.size:
        raise DimensionError(f'cohort has {data.n_regions} regions, model was trained with {cov.size}')
    if zscore is not None:
        data = data.zscore(*zscore)[0]
    return build_report(model, cov, bias, data, top_k, cohort, threads)


def _cohort_label(data):
    return '+'.join(sorted(set(data.group)))


def cmd_predict(config, cohorts, threads=None):
    """
    Delta-age report per cohort file: delta_age_<cohort>.json and .csv

    :param cohorts: list of cohort CSV paths, default is paths.test
    :return: list of DeltaAgeReport
    """
    cohorts = cohorts or config.paths.test
    if not cohorts:
        raise ConfigError('no cohort to predict, pass CSV files or set paths.test')
    model, cov, bias, zscore = load_trained(config)
    reports = []
    for path in cohorts:
        data = read_cohort(path)
        report = run_predict(model, cov, bias, data, zscore, config.top_k, _cohort_label(data), threads)
        write_report(report, _out(config, f'delta_age_{report.cohort}'))
        reports.append(report)
    return reports


def group_analysis(config, hc, dis):
    residual_stats, align_stats = compare_reports(hc, dis)
    write_report(residual_stats, _out(config, 'group_stats_residuals'))
    write_report(align_stats, _out(config, 'group_stats_alignment'))
    write_summary(summarize_groups([hc, dis], reference=hc.cohort), _out(config, 'delta_age_summary'))
    for report in (hc, dis):
        write_frame(alignment_stats(report), _out(config, f'alignment_{report.cohort}.csv'))
    return residual_stats, align_stats


def cmd_group_stats(config, hc_path, dis_path):
    return group_analysis(config, read_delta_age_report(hc_path), read_delta_age_report(dis_path))


def cmd_transfer(config, spec_path=None, threads=None):
    spec, _ = _load_synth_spec(spec_path)
    ex = config.experiments
    report = transfer_table(spec, ex.transfer_dims, ex.transfer_train_dims, replace(config.train, seed=config.seed),
                            config.seed, config.model, ex.transfer_n_train, ex.transfer_n_test, threads=threads)
    write_report(report, _out(config, 'transfer'))
    write_frame(report.mae_matrix().reset_index(), _out(config, 'transfer_mae_matrix.csv'))
    return report


def cmd_stability(config, threads=None):
    ex = config.experiments
    reports = {}
    cov = ensemble_covariance(separated_spectrum(ex.dimension), derive_seed(config.seed, 'ensemble'))
    if 'filter' in ex.stability:
        reports['filter'] = filter_stability_sweep(cov, ex.filter_taps, ex.ns, ex.trials, config.seed, threads)
        write_report(reports['filter'], _out(config, 'stability_filter'))
    if 'vnn' in ex.stability:
        model = init(config.model, derive_seed(config.seed, 'init'))
        reports['vnn'] = vnn_stability_sweep(model, cov, ex.ns, ex.trials, config.seed, threads=threads)
        write_report(reports['vnn'], _out(config, 'stability_vnn'))
    if 'pca' in ex.stability:
        for name, spectrum in (('pca_contrast', 'near_degenerate'), ('pca_control', 'separated')):
            _, data = contrast_design(spectrum, ex.dimension, ex.pca_n, derive_seed(config.seed, name))
            reports[name] = pca_contrast(data, ex.pca_rank, ex.pca_levels, config.seed, threads=threads)
            write_report(reports[name], _out(config, name))
    return reports


def cmd_demo(config, threads=None):
    """
    Synthetic cohorts, training, delta-age reports for every test cohort and the group analysis

    :return: dict with the reports
    """
    protocol = default_protocol(config.seed, config.regions, config.n_train, config.n_test)
    mci = sample_cohort(protocol['spec'], mild_disease(), config.regions, config.n_test,
                        seed=derive_seed(config.seed, 'test_mci'), scores=True)
    for name, data in (('train', protocol['train']), ('test_hc', protocol['test_hc']),
                       ('test_ad', protocol['test_dis']), ('test_mci', mci)):
        write_cohort(data, _out(config, f'{name}.csv'))
    model, cov, bias, report, zscore = fit_pipeline(config, protocol['train'], threads)
    save_model(model, cov, _out(config, 'model.json'), zscore)
    save_bias(bias, _out(config, 'bias.json'))
    write_matrix(cov.matrix, _out(config, 'covariance.csv'))
    write_json(report.to_dict(), _out(config, 'train_report.json'))
    reports = {}
    for name, data in (('HC-train', protocol['train']), ('HC', protocol['test_hc']),
                       (protocol['disease'].label, protocol['test_dis']), ('MCI', mci)):
        reports[name] = run_predict(model, cov, bias, data, zscore, config.top_k, name, threads)
        write_report(reports[name], _out(config, f'delta_age_{name}'))
    hc, dis = reports['HC'], reports[protocol['disease'].label]
    residual_stats, align_stats = group_analysis(config, hc, dis)
    write_summary(summarize_groups([reports['HC'], reports['MCI'], dis], reference='HC'),
                  _out(config, 'delta_age_summary_all'))
    features = ancova_region_test(protocol['test_hc'].features, protocol['test_dis'].features,
                                  protocol['test_hc'].ages, protocol['test_dis'].ages,
                                  protocol['test_hc'].region_ids, ('HC', dis.cohort))
    write_report(features, _out(config, 'group_stats_features'))
    gap = float(np.mean(dis.delta_age) - np.mean(hc.delta_age))
    logger.info('mean delta-age %s - HC: %.3f years, top regions %s', dis.cohort, gap, residual_stats.ranking()[:5])
    return {'reports': reports, 'residual_stats': residual_stats, 'alignment_stats': align_stats,
            'feature_stats': features, 'bias': bias, 'model': model, 'covariance': cov}


def build_parser():
    parser = argparse.ArgumentParser(prog='covnn', description='coVariance neural networks for brain age gap')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='pipeline configuration (.json or .toml)')
    common.add_argument('--seed', type=int, help='global seed, overrides the config')
    common.add_argument('--out', help='output directory, overrides paths.out')
    common.add_argument('--threads', type=int, help='fan-out width, default $COVNN_THREADS or 1')
    common.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    sub = parser.add_subparsers(dest='command', required=True)

    synth = sub.add_parser('synth', parents=[common], help='generate synthetic cohorts')
    synth.add_argument('--spec', help='cortex/disease settings (.json or .toml)')
    sub.add_parser('train', parents=[common], help='train a VNN and fit the age bias')
    pred = sub.add_parser('predict', parents=[common], help='delta-age reports for cohort files')
    pred.add_argument('cohorts', nargs='*', help='cohort CSV files, default paths.test')
    pred.add_argument('--model', help='model JSON, default <out>/model.json')
    pred.add_argument('--bias', help='bias JSON, default <out>/bias.json')
    pred.add_argument('--covariance', help='covariance CSV, default <out>/covariance.csv')
    stats = sub.add_parser('group-stats', parents=[common], help='ANCOVA and delta-age summaries of two reports')
    stats.add_argument('hc', help='reference delta-age report JSON')
    stats.add_argument('dis', help='comparison delta-age report JSON')
    transfer = sub.add_parser('transfer', parents=[common], help='train at one resolution, evaluate at others')
    transfer.add_argument('--spec', help='cortex settings (.json or .toml)')
    sub.add_parser('stability', parents=[common], help='covariance perturbation sweeps and the PCA contrast')
    sub.add_parser('demo', parents=[common], help='full synthetic pipeline in one run')
    return parser


def _apply_overrides(config, args):
    if args.seed is not None:
        config.seed = args.seed
    if args.out is not None:
        config.paths.out = args.out
    if args.threads is not None:
        config.threads = args.threads
    for name in ('model', 'bias', 'covariance'):
        if getattr(args, name, None):
            setattr(config.paths, name, getattr(args, name))
    config.__post_init__()
    return config


def run(args):
    config = _apply_overrides(load_config(args.config), args)
    threads = config.threads
    if args.command == 'synth':
        return cmd_synth(config, args.spec)
    if args.command == 'train':
        return cmd_train(config, threads)
    if args.command == 'predict':
        return cmd_predict(config, args.cohorts, threads)
    if args.command == 'group-stats':
        return cmd_group_stats(config, args.hc, args.dis)
    if args.command == 'transfer':
        return cmd_transfer(config, args.spec, threads)
    if args.command == 'stability':
        return cmd_stability(config, threads)
    return cmd_demo(config, threads)


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        run(args)
    except CovnnError as e:
        sys.stderr.write(json.dumps({'error': type(e).__name__, 'message': str(e)}) + '\n')
        return e.exit_code
    except Exception as e:
        logger.debug('unexpected failure', exc_info=True)
        sys.stderr.write(json.dumps({'error': type(e).__name__, 'message': str(e)}) + '\n')
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())

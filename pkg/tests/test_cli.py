# -*- coding: utf-8 -*-
# @Time    : 2024/10/19 18:05
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : test_cli.py

import os
import json
import logging

import numpy as np
import pytest

from covnn.covnn import main, build_parser
from covnn.config import load_config
from covnn.covnn import cmd_demo
from covnn.formats.cohort import write_cohort
from covnn.synthcohort import CortexSpec, sample_cohort

SMALL = '''seed = 3
regions = 12
n_train = 60
n_test = 20

[train]
epochs = 2
batch_size = 16
learning_rate = 0.01

[model]
taps_per_layer = [2, 2]
widths = [1, 4, 4]

[paths]
train = "{out}/train.csv"
'''


@pytest.fixture(autouse=True)
def reset_logging():
    yield
    root = logging.getLogger('covnn')
    for handler in list(root.handlers):
        if not isinstance(handler, logging.NullHandler):
            root.removeHandler(handler)
    root.setLevel(logging.NOTSET)


@pytest.fixture
def small_run(tmp_path):
    out = tmp_path / 'out'
    config = tmp_path / 'covnn.toml'
    config.write_text(SMALL.format(out=out.as_posix()))
    return str(config), str(out)


def _last_error(capsys):
    lines = [line for line in capsys.readouterr().err.splitlines() if line.strip()]
    return json.loads(lines[-1])


def _tree(root):
    files = {}
    for folder, _, names in os.walk(root):
        for name in names:
            path = os.path.join(folder, name)
            with open(path, 'rb') as f:
                files[os.path.relpath(path, root)] = f.read()
    return files


class TestCommands:
    def test_parser(self):
        args = build_parser().parse_args(['predict', 'a.csv', 'b.csv', '--seed', '4'])
        assert args.command == 'predict'
        assert args.cohorts == ['a.csv', 'b.csv']
        assert args.seed == 4

    def test_synth_train_predict_group_stats(self, small_run):
        config, out = small_run
        assert main(['synth', '--config', config, '--log-level', 'WARNING']) == 0
        assert sorted(os.listdir(out)) == ['synth_spec.json', 'test_ad.csv', 'test_hc.csv', 'train.csv']
        assert main(['train', '--config', config, '--log-level', 'WARNING']) == 0
        for name in ('model.json', 'bias.json', 'covariance.csv', 'train_report.json', 'train_history.csv'):
            assert os.path.isfile(os.path.join(out, name))
        cohorts = [os.path.join(out, 'test_hc.csv'), os.path.join(out, 'test_ad.csv')]
        assert main(['predict', *cohorts, '--config', config, '--log-level', 'WARNING']) == 0
        with open(os.path.join(out, 'delta_age_AD.json')) as f:
            doc = json.load(f)
        assert doc['cohort'] == 'AD'
        assert len(doc['subjects']) == 20
        assert len(doc['subjects'][0]['aligned']) == 10
        hc, dis = os.path.join(out, 'delta_age_HC.json'), os.path.join(out, 'delta_age_AD.json')
        assert main(['group-stats', hc, dis, '--config', config, '--log-level', 'WARNING']) == 0
        with open(os.path.join(out, 'group_stats_residuals.json')) as f:
            stats = json.load(f)
        assert stats['groups'] == ['HC', 'AD']
        assert len(stats['tests']) == 12
        assert os.path.isfile(os.path.join(out, 'delta_age_summary.csv'))

    def test_region_mismatch_exits_with_json_error(self, small_run, capsys):
        config, out = small_run
        assert main(['synth', '--config', config, '--log-level', 'WARNING']) == 0
        assert main(['train', '--config', config, '--log-level', 'WARNING']) == 0
        other = os.path.join(out, 'other.csv')
        write_cohort(sample_cohort(CortexSpec(), None, m=10, n=5, seed=0), other)
        capsys.readouterr()
        assert main(['predict', other, '--config', config, '--log-level', 'WARNING']) == 2
        error = _last_error(capsys)
        assert error['error'] == 'DimensionError'
        assert '12' in error['message']

    def test_missing_training_file(self, small_run, capsys):
        config, _ = small_run
        assert main(['train', '--config', config, '--log-level', 'WARNING']) == 2
        assert _last_error(capsys)['error'] == 'ConfigError'

    def test_bad_config(self, tmp_path, capsys):
        path = tmp_path / 'bad.toml'
        path.write_text('colour = "red"\n')
        assert main(['stability', '--config', str(path)]) == 2
        assert _last_error(capsys)['error'] == 'ConfigError'

    def test_wrongly_typed_value(self, tmp_path, capsys):
        path = tmp_path / 'covnn.json'
        path.write_text(json.dumps({'seed': 'abc'}))
        assert main(['stability', '--config', str(path), '--out', str(tmp_path / 'out')]) == 2
        error = _last_error(capsys)
        assert error['error'] == 'ConfigError'

    def test_unexpected_failure_is_reported_as_json(self, monkeypatch, capsys):
        def broken(args):
            raise RuntimeError('disk on fire')

        monkeypatch.setattr('covnn.covnn.run', broken)
        assert main(['demo', '--log-level', 'WARNING']) == 1
        assert _last_error(capsys) == {'error': 'RuntimeError', 'message': 'disk on fire'}

    def test_stability_files(self, tmp_path):
        path = tmp_path / 'covnn.toml'
        path.write_text('[experiments]\nns = [20, 40]\ntrials = 2\ndimension = 8\npca_n = 40\n'
                        'pca_levels = [0.9]\n\n[model]\ntaps_per_layer = [2]\nwidths = [1, 2]\n')
        out = tmp_path / 'out'
        assert main(['stability', '--config', str(path), '--out', str(out), '--log-level', 'WARNING']) == 0
        for stem in ('stability_filter', 'stability_vnn', 'pca_contrast', 'pca_control'):
            assert (out / f'{stem}.json').is_file()
            assert (out / f'{stem}.csv').is_file()


class TestDemo:
    def test_reruns_are_byte_identical(self, small_run, tmp_path):
        config, _ = small_run
        a, b = tmp_path / 'a', tmp_path / 'b'
        assert main(['demo', '--config', config, '--out', str(a), '--threads', '1', '--log-level', 'WARNING']) == 0
        assert main(['demo', '--config', config, '--out', str(b), '--threads', '3', '--log-level', 'WARNING']) == 0
        first, second = _tree(a), _tree(b)
        assert 'delta_age_MCI.json' in first
        assert 'group_stats_features.json' in first
        assert first.keys() == second.keys()
        for name in first:
            assert first[name] == second[name], name

    @pytest.mark.slow
    def test_disease_cohort_looks_older(self, tmp_path):
        config = load_config()
        config.paths.out = str(tmp_path)
        result = cmd_demo(config)
        reports = result['reports']
        gap = np.mean(reports['AD'].delta_age) - np.mean(reports['HC'].delta_age)
        assert gap > 2.0
        assert np.mean(reports['MCI'].delta_age) < np.mean(reports['AD'].delta_age)
        top = result['feature_stats'].ranking()[:5]
        assert sorted(top) == ['020', '021', '022', '023', '024']

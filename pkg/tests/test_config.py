# -*- coding: utf-8 -*-
# @Time    : 2024/10/19 17:20
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : test_config.py

import json

import pytest

from covnn.config import load_config, config_from_dict, read_document, PipelineConfig
from covnn.utils import resolve_threads, derive_seed
from covnn.utils.errors import ConfigError, CovnnIOError


class TestConfig:
    def test_defaults(self):
        config = load_config()
        assert config.seed == 0
        assert config.model.widths == [1, 16, 16]
        assert config.train.optimizer == 'adam'
        assert config.paths.out == 'covnn-out'

    def test_toml(self, tmp_path):
        path = tmp_path / 'covnn.toml'
        path.write_text('seed = 7\nregions = 20\n\n[train]\nepochs = 5\nlearning_rate = 0.01\n\n'
                        '[model]\ntaps_per_layer = [2]\nwidths = [1, 4]\n\n[paths]\nout = "results"\n')
        config = load_config(str(path))
        assert (config.seed, config.regions) == (7, 20)
        assert config.train.epochs == 5
        assert config.model.widths == [1, 4]
        assert config.paths.out == 'results'
        assert config.experiments.trials == 20

    def test_json(self, tmp_path):
        path = tmp_path / 'covnn.json'
        path.write_text(json.dumps({'sparsify': 'soft', 'tau': 0.1, 'experiments': {'ns': [10, 20]}}))
        config = load_config(str(path))
        assert config.sparsify == 'soft'
        assert config.experiments.ns == [10, 20]

    @pytest.mark.parametrize('doc', [{'colour': 'red'}, {'train': {'epoch': 3}}, {'sparsify': 'median'},
                                     {'tau': -1.0}, {'seed': -1}, {'train': 3},
                                     {'experiments': {'stability': ['spectral']}},
                                     {'model': {'widths': [1, 4], 'taps_per_layer': [2, 2]}},
                                     {'seed': 'abc'}, {'tau': 'x'}, {'experiments': {'trials': 'many'}},
                                     {'train': {'epochs': 'ten'}}])
    def test_invalid(self, doc):
        with pytest.raises(ConfigError):
            config_from_dict(doc)

    def test_unparsable(self, tmp_path):
        path = tmp_path / 'covnn.toml'
        path.write_text('seed = = 3\n')
        with pytest.raises(ConfigError):
            read_document(str(path))
        with pytest.raises(CovnnIOError):
            read_document(str(tmp_path / 'missing.toml'))

    def test_check_inputs(self, tmp_path):
        config = PipelineConfig()
        with pytest.raises(ConfigError):
            config.check_inputs('train')
        config.paths.train = str(tmp_path / 'nope.csv')
        with pytest.raises(ConfigError):
            config.check_inputs('train')
        (tmp_path / 'train.csv').write_text('x')
        config.paths.train = str(tmp_path / 'train.csv')
        config.check_inputs('train')

    def test_to_dict(self):
        doc = PipelineConfig().to_dict()
        assert doc['train']['batch_size'] == 32
        assert doc['model']['nonlinearity'] == 'relu'


class TestThreadsAndSeeds:
    def test_resolve_threads(self, monkeypatch):
        monkeypatch.delenv('COVNN_THREADS', raising=False)
        assert resolve_threads() == 1
        monkeypatch.setenv('COVNN_THREADS', '4')
        assert resolve_threads() == 4
        assert resolve_threads(2) == 2
        monkeypatch.setenv('COVNN_THREADS', 'many')
        with pytest.raises(ConfigError):
            resolve_threads()
        with pytest.raises(ConfigError):
            resolve_threads(0)

    def test_derive_seed(self):
        assert derive_seed(1, 'train') == derive_seed(1, 'train')
        assert derive_seed(1, 'train') != derive_seed(1, 'test')
        assert derive_seed(1, 5, 0) != derive_seed(1, 5, 1)
        assert derive_seed(1, 'x') != derive_seed(2, 'x')

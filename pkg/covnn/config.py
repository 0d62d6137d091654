# -*- coding: utf-8 -*-
# @Time    : 2024/10/17 15:40
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : config.py

import os
import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, fields, asdict

from .vnn import VnnConfig as ModelConfig
from .training import TrainConfig
from .utils import read_text
from .utils.errors import CovnnError, ConfigError

logger = logging.getLogger(__name__)

SPARSIFY_MODES = ('none', 'hard', 'soft')
EXPERIMENTS = ('filter', 'vnn', 'pca')


@dataclass
class PathsConfig:
    train: str = None
    test: list = field(default_factory=list)
    model: str = None
    bias: str = None
    covariance: str = None
    out: str = 'covnn-out'


@dataclass
class ExperimentsConfig:
    """Settings of the transfer and stability commands"""
    stability: list = field(default_factory=lambda: list(EXPERIMENTS))
    ns: list = field(default_factory=lambda: [100, 400, 1600, 6400])
    trials: int = 20
    dimension: int = 20
    filter_taps: list = field(default_factory=lambda: [0.1, 0.4, 0.1])
    pca_rank: int = 3
    pca_levels: list = field(default_factory=lambda: [1.0, 0.9, 0.8])
    pca_n: int = 200
    transfer_dims: list = field(default_factory=lambda: [50, 100, 200])
    transfer_train_dims: list = field(default_factory=lambda: [50])
    transfer_n_train: int = 500
    transfer_n_test: int = 100

    def __post_init__(self):
        unknown = [e for e in self.stability if e not in EXPERIMENTS]
        if unknown:
            raise ConfigError(f'unknown stability experiment(s) {unknown}, choose from {EXPERIMENTS}')
        if self.trials < 1 or self.dimension < 4 or self.pca_rank < 1:
            raise ConfigError('trials >= 1, dimension >= 4 and pca_rank >= 1 required')


@dataclass
class PipelineConfig:
    seed: int = 0
    threads: int = None
    top_k: int = 10
    sparsify: str = 'none'
    tau: float = 0.0
    zscore_features: bool = False
    n_train: int = 500
    n_test: int = 100
    regions: int = 50
    paths: PathsConfig = field(default_factory=PathsConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    experiments: ExperimentsConfig = field(default_factory=ExperimentsConfig)

    def __post_init__(self):
        if self.sparsify not in SPARSIFY_MODES:
            raise ConfigError(f'sparsify must be one of {SPARSIFY_MODES}, got {self.sparsify!r}')
        if self.tau < 0:
            raise ConfigError(f'tau must be >= 0, got {self.tau}')
        if self.top_k < 1 or self.n_train < 2 or self.n_test < 2 or self.regions < 2:
            raise ConfigError('top_k >= 1, n_train >= 2, n_test >= 2 and regions >= 2 required')
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError(f'seed must be an unsigned 64-bit integer, got {self.seed}')

    def to_dict(self):
        return asdict(self)

    def check_inputs(self, *names):
        """Every named path must point to an existing file"""
        for name in names:
            path = getattr(self.paths, name)
            values = path if isinstance(path, list) else [path]
            if not values or any(p is None for p in values):
                raise ConfigError(f'paths.{name} is required for this command')
            for p in values:
                if not os.path.isfile(p):
                    raise ConfigError(f'paths.{name}: no such file {p!r}')


SECTIONS = {'paths': PathsConfig, 'train': TrainConfig, 'model': ModelConfig, 'experiments': ExperimentsConfig}


def _build(cls, values, where):
    if not isinstance(values, dict):
        raise ConfigError(f'[{where}] must be a table')
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f'unknown key(s) in [{where}]: {unknown}')
    try:
        return cls(**values)
    except CovnnError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f'[{where}]: {e}')


def config_from_dict(doc):
    doc = dict(doc)
    sections = {name: _build(cls, doc.pop(name, {}), name) for name, cls in SECTIONS.items()}
    known = {f.name for f in fields(PipelineConfig)} - set(SECTIONS)
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f'unknown top-level key(s): {unknown}')
    return _build(PipelineConfig, {**doc, **sections}, 'top level')


def read_document(file_path):
    """Parse a .toml or .json file into a dict"""
    text = read_text(file_path)
    try:
        if str(file_path).endswith('.toml'):
            doc = tomllib.loads(text)
        else:
            doc = json.loads(text)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigError(f'{file_path}: cannot parse configuration ({e})')
    if not isinstance(doc, dict):
        raise ConfigError(f'{file_path}: top level must be a table')
    return doc


def load_config(file_path=None):
    """
    Read a pipeline configuration (.json or .toml), defaults when no file is given

    :param file_path: str, default is None
    :return: PipelineConfig
    """
    if file_path is None:
        return PipelineConfig()
    config = config_from_dict(read_document(file_path))
    logger.info('loaded configuration from %s', file_path)
    return config

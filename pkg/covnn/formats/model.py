# -*- coding: utf-8 -*-
# @Time    : 2024/10/15 14:30
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : model.py

import json
import logging

import numpy as np

from ..vnn import VnnConfig, VnnModel
from ..brainage import AgeBiasModel
from ..utils import atomic_write, read_text
from ..utils.errors import ConfigError, CovnnIOError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def dump_json(doc):
    return json.dumps(doc, sort_keys=True, indent=2) + '\n'


def load_json(file_path):
    try:
        return json.loads(read_text(file_path))
    except json.JSONDecodeError as e:
        raise CovnnIOError(f'invalid JSON ({e.msg} at line {e.lineno})', file_path)


def model_document(model, cov, zscore=None):
    """
    JSON document of a trained model

    :param model: VnnModel
    :param cov: CovarianceGraph the model was trained with
    :param zscore: (mean, std) arrays when features were z-scored, default is None
    :return: dict
    """
    return {
        'format_version': FORMAT_VERSION,
        'config': model.config.to_dict(),
        'taps': [h.tolist() for h in model.taps],
        'biases': [b.tolist() for b in model.biases],
        'seed': model.seed,
        'input_offset': model.input_offset,
        'covariance': dict(cov.fingerprint(), scale=cov.scale, n_samples=cov.n_samples),
        'zscore': None if zscore is None else {'mean': np.asarray(zscore[0]).tolist(),
                                               'std': np.asarray(zscore[1]).tolist()},
    }


def save_model(model, cov, file_path, zscore=None):
    atomic_write(file_path, dump_json(model_document(model, cov, zscore)))
    logger.info('saved %r to %s', model, file_path)
    return file_path


def load_model(file_path):
    """
    Read a model document

    :param file_path: str
    :return: (VnnModel, dict with the covariance fingerprint, zscore (mean, std) or None)
    """
    doc = load_json(file_path)
    version = doc.get('format_version')
    if version != FORMAT_VERSION:
        raise ConfigError(f'{file_path}: unsupported model format_version {version!r}')
    try:
        config = VnnConfig(**doc['config'])
        model = VnnModel(config, [np.asarray(h, dtype=float) for h in doc['taps']],
                         [np.asarray(b, dtype=float) for b in doc['biases']], doc['seed'], doc['input_offset'])
        covariance = doc['covariance']
    except (KeyError, TypeError) as e:
        raise ConfigError(f'{file_path}: malformed model document ({e})')
    zscore = doc.get('zscore')
    if zscore is not None:
        zscore = (np.asarray(zscore['mean'], dtype=float), np.asarray(zscore['std'], dtype=float))
    return model, covariance, zscore


def save_bias(bias, file_path):
    atomic_write(file_path, dump_json(dict(bias.to_dict(), format_version=FORMAT_VERSION)))
    return file_path


def load_bias(file_path):
    doc = load_json(file_path)
    if doc.get('format_version') != FORMAT_VERSION:
        raise ConfigError(f'{file_path}: unsupported bias format_version {doc.get("format_version")!r}')
    try:
        return AgeBiasModel(doc['omega'], doc['rho'], doc['fit_n'])
    except (KeyError, TypeError) as e:
        raise ConfigError(f'{file_path}: malformed bias document ({e})')

# -*- coding: utf-8 -*-
# @Time    : 2024/10/15 10:12
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : cohort.py

import io
import logging

import numpy as np
import pandas as pd

from ..covariance import FeatureMatrix
from ..utils import atomic_write
from ..utils.errors import CovnnIOError, DimensionError, InvalidMatrix, InsufficientSamples

logger = logging.getLogger(__name__)

REGION_PREFIX = 'r_'
FLOAT_FORMAT = '%.17g'
ID_COLUMNS = ['subject_id', 'age', 'group']


def read_cohort(file_path, min_subjects=2):
    """
    Read a cohort CSV

    header: subject_id, age, group[, score], r_<region_id>, ...

    :param file_path: str, the path of the cohort file
    :param min_subjects: int, minimum number of rows, default is 2
    :return: FeatureMatrix
    """
    try:
        df = pd.read_csv(file_path, dtype={'subject_id': str, 'group': str}, float_precision='round_trip',
                         keep_default_na=False, na_values=[''])
    except FileNotFoundError:
        raise CovnnIOError('cohort file not found', file_path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise CovnnIOError(f'cannot parse cohort file ({e})', file_path)
    missing = [c for c in ID_COLUMNS if c not in df.columns]
    if missing:
        raise InvalidMatrix(f'{file_path}: missing column(s) {missing}')
    region_columns = [c for c in df.columns if c.startswith(REGION_PREFIX)]
    extra = [c for c in df.columns if c not in ID_COLUMNS + ['score'] + region_columns]
    if extra:
        raise InvalidMatrix(f'{file_path}: unexpected column(s) {extra}')
    if not region_columns:
        raise DimensionError(f'{file_path}: no region columns (r_<id>)')
    if len(df) < min_subjects:
        raise InsufficientSamples(f'{file_path}: need at least {min_subjects} subjects, got {len(df)}')
    try:
        features = df[region_columns].to_numpy(dtype=float)
        ages = df['age'].to_numpy(dtype=float)
        scores = df['score'].to_numpy(dtype=float) if 'score' in df.columns else None
    except (TypeError, ValueError) as e:
        raise InvalidMatrix(f'{file_path}: non-numeric value ({e})')
    if df[['subject_id', 'group']].isna().any().any():
        raise InvalidMatrix(f'{file_path}: empty subject_id or group')
    data = FeatureMatrix(features, ages, df['group'].tolist(),
                         [c[len(REGION_PREFIX):] for c in region_columns], df['subject_id'].tolist(), scores)
    logger.info('read %r from %s', data, file_path)
    return data


def cohort_frame(data):
    columns = {'subject_id': data.subject_ids, 'age': data.ages, 'group': list(data.group)}
    if data.scores is not None:
        columns['score'] = data.scores
    frame = pd.DataFrame(columns)
    regions = pd.DataFrame(data.features.reshape(data.n_subjects, data.n_regions),
                           columns=[f'{REGION_PREFIX}{r}' for r in data.region_ids])
    return pd.concat([frame, regions], axis=1)


def write_cohort(data, file_path):
    """
    Write a FeatureMatrix in the cohort CSV schema, floats with 17 significant digits

    :param data: FeatureMatrix
    :param file_path: str, the output path
    :return: str, the output path
    """
    buffer = io.StringIO()
    cohort_frame(data).to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    atomic_write(file_path, buffer.getvalue())
    logger.info('wrote %r to %s', data, file_path)
    return file_path


def read_matrix(file_path):
    """Square float matrix stored as headerless CSV"""
    try:
        values = pd.read_csv(file_path, header=None, float_precision='round_trip').to_numpy(dtype=float)
    except FileNotFoundError:
        raise CovnnIOError('matrix file not found', file_path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, ValueError) as e:
        raise CovnnIOError(f'cannot parse matrix file ({e})', file_path)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise DimensionError(f'{file_path}: matrix of shape {values.shape} is not square')
    return values


def write_matrix(matrix, file_path):
    buffer = io.StringIO()
    pd.DataFrame(np.asarray(matrix, dtype=float)).to_csv(buffer, index=False, header=False,
                                                         float_format=FLOAT_FORMAT, lineterminator='\n')
    return atomic_write(file_path, buffer.getvalue())

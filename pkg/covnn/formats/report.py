# -*- coding: utf-8 -*-
# @Time    : 2024/10/15 16:02
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : report.py

import io
import math
import logging

import numpy as np
import pandas as pd

from .cohort import FLOAT_FORMAT
from .model import dump_json, load_json
from ..brainage import DeltaAgeReport
from ..utils import atomic_write
from ..utils.errors import CovnnIOError

logger = logging.getLogger(__name__)


def clean(value):
    """Plain JSON values: numpy scalars and arrays unwrapped, NaN and inf become null"""
    if isinstance(value, dict):
        return {str(k): clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return clean(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_json(doc, file_path):
    return atomic_write(file_path, dump_json(clean(doc)))


def write_frame(frame, file_path):
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return atomic_write(file_path, buffer.getvalue())


def write_report(report, stem):
    """
    Write <stem>.json from report.to_dict() and, when the report has a table, <stem>.csv from report.to_frame()

    :param report: any covnn report object
    :param stem: str, output path without extension
    :return: list of written paths
    """
    paths = [write_json(report.to_dict(), f'{stem}.json')]
    if hasattr(report, 'to_frame'):
        paths.append(write_frame(report.to_frame(), f'{stem}.csv'))
    logger.info('wrote %r to %s', report, ', '.join(paths))
    return paths


def read_delta_age_report(file_path):
    doc = load_json(file_path)
    try:
        return DeltaAgeReport.from_dict(doc)
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise CovnnIOError(f'malformed delta-age report ({e})', file_path)


def write_summary(frame, stem):
    """Group summary table as JSON records and CSV"""
    write_json({'cohorts': frame.to_dict(orient='records')}, f'{stem}.json')
    write_frame(frame, f'{stem}.csv')
    return [f'{stem}.json', f'{stem}.csv']


def history_frame(train_report):
    return pd.DataFrame(train_report.history)

# -*- coding: utf-8 -*-
# @Time    : 2024/8/21 19:20
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : __init__.py

import logging

__version__ = '0.1.0'

logging.getLogger(__name__).addHandler(logging.NullHandler())

from .covariance import FeatureMatrix, CovarianceGraph, sample_covariance, normalize_spectrum  # noqa: E402
from .vnn import VnnConfig, VnnModel, init, forward, backward  # noqa: E402
from .training import TrainConfig, train, predict  # noqa: E402
from .brainage import fit_bias, apply_bias, build_report  # noqa: E402

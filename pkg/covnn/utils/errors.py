# -*- coding: utf-8 -*-
# @Time    : 2024/10/8 10:12
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : errors.py


class CovnnError(Exception):
    """Base class of every error raised by covnn"""
    exit_code = 1


class ValidationError(CovnnError, ValueError):
    """Precondition failures: bad input, bad config, mismatched shapes"""
    exit_code = 2


class InvalidMatrix(ValidationError):
    pass


class DimensionError(ValidationError):
    pass


class InvalidRange(ValidationError):
    pass


class InsufficientSamples(ValidationError):
    pass


class InvalidThreshold(ValidationError):
    pass


class DegenerateCovariance(ValidationError):
    pass


class InvalidSubsample(ValidationError):
    pass


class TraceMismatch(ValidationError):
    pass


class DegenerateFit(ValidationError):
    pass


class DegenerateDesign(ValidationError):
    pass


class DegenerateInput(ValidationError):
    pass


class DegenerateEmbedding(ValidationError):
    pass


class KernelError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class EigenNoConvergence(CovnnError):
    pass


class DivergenceError(CovnnError):
    """Training produced a non-finite loss"""

    def __init__(self, message, last_stable_epoch=None):
        super().__init__(message)
        self.last_stable_epoch = last_stable_epoch


class CovnnIOError(CovnnError):
    """I/O failure, always carries the offending path"""

    def __init__(self, message, path=None):
        super().__init__(f"{message}: {path}" if path is not None else message)
        self.path = path

# -*- coding: utf-8 -*-
# @Time    : 2024/10/8 14:30
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : gsp.py

import logging

import numpy as np
from numpy.polynomial import polynomial as P

from .utils.errors import InvalidMatrix, DimensionError, InvalidRange, EigenNoConvergence

logger = logging.getLogger(__name__)

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
LIPSCHITZ_GRID = 1024


def as_signal(x, m=None):
    """
    Validate a graph signal (or an M x B block of signals)

    :param x: array-like, length M vector or M x B matrix
    :param m: int, expected number of nodes, default is None (no check)
    :return: numpy.ndarray of float64
    """
    x = np.asarray(x, dtype=float)
    if x.ndim not in (1, 2) or x.shape[0] < 1:
        raise DimensionError(f'graph signal must be a non-empty vector or block, got shape {x.shape}')
    if m is not None and x.shape[0] != m:
        raise DimensionError(f'signal has {x.shape[0]} nodes, operator has {m}')
    if not np.all(np.isfinite(x)):
        raise InvalidMatrix('graph signal has non-finite entries')
    return x


class FilterTaps(object):
    def __init__(self, taps):
        taps = np.atleast_1d(np.asarray(taps, dtype=float))
        if taps.ndim != 1 or taps.size < 1:
            raise InvalidRange('filter needs at least one tap')
        if not np.all(np.isfinite(taps)):
            raise InvalidMatrix('filter taps must be finite')
        self.taps = taps

    def __repr__(self):
        return f"FilterTaps(order={self.order}, taps={self.taps.tolist()})"

    def __len__(self):
        return self.taps.size

    @property
    def order(self):
        return self.taps.size - 1


def _as_taps(h):
    return h if isinstance(h, FilterTaps) else FilterTaps(h)


class SymmetricOperator(object):
    """
    A real symmetric matrix together with its eigendecomposition A = U diag(lambda) U^T,
    eigenvalues sorted descending. Instances are never mutated after construction.
    """

    def __init__(self, entries, eigvals, eigvecs):
        self.entries = entries
        self.eigvals = eigvals
        self.eigvecs = eigvecs
        for arr in (self.entries, self.eigvals, self.eigvecs):
            arr.setflags(write=False)

    def __repr__(self):
        return f"SymmetricOperator(M={self.size})"

    def __len__(self):
        return self.size

    @property
    def size(self):
        return self.entries.shape[0]


def _round_robin(m):
    """Rounds of disjoint (p, q) pairs covering every pair once (circle method)"""
    players = list(range(m)) + ([-1] if m % 2 else [])
    n = len(players)
    rounds = []
    for _ in range(n - 1):
        pairs = [(players[i], players[n - 1 - i]) for i in range(n // 2)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p >= 0 and q >= 0]
        if pairs:
            p, q = np.array(pairs).T
            rounds.append((p, q))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _jacobi(a, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """
    Cyclic Jacobi on a symmetric matrix, parallel ordering: every round rotates
    a set of disjoint (p, q) planes at once, one sweep visits every plane.

    :return: (eigvals unsorted, eigvecs as columns)
    """
    a = a.copy()
    m = a.shape[0]
    v = np.eye(m)
    norm = np.linalg.norm(a)
    if m == 1 or norm == 0:
        return np.diag(a).copy(), v
    rounds = _round_robin(m)
    for sweep in range(max_sweeps + 1):
        off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off < tol * norm:
            logger.debug('jacobi converged after %d sweeps (M=%d)', sweep, m)
            return np.diag(a).copy(), v
        if sweep == max_sweeps:
            break
        for p, q in rounds:
            apq = a[p, q]
            active = np.abs(apq) > 0
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            # A <- J^T A J, rows then columns
            rp, rq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * rp - s[:, None] * rq
            a[q, :] = s[:, None] * rp + c[:, None] * rq
            cp, cq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = cp * c - cq * s
            a[:, q] = cp * s + cq * c
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = vp * c - vq * s
            v[:, q] = vp * s + vq * c
    raise EigenNoConvergence(f'Jacobi did not converge in {max_sweeps} sweeps (off={off:.3e}, M={m})')


def canonicalize(eigvals, eigvecs):
    """
    Sort eigenpairs descending and fix eigenvector signs: the largest-magnitude entry
    of each eigenvector is positive, ties broken by the lowest index.
    """
    order = np.argsort(-eigvals, kind='stable')
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order].copy()
    mags = np.abs(eigvecs)
    peak = mags.max(axis=0)
    lead = np.argmax(mags >= peak - 1e-12 * np.maximum(peak, 1.0), axis=0)
    signs = np.sign(eigvecs[lead, np.arange(eigvecs.shape[1])])
    signs[signs == 0] = 1.0
    return eigvals, eigvecs * signs


def eigendecompose(matrix, method='jacobi'):
    """
    Eigendecomposition of a real symmetric matrix

    :param matrix: array-like, M x M, symmetric within 1e-9
    :param method: str, 'jacobi' (cyclic Jacobi rotations) or 'lapack' (numpy.linalg.eigh)
    :return: SymmetricOperator
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionError(f'expected a square matrix, got shape {a.shape}')
    if not np.all(np.isfinite(a)):
        raise InvalidMatrix('matrix has non-finite entries')
    if np.max(np.abs(a - a.T)) > 1e-9:
        raise InvalidMatrix('matrix is not symmetric within 1e-9')
    a = (a + a.T) / 2.0
    if method == 'jacobi':
        eigvals, eigvecs = _jacobi(a)
    elif method == 'lapack':
        eigvals, eigvecs = np.linalg.eigh(a)
    else:
        raise ValueError(f'unknown eigendecomposition method {method!r}')
    eigvals, eigvecs = canonicalize(eigvals, eigvecs)
    return SymmetricOperator(a, eigvals, eigvecs)


def operator_from_spectrum(eigvals, eigvecs):
    """Build an operator from a known spectrum, keeping the given eigenvectors"""
    eigvals = np.asarray(eigvals, dtype=float)
    eigvecs = np.asarray(eigvecs, dtype=float)
    order = np.argsort(-eigvals, kind='stable')
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]
    entries = (eigvecs * eigvals) @ eigvecs.T
    entries = (entries + entries.T) / 2.0
    return SymmetricOperator(entries, eigvals.copy(), eigvecs.copy())


def shift(op, x):
    """
    One graph shift, z = A x

    :param op: SymmetricOperator
    :param x: array-like, M vector or M x B block
    :return: numpy.ndarray
    """
    x = as_signal(x, op.size)
    return op.entries @ x


def apply_filter(op, h, x):
    """
    Polynomial graph filter z = sum_k h_k A^k x, evaluated by iterated shifts

    :param op: SymmetricOperator
    :param h: FilterTaps or array-like of taps
    :param x: array-like, M vector or M x B block
    :return: numpy.ndarray, same shape as x
    """
    h = _as_taps(h)
    x = as_signal(x, op.size)
    z = h.taps[0] * x
    shifted = x
    for hk in h.taps[1:]:
        shifted = op.entries @ shifted
        z = z + hk * shifted
    return z


def filter_matrix(op, h):
    """The M x M matrix H(A) = sum_k h_k A^k"""
    return apply_filter(op, h, np.eye(op.size))


def gft(op, x):
    x = as_signal(x, op.size)
    return op.eigvecs.T @ x


def igft(op, x_tilde):
    x_tilde = as_signal(x_tilde, op.size)
    return op.eigvecs @ x_tilde


def frequency_response(h, lambdas):
    """
    h(lambda) = sum_k h_k lambda^k (Horner evaluation)

    :param h: FilterTaps or array-like of taps
    :param lambdas: array-like of eigenvalues
    :return: numpy.ndarray
    """
    h = _as_taps(h)
    return P.polyval(np.asarray(lambdas, dtype=float), h.taps)


def spectral_filter(op, h, x):
    """Filter evaluated in the graph frequency domain, U diag(h(lambda)) U^T x"""
    x_tilde = gft(op, x)
    response = frequency_response(h, op.eigvals)
    if x_tilde.ndim == 2:
        response = response[:, None]
    return igft(op, response * x_tilde)


def lipschitz_bound(h, lambda_range, grid=LIPSCHITZ_GRID):
    """
    Empirical Lipschitz constant of the frequency response: max |h'(lambda)| on a grid

    :param h: FilterTaps or array-like of taps
    :param lambda_range: (low, high) interval containing the relevant eigenvalues
    :param grid: int, number of grid points, default is 1024
    :return: float
    """
    h = _as_taps(h)
    low, high = (float(v) for v in lambda_range)
    if not (np.isfinite(low) and np.isfinite(high)) or high < low:
        raise InvalidRange(f'empty or non-finite interval [{low}, {high}]')
    if h.order == 0:
        return 0.0
    lambdas = np.linspace(low, high, grid)
    return float(np.max(np.abs(P.polyval(lambdas, P.polyder(h.taps)))))


def response_bound(h, lambda_range, grid=LIPSCHITZ_GRID):
    """max |h(lambda)| on a grid over the interval"""
    h = _as_taps(h)
    low, high = (float(v) for v in lambda_range)
    if not (np.isfinite(low) and np.isfinite(high)) or high < low:
        raise InvalidRange(f'empty or non-finite interval [{low}, {high}]')
    return float(np.max(np.abs(frequency_response(h, np.linspace(low, high, grid)))))

"""
Partial Hermitian eigensolver.

Small problems (dim <= 4096) use a dense LAPACK decomposition restricted to
the requested index range; larger ones use ARPACK in shift-invert mode
below the Gershgorin lower bound.
"""

from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from gapforge.errors import InvalidParamsError, NoConvergenceError
from gapforge.operators.stencil import DENSE_LIMIT, HermitianOperator
from gapforge.utils.metrics import track_performance
import logging

logger = logging.getLogger(__name__)

MAX_RESTARTS = 500
EXTRA_VECTORS = 5

MatrixLike = Union[HermitianOperator, np.ndarray, sp.spmatrix]


@dataclass(frozen=True, eq=False)
class EigenPairs:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray

    @property
    def count(self) -> int:
        return self.values.shape[0]


def _as_matrix(H: MatrixLike):
    if isinstance(H, HermitianOperator):
        return H.matrix
    return H


def _gershgorin_lower(H) -> float:
    if sp.issparse(H):
        A = abs(H).tocsr()
        radius = np.asarray(A.sum(axis=1)).ravel() - abs(H.diagonal())
        return float(np.min(H.diagonal().real - radius))
    A = np.asarray(H)
    diag = np.real(np.diag(A))
    radius = np.abs(A).sum(axis=1) - np.abs(np.diag(A))
    return float(np.min(diag - radius))


def _residuals(H, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    R = H @ vectors - vectors * values[None, :]
    return np.linalg.norm(R, axis=0)


@track_performance("eigensolve")
def smallest_eigenpairs(
    H: MatrixLike, count: int, tol: float = 1e-9, backend: str = "auto"
) -> EigenPairs:
    A = _as_matrix(H)
    dim = A.shape[0]
    if not 1 <= count <= dim:
        raise InvalidParamsError(f"Requested {count} eigenpairs of a {dim}x{dim} matrix")
    if tol <= 0:
        raise InvalidParamsError(f"Eigensolver tolerance must be positive, got {tol}")

    if backend == "auto":
        backend = "dense" if dim <= DENSE_LIMIT else "arpack"

    if backend == "dense":
        dense = A.toarray() if sp.issparse(A) else np.asarray(A)
        values, vectors = sla.eigh(dense, subset_by_index=[0, count - 1])
    elif backend == "arpack":
        values, vectors = _shift_invert(A, count, tol)
    else:
        raise InvalidParamsError(f"Unknown eigensolver backend '{backend}'")

    order = np.argsort(values)
    values, vectors = values[order], vectors[:, order]
    residuals = _residuals(A, values, vectors)

    # Dense solves are accurate to round-off in ||H||, which may exceed tol on fine grids
    norm_est = float(abs(A).sum(axis=0).max()) if sp.issparse(A) else float(np.linalg.norm(A, 1))
    floor = 64 * np.finfo(float).eps * norm_est
    bound = np.maximum(tol, floor) * (1.0 + np.abs(values))
    if np.any(residuals > bound):
        worst = float(np.max(residuals - bound))
        raise NoConvergenceError(
            f"Eigenpair residuals exceed tolerance (excess {worst:.3e})",
            residual=float(residuals.max()),
        )
    return EigenPairs(values=values, vectors=vectors, residuals=residuals)


def _shift_invert(A, count: int, tol: float):
    dim = A.shape[0]
    sigma = _gershgorin_lower(A) - 1.0
    k = min(count + EXTRA_VECTORS, dim - 2)
    ncv = min(dim - 1, max(2 * k + 1, 20))
    try:
        values, vectors = eigsh(
            sp.csc_matrix(A),
            k=k,
            sigma=sigma,
            which="LM",
            tol=tol,
            ncv=ncv,
            maxiter=MAX_RESTARTS,
        )
    except ArpackNoConvergence as e:
        residual = float("nan")
        if e.eigenvalues is not None and len(e.eigenvalues):
            residual = float(_residuals(A, e.eigenvalues, e.eigenvectors).max())
        logger.error(f"ARPACK failed to converge: {e}")
        raise NoConvergenceError(f"Shift-invert Lanczos did not converge: {e}", residual=residual)
    order = np.argsort(values)[:count]
    return values[order], vectors[:, order]

"""Low-rank matrix fitting: truncated SVD, an alternating low-rank plus
sparse solver, orthogonal factor rectification, and sampling of factor
estimation errors for distributional checks."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LowRankFactors:
    """A rank-r factorization u @ diag(s) @ v.T of some K x L matrix.

    u (K, r) and v (L, r) have orthonormal columns and s holds the
    nonnegative singular values in descending order. The balanced split
    x = u * sqrt(s), y = v * sqrt(s) satisfies x @ y.T = matrix() and
    x.T @ x = y.T @ y = diag(s); factor estimation errors are measured
    in this normal form because it makes their row covariance isotropic
    per singular direction.
    """

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    @property
    def x(self) -> np.ndarray:
        return self.u * np.sqrt(self.s)

    @property
    def y(self) -> np.ndarray:
        return self.v * np.sqrt(self.s)

    @property
    def rank(self) -> int:
        return self.s.size

    def matrix(self) -> np.ndarray:
        return (self.u * self.s) @ self.v.T


@dataclass
class GodecResult:
    """Output of the alternating low-rank + sparse decomposition.

    low_rank + sparse approximates the input; factors holds the SVD factors
    of the final low-rank iterate; residual_history records the Frobenius
    norm of (input - low_rank - sparse) after every iteration.
    """

    low_rank: np.ndarray
    sparse: np.ndarray
    factors: LowRankFactors
    iterations: int
    converged: bool = True
    residual_history: list[float] = field(default_factory=list)

    @property
    def residual(self) -> float:
        return self.residual_history[-1]


def truncated_svd(mat: np.ndarray, rank: int) -> LowRankFactors:
    """Best rank-r approximation factors of a matrix (Eckart-Young).

    Signs are fixed so the largest-magnitude entry of each left singular
    vector is positive, making the factors reproducible across runs and
    linear-algebra backends.
    """
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={mat.ndim}")
    if not np.all(np.isfinite(mat)):
        raise ValueError("matrix entries must all be finite")
    k, l = mat.shape
    if not 1 <= rank <= min(k, l):
        raise ValueError(f"rank must satisfy 1 <= rank <= {min(k, l)}, got {rank}")
    u, s, vt = np.linalg.svd(mat, full_matrices=False)
    u, v = u[:, :rank], vt[:rank].T
    anchor = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[anchor, np.arange(rank)])
    signs[signs == 0] = 1.0
    return LowRankFactors(u=u * signs, s=s[:rank], v=v * signs)


def _keep_largest(mat: np.ndarray, count: int) -> np.ndarray:
    """Zero all but the `count` largest-magnitude entries."""
    if count == 0:
        return np.zeros_like(mat)
    flat = np.abs(mat).ravel()
    if count >= flat.size:
        return mat.copy()
    # Threshold by the count-th largest magnitude; ties are broken by
    # flat index so the kept set is deterministic.
    order = np.argsort(-flat, kind="stable")[:count]
    out = np.zeros_like(mat)
    out.ravel()[order] = mat.ravel()[order]
    return out


def godec(
    mat: np.ndarray,
    rank: int,
    sparse_count: int = 0,
    max_iter: int = 100,
    tol: float = 1e-7,
) -> GodecResult:
    """Alternating decomposition of a matrix into low-rank plus sparse parts.

    Each iteration projects (input - sparse) onto the rank-r manifold via
    truncated SVD, then rebuilds the sparse part from the `sparse_count`
    largest-magnitude residual entries. The residual norm is monotone
    non-increasing because each half-step solves its subproblem exactly.
    With sparse_count = 0 the result equals a single truncated SVD.

    Convergence: stops when the residual improves by less than `tol`
    relative to the input norm, or after `max_iter` iterations. The
    alternation is a local method starting from a zero sparse part, so a
    sparse component whose magnitude rivals the input's spectral norm can
    be absorbed by the first low-rank fit instead of being isolated.
    """
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={mat.ndim}")
    if sparse_count < 0:
        raise ValueError(f"sparse_count must be >= 0, got {sparse_count}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")

    scale = np.linalg.norm(mat)
    sparse = np.zeros_like(mat)
    history: list[float] = []
    factors = None
    converged = False
    prev = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        factors = truncated_svd(mat - sparse, rank)
        low_rank = factors.matrix()
        sparse = _keep_largest(mat - low_rank, sparse_count)
        res = float(np.linalg.norm(mat - low_rank - sparse))
        history.append(res)
        if sparse_count == 0 or prev - res <= tol * max(scale, 1.0):
            converged = True
            break
        prev = res

    assert factors is not None
    return GodecResult(
        low_rank=factors.matrix(),
        sparse=sparse,
        factors=factors,
        iterations=it,
        converged=converged,
        residual_history=history,
    )


def procrustes_rectify(
    x_hat: np.ndarray,
    y_hat: np.ndarray,
    x_ref: np.ndarray,
    y_ref: np.ndarray,
) -> np.ndarray:
    """Orthogonal matrix aligning estimated factors with reference factors.

    Returns the r x r orthogonal R minimizing
    ||x_hat R - x_ref||_F^2 + ||y_hat R - y_ref||_F^2,
    computed from the SVD of x_hat.T @ x_ref + y_hat.T @ y_ref as U @ V.T.
    Factorizations are only identified up to such a rotation, so estimation
    error is measured after applying R.
    """
    x_hat = np.asarray(x_hat, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    x_ref = np.asarray(x_ref, dtype=np.float64)
    y_ref = np.asarray(y_ref, dtype=np.float64)
    if x_hat.shape != x_ref.shape or y_hat.shape != y_ref.shape:
        raise ValueError("factor shapes must match their references")
    if x_hat.shape[1] != y_hat.shape[1]:
        raise ValueError(
            f"x and y must share the factor rank, got {x_hat.shape[1]} and {y_hat.shape[1]}"
        )
    cross = x_hat.T @ x_ref + y_hat.T @ y_ref
    if not cross.any():
        # Degenerate alignment problem: every orthogonal matrix attains the
        # same objective, so fall back to the identity.
        logger.warning("alignment cross-product is exactly zero; returning identity")
        return np.eye(cross.shape[0])
    u, _, vt = np.linalg.svd(cross)
    return u @ vt


def factor_error_samples(
    truth: LowRankFactors,
    trials: Sequence[LowRankFactors],
) -> tuple[np.ndarray, np.ndarray]:
    """Empirical row covariances of rectified factor estimation errors.

    For each trial factorization, finds the orthogonal rectification R
    aligning its balanced factors (x, y) with the truth's, then stacks the
    rows of (x_hat @ R - x_ref) across trials, and likewise for y. Returns
    the centered empirical r x r covariance of the stacked x-error rows and
    of the stacked y-error rows. Under small additive white noise of scale
    sigma0 both covariances approach sigma0^2 * diag(1/s) where s are the
    truth's singular values.
    """
    if len(trials) < 2:
        raise ValueError(f"need at least 2 trial factorizations, got {len(trials)}")
    x_ref, y_ref = truth.x, truth.y
    rank = truth.rank
    x_rows = np.empty((len(trials) * x_ref.shape[0], rank), dtype=np.float64)
    y_rows = np.empty((len(trials) * y_ref.shape[0], rank), dtype=np.float64)
    for i, trial in enumerate(trials):
        if trial.u.shape != truth.u.shape or trial.v.shape != truth.v.shape:
            raise ValueError("all trial factorizations must match the truth's shape")
        x_hat, y_hat = trial.x, trial.y
        r = procrustes_rectify(x_hat, y_hat, x_ref, y_ref)
        x_rows[i * x_ref.shape[0]:(i + 1) * x_ref.shape[0]] = x_hat @ r - x_ref
        y_rows[i * y_ref.shape[0]:(i + 1) * y_ref.shape[0]] = y_hat @ r - y_ref

    def _cov(rows: np.ndarray) -> np.ndarray:
        centered = rows - rows.mean(axis=0)
        return centered.T @ centered / rows.shape[0]

    return _cov(x_rows), _cov(y_rows)

"""End-to-end denoising: sliding-window low-rank fitting with overlap
averaging, plus the closed-form per-voxel variance cube produced from the
same per-patch factors at a small constant overhead."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cube import HsiCube, VoxelIndex, extract_patch
from .lowrank import LowRankFactors, godec, truncated_svd
from .uncertainty import CorrelationRule, aggregate_variance
from .windows import WindowConfig, aggregate_mean, enumerate_patches, patch_to_matrix

_log = logging.getLogger(__name__)

_SOLVERS = ("godec", "tsvd")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a denoising run needs besides the cube itself.

    sigma0 is the global noise std used only by the variance path; threads
    caps the patch-level worker count (1 = serial) and never changes the
    output bytes.
    """

    window: WindowConfig = WindowConfig()
    sigma0: float = 0.0
    correlation: CorrelationRule = CorrelationRule()
    solver: str = "godec"
    max_iter: int = 100
    tol: float = 1e-7
    threads: int = 1

    def __post_init__(self) -> None:
        if self.solver not in _SOLVERS:
            raise ValueError(f"solver must be one of {_SOLVERS}, got {self.solver!r}")
        if self.sigma0 < 0:
            raise ValueError(f"sigma0 must be >= 0, got {self.sigma0}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.tol <= 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")


def _fit_patch(mat: np.ndarray, cfg: PipelineConfig) -> tuple[np.ndarray, LowRankFactors, bool]:
    """Rank-r fit of one patch matrix: (approximation, factors, converged)."""
    w = cfg.window
    k = w.sparse_count(mat.size)
    if cfg.solver == "tsvd" or k == 0:
        f = truncated_svd(mat, w.rank)
        return f.matrix(), f, True
    res = godec(mat, w.rank, k, max_iter=cfg.max_iter, tol=cfg.tol)
    return res.low_rank, res.factors, res.converged


def _run_patches(cube: HsiCube, cfg: PipelineConfig, grid) -> list:
    """Fit every window; results are listed in canonical origin order.

    Each patch is an independent pure computation, so the worker count
    affects wall-clock only: results are collected in submission order and
    all reductions happen afterwards, in canonical order.
    """
    jside = cfg.window.patch_side
    p = cube.bands
    size = (jside, jside, p)

    def work(origin):
        mat = patch_to_matrix(extract_patch(cube, VoxelIndex(origin[0], origin[1], 0), size))
        approx, factors, converged = _fit_patch(mat, cfg)
        return approx.reshape(jside, jside, p), factors, converged

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(work, grid.origins))
    else:
        results = [work(o) for o in grid.origins]

    stalled = sum(1 for _, _, ok in results if not ok)
    if stalled:
        _log.warning("%d of %d patches hit the iteration cap before converging",
                     stalled, len(results))
    return results


def denoise(cube: HsiCube, cfg: PipelineConfig) -> HsiCube:
    """Sliding-window low-rank denoising with overlap averaging."""
    grid = enumerate_patches(cube.dims, cfg.window)
    results = _run_patches(cube, cfg, grid)
    return aggregate_mean(
        ((o, patch) for o, (patch, _, _) in zip(grid.origins, results)), grid
    )


def denoise_with_uq(cube: HsiCube, cfg: PipelineConfig) -> tuple[HsiCube, HsiCube]:
    """Denoise and also return the closed-form per-voxel variance cube.

    The variance reuses each window's fit factors, so the only additional
    work over `denoise` is the leverage arithmetic and one variance
    aggregation pass; no further matrix decompositions are run.
    """
    grid = enumerate_patches(cube.dims, cfg.window)
    results = _run_patches(cube, cfg, grid)
    mean = aggregate_mean(
        ((o, patch) for o, (patch, _, _) in zip(grid.origins, results)), grid
    )

    jside = cfg.window.patch_side
    p = cube.bands
    u_stack = np.stack([f.u for _, f, _ in results])
    v_stack = np.stack([f.v for _, f, _ in results])
    row_lev = np.einsum("nur,nur->nu", u_stack, u_stack)
    col_lev = np.einsum("nvr,nvr->nv", v_stack, v_stack)
    var_mats = row_lev[:, :, None] + col_lev[:, None, :]
    var_mats *= cfg.sigma0 * cfg.sigma0
    var_patches = var_mats.reshape(len(results), jside, jside, p)

    variance = aggregate_variance(var_patches, grid, cfg.correlation, copy=False)
    return mean, variance

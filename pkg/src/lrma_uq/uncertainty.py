"""Closed-form uncertainty of low-rank fits: per-entry variance from factor
leverage scores, a correlation model for overlapping windows, and the
aggregation of per-patch variances into a per-voxel variance cube."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .cube import HsiCube
from .lowrank import LowRankFactors
from .windows import PatchGrid, matrix_to_patch

Origin = tuple[int, int]

_MODES = ("overlap", "independent", "full")


@dataclass(frozen=True)
class LeverageMap:
    """Squared row norms of the orthonormal factors of a rank-r matrix fit.

    row_lev[u] + col_lev[v] scales the noise variance into the variance of
    the fitted entry (u, v); each vector is non-negative and sums to the
    fit rank.
    """

    row_lev: np.ndarray
    col_lev: np.ndarray

    def variance_matrix(self, sigma0: float) -> np.ndarray:
        """Per-entry variance sigma0^2 * (row_lev[u] + col_lev[v])."""
        if sigma0 < 0:
            raise ValueError(f"sigma0 must be >= 0, got {sigma0}")
        return (sigma0 * sigma0) * (self.row_lev[:, None] + self.col_lev[None, :])


@dataclass(frozen=True)
class CorrelationRule:
    """Correlation model for two windows' estimates of a shared voxel.

    overlap     -- fraction of patch-matrix entries the windows share (default)
    independent -- zero for distinct windows (lower aggregation bound)
    full        -- one for every window pair (upper aggregation bound)
    A window is always perfectly correlated with itself, in every mode.
    """

    mode: str = "overlap"

    def __post_init__(self) -> None:
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")

    def correlation(self, origin_p: Origin, origin_q: Origin, patch_side: int) -> float:
        if tuple(origin_p) == tuple(origin_q):
            return 1.0
        if self.mode == "independent":
            return 0.0
        if self.mode == "full":
            return 1.0
        return overlap_ratio(origin_p, origin_q, patch_side)


def leverage_map(factors: LowRankFactors) -> LeverageMap:
    """Leverage scores of the row and column spaces of a factorization."""
    return LeverageMap(
        row_lev=np.einsum("ur,ur->u", factors.u, factors.u),
        col_lev=np.einsum("vr,vr->v", factors.v, factors.v),
    )


def overlap_ratio(origin_p: Origin, origin_q: Origin, patch_side: int) -> float:
    """Fraction of patch-matrix entries shared by two same-sized windows.

    Windows span all bands, so the band axis cancels and the fraction equals
    shared spatial pixels over pixels per window. Symmetric, translation
    invariant, 1.0 for identical origins, 0.0 for disjoint footprints.
    """
    if patch_side < 1:
        raise ValueError(f"patch_side must be >= 1, got {patch_side}")
    dr = abs(origin_p[0] - origin_q[0])
    dc = abs(origin_p[1] - origin_q[1])
    if dr >= patch_side or dc >= patch_side:
        return 0.0
    return ((patch_side - dr) * (patch_side - dc)) / float(patch_side * patch_side)


def patch_variance(lev: LeverageMap, sigma0: float, patch_side: int, bands: int) -> np.ndarray:
    """Per-voxel variance of a denoised patch, in patch (3-D) layout."""
    k, l = lev.row_lev.size, lev.col_lev.size
    if k != patch_side * patch_side or l != bands:
        raise ValueError(
            f"leverage sizes ({k}, {l}) do not match patch ({patch_side ** 2}, {bands})"
        )
    return matrix_to_patch(lev.variance_matrix(sigma0), patch_side, bands)


def _uniform_step(starts: np.ndarray) -> int | None:
    """The common spacing of `starts`, or None if the spacing varies."""
    if starts.size < 2:
        return None
    d = np.diff(starts)
    return int(d[0]) if np.all(d == d[0]) else None


def _scatter_blocks(acc: np.ndarray, blocks: np.ndarray,
                    row_starts: np.ndarray, col_starts: np.ndarray) -> None:
    """acc[r:r+h, c:c+w, :] += blocks[i, j] over the (row, col) start grid.

    When starts are uniformly spaced, each axis is thinned to every g-th
    start (g = ceil(block extent / spacing)) so the strided destination
    views are disjoint and a single in-place add per thinned group is safe.
    Non-uniform spacings fall back to a per-block loop.
    """
    ni, nj, h, w, _ = blocks.shape
    sr = _uniform_step(row_starts)
    sc = _uniform_step(col_starts)
    gr = 1 if ni == 1 else (None if sr is None else -(-h // sr))
    gc = 1 if nj == 1 else (None if sc is None else -(-w // sc))
    if gr is None or gc is None:
        for i in range(ni):
            r = int(row_starts[i])
            for j in range(nj):
                c = int(col_starts[j])
                acc[r:r + h, c:c + w, :] += blocks[i, j]
        return
    es0, es1, es2 = acc.strides
    for oi in range(min(gr, ni)):
        rsub = row_starts[oi::gr]
        for oj in range(min(gc, nj)):
            csub = col_starts[oj::gc]
            sub = blocks[oi::gr, oj::gc]
            view = as_strided(
                acc[int(rsub[0]):, int(csub[0]):, :],
                shape=sub.shape,
                strides=(
                    (sr * gr * es0) if sub.shape[0] > 1 else 0,
                    (sc * gc * es1) if sub.shape[1] > 1 else 0,
                    es0, es1, es2,
                ),
            )
            view += sub


def _runs(vals: np.ndarray) -> Iterable[tuple[int, int, int]]:
    """Contiguous runs of equal value: yields (start, stop, value)."""
    b = 0
    for k in range(1, len(vals) + 1):
        if k == len(vals) or vals[k] != vals[b]:
            yield b, k, int(vals[b])
            b = k


def _add_cross_terms(num: np.ndarray, stds: np.ndarray, grid: PatchGrid) -> None:
    """Accumulate 2 * corr * sigma_p * sigma_q over unordered window pairs.

    Pairs are grouped by their relative origin offset; within a group the
    shared region is a fixed slice of both patches and the correlation is a
    single constant, so the whole group multiplies and scatters at once.
    """
    jside = grid.config.patch_side
    ro, co = grid.row_origins, grid.col_origins
    nr, nc = ro.size, co.size
    inv_area = 1.0 / (jside * jside)
    scratch = None  # one product buffer reused by every offset group
    for di in range(nr):
        if di and int((ro[di:] - ro[:nr - di]).min()) >= jside:
            break
        for dj in range(-(nc - 1), nc):
            if di == 0 and dj <= 0:
                continue  # count each unordered pair once
            pj0 = max(0, -dj)
            pj1 = nc - max(0, dj)
            if pj1 <= pj0:
                continue
            drs = ro[di:] - ro[:nr - di]
            dcs = co[pj0 + dj:pj1 + dj] - co[pj0:pj1]
            if int(np.abs(dcs).min()) >= jside:
                continue
            for ib, ie, dr in _runs(drs):
                if dr >= jside:
                    continue
                h = jside - dr
                for jb, je, dc in _runs(dcs):
                    adc = abs(dc)
                    if adc >= jside:
                        continue
                    w = jside - adc
                    scale = 2.0 * ((jside - dr) * (jside - adc)) * inv_area
                    pi = slice(ib, ie)
                    qi = slice(ib + di, ie + di)
                    pj = slice(pj0 + jb, pj0 + je)
                    qj = slice(pj0 + jb + dj, pj0 + je + dj)
                    pr, qr = slice(dr, jside), slice(0, h)
                    if dc >= 0:
                        pc, qc = slice(adc, jside), slice(0, w)
                    else:
                        pc, qc = slice(0, w), slice(adc, jside)
                    if scratch is None:
                        scratch = np.empty_like(stds)
                    blocks = scratch[:ie - ib, :je - jb, :h, :w, :]
                    np.multiply(
                        stds[pi, pj, pr, pc, :], stds[qi, qj, qr, qc, :], out=blocks
                    )
                    blocks *= scale
                    dest_rows = ro[qi]
                    dest_cols = co[qj] if dc >= 0 else co[pj]
                    _scatter_blocks(num, blocks, dest_rows, dest_cols)


def aggregate_variance(
    patch_vars: Iterable[tuple[Origin, np.ndarray]] | np.ndarray,
    grid: PatchGrid,
    rule: CorrelationRule = CorrelationRule(),
    copy: bool = True,
) -> HsiCube:
    """Combine per-patch variances into the variance of the averaged cube.

    Each voxel's output is the mean of the covering windows' estimates, so
    its variance is (1/phi^2) * [sum of per-window variances + 2 * sum over
    unordered window pairs of corr * sigma_p * sigma_q], phi being the
    cover count; the pair correlation is set by `rule`. One variance patch
    per grid origin is required; entries must be non-negative.

    patch_vars may also be a single (len(grid.origins), J, J, P) array
    holding the patches in grid.origins order, which skips the per-patch
    ingest loop. With copy=False such an array may be consumed as working
    storage and holds garbage afterwards.
    """
    jside = grid.config.patch_side
    m, n, p = grid.dims
    ro, co = grid.row_origins, grid.col_origins
    if isinstance(patch_vars, np.ndarray):
        expected = (ro.size * co.size, jside, jside, p)
        if patch_vars.shape != expected:
            raise ValueError(
                f"variance patch array shape {patch_vars.shape} does not "
                f"match {expected}"
            )
        stack = patch_vars.astype(np.float64, copy=False)
        if copy and stack is patch_vars:
            stack = stack.copy()
        stack = stack.reshape(ro.size, co.size, jside, jside, p)
        return _aggregate_stack(stack, grid, rule)
    ri = {int(v): k for k, v in enumerate(ro)}
    ci = {int(v): k for k, v in enumerate(co)}
    stack = np.empty((ro.size, co.size, jside, jside, p), dtype=np.float64)
    seen = np.zeros((ro.size, co.size), dtype=bool)
    for origin, var_patch in patch_vars:
        r, c = int(origin[0]), int(origin[1])
        if r not in ri or c not in ci:
            raise ValueError(f"origin {(r, c)} is not in the grid")
        i, j = ri[r], ci[c]
        if seen[i, j]:
            raise ValueError(f"duplicate variance patch for origin {(r, c)}")
        var_patch = np.asarray(var_patch, dtype=np.float64)
        if var_patch.shape != (jside, jside, p):
            raise ValueError(
                f"variance patch shape {var_patch.shape} does not match "
                f"({jside}, {jside}, {p})"
            )
        stack[i, j] = var_patch
        seen[i, j] = True
    if not seen.all():
        missing = [(int(ro[i]), int(co[j])) for i, j in zip(*np.nonzero(~seen))]
        raise ValueError(f"missing variance patch for origins {missing[:5]}")
    return _aggregate_stack(stack, grid, rule)


def _aggregate_stack(stack: np.ndarray, grid: PatchGrid, rule: CorrelationRule) -> HsiCube:
    """Reduce the (rows, cols, J, J, P) variance stack; consumes `stack`."""
    if stack.min() < 0:
        raise ValueError("negative input variance")
    m, n, p = grid.dims
    ro, co = grid.row_origins, grid.col_origins
    num = np.zeros((m, n, p), dtype=np.float64)
    if rule.mode == "full":
        np.sqrt(stack, out=stack)
        _scatter_blocks(num, stack, ro, co)
        np.square(num, out=num)
    else:
        _scatter_blocks(num, stack, ro, co)
        if rule.mode == "overlap":
            _add_cross_terms(num, np.sqrt(stack, out=stack), grid)
    np.divide(num, grid.coverage.data, out=num)
    np.divide(num, grid.coverage.data, out=num)
    return HsiCube(num, copy=False)

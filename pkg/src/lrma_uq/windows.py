"""Sliding-window geometry: patch enumeration, coverage counts, the 3D<->2D
patch reshaping, and mean aggregation of overlapping denoised patches."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .cube import HsiCube, VoxelIndex, hadamard_divide, scatter_add_patch

Origin = tuple[int, int]


@dataclass(frozen=True)
class WindowConfig:
    """Sliding-window parameters.

    patch_side  -- spatial side length of the square window (default 20)
    step        -- stride between window origins (default 4)
    rank        -- target rank of the per-patch low-rank fit (default 7)
    sparse_card -- sparse-entry budget for the solver: an absolute count
                   (int >= 1), a fraction of patch entries (0 < float < 1),
                   or 0 to disable the sparse term (default)
    """

    patch_side: int = 20
    step: int = 4
    rank: int = 7
    sparse_card: float = 0

    def __post_init__(self) -> None:
        if self.patch_side < 1:
            raise ValueError(f"patch_side must be >= 1, got {self.patch_side}")
        if not 1 <= self.step <= self.patch_side:
            raise ValueError(
                f"step must satisfy 1 <= step <= patch_side, got step={self.step}"
            )
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if self.sparse_card < 0:
            raise ValueError(f"sparse_card must be >= 0, got {self.sparse_card}")

    def validate_for(self, dims: tuple[int, int, int]) -> None:
        """Check the window against concrete cube dims."""
        m, n, p = dims
        if self.patch_side > min(m, n):
            raise ValueError(
                f"patch_side {self.patch_side} exceeds spatial dims {m}x{n}"
            )
        if self.rank > min(self.patch_side * self.patch_side, p):
            raise ValueError(
                f"rank {self.rank} exceeds min(patch_side^2, bands) = "
                f"{min(self.patch_side ** 2, p)}"
            )

    def sparse_count(self, n_entries: int) -> int:
        """Resolve sparse_card to an absolute entry count for a patch matrix."""
        if self.sparse_card == 0:
            return 0
        if 0 < self.sparse_card < 1:
            return int(round(self.sparse_card * n_entries))
        return int(self.sparse_card)


def _axis_origins(extent: int, patch_side: int, step: int) -> np.ndarray:
    # Strided origins 0, s, 2s, ... plus a clamped final origin at extent-J
    # whenever the stride does not land there, so the border is always covered.
    last = extent - patch_side
    origins = set(range(0, last + 1, step))
    origins.add(last)
    return np.array(sorted(origins), dtype=np.int64)


@dataclass
class PatchGrid:
    """The enumerated window set and its per-voxel coverage counts.

    origins are lexicographically sorted (row, col) pairs forming the full
    cross product of per-axis origin lists; coverage holds, for every voxel,
    the number of windows whose footprint contains it (>= 1 everywhere).
    """

    dims: tuple[int, int, int]
    config: WindowConfig
    origins: list[Origin]
    coverage: HsiCube
    row_origins: np.ndarray
    col_origins: np.ndarray

    def __len__(self) -> int:
        return len(self.origins)

    def covering_origins(self, row: int, col: int) -> list[Origin]:
        """Origins of all windows containing spatial pixel (row, col).

        Derived from arithmetic on the per-axis origin lists rather than a
        stored per-voxel table.
        """
        j = self.config.patch_side
        rows = self.row_origins[(self.row_origins <= row) & (row < self.row_origins + j)]
        cols = self.col_origins[(self.col_origins <= col) & (col < self.col_origins + j)]
        return [(int(r), int(c)) for r in rows for c in cols]


def enumerate_patches(dims: tuple[int, int, int], config: WindowConfig) -> PatchGrid:
    """Enumerate all sliding-window origins over `dims` and count coverage."""
    config.validate_for(dims)
    m, n, p = dims
    j = config.patch_side
    row_origins = _axis_origins(m, j, config.step)
    col_origins = _axis_origins(n, j, config.step)
    origins = [(int(r), int(c)) for r in row_origins for c in col_origins]

    # Coverage factorizes over axes because the origin set is a cross product.
    row_counts = np.zeros(m, dtype=np.float64)
    for r in row_origins:
        row_counts[r:r + j] += 1.0
    col_counts = np.zeros(n, dtype=np.float64)
    for c in col_origins:
        col_counts[c:c + j] += 1.0
    plane = np.outer(row_counts, col_counts)
    coverage = HsiCube(np.repeat(plane[:, :, None], p, axis=2), copy=False)

    return PatchGrid(
        dims=dims,
        config=config,
        origins=origins,
        coverage=coverage,
        row_origins=row_origins,
        col_origins=col_origins,
    )


def patch_to_matrix(patch: np.ndarray) -> np.ndarray:
    """Reshape a (J, J, P) full-band patch into a (J*J) x P matrix.

    Row u is spatial pixel u in row-major order; column v is band v.
    """
    patch = np.asarray(patch)
    if patch.ndim != 3:
        raise ValueError(f"patch must be 3-D, got ndim={patch.ndim}")
    h, w, p = patch.shape
    return patch.reshape(h * w, p)


def matrix_to_patch(mat: np.ndarray, patch_side: int, bands: int) -> np.ndarray:
    """Exact inverse of `patch_to_matrix` for a square spatial window."""
    mat = np.asarray(mat)
    if mat.shape != (patch_side * patch_side, bands):
        raise ValueError(
            f"matrix shape {mat.shape} does not match "
            f"({patch_side * patch_side}, {bands})"
        )
    return mat.reshape(patch_side, patch_side, bands)


def voxel_to_matrix_index(xi: VoxelIndex, origin: Origin, patch_side: int) -> tuple[int, int]:
    """Map a cube voxel inside a window's footprint to its (row, col) position
    in the permuted patch matrix."""
    orow, ocol = origin
    dr = xi.row - orow
    dc = xi.col - ocol
    if not (0 <= dr < patch_side and 0 <= dc < patch_side):
        raise ValueError(
            f"voxel {tuple(xi)} is outside the footprint of origin {origin} "
            f"with side {patch_side}"
        )
    return dr * patch_side + dc, xi.band


def aggregate_mean(
    denoised_patches: Iterable[tuple[Origin, np.ndarray]] | Sequence[tuple[Origin, np.ndarray]],
    grid: PatchGrid,
) -> HsiCube:
    """Average overlapping denoised patches into a full cube.

    Patches are scatter-added in canonical (sorted-origin) order and the sum
    is divided element-wise by the coverage counts, so every voxel is the
    mean of the windows covering it. The patch set must match the grid.
    """
    by_origin = {origin: patch for origin, patch in denoised_patches}
    missing = [o for o in grid.origins if o not in by_origin]
    if missing:
        raise ValueError(f"missing denoised patch for origins {missing[:5]}")
    if len(by_origin) != len(grid.origins):
        extra = set(by_origin) - set(grid.origins)
        raise ValueError(f"patches supplied for origins not in grid: {sorted(extra)[:5]}")

    acc = HsiCube.zeros(grid.dims)
    for origin in grid.origins:  # canonical order keeps the sum bit-reproducible
        scatter_add_patch(acc, VoxelIndex(origin[0], origin[1], 0), by_origin[origin])
    return hadamard_divide(acc, grid.coverage)

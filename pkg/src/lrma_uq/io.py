"""Bit-exact serialization: a minimal binary cube container and CSV report
writers whose float fields round-trip exactly.

Container layout: one ASCII header line
    HSIC1 M N P {f32|f64} BSQ LE\n
followed by exactly M*N*P little-endian scalars in band-sequential order
(all of band 0 row-major, then band 1, ...). f64 cubes round-trip
bit-identically; f32 narrows with round-to-nearest-even and is lossy.
"""

from __future__ import annotations

import csv

import numpy as np

from .cube import HsiCube
from .validate import (
    ImpulseSweepReport,
    McReport,
    NormalityReport,
    RankSweepReport,
    TimingReport,
)

_MAGIC = "HSIC1"
_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


class ContainerError(ValueError):
    """A cube file does not conform to the container layout."""


class BadMagicError(ContainerError):
    """The file does not start with the container magic."""


class UnknownDtypeError(ContainerError):
    """The header names a dtype other than f32/f64."""


class TruncatedPayloadError(ContainerError):
    """The payload holds fewer bytes than the header promises."""


def write_cube(cube: HsiCube, path: str, dtype: str = "f64") -> None:
    """Serialize a cube; dtype "f32" narrows lossily, "f64" is exact."""
    if dtype not in _DTYPES:
        raise UnknownDtypeError(f"dtype must be one of {sorted(_DTYPES)}, got {dtype!r}")
    m, n, p = cube.dims
    header = f"{_MAGIC} {m} {n} {p} {dtype} BSQ LE\n"
    payload = np.ascontiguousarray(np.moveaxis(cube.data, 2, 0), dtype=_DTYPES[dtype])
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(payload.tobytes())


def read_cube(path: str) -> HsiCube:
    """Read a container back into a cube (f32 widens to f64 in memory)."""
    with open(path, "rb") as fh:
        header = fh.readline(256)
        if not header.endswith(b"\n"):
            raise ContainerError("header line missing or unterminated")
        fields = header.decode("ascii", errors="replace").split()
        if not fields or fields[0] != _MAGIC:
            raise BadMagicError(
                f"bad magic: expected {_MAGIC!r}, got {fields[0] if fields else ''!r}"
            )
        if len(fields) != 7:
            raise ContainerError(f"header must have 7 fields, got {len(fields)}")
        try:
            m, n, p = (int(fields[i]) for i in (1, 2, 3))
        except ValueError:
            raise ContainerError(f"non-integer dims in header: {fields[1:4]}") from None
        if min(m, n, p) < 1:
            raise ContainerError(f"dims must be positive, got {(m, n, p)}")
        if fields[4] not in _DTYPES:
            raise UnknownDtypeError(f"unknown dtype {fields[4]!r}")
        if fields[5] != "BSQ" or fields[6] != "LE":
            raise ContainerError(
                f"layout/endianness must be 'BSQ LE', got {fields[5]!r} {fields[6]!r}"
            )
        dt = _DTYPES[fields[4]]
        expected = m * n * p * dt.itemsize
        payload = fh.read(expected)
        if len(payload) < expected:
            raise TruncatedPayloadError(
                f"truncated payload: expected {expected} bytes, got {len(payload)}"
            )
        if fh.read(1):
            raise ContainerError("trailing bytes after payload")
    data = np.frombuffer(payload, dtype=dt).reshape(p, m, n)
    return HsiCube(np.moveaxis(data, 0, 2), copy=True)


def _fmt(value) -> str:
    """17-significant-digit text for floats (exact float64 round trip)."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _write_rows(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_report_csv(report, path: str) -> None:
    """Write a report as UTF-8 CSV with a fixed header per report type.

    Column orders:
      McReport           sigma0,impulse_ratio,T,mean_coverage,std_coverage
      NormalityReport    n,sw_statistic,p_value
      RankSweepReport    rank,mean_coverage
      ImpulseSweepReport sigma0,impulse_ratio,mean_coverage,std_coverage
      TimingReport       mc_trials,mc_total_s,lrma_only_s,lrma_plus_uq_s
    """
    if isinstance(report, McReport):
        _write_rows(
            path,
            ["sigma0", "impulse_ratio", "T", "mean_coverage", "std_coverage"],
            [[report.sigma0, report.impulse_ratio, report.trials,
              report.mean_coverage, report.std_coverage]],
        )
    elif isinstance(report, NormalityReport):
        _write_rows(
            path,
            ["n", "sw_statistic", "p_value"],
            [[report.n, report.sw_statistic, report.p_value]],
        )
    elif isinstance(report, RankSweepReport):
        _write_rows(path, ["rank", "mean_coverage"], [list(r) for r in report.rows])
    elif isinstance(report, ImpulseSweepReport):
        _write_rows(
            path,
            ["sigma0", "impulse_ratio", "mean_coverage", "std_coverage"],
            [list(r) for r in report.rows],
        )
    elif isinstance(report, TimingReport):
        _write_rows(
            path,
            ["mc_trials", "mc_total_s", "lrma_only_s", "lrma_plus_uq_s"],
            [[report.mc_trials, report.mc_total_s,
              report.lrma_only_s, report.lrma_plus_uq_s]],
        )
    else:
        raise TypeError(f"no CSV schema for report type {type(report).__name__}")


def write_qq_csv(pairs: np.ndarray, path: str) -> None:
    """Write Q-Q pairs as a two-column CSV sorted by theoretical quantile."""
    pairs = np.asarray(pairs, dtype=np.float64)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError(f"pairs must be (n, 2), got shape {pairs.shape}")
    order = np.argsort(pairs[:, 0], kind="stable")
    _write_rows(path, ["theoretical", "empirical"], [list(r) for r in pairs[order]])


def read_report_csv(path: str) -> tuple[list[str], list[list[float]]]:
    """Parse back a report CSV: (header, numeric rows)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"empty CSV: {path}") from None
        rows = [[float(tok) for tok in row] for row in reader]
    return header, rows

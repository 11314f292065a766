"""File formats: CSV tables, flat key/value configs and run manifests.

Floats are written with 17 significant digits so that every value
round-trips bit-exactly; Python's float formatting is locale-independent.
Outputs are write-once: they are assembled in ``<name>.partial`` and renamed
into place, and an existing file is only replaced with ``force=True``.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dynamics import CorrelationSeries
from .models import PhaseLabel

OUTPUT_DIR_ENV = "NUCQML_OUTPUT_DIR"
PARTIAL_SUFFIX = ".partial"


class DataError(ValueError):
    """Malformed or inconsistent input file."""


class OutputExistsError(FileExistsError):
    pass


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "."))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


# -- write-once outputs ------------------------------------------------------


class AtomicWriter:
    """Line-oriented writer that only materializes the target on ``commit``."""

    def __init__(self, path, force: bool = False):
        self.path = Path(path)
        if self.path.exists() and not force:
            raise OutputExistsError(f"{self.path} exists (use --force to replace it)")
        self.partial = self.path.with_name(self.path.name + PARTIAL_SUFFIX)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.partial, "w", encoding="utf-8", newline="\n")

    def write(self, text: str) -> None:
        self._fh.write(text)

    def flush(self) -> None:
        self._fh.flush()

    def commit(self) -> Path:
        self._fh.close()
        os.replace(self.partial, self.path)
        return self.path

    def abandon(self) -> None:
        """Close but keep the ``.partial`` file as evidence of the interruption."""
        if not self._fh.closed:
            self._fh.close()


def write_text(path, text: str, force: bool = False) -> Path:
    w = AtomicWriter(path, force)
    try:
        w.write(text)
    except BaseException:
        w.abandon()
        raise
    return w.commit()


# -- CSV tables ----------------------------------------------------------------


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def series_csv(series: CorrelationSeries) -> str:
    return csv_text(("t", "cz"), zip(series.times, series.values))


def read_csv(path, expected_header: Sequence[str] | None = None) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataError(f"{path}: empty file")
    header = lines[0].strip().split(",")
    if expected_header is not None and header != list(expected_header):
        raise DataError(f"{path}: line 1: expected header {','.join(expected_header)}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.strip().split(",")
        if len(cells) != len(header):
            raise DataError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(cells)}")
        rows.append((lineno, cells))
    return header, rows


def _float(path, lineno, cell) -> float:
    try:
        return float(cell)
    except ValueError:
        raise DataError(f"{path}: line {lineno}: not a number: {cell!r}") from None


def read_series_csv(path, pair=(0, 1)) -> CorrelationSeries:
    _, rows = read_csv(path, ("t", "cz"))
    t = [_float(path, n, c[0]) for n, c in rows]
    v = [_float(path, n, c[1]) for n, c in rows]
    try:
        return CorrelationSeries(tuple(pair), np.array(t), np.array(v))
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


DATASET_PREFIX = ("chi", "sigma", "lambda", "label", "mode")


def dataset_header(n_samples: int) -> list[str]:
    return [*DATASET_PREFIX, *(f"cz_{k}" for k in range(n_samples))]


def dataset_rows_csv(samples, with_header: bool = False) -> str:
    """CSV lines for ``PhaseSample`` objects (optionally with the header)."""
    lines = []
    if with_header and samples:
        lines.append(",".join(dataset_header(len(samples[0].series))))
    for s in samples:
        p = s.params
        head = [fmt(p.chi), fmt(p.sigma), fmt(p.lam), str(int(s.label)), s.mode]
        lines.append(",".join(head + [fmt(v) for v in s.series.values]))
    return "".join(line + "\n" for line in lines)


@dataclass
class DatasetTable:
    points: np.ndarray
    series: np.ndarray
    labels: np.ndarray
    modes: list = field(default_factory=list)

    def __len__(self) -> int:
        return self.labels.size


def read_dataset(path) -> DatasetTable:
    header, rows = read_csv(path)
    n_cz = len(header) - len(DATASET_PREFIX)
    if tuple(header[: len(DATASET_PREFIX)]) != DATASET_PREFIX or n_cz < 1 or header[5:] != [
        f"cz_{k}" for k in range(n_cz)
    ]:
        raise DataError(f"{path}: line 1: expected header chi,sigma,lambda,label,mode,cz_0,...")
    if not rows:
        raise DataError(f"{path}: no data rows")
    pts = np.empty((len(rows), 3))
    X = np.empty((len(rows), n_cz))
    y = np.empty(len(rows), dtype=np.int64)
    modes = []
    for i, (lineno, cells) in enumerate(rows):
        pts[i] = [_float(path, lineno, c) for c in cells[:3]]
        try:
            y[i] = int(PhaseLabel(int(cells[3])))
        except ValueError:
            raise DataError(f"{path}: line {lineno}: bad label {cells[3]!r}") from None
        modes.append(cells[4])
        X[i] = [_float(path, lineno, c) for c in cells[5:]]
    return DatasetTable(pts, X, y, modes)


POINTS_HEADER = ("epsilon", "chi", "sigma", "lambda", "j")


def read_points_csv(path):
    """Parameter points, one ``epsilon,chi,sigma,lambda,j`` row each."""
    from .models import AgassiParams

    _, rows = read_csv(path, POINTS_HEADER)
    out = []
    for lineno, cells in rows:
        eps, chi, sig, lam = (_float(path, lineno, c) for c in cells[:4])
        try:
            out.append(AgassiParams(eps, chi, sig, lam, int(cells[4])))
        except ValueError as exc:
            raise DataError(f"{path}: line {lineno}: {exc}") from None
    if not out:
        raise DataError(f"{path}: no data rows")
    return out


def training_log_csv(history) -> str:
    return csv_text(("epoch", "train_loss", "test_acc"), ((str(e), l, a) for e, l, a in history))


# -- configs & manifests ---------------------------------------------------------


def parse_config(text: str, source: str = "<config>") -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment.

    A run manifest is accepted too: only its ``config.*`` entries are used, so
    a manifest can be fed back to reproduce the run.
    """
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise DataError(f"{source}: line {lineno}: expected key = value")
        entries[key.strip()] = value.strip()
    if "command" in entries:
        entries = {k[len("config."):]: v for k, v in entries.items() if k.startswith("config.")}
    return entries


def read_config(path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such config file")
    return parse_config(path.read_text(encoding="utf-8"), str(path))


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    version: str
    started: str = ""
    finished: str = ""
    digests: dict = field(default_factory=dict)

    def record(self, path) -> None:
        self.digests[str(path)] = sha256_file(path)

    def text(self) -> str:
        lines = [
            f"command = {self.command}",
            f"version = {self.version}",
            f"seed = {self.seed}",
            f"started = {self.started}",
            f"finished = {self.finished}",
        ]
        lines += [f"config.{k} = {_config_value(v)}" for k, v in sorted(self.config.items())]
        lines += [f"digest.{k} = {v}" for k, v in sorted(self.digests.items())]
        return "\n".join(lines) + "\n"


def _config_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return fmt(v)
    if isinstance(v, (list, tuple)):
        return ",".join(_config_value(x) for x in v)
    return "" if v is None else str(v)

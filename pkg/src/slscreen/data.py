"""Datasets: synthetic generation and on-disk formats."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import InvalidCovariance, InvalidDataset, ParseError

PathLike = Union[str, Path]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix ``a`` (m x n) with labels ``y`` in {-1, +1}.

    Arrays are copied and frozen on construction.
    """

    a: np.ndarray
    y: np.ndarray
    feature_names: Optional[tuple] = None
    true_support: Optional[frozenset] = None

    def __post_init__(self):
        a = np.array(self.a, dtype=np.float64, order="C", copy=True)
        y = np.array(self.y, dtype=np.float64, copy=True).ravel()
        if a.ndim != 2:
            raise InvalidDataset(f"design matrix must be 2-D, got shape {a.shape}")
        m, n = a.shape
        if m < 1 or n < 1:
            raise InvalidDataset(f"empty design matrix {a.shape}")
        if y.shape[0] != m:
            raise InvalidDataset(f"{y.shape[0]} labels for {m} rows")
        if not np.all(np.isfinite(a)):
            raise InvalidDataset("design matrix has non-finite entries")
        if not np.all((y == 1.0) | (y == -1.0)):
            raise InvalidDataset("labels must be -1 or +1")
        a.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "y", y)
        if self.feature_names is not None:
            names = tuple(str(s) for s in self.feature_names)
            if len(names) != n:
                raise InvalidDataset(f"{len(names)} feature names for {n} columns")
            object.__setattr__(self, "feature_names", names)
        if self.true_support is not None:
            sup = frozenset(int(j) for j in self.true_support)
            if any(j < 0 or j >= n for j in sup):
                raise InvalidDataset("true_support index out of range")
            object.__setattr__(self, "true_support", sup)

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def n(self) -> int:
        return self.a.shape[1]

    def columns(self, idx) -> "Dataset":
        """Sub-dataset restricted to the given feature columns."""
        idx = np.asarray(idx, dtype=np.int64)
        names = None if self.feature_names is None else [self.feature_names[j] for j in idx]
        return Dataset(self.a[:, idx], self.y, feature_names=names)


@dataclass(frozen=True)
class SyntheticConfig:
    n: int
    m: int
    k: int
    s: float
    seed: int = 0
    # None means identity.
    covariance: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be positive")
        if not 1 <= self.k <= self.n:
            raise ValueError(f"k must lie in [1, n], got k={self.k}, n={self.n}")
        if self.s < 0 or not math.isfinite(self.s):
            raise ValueError("s must be a finite nonnegative number")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def true_support_indices(n: int, k: int) -> np.ndarray:
    """Equi-spaced support floor(j*n/k), j = 0..k-1."""
    return (np.arange(k, dtype=np.int64) * n) // k


def _covariance_factor(cov: np.ndarray, n: int) -> np.ndarray:
    cov = np.asarray(cov, dtype=np.float64)
    if cov.shape != (n, n):
        raise InvalidCovariance(f"covariance must be {n}x{n}, got {cov.shape}")
    if not np.all(np.isfinite(cov)) or np.max(np.abs(cov - cov.T)) > 1e-12:
        raise InvalidCovariance("covariance is not symmetric")
    w, v = np.linalg.eigh(cov)
    # eigenvalue tolerance relative to the spectrum scale
    tol = 1e-10 * max(1.0, float(np.max(np.abs(w))))
    if w.min() < -tol:
        raise InvalidCovariance(f"covariance has negative eigenvalue {w.min():.3e}")
    return v * np.sqrt(np.clip(w, 0.0, None))


def _sigmoid(t):
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def gen_synthetic(cfg: SyntheticConfig) -> Dataset:
    """Gaussian design with an equi-spaced 0/1 true coefficient vector.

    Draw order: all of ``a`` row-major, then one uniform per label.
    """
    rng = np.random.default_rng(cfg.seed)
    z = rng.standard_normal((cfg.m, cfg.n))
    if cfg.covariance is None:
        a = z
    else:
        a = z @ _covariance_factor(cfg.covariance, cfg.n).T
    support = true_support_indices(cfg.n, cfg.k)
    margin = cfg.s * a[:, support].sum(axis=1)
    u = rng.random(cfg.m)
    y = np.where(u < _sigmoid(margin), 1.0, -1.0)
    return Dataset(a, y, true_support=frozenset(support.tolist()))


def standardize_columns(d: Dataset) -> Dataset:
    """Scale every nonzero column to unit sample variance (no centering)."""
    sd = d.a.std(axis=0)
    sd[sd == 0] = 1.0
    return Dataset(d.a / sd, d.y, d.feature_names, d.true_support)


def add_intercept_column(d: Dataset) -> Dataset:
    """Append a constant column. It is penalized like any other feature."""
    a = np.hstack([d.a, np.ones((d.m, 1))])
    names = None if d.feature_names is None else list(d.feature_names) + ["intercept"]
    return Dataset(a, d.y, names, d.true_support)


# --------------------------------------------------------------------------- #
# dense CSV


@dataclass(frozen=True)
class CsvOptions:
    label_column: int = 0
    # True / False, or None to detect a non-numeric first row
    header: Optional[bool] = None
    delimiter: str = ","


def _parse_label(tok: str, line: int, col: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"unparseable label {tok!r}", line, col) from None
    if v == 1.0:
        return 1.0
    if v == -1.0 or v == 0.0:
        return -1.0
    raise ParseError(f"label {tok!r} not in {{-1, 0, 1}}", line, col)


def _looks_numeric(row: Sequence[str]) -> bool:
    try:
        for tok in row:
            float(tok)
    except ValueError:
        return False
    return True


def load_dense_csv(path: PathLike, options: CsvOptions = CsvOptions()) -> Dataset:
    """Read a dense CSV; one column holds labels in {-1,+1} or {0,1}.

    Reported row/column numbers are 1-based positions in the file.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh, delimiter=options.delimiter))
    lines = [(i + 1, r) for i, r in enumerate(rows) if r and any(c.strip() for c in r)]
    if not lines:
        raise ParseError("empty file")
    header = options.header
    if header is None:
        header = not _looks_numeric(lines[0][1])
    names = None
    if header:
        hdr = [c.strip() for c in lines[0][1]]
        lines = lines[1:]
        names = hdr[: options.label_column] + hdr[options.label_column + 1 :]
    if not lines:
        raise ParseError("no data rows")
    width = len(lines[0][1])
    lc = options.label_column
    if not 0 <= lc < width:
        raise ParseError(f"label column {lc} out of range for {width} columns")
    a = np.empty((len(lines), width - 1))
    y = np.empty(len(lines))
    for r, (lineno, row) in enumerate(lines):
        if len(row) != width:
            raise ParseError(f"expected {width} fields, found {len(row)}", lineno)
        y[r] = _parse_label(row[lc].strip(), lineno, lc + 1)
        c = 0
        for j, tok in enumerate(row):
            if j == lc:
                continue
            try:
                v = float(tok)
            except ValueError:
                raise ParseError(f"unparseable value {tok.strip()!r}", lineno, j + 1) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {tok.strip()!r}", lineno, j + 1)
            a[r, c] = v
            c += 1
    return Dataset(a, y, feature_names=names)


def dense_csv_text(d: Dataset, header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        names = d.feature_names or tuple(f"x{j + 1}" for j in range(d.n))
        w.writerow(["label", *names])
    for i in range(d.m):
        w.writerow([f"{int(d.y[i]):d}", *(f"{v:.17g}" for v in d.a[i])])
    return buf.getvalue()


def write_dense_csv(d: Dataset, path: PathLike, header: bool = True) -> None:
    """Label first, then features at 17 significant digits (exact round trip)."""
    Path(path).write_text(dense_csv_text(d, header), encoding="utf-8")


# --------------------------------------------------------------------------- #
# sparse "<label> <index>:<value> ..." text


def load_sparse_text(path: PathLike, n_features: Optional[int] = None) -> Dataset:
    """Parse the svmlight-style sparse format with 1-based strictly increasing indices."""
    labels = []
    rows = []
    n_seen = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            labels.append(_parse_label(toks[0], lineno, 1))
            idx, val = [], []
            last = 0
            for col, tok in enumerate(toks[1:], start=2):
                k, sep, v = tok.partition(":")
                try:
                    j = int(k)
                    x = float(v)
                except ValueError:
                    raise ParseError(f"unparseable token {tok!r}", lineno, col) from None
                if not sep or j < 1:
                    raise ParseError(f"unparseable token {tok!r}", lineno, col)
                if j == last:
                    raise ParseError(f"duplicate index {j} on line {lineno}", lineno, col)
                if j < last:
                    raise ParseError(f"non-increasing index {j} on line {lineno}", lineno, col)
                if not math.isfinite(x):
                    raise ParseError(f"non-finite value {v!r}", lineno, col)
                last = j
                idx.append(j - 1)
                val.append(x)
            n_seen = max(n_seen, last)
            rows.append((idx, val))
    if not rows:
        raise ParseError("empty file")
    n = n_seen if n_features is None else int(n_features)
    if n < n_seen:
        raise ParseError(f"index {n_seen} exceeds n_features={n}")
    a = np.zeros((len(rows), max(n, 1)))
    for r, (idx, val) in enumerate(rows):
        a[r, idx] = val
    return Dataset(a, np.array(labels))

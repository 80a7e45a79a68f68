"""LIBSVM text format: parsing into CSR matrices with binary labels, and writing back."""

from __future__ import annotations

import gzip
import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, TextIO, Union

import numpy as np
import scipy.sparse as sp

from .exceptions import LabelError, ParseError

Source = Union[str, os.PathLike, TextIO, Iterable[str]]


@dataclass(frozen=True)
class Dataset:
    """Design matrix (CSR, 0-based columns), labels in {0, 1} and the raw-label mapping."""

    features: sp.csr_matrix
    labels: np.ndarray
    name: str = ""
    label_map: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.features.shape[0] != self.labels.size:
            raise ValueError("label count must equal row count")

    @property
    def shape(self) -> tuple[int, int]:
        return self.features.shape

    def stats(self) -> dict:
        m, n = self.features.shape
        nnz = int(self.features.nnz)
        return {
            "name": self.name,
            "rows": m,
            "cols": n,
            "nnz": nnz,
            "density": nnz / (m * n) if m and n else 0.0,
            "positive_fraction": float(self.labels.mean()) if m else math.nan,
        }

    def same_as(self, other: "Dataset") -> bool:
        """Exact equality of shape, sparsity pattern, stored values, labels and label map."""
        a, b = self.features, other.features
        return (a.shape == b.shape and np.array_equal(a.indptr, b.indptr) and np.array_equal(a.indices, b.indices)
                and np.array_equal(a.data, b.data) and np.array_equal(self.labels, other.labels)
                and self.label_map == other.label_map)


def _open_lines(source: Source):
    if isinstance(source, (str, os.PathLike)):
        path = Path(source)
        if path.suffix == ".gz":
            return gzip.open(path, "rt", encoding="utf-8"), path.name.removesuffix(".gz"), True
        return open(path, "r", encoding="utf-8"), path.name, True
    return source, getattr(source, "name", ""), False


def _number(tok: str, what: str, lineno: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"malformed {what} {tok!r}", lineno) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite {what} {tok!r}", lineno)
    return v


def map_labels(raw: np.ndarray) -> tuple[np.ndarray, dict]:
    """Map two raw label values onto {0, 1}.

    ``{0, 1}`` is kept, ``{-1, +1}`` maps -1 to 0, ``{1, 2}`` maps 1 to 0, and
    any other pair maps its smaller value to 0. A single label value maps to
    itself when it is 0 or 1 and to 1 otherwise (``-1`` maps to 0).
    """
    values = sorted(set(raw.tolist()))
    if len(values) > 2:
        raise LabelError(f"expected at most two distinct labels, found {len(values)}: {values[:5]}")
    if set(values) <= {0.0, 1.0}:
        mapping = {v: v for v in values}
    elif set(values) <= {-1.0, 1.0}:
        mapping = {-1.0: 0.0, 1.0: 1.0}
    elif len(values) == 2:
        mapping = {values[0]: 0.0, values[1]: 1.0}
    else:
        mapping = {values[0]: 1.0}
    mapping = {k: v for k, v in mapping.items() if k in values}
    return np.array([mapping[v] for v in raw.tolist()], dtype=np.float64), mapping


def parse_libsvm(source: Source, n_features: Optional[int] = None, name: Optional[str] = None) -> Dataset:
    """Read ``<label> <index>:<value> ...`` lines (1-based, strictly increasing indices).

    ``source`` is a path (``.gz`` is decompressed), a text stream or an
    iterable of lines. Blank lines and ``#`` comments are skipped. The column
    count is the largest index seen unless ``n_features`` is given.

    Raises
    ------
    ParseError
        On malformed tokens, non-increasing indices, an index above
        ``n_features``, or input without data rows.
    LabelError
        If more than two distinct labels occur.
    """
    stream, default_name, owned = _open_lines(source)
    labels, indptr, indices, data = [], [0], [], []
    max_col = 0
    try:
        for lineno, line in enumerate(stream, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            labels.append(_number(tokens[0], "label", lineno))
            prev = 0
            for tok in tokens[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep or not idx_s or not val_s:
                    raise ParseError(f"malformed feature token {tok!r}", lineno)
                try:
                    idx = int(idx_s)
                except ValueError:
                    raise ParseError(f"malformed feature index {idx_s!r}", lineno) from None
                if idx < 1:
                    raise ParseError(f"feature index must be >= 1, got {idx}", lineno)
                if idx <= prev:
                    raise ParseError(f"feature indices must be strictly increasing ({prev} then {idx})", lineno)
                if n_features is not None and idx > n_features:
                    raise ParseError(f"feature index {idx} exceeds n_features={n_features}", lineno)
                prev = idx
                indices.append(idx - 1)
                data.append(_number(val_s, "feature value", lineno))
            max_col = max(max_col, prev)
            indptr.append(len(indices))
    finally:
        if owned:
            stream.close()
    if not labels:
        raise ParseError("input contains no data rows")
    n = max_col if n_features is None else int(n_features)
    X = sp.csr_matrix((np.array(data, dtype=np.float64), np.array(indices, dtype=np.int64),
                       np.array(indptr, dtype=np.int64)), shape=(len(labels), n))
    y, mapping = map_labels(np.array(labels, dtype=np.float64))
    return Dataset(X, y, name if name is not None else default_name, mapping)


def parse_libsvm_text(text: str, **kwargs) -> Dataset:
    return parse_libsvm(io.StringIO(text), **kwargs)


def _fmt(v: float) -> str:
    # repr gives the shortest string that reads back to the same double
    if v.is_integer() and abs(v) < 2**53 and not (v == 0 and math.copysign(1.0, v) < 0):
        return str(int(v))
    return repr(float(v))


def write_libsvm(dataset: Dataset, target: Union[str, os.PathLike, TextIO], raw_labels: bool = True) -> None:
    """Write ``dataset`` in LIBSVM format with round-trip exact values.

    With ``raw_labels`` the original label values are restored through the
    stored mapping, so parsing the output reproduces ``dataset`` exactly.
    """
    inverse = {v: k for k, v in dataset.label_map.items()} if raw_labels else {}
    X = dataset.features.tocsr()

    def emit(out):
        for i in range(X.shape[0]):
            lab = float(inverse.get(float(dataset.labels[i]), dataset.labels[i]))
            lo, hi = X.indptr[i], X.indptr[i + 1]
            feats = " ".join(f"{j + 1}:{_fmt(float(v))}" for j, v in zip(X.indices[lo:hi], X.data[lo:hi]))
            out.write(f"{_fmt(lab)} {feats}".rstrip() + "\n")

    if isinstance(target, (str, os.PathLike)):
        path = Path(target)
        opener = gzip.open if path.suffix == ".gz" else open
        with opener(path, "wt", encoding="utf-8") as fh:
            emit(fh)
    else:
        emit(target)


def logistic_problem_from(dataset: Dataset, gamma: Union[str, float] = "L/m"):
    """Regularized logistic regression on ``dataset`` with ``gamma`` a number or a rule string."""
    from .problems import LogisticProblem, gamma_from_rule

    prob = LogisticProblem(dataset.features, dataset.labels, 0.0)
    prob.gamma = gamma_from_rule(prob, gamma) if isinstance(gamma, str) else float(gamma)
    return prob

"""Strong- and weak-scaling analytics and an Amdahl runtime model.

The functional API works on :class:`ScalingSeries`. :class:`AmdahlRegressor`
and :class:`ReferenceScaler` wrap the same computations as scikit-learn
estimators so they can sit in a ``Pipeline`` or be cross-validated.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import nnls
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

SERIES_HEADER = ("nodes", "runtime_s")


class ScalingError(ValueError):
    pass


@dataclass(frozen=True)
class ScalingPoint:
    nodes: int
    runtime_seconds: float

    def __post_init__(self):
        if self.nodes < 1:
            raise ScalingError(f"nodes must be positive, got {self.nodes}")
        if not self.runtime_seconds > 0:
            raise ScalingError(f"runtime must be positive, got {self.runtime_seconds}")


@dataclass(frozen=True)
class ScalingSeries:
    benchmark: str
    points: tuple[ScalingPoint, ...]
    reference_index: int = 0
    mode: str = "strong"

    def __post_init__(self):
        if self.mode not in ("strong", "weak"):
            raise ScalingError(f"mode must be 'strong' or 'weak', got {self.mode!r}")
        if not self.points:
            raise ScalingError("series has no points")
        nodes = [p.nodes for p in self.points]
        if any(b <= a for a, b in zip(nodes, nodes[1:])):
            raise ScalingError(f"node counts must be strictly increasing: {nodes}")
        if not 0 <= self.reference_index < len(self.points):
            raise ScalingError(f"reference index {self.reference_index} out of range")

    @classmethod
    def from_pairs(cls, benchmark: str, pairs: Sequence[tuple[int, float]],
                   reference_nodes: Optional[int] = None, mode: str = "strong") -> "ScalingSeries":
        """Build a series from unsorted (nodes, runtime) pairs.

        The reference defaults to the smallest node count.
        """
        points = tuple(ScalingPoint(int(n), float(t)) for n, t in sorted(pairs))
        if reference_nodes is None:
            index = 0
        else:
            matches = [i for i, p in enumerate(points) if p.nodes == reference_nodes]
            if not matches:
                raise ScalingError(f"no point at reference node count {reference_nodes}")
            index = matches[0]
        return cls(benchmark, points, index, mode)

    @property
    def reference(self) -> ScalingPoint:
        return self.points[self.reference_index]

    def nodes(self) -> np.ndarray:
        return np.array([p.nodes for p in self.points], dtype=float)

    def runtimes(self) -> np.ndarray:
        return np.array([p.runtime_seconds for p in self.points], dtype=float)


@dataclass(frozen=True)
class AmdahlFit:
    serial_seconds: float
    parallel_seconds: float
    residual: float

    def predict(self, nodes) -> np.ndarray:
        return self.serial_seconds + self.parallel_seconds / np.asarray(nodes, dtype=float)


def relative_series(series: ScalingSeries) -> list[tuple[float, float]]:
    """(nodes / ref_nodes, runtime / ref_runtime) per point; the reference maps to (1, 1)."""
    ref = series.reference
    return [(p.nodes / ref.nodes, p.runtime_seconds / ref.runtime_seconds) for p in series.points]


def strong_speedup_efficiency(series: ScalingSeries) -> list[tuple[int, float, float]]:
    """(nodes, speedup, efficiency) relative to the series' reference point.

    speedup = t(N_ref) / t(N), efficiency = speedup * N_ref / N. Values above
    one are kept.
    """
    if series.mode != "strong":
        raise ScalingError("strong_speedup_efficiency needs a strong-mode series")
    ref = series.reference
    rows = []
    for p in series.points:
        speedup = ref.runtime_seconds / p.runtime_seconds
        rows.append((p.nodes, speedup, speedup * ref.nodes / p.nodes))
    return rows


def weak_efficiency(series: ScalingSeries) -> list[tuple[int, float]]:
    """(nodes, t(N_ref) / t(N)) for constant work per node."""
    if series.mode != "weak":
        raise ScalingError("weak_efficiency needs a weak-mode series")
    ref = series.reference
    return [(p.nodes, ref.runtime_seconds / p.runtime_seconds) for p in series.points]


def _design(nodes: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones_like(nodes), 1.0 / nodes])


def _fit(nodes: np.ndarray, runtimes: np.ndarray) -> AmdahlFit:
    if np.unique(1.0 / nodes).size < 2:
        raise ScalingError("degenerate design: need at least two distinct node counts")
    design = _design(nodes)
    # Scale columns so nnls sees a well-conditioned problem.
    norms = np.linalg.norm(design, axis=0)
    coef, _ = nnls(design / norms, runtimes)
    coef = coef / norms
    residual = float(np.linalg.norm(design @ coef - runtimes))
    return AmdahlFit(float(coef[0]), float(coef[1]), residual)


def fit_amdahl(series: ScalingSeries) -> AmdahlFit:
    """Non-negative least-squares fit of t(N) = t_s + t_p / N."""
    return _fit(series.nodes(), series.runtimes())


# --------------------------------------------------------------------------
# estimator wrappers

def check_scaling_data(X, y=None):
    """Validate node counts (and runtimes) for the estimators.

    ``X`` is a 1-d array of node counts or an (n, 1) column.
    """
    if y is None:
        X = check_array(X, ensure_2d=False, dtype=float)
    else:
        X, y = check_X_y(X, y, ensure_2d=False, dtype=float, y_numeric=True)
    X = X.reshape(-1) if X.ndim == 1 or X.shape[1] == 1 else X
    if X.ndim != 1:
        raise ValueError(f"expected a single column of node counts, got shape {X.shape}")
    if np.any(X < 1):
        raise ValueError("node counts must be >= 1")
    if y is not None and np.any(np.asarray(y) <= 0):
        raise ValueError("runtimes must be positive")
    return X if y is None else (X, np.asarray(y, dtype=float))


class AmdahlRegressor(RegressorMixin, BaseEstimator):
    """Predict runtime from node count with t(N) = t_s + t_p / N.

    Attributes set by ``fit``: ``serial_seconds_``, ``parallel_seconds_``,
    ``residual_``.
    """

    def fit(self, X, y):
        nodes, runtimes = check_scaling_data(X, y)
        result = _fit(nodes, runtimes)
        self.serial_seconds_ = result.serial_seconds
        self.parallel_seconds_ = result.parallel_seconds
        self.residual_ = result.residual
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "serial_seconds_")
        nodes = check_scaling_data(X)
        return self.serial_seconds_ + self.parallel_seconds_ / nodes


class ReferenceScaler(TransformerMixin, BaseEstimator):
    """Map (nodes, runtime) rows to reference-relative coordinates.

    ``fit`` learns the reference runtime at ``reference_nodes`` (or at the
    smallest node count when it is None); ``transform`` divides column 0 by
    the reference node count and column 1 by the reference runtime.
    """

    def __init__(self, reference_nodes: Optional[int] = None):
        self.reference_nodes = reference_nodes

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        if X.shape[1] != 2:
            raise ValueError("expected two columns: nodes, runtime")
        ref_nodes = X[:, 0].min() if self.reference_nodes is None else float(self.reference_nodes)
        rows = X[X[:, 0] == ref_nodes]
        if rows.size == 0:
            raise ValueError(f"no row at reference node count {self.reference_nodes}")
        self.reference_nodes_ = ref_nodes
        self.reference_runtime_ = float(rows[0, 1])
        self.n_features_in_ = 2
        return self

    def transform(self, X):
        check_is_fitted(self, "reference_runtime_")
        X = check_array(X, dtype=float)
        return np.column_stack([X[:, 0] / self.reference_nodes_, X[:, 1] / self.reference_runtime_])


# --------------------------------------------------------------------------
# delimiter-separated import/export

def dumps_series(series: ScalingSeries) -> str:
    """``nodes,runtime_s`` table; the reference node count carries a trailing ``*``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SERIES_HEADER)
    for i, p in enumerate(series.points):
        mark = "*" if i == series.reference_index else ""
        writer.writerow([f"{p.nodes}{mark}", repr(p.runtime_seconds)])
    return buf.getvalue()


def loads_series(text: str, benchmark: str = "", mode: str = "strong") -> ScalingSeries:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows or tuple(c.strip() for c in rows[0]) != SERIES_HEADER:
        raise ScalingError(f"series must start with header {','.join(SERIES_HEADER)}")
    pairs, reference = [], None
    for row in rows[1:]:
        if len(row) != 2:
            raise ScalingError(f"bad series row: {row}")
        node_text = row[0].strip()
        if node_text.endswith("*"):
            node_text = node_text[:-1]
            if reference is not None:
                raise ScalingError("more than one reference point marked")
            reference = int(node_text)
        try:
            pairs.append((int(node_text), float(row[1])))
        except ValueError as exc:
            raise ScalingError(f"bad series row: {row}") from exc
    if reference is None:
        raise ScalingError("no reference point marked with '*'")
    return ScalingSeries.from_pairs(benchmark, pairs, reference, mode)


def load_series(path: Union[str, Path], mode: str = "strong") -> ScalingSeries:
    path = Path(path)
    return loads_series(path.read_text(encoding="utf-8"), path.stem, mode)

"""Monthly uncertainty-index estimation via partial least squares regression.

Quarterly target values are regressed on quarterly term-count bulks; the
fitted model then predicts monthly values from monthly bulks built on the
same vocabulary.
"""

from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import CorpusStats, Document, prune_vocabulary
from .series import (
    MonthlySeries,
    month_range,
    months_of_quarter,
    quarter_of,
    quarter_range,
    standardize,
)

log = logging.getLogger(__name__)

_QUARTER_RE = re.compile(r"^\d{4}-Q[1-4]$")

# relative weight-norm floor: below this the predictor residual carries no
# usable covariance with y and fitting stops (rank exhaustion)
_RANK_TOL = 1e-10


@dataclass
class TermMatrix:
    """Period-by-term count matrix with a fixed column order."""

    periods: list[str]
    vocabulary: list[str]
    counts: np.ndarray

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.float64)
        if self.counts.shape != (len(self.periods), len(self.vocabulary)):
            raise ValueError(
                f"counts shape {self.counts.shape} does not match "
                f"{len(self.periods)} periods x {len(self.vocabulary)} terms"
            )
        if (self.counts < 0).any():
            raise ValueError("term counts must be nonnegative")


def build_bulks(
    documents: Sequence[Document],
    granularity: str,
    vocabulary: Iterable[str],
    periods: list[str] | None = None,
) -> TermMatrix:
    """Stack documents into per-period term-count rows.

    ``granularity`` is ``"quarter"`` or ``"month"``. The column order is the
    sorted vocabulary, so matrices built from the same vocabulary align
    column-for-column. Periods with zero documents keep an all-zero row and
    draw a warning.
    """
    if granularity not in ("quarter", "month"):
        raise ValueError(f"granularity must be 'quarter' or 'month', got {granularity!r}")
    vocab = sorted(set(vocabulary))
    if not vocab:
        raise ValueError("empty vocabulary")
    col = {w: j for j, w in enumerate(vocab)}

    def period_of(doc: Document) -> str:
        return quarter_of(doc.month) if granularity == "quarter" else doc.month

    if periods is None:
        if not documents:
            raise ValueError("no documents and no explicit period list")
        months = sorted({doc.month for doc in documents})
        full = month_range(months[0], months[-1])
        if granularity == "quarter":
            periods = quarter_range(quarter_of(full[0]), quarter_of(full[-1]))
        else:
            periods = full
    row = {p: i for i, p in enumerate(periods)}

    counts = np.zeros((len(periods), len(vocab)))
    filled = np.zeros(len(periods), dtype=bool)
    for doc in documents:
        period = period_of(doc)
        if period not in row:
            raise ValueError(f"document {doc.id} falls outside the period list ({period})")
        i = row[period]
        filled[i] = True
        for token in doc.tokens:
            j = col.get(token)
            if j is not None:
                counts[i, j] += 1.0
    for i, period in enumerate(periods):
        if not filled[i]:
            log.warning("period %s has no documents; row left at zero", period)
    return TermMatrix(periods=list(periods), vocabulary=vocab, counts=counts)


@dataclass
class PlsModel:
    """Single-response PLS regression state.

    Holds the centering/scaling constants and the per-component weight
    (``w``), loading (``p``) and response-loading (``q``) vectors produced by
    successive deflation, plus the collapsed regression coefficients.
    """

    vocabulary: list[str]
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    weights: np.ndarray  # (n_terms, k)
    loadings: np.ndarray  # (n_terms, k)
    y_loadings: np.ndarray  # (k,)
    scores: np.ndarray  # (n_rows, k) training projections
    coef: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.coef = _collapse_coefficients(
            self.weights, self.loadings, self.y_loadings, self.n_components
        )

    @property
    def n_components(self) -> int:
        return self.weights.shape[1]


def _collapse_coefficients(
    weights: np.ndarray, loadings: np.ndarray, y_loadings: np.ndarray, k: int
) -> np.ndarray:
    """Regression coefficients using the first ``k`` components: W(PᵀW)⁻¹q."""
    k = min(k, weights.shape[1])
    w = weights[:, :k]
    p = loadings[:, :k]
    q = y_loadings[:k]
    return w @ np.linalg.solve(p.T @ w, q)


def _as_matrix(x) -> np.ndarray:
    return x.counts if isinstance(x, TermMatrix) else np.asarray(x, dtype=np.float64)


def pls_fit(x, y, n_components: int, scale: bool = False) -> PlsModel:
    """Fit single-response PLS by successive deflation.

    Each component takes ``w = Xᵀy`` (normalized) on the current residuals,
    projects ``t = Xw``, regresses out ``t`` from both sides, and repeats. For
    a one-column response this needs no inner iteration. Fitting stops early
    if the residual covariance vanishes (X has no rank left), so requesting
    more components than the data supports yields the same model as the rank
    itself.
    """
    X = _as_matrix(x)
    y = np.asarray(y, dtype=np.float64).ravel()
    n, p = X.shape
    if y.shape[0] != n:
        raise ValueError(f"{n} rows but {y.shape[0]} target values")
    if n < 2:
        raise ValueError("need at least 2 rows to fit")
    bound = min(n - 1, p)
    if not 1 <= n_components <= bound:
        raise ValueError(f"n_components must be in [1, {bound}], got {n_components}")
    if np.ptp(y) == 0.0:
        raise ValueError("zero variance: target is constant")

    x_mean = X.mean(axis=0)
    Xc = X - x_mean
    if scale:
        std = Xc.std(axis=0, ddof=0)
        x_scale = np.where(std == 0.0, 1.0, std)
        Xc = Xc / x_scale
    else:
        x_scale = np.ones(p)
    y_mean = float(y.mean())
    yc = y - y_mean

    weights, loadings, y_loads, scores = [], [], [], []
    w0_norm: float | None = None
    for _ in range(n_components):
        w = Xc.T @ yc
        w_norm = float(np.linalg.norm(w))
        if w0_norm is None:
            w0_norm = w_norm
        if w_norm == 0.0 or w_norm < _RANK_TOL * w0_norm:
            break
        w = w / w_norm
        t = Xc @ w
        tt = float(t @ t)
        if tt == 0.0:
            break
        p_vec = Xc.T @ t / tt
        q_val = float(yc @ t / tt)
        Xc = Xc - np.outer(t, p_vec)
        yc = yc - q_val * t
        weights.append(w)
        loadings.append(p_vec)
        y_loads.append(q_val)
        scores.append(t)
    if not weights:
        raise ValueError("predictors carry no covariance with the target")

    vocab = x.vocabulary if isinstance(x, TermMatrix) else [str(j) for j in range(p)]
    return PlsModel(
        vocabulary=list(vocab),
        x_mean=x_mean,
        x_scale=x_scale,
        y_mean=y_mean,
        weights=np.column_stack(weights),
        loadings=np.column_stack(loadings),
        y_loadings=np.asarray(y_loads),
        scores=np.column_stack(scores),
    )


def pls_predict(model: PlsModel, x_new, n_components: int | None = None) -> np.ndarray:
    """Predict targets for new rows; pure function of (model, x_new).

    ``n_components`` truncates the model to its first components (defaults to
    all fitted components). A term matrix must match the training columns
    exactly.
    """
    if isinstance(x_new, TermMatrix):
        if x_new.vocabulary != model.vocabulary:
            for got, want in zip(x_new.vocabulary, model.vocabulary):
                if got != want:
                    raise ValueError(f"column mismatch: got {got!r}, expected {want!r}")
            raise ValueError(
                f"column count mismatch: {len(x_new.vocabulary)} vs {len(model.vocabulary)}"
            )
    X = _as_matrix(x_new)
    if X.shape[1] != model.x_mean.shape[0]:
        raise ValueError(f"{X.shape[1]} columns, model expects {model.x_mean.shape[0]}")
    if n_components is None or n_components >= model.n_components:
        coef = model.coef
    else:
        coef = _collapse_coefficients(
            model.weights, model.loadings, model.y_loadings, n_components
        )
    Xc = (X - model.x_mean) / model.x_scale
    return Xc @ coef + model.y_mean


def select_components(
    x,
    y,
    k_range: Iterable[int],
    method: str = "loo",
    scale: bool = False,
) -> tuple[int, list[tuple[int, float]]]:
    """Pick the component count minimizing MSE; ties go to the smallest k.

    ``method="loo"`` (default) scores each k by leave-one-out cross-validated
    MSE: every row is predicted by a model fit without it. One fit per fold
    covers all k at once because the first components of a larger model equal
    the smaller model. ``method="train"`` uses in-sample MSE instead, which
    is non-increasing in k and so mostly useful for diagnostics.
    """
    if method not in ("loo", "train"):
        raise ValueError(f"unknown selection method: {method!r}")
    X = _as_matrix(x)
    y = np.asarray(y, dtype=np.float64).ravel()
    n = X.shape[0]
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ValueError("empty component range")
    bound = min(n - 1, X.shape[1])
    if ks[0] < 1 or ks[-1] > bound:
        raise ValueError(f"component range must lie in [1, {bound}], got {ks[0]}..{ks[-1]}")

    if method == "loo":
        # each fold drops one row, so it supports one component fewer
        fold_bound = min(n - 2, X.shape[1])
        usable = [k for k in ks if k <= fold_bound]
        if not usable:
            raise ValueError(
                f"leave-one-out with {n} rows supports at most {fold_bound} components"
            )
        if len(usable) < len(ks):
            log.warning(
                "dropping k > %d from the curve: leave-one-out folds have only %d rows",
                fold_bound, n - 1,
            )
        ks = usable
        kmax = ks[-1]
        sq_err = {k: [] for k in ks}
        idx = np.arange(n)
        for i in range(n):
            keep = idx != i
            model = pls_fit(X[keep], y[keep], kmax, scale=scale)
            for k in ks:
                pred = pls_predict(model, X[i : i + 1], n_components=k)
                sq_err[k].append(float((pred[0] - y[i]) ** 2))
        curve = [(k, math.fsum(sq_err[k]) / n) for k in ks]
    else:
        model = pls_fit(X, y, ks[-1], scale=scale)
        curve = []
        for k in ks:
            fitted = pls_predict(model, X, n_components=k)
            curve.append((k, float(np.mean((fitted - y) ** 2))))

    best_k, best_mse = curve[0]
    for k, mse in curve[1:]:
        if mse < best_mse:
            best_k, best_mse = k, mse
    return best_k, curve


@dataclass
class WuiConfig:
    kmax: int = 10
    selection: str = "loo"
    scale: bool = False
    max_df_ratio: float = 0.6
    min_tf: int = 1
    label: str = "wui"


@dataclass
class WuiResult:
    raw: MonthlySeries
    standardized: MonthlySeries
    best_k: int
    mse_curve: list[tuple[int, float]]
    model: PlsModel


def estimate_monthly_wui(
    documents: Sequence[Document],
    stats: CorpusStats,
    quarterly_wui: dict[str, float],
    config: WuiConfig | None = None,
) -> WuiResult:
    """Quarterly-trained, monthly-predicted uncertainty series.

    Builds quarterly term bulks over the pruned vocabulary, selects the
    component count on the quarterly fit, then predicts one value per month
    from monthly bulks and standardizes the result.
    """
    config = config or WuiConfig()
    if not quarterly_wui:
        raise ValueError("no quarterly target values")
    for quarter in quarterly_wui:
        if not _QUARTER_RE.match(quarter):
            raise ValueError(f"bad quarter identifier: {quarter!r} (want YYYY-Q#)")

    keys = sorted(stats.docs_per_month)
    if not keys:
        raise ValueError("empty corpus statistics")
    months = month_range(keys[0], keys[-1])
    quarters = quarter_range(quarter_of(months[0]), quarter_of(months[-1]))
    missing = [q for q in quarters if q not in quarterly_wui]
    if missing:
        raise ValueError(f"quarterly targets missing for: {', '.join(missing)}")

    vocabulary = prune_vocabulary(stats, config.max_df_ratio, config.min_tf)
    if not vocabulary:
        raise ValueError("vocabulary pruning left no terms")

    x_train = build_bulks(documents, "quarter", vocabulary, periods=quarters)
    y_train = np.array([quarterly_wui[q] for q in quarters])

    bound = min(len(quarters) - 1, len(x_train.vocabulary))
    kmax = min(config.kmax, bound)
    if kmax < 1:
        raise ValueError("not enough quarters to fit any component")
    best_k, curve = select_components(
        x_train, y_train, range(1, kmax + 1), method=config.selection, scale=config.scale
    )
    model = pls_fit(x_train, y_train, best_k, scale=config.scale)

    x_monthly = build_bulks(documents, "month", vocabulary, periods=months)
    predictions = pls_predict(model, x_monthly)

    raw = MonthlySeries(
        label=config.label,
        stage="raw",
        values={m: float(v) for m, v in zip(months, predictions)},
    )
    return WuiResult(
        raw=raw,
        standardized=standardize(raw),
        best_k=best_k,
        mse_curve=curve,
        model=model,
    )


def read_targets_csv(path: str | Path) -> dict[str, float]:
    """Read quarterly targets: CSV with header ``quarter,value``."""
    targets: dict[str, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"quarter", "value"}.issubset(reader.fieldnames):
            raise ValueError(f"{path}: expected columns quarter,value")
        for row in reader:
            quarter = row["quarter"].strip()
            if not _QUARTER_RE.match(quarter):
                raise ValueError(f"{path}: bad quarter identifier {quarter!r}")
            if quarter in targets:
                raise ValueError(f"{path}: duplicate quarter {quarter!r}")
            targets[quarter] = float(row["value"])
    if not targets:
        raise ValueError(f"{path}: no target rows")
    return targets


def write_targets_csv(path: str | Path, targets: dict[str, float]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quarter", "value"])
        for quarter in sorted(targets):
            writer.writerow([quarter, repr(float(targets[quarter]))])


def write_mse_curve_csv(path: str | Path, curve: list[tuple[int, float]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "mse"])
        for k, mse in curve:
            writer.writerow([k, repr(mse)])


def quarterly_mean_targets(series: MonthlySeries) -> dict[str, float]:
    """Collapse a monthly series to quarterly means (complete quarters only)."""
    out: dict[str, float] = {}
    values = series.values
    months = series.months()
    for quarter in quarter_range(quarter_of(months[0]), quarter_of(months[-1])):
        months = months_of_quarter(quarter)
        vals = [values[m] for m in months if m in values and values[m] is not None]
        if len(vals) == len(months):
            out[quarter] = math.fsum(vals) / len(vals)
    return out

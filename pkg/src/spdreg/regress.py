"""Tangent-space ridge regression with generalized cross-validation.

The full pipeline per cross-validation fold is: fit the spatial filter
on the training split, project both splits, fit the embedding reference
(a Frechet mean) on the projected training split, vectorize, then fit a
ridge model whose regularization is chosen by generalized
cross-validation (GCV) over a fixed grid. Nothing fitted ever sees the
held-out fold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bundle import FLOAT_FMT, CovarianceBundle
from .errors import (
    ConfigError,
    DegenerateDesign,
    DimensionMismatch,
    NumericalError,
)
from .filters import (
    FILTER_KINDS,
    Leadfield,
    SpatialFilter,
    apply,
    fit_mne,
    fit_supervised,
    fit_unsupervised,
    identity_filter,
)
from .manifold import (
    EMBEDDING_KINDS,
    Embedding,
    FeatureMatrix,
    embed,
    fit_embedding,
)

RESULTS_HEADER = "method,filter,embedding,rank,fold,lambda,mae,seed"


def default_ridge_grid() -> np.ndarray:
    """100 logarithmically spaced regularization values in [1e-5, 1e3]."""
    return np.logspace(-5.0, 3.0, 100)


@dataclass(frozen=True)
class PipelineSpec:
    """Choice of filter, embedding, and ridge grid for one pipeline.

    ``filter_rank`` is the number of retained components for the
    unsupervised/supervised filters (identity keeps the full dimension;
    mne takes its width from the leadfield). ``name`` overrides the
    method label used in result tables.
    """

    filter_kind: str = "identity"
    filter_rank: int | None = None
    embedding_kind: str = "geometric"
    ridge_grid: np.ndarray = field(default_factory=default_ridge_grid)
    leadfield: Leadfield | None = None
    mne_lambda: float = 1.0
    name: str | None = None

    def __post_init__(self):
        if self.filter_kind not in FILTER_KINDS:
            raise ValueError(
                f"unknown filter kind {self.filter_kind!r}; expected one of {FILTER_KINDS}"
            )
        if self.embedding_kind not in EMBEDDING_KINDS:
            raise ValueError(
                f"unknown embedding kind {self.embedding_kind!r}; "
                f"expected one of {EMBEDDING_KINDS}"
            )
        grid = np.asarray(self.ridge_grid, dtype=np.float64)
        if grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
            raise ValueError("ridge grid must be nonempty, positive, strictly increasing")
        object.__setattr__(self, "ridge_grid", grid)
        if self.filter_kind in ("unsupervised", "supervised"):
            if self.filter_rank is None or self.filter_rank < 1:
                raise ValueError(f"{self.filter_kind} filter needs filter_rank >= 1")
        if self.filter_kind == "mne" and self.leadfield is None:
            raise ConfigError("mne filter needs a leadfield")
        if self.mne_lambda <= 0:
            raise ValueError("mne_lambda must be positive")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        return f"{self.filter_kind}+{self.embedding_kind}"


@dataclass(frozen=True)
class RidgeModel:
    """Fitted ridge regressor on standardized features.

    Predictions are ``((x - feature_mean) / feature_scale) @ beta +
    intercept``. ``gcv_path`` keeps the GCV criterion at every grid
    value for diagnostics.
    """

    beta: np.ndarray
    intercept: float
    lambda_star: float
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    grid: np.ndarray
    gcv_path: np.ndarray


@dataclass(frozen=True)
class CVReport:
    """Per-fold out-of-sample mean absolute errors and selected lambdas."""

    per_fold_mae: np.ndarray
    mean_mae: float
    per_fold_lambda: np.ndarray
    seed: int
    ridge_grid: np.ndarray


def fit_ridge_gcv(features, y, grid=None) -> RidgeModel:
    """Ridge regression with GCV-selected regularization.

    The target is centered and the feature columns are standardized on
    the training data (columns with zero variance get scale 1). The
    criterion ``GCV(lam) = n * ||(I - H_lam) y_c||^2 / tr(I - H_lam)^2``
    is evaluated for every grid value from a single SVD of the
    standardized design; ties are broken toward the larger lambda.

    Raises
    ------
    DegenerateDesign
        If every feature column is constant.
    """
    x = features.rows if isinstance(features, FeatureMatrix) else np.asarray(features)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"features must be 2-d, got shape {x.shape}")
    n, k = x.shape
    if n < 3:
        raise ValueError(f"need at least 3 samples, got {n}")
    if y.shape != (n,):
        raise DimensionMismatch(f"expected {n} targets, got shape {y.shape}")
    grid = default_ridge_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    if grid.size == 0 or np.any(grid <= 0):
        raise ValueError("ridge grid must be nonempty and positive")

    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    constant = scale == 0
    if np.all(constant):
        raise DegenerateDesign("all feature columns are constant")
    scale = np.where(constant, 1.0, scale)
    xs = (x - mean) / scale
    ybar = float(y.mean())
    yc = y - ybar

    u, s, vt = np.linalg.svd(xs, full_matrices=False)
    c = u.T @ yc
    s2 = s**2
    gcv = np.empty(grid.size)
    for i, lam in enumerate(grid):
        h = s2 / (s2 + lam)
        resid = yc - u @ (h * c)
        denom = n - h.sum()
        gcv[i] = n * float(resid @ resid) / denom**2
    best = np.min(gcv)
    ties = np.nonzero(gcv == best)[0]
    ibest = ties[np.argmax(grid[ties])]
    lam = float(grid[ibest])
    beta = vt.T @ (s / (s2 + lam) * c)
    return RidgeModel(
        beta=beta,
        intercept=ybar,
        lambda_star=lam,
        feature_mean=mean,
        feature_scale=scale,
        grid=grid,
        gcv_path=gcv,
    )


def predict(model: RidgeModel, features) -> np.ndarray:
    """Predictions of a fitted ridge model on new feature rows."""
    x = features.rows if isinstance(features, FeatureMatrix) else np.asarray(features)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.beta.shape[0]:
        raise DimensionMismatch(
            f"expected {model.beta.shape[0]} feature columns, got shape {x.shape}"
        )
    return ((x - model.feature_mean) / model.feature_scale) @ model.beta + model.intercept


# ---------------------------------------------------------------------------
# Cross-validated pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FoldState:
    """Everything fitted on one training split."""

    filt: SpatialFilter
    embedding: Embedding
    model: RidgeModel


def fold_blocks(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle split into ``folds`` contiguous blocks.

    The ``n % folds`` leftover samples go one each to the first folds.
    """
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    base, extra = divmod(n, folds)
    blocks, start = [], 0
    for i in range(folds):
        size = base + (1 if i < extra else 0)
        blocks.append(perm[start : start + size])
        start += size
    return blocks


def _fit_filter(train: CovarianceBundle, spec: PipelineSpec) -> SpatialFilter:
    if spec.filter_kind == "identity":
        return identity_filter(train.dim)
    if spec.filter_kind == "unsupervised":
        return fit_unsupervised(train, spec.filter_rank)
    if spec.filter_kind == "supervised":
        return fit_supervised(train, spec.filter_rank)
    return fit_mne(spec.leadfield, spec.mne_lambda)


def fit_fold(train: CovarianceBundle, spec: PipelineSpec) -> FoldState:
    """Fit filter, embedding reference, and ridge model on one split."""
    filt = _fit_filter(train, spec)
    projected = apply(filt, train)
    rank = min(filt.rank_out, train.nominal_rank)
    if spec.embedding_kind == "wasserstein":
        embedding = fit_embedding(projected.matrices, "wasserstein", rank=rank)
    else:
        embedding = fit_embedding(projected.matrices, spec.embedding_kind)
    feats = embed(embedding, projected.matrices)
    model = fit_ridge_gcv(feats, projected.labels, spec.ridge_grid)
    return FoldState(filt=filt, embedding=embedding, model=model)


def predict_fold(state: FoldState, test: CovarianceBundle) -> np.ndarray:
    """Apply a fitted fold to held-out covariances."""
    projected = apply(state.filt, test)
    feats = embed(state.embedding, projected.matrices)
    return predict(state.model, feats)


def cross_val_states(
    bundle: CovarianceBundle, spec: PipelineSpec, folds: int, seed: int
) -> tuple[CVReport, list[FoldState]]:
    """K-fold evaluation returning the report plus per-fold fitted state.

    Each fold is fit strictly on its training split: spatial filter,
    embedding reference mean, feature standardization, and ridge weights
    never see the held-out block.
    """
    if folds < 2:
        raise ValueError(f"need at least 2 folds, got {folds}")
    if bundle.n < folds:
        raise ValueError(f"bundle has {bundle.n} samples but {folds} folds requested")
    blocks = fold_blocks(bundle.n, folds, seed)
    maes, lams, states = [], [], []
    for k, test_idx in enumerate(blocks):
        mask = np.ones(bundle.n, dtype=bool)
        mask[test_idx] = False
        train_idx = np.nonzero(mask)[0]
        try:
            state = fit_fold(bundle.subset(train_idx), spec)
            test = bundle.subset(test_idx)
            yhat = predict_fold(state, test)
        except NumericalError as exc:
            raise type(exc)(f"fold {k}: {exc}") from exc
        maes.append(float(np.mean(np.abs(test.labels - yhat))))
        lams.append(state.model.lambda_star)
        states.append(state)
    per_fold = np.array(maes)
    return (
        CVReport(
            per_fold_mae=per_fold,
            mean_mae=float(np.mean(per_fold)),
            per_fold_lambda=np.array(lams),
            seed=seed,
            ridge_grid=spec.ridge_grid,
        ),
        states,
    )


def run_pipeline_cv(
    bundle: CovarianceBundle, spec: PipelineSpec, folds: int, seed: int
) -> CVReport:
    """K-fold out-of-sample evaluation of a pipeline (see module docs)."""
    report, _ = cross_val_states(bundle, spec, folds, seed)
    return report


# ---------------------------------------------------------------------------
# Results CSV: method,filter,embedding,rank,fold,lambda,mae,seed
# ---------------------------------------------------------------------------


def results_rows(spec: PipelineSpec, report: CVReport, rank: int) -> list[dict]:
    """One result row per fold in the results CSV schema."""
    rows = []
    for k, (mae, lam) in enumerate(zip(report.per_fold_mae, report.per_fold_lambda)):
        rows.append(
            {
                "method": spec.label,
                "filter": spec.filter_kind,
                "embedding": spec.embedding_kind,
                "rank": rank,
                "fold": k,
                "lambda": lam,
                "mae": mae,
                "seed": report.seed,
            }
        )
    return rows


def format_csv_value(value) -> str:
    if isinstance(value, float):
        return FLOAT_FMT % value
    return str(value)


def write_results_csv(path, rows) -> None:
    """Write result rows with 17-significant-digit decimals."""
    fields = RESULTS_HEADER.split(",")
    lines = [RESULTS_HEADER]
    for row in rows:
        lines.append(",".join(format_csv_value(row[f]) for f in fields))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")

"""Spatial filters: learn a ``p x r`` projection and apply it to bundles.

Four ways to obtain the projection ``w``:

* identity -- keep the sensor space untouched;
* unsupervised -- top eigenvectors of the average covariance (PCA);
* supervised -- generalized eigenvectors of the label-weighted average
  covariance against the plain average, i.e. directions whose projected
  power co-varies most with the target;
* mne -- Tikhonov-regularized inverse of a supplied leadfield matrix.

Applying a filter maps each covariance ``c`` to ``w.T @ c @ w`` and
carries labels through unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bundle import FLOAT_FMT, CovarianceBundle
from .errors import (
    ConfigError,
    DegenerateDesign,
    DimensionMismatch,
    RankTooLarge,
    SingularMatrix,
)
from .symmat import SymMat, eigh, numerical_rank, sym_func

FILTER_KINDS = ("identity", "unsupervised", "supervised", "mne")


@dataclass(frozen=True)
class SpatialFilter:
    """Fitted projection ``w`` (p x r) with its provenance.

    ``eigenvalues`` records the selection criterion of the fitted
    columns (component variance for unsupervised filters, power-target
    covariance for supervised ones); empty for identity and mne.
    """

    w: np.ndarray
    kind: str
    rank_out: int
    eigenvalues: np.ndarray

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ValueError(
                f"unknown filter kind {self.kind!r}; expected one of {FILTER_KINDS}"
            )
        a = np.asarray(self.w, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("filter matrix must be 2-d")
        object.__setattr__(self, "w", a)
        object.__setattr__(
            self, "eigenvalues", np.asarray(self.eigenvalues, dtype=np.float64)
        )


def identity_filter(p: int) -> SpatialFilter:
    """The no-op filter of dimension ``p``."""
    return SpatialFilter(
        w=np.eye(p), kind="identity", rank_out=p, eigenvalues=np.empty(0)
    )


def _mean_covariance(bundle: CovarianceBundle) -> SymMat:
    return SymMat(np.mean([m.data for m in bundle.matrices], axis=0))


def fit_unsupervised(bundle: CovarianceBundle, r: int) -> SpatialFilter:
    """PCA filter: top-``r`` eigenvectors of the average covariance.

    Blind to the labels; raises :class:`RankTooLarge` if ``r`` exceeds
    the numerical rank of the average.
    """
    p = bundle.dim
    if not 1 <= r <= p:
        raise ValueError(f"rank must be in [1, {p}], got {r}")
    cbar = _mean_covariance(bundle)
    available = numerical_rank(cbar)
    if r > available:
        raise RankTooLarge(
            f"requested {r} components but the average covariance has rank {available}"
        )
    ep = eigh(cbar)
    return SpatialFilter(
        w=ep.vectors[:, :r].copy(),
        kind="unsupervised",
        rank_out=r,
        eigenvalues=ep.values[:r].copy(),
    )


def fit_supervised(bundle: CovarianceBundle, r: int) -> SpatialFilter:
    """Supervised power-covariance filter (generalized eigenproblem).

    The labels are standardized internally (zero mean, unit population
    variance). Columns are the generalized eigenvectors of the pair
    ``(c_y, c_bar)`` where ``c_y`` is the label-weighted average
    covariance, sorted by decreasing eigenvalue and normalized so each
    column ``w`` satisfies ``w.T @ c_bar @ w == 1``; the first column
    maximizes the generalized Rayleigh quotient. Solved by whitening
    with ``c_bar^-1/2`` and diagonalizing the whitened ``c_y``.

    Raises
    ------
    SingularMatrix
        If the average covariance is rank-deficient; reduce the bundle
        with an unsupervised filter first.
    """
    p = bundle.dim
    if not 1 <= r <= p:
        raise ValueError(f"rank must be in [1, {p}], got {r}")
    y = bundle.labels
    std = float(np.std(y))
    if std == 0:
        raise DegenerateDesign("supervised filter needs a non-constant target")
    ytilde = (y - y.mean()) / std
    cbar = _mean_covariance(bundle)
    if numerical_rank(cbar) < p:
        raise SingularMatrix(
            "average covariance is rank-deficient; project with an unsupervised "
            "filter before fitting a supervised one"
        )
    stack = np.stack([m.data for m in bundle.matrices])
    cy = np.einsum("i,ijk->jk", ytilde, stack) / bundle.n
    isq = sym_func(cbar, "inv_sqrt").data
    ep = eigh(SymMat(isq @ cy @ isq))
    w = isq @ ep.vectors[:, :r]
    return SpatialFilter(
        w=w, kind="supervised", rank_out=r, eigenvalues=ep.values[:r].copy()
    )


def fit_mne(lead: "Leadfield", lam: float) -> SpatialFilter:
    """Tikhonov-regularized inverse operator of a leadfield.

    For a leadfield ``g`` (p sensors x q sources) the inverse operator
    is ``g.T @ (g @ g.T + lam * I)^-1`` (q x p); it is stored transposed
    in the package's p x q filter convention. As ``lam`` grows the
    entries approach ``g / lam``.
    """
    if lam <= 0:
        raise ValueError(f"regularization must be positive, got {lam}")
    g = lead.g
    p = g.shape[0]
    gram = g @ g.T + lam * np.eye(p)
    w = np.linalg.solve(gram, g)
    return SpatialFilter(w=w, kind="mne", rank_out=g.shape[1], eigenvalues=np.empty(0))


def apply(filt: SpatialFilter, bundle: CovarianceBundle) -> CovarianceBundle:
    """Project every covariance: ``c -> w.T @ c @ w``; labels unchanged."""
    if filt.w.shape[0] != bundle.dim:
        raise DimensionMismatch(
            f"filter expects dimension {filt.w.shape[0]}, bundle has {bundle.dim}"
        )
    w = filt.w
    mats = [SymMat(w.T @ m.data @ w) for m in bundle.matrices]
    return CovarianceBundle(
        matrices=mats,
        labels=bundle.labels.copy(),
        nominal_rank=min(filt.rank_out, bundle.nominal_rank),
        provenance=bundle.provenance,
    )


# ---------------------------------------------------------------------------
# Leadfield file format: "LEADFIELD v1 P Q" then P rows of Q decimals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Leadfield:
    """Forward matrix ``g`` (p sensors x q candidate sources)."""

    g: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.g, dtype=np.float64)
        if a.ndim != 2 or a.shape[1] < 1:
            raise ValueError(f"leadfield must be p x q with q >= 1, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("leadfield entries must be finite")
        object.__setattr__(self, "g", a)


def write_leadfield(path, lead: Leadfield) -> None:
    p, q = lead.g.shape
    lines = [f"LEADFIELD v1 {p} {q}"]
    for row in lead.g:
        lines.append(" ".join(FLOAT_FMT % x for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_leadfield(path) -> Leadfield:
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise ConfigError(f"{path}: empty leadfield file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "LEADFIELD" or head[1] != "v1":
        raise ConfigError(
            f"{path}: expected header 'LEADFIELD v1 P Q', got {lines[0]!r}"
        )
    try:
        p, q = int(head[2]), int(head[3])
        rows = [[float(x) for x in ln.split()] for ln in lines[1:]]
    except ValueError as exc:
        raise ConfigError(f"{path}: bad number in leadfield") from exc
    if len(rows) != p or any(len(r) != q for r in rows):
        raise ConfigError(f"{path}: expected {p} rows of {q} values")
    return Leadfield(g=np.array(rows))

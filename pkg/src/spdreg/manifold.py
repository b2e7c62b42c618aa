"""Distances, means, log maps, and vectorizations for covariance geometry.

Three embeddings of symmetric PSD matrices into flat feature vectors are
provided, plus the log-diagonal baseline:

* ``euclidean`` -- weighted upper-triangle flattening, a Frobenius isometry.
* ``geometric`` -- tangent space of the affine-invariant metric at a
  reference point (requires full-rank matrices).
* ``wasserstein`` -- tangent space of the Bures-Wasserstein metric in the
  fixed-rank factor quotient (handles rank-deficient matrices).
* ``logdiag`` -- elementwise log of the diagonal.

Reference points are Frechet means under the matching metric, computed by
iterative solvers with explicit gradient-norm stopping rules. Distances,
logs, and vectorizations are pure functions; the means are deterministic
given their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    NoConvergence,
    NonPositiveDiagonal,
    NotPSD,
    RankMismatch,
    SingularMatrix,
)
from .symmat import RANK_TOL, SymMat, eigh, numerical_rank, svd_rect, sym_func

EMBEDDING_KINDS = ("euclidean", "geometric", "wasserstein", "logdiag")

# Scales used by the rank-deficiency witness table.
WITNESS_EPSILONS = (1.0, 0.1, 0.01, 0.001)


# ---------------------------------------------------------------------------
# Stacked helpers (internal)
# ---------------------------------------------------------------------------


def _as_stack(mats) -> np.ndarray:
    """Stack a nonempty sequence of SymMat into an (n, p, p) array."""
    if len(mats) == 0:
        raise ValueError("need at least one matrix")
    p = mats[0].dim
    for m in mats:
        if m.dim != p:
            raise DimensionMismatch(f"mixed matrix dimensions {m.dim} and {p}")
    return np.stack([m.data for m in mats])


def _sym(a: np.ndarray) -> np.ndarray:
    return (a + a.swapaxes(-1, -2)) / 2.0


def _spd_basis(m: SymMat):
    """Eigen-factors (inv_sqrt, sqrt) of a full-rank SPD matrix."""
    ep = eigh(m)
    w, v = ep.values, ep.vectors
    if w[-1] <= RANK_TOL * w[0] or w[0] <= 0:
        raise SingularMatrix(
            "a full-rank SPD matrix is required", smallest_eigenvalue=w[-1]
        )
    isq = (v / np.sqrt(w)) @ v.T
    sq = (v * np.sqrt(w)) @ v.T
    return isq, sq


def _logm_spd_stack(a: np.ndarray, what: str) -> np.ndarray:
    """Matrix log of each (symmetrized) SPD slice of an (..., p, p) array."""
    w, v = np.linalg.eigh(_sym(a))
    wmax = w[..., -1]
    if np.any(w[..., 0] <= RANK_TOL * wmax) or np.any(wmax <= 0):
        raise SingularMatrix(
            f"{what} requires full-rank SPD matrices",
            smallest_eigenvalue=float(w.min()),
        )
    return (v * np.log(w)[..., None, :]) @ v.swapaxes(-1, -2)


def _expm_sym(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(_sym(a))
    return (v * np.exp(w)[..., None, :]) @ v.swapaxes(-1, -2)


def _upper(mat: np.ndarray) -> np.ndarray:
    """Row-major upper-triangle flattening, sqrt(2) weights off-diagonal."""
    p = mat.shape[-1]
    iu, ju = np.triu_indices(p)
    wts = np.where(iu == ju, 1.0, np.sqrt(2.0))
    return wts * mat[..., iu, ju]


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------


def dist_geometric(s: SymMat, t: SymMat) -> float:
    """Affine-invariant distance between full-rank SPD matrices.

    Equals ``sqrt(sum_k log^2 w_k)`` for ``w_k`` the eigenvalues of
    ``s^-1 t``; invariant under joint congruence by any invertible
    matrix.

    Raises
    ------
    SingularMatrix
        If either argument is rank-deficient.
    """
    if s.dim != t.dim:
        raise DimensionMismatch(f"dimensions differ: {s.dim} vs {t.dim}")
    isq, _ = _spd_basis(s)
    w = np.linalg.eigvalsh(_sym(isq @ t.data @ isq))
    if w[0] <= RANK_TOL * w[-1] or w[-1] <= 0:
        raise SingularMatrix(
            "dist_geometric requires full-rank SPD arguments",
            smallest_eigenvalue=float(w[0]),
        )
    return float(np.sqrt(np.sum(np.log(w) ** 2)))


def _psd_factor(m: SymMat, what: str) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (round-off negatives clipped to 0) and a full factor."""
    w, v = np.linalg.eigh(m.data)
    if w[0] < -RANK_TOL * max(w[-1], 0.0):
        raise NotPSD(f"{what} is not PSD (smallest eigenvalue {w[0]:.3e})")
    w = np.clip(w, 0.0, None)
    return w, v * np.sqrt(w)


def dist_wasserstein(s: SymMat, t: SymMat) -> float:
    """Bures-Wasserstein distance between PSD matrices of any rank.

    ``[tr(s) + tr(t) - 2 tr((s^1/2 t s^1/2)^1/2)]^(1/2)`` with the inner
    root taken over eigenvalues clipped to be nonnegative; invariant
    under joint congruence by orthogonal matrices. The trace of the
    inner root is evaluated as the nuclear norm of ``ys.T @ yt`` for
    factors ``ys ys.T = s``, ``yt yt.T = t`` (the two agree exactly, and
    the factor form avoids square-rooting round-off-sized eigenvalues
    of the triple product).
    """
    if s.dim != t.dim:
        raise DimensionMismatch(f"dimensions differ: {s.dim} vs {t.dim}")
    ws, ys = _psd_factor(s, "first argument")
    wt, yt = _psd_factor(t, "second argument")
    cross = float(np.sum(np.linalg.svd(ys.T @ yt, compute_uv=False)))
    d2 = float(np.sum(ws) + np.sum(wt) - 2.0 * cross)
    return float(np.sqrt(max(d2, 0.0)))


# ---------------------------------------------------------------------------
# Log maps and vectorizations
# ---------------------------------------------------------------------------


def log_geometric(base: SymMat, s: SymMat) -> SymMat:
    """Tangent vector at ``base`` pointing to ``s`` (affine-invariant metric).

    ``base^1/2 log(base^-1/2 s base^-1/2) base^1/2``; the matching
    exponential map recovers ``s``.
    """
    if base.dim != s.dim:
        raise DimensionMismatch(f"dimensions differ: {base.dim} vs {s.dim}")
    isq, sq = _spd_basis(base)
    inner = _logm_spd_stack(isq @ s.data @ isq, "log_geometric")
    return SymMat(sq @ inner @ sq)


def vec_geometric(base: SymMat, s: SymMat) -> np.ndarray:
    """Isometric coordinates of ``s`` in the tangent space at ``base``.

    Row-major upper triangle of ``log(base^-1/2 s base^-1/2)`` with unit
    diagonal weights and sqrt(2) off-diagonal weights, so the 2-norm of
    the result equals ``dist_geometric(base, s)``.
    """
    if base.dim != s.dim:
        raise DimensionMismatch(f"dimensions differ: {base.dim} vs {s.dim}")
    isq, _ = _spd_basis(base)
    inner = _logm_spd_stack(isq @ s.data @ isq, "vec_geometric")
    return _upper(inner)


def vec_euclidean(s: SymMat) -> np.ndarray:
    """Weighted upper-triangle flattening; a Frobenius isometry."""
    return _upper(s.data)


def vec_logdiag(s: SymMat) -> np.ndarray:
    """Elementwise log of the diagonal; requires positive diagonal entries."""
    d = np.diag(s.data)
    if np.any(d <= 0):
        raise NonPositiveDiagonal(
            f"diagonal entries must be positive (min {d.min():.3e})"
        )
    return np.log(d)


@dataclass(frozen=True)
class FactorMat:
    """Rank-``r`` factor ``y`` (shape p x r) of a PSD matrix ``y @ y.T``."""

    y: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.y, dtype=np.float64)
        if a.ndim != 2 or a.shape[1] < 1:
            raise ValueError(f"factor must be a p x r matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("factor entries must be finite")
        object.__setattr__(self, "y", a)

    @property
    def p(self) -> int:
        return self.y.shape[0]

    @property
    def r(self) -> int:
        return self.y.shape[1]


def factorize(s: SymMat, r: int) -> FactorMat:
    """Eigen-factor ``y = u_r diag(sqrt(w_r))`` of a rank-``r`` PSD matrix.

    Raises
    ------
    RankMismatch
        If the numerical rank of ``s`` differs from ``r``.
    """
    if not 1 <= r <= s.dim:
        raise ValueError(f"rank must be in [1, {s.dim}], got {r}")
    nr = numerical_rank(s)
    if nr != r:
        raise RankMismatch(f"numerical rank is {nr}, expected {r}")
    ep = eigh(s)
    return FactorMat(ep.vectors[:, :r] * np.sqrt(ep.values[:r]))


def log_wasserstein(base: FactorMat, s: FactorMat) -> np.ndarray:
    """Tangent vector in factor space from ``base`` toward ``s``.

    ``s.y @ (v @ u.T) - base.y`` where ``u s v.T`` is the SVD of
    ``base.y.T @ s.y``; its Frobenius norm equals the Wasserstein
    distance between the reconstructed matrices.
    """
    if base.y.shape != s.y.shape:
        raise DimensionMismatch(
            f"factor shapes differ: {base.y.shape} vs {s.y.shape}"
        )
    u, _, v = svd_rect(base.y.T @ s.y)
    return s.y @ (v @ u.T) - base.y


def vec_wasserstein(base: FactorMat, s: FactorMat) -> np.ndarray:
    """Row-major flattening of :func:`log_wasserstein` (length p*r)."""
    return log_wasserstein(base, s).reshape(-1)


# ---------------------------------------------------------------------------
# Means
# ---------------------------------------------------------------------------


def mean_euclidean(mats) -> SymMat:
    """Arithmetic mean."""
    return SymMat(_as_stack(mats).mean(axis=0))


def _geo_state(m: np.ndarray, stack: np.ndarray):
    """One whitening pass: (sqrt factor, gradient sum, objective)."""
    w, v = np.linalg.eigh(_sym(m))
    if w[0] <= RANK_TOL * w[-1] or w[-1] <= 0:
        raise SingularMatrix(
            "mean iterate lost positive definiteness", smallest_eigenvalue=float(w[0])
        )
    isq = (v / np.sqrt(w)) @ v.T
    sq = (v * np.sqrt(w)) @ v.T
    logs = _logm_spd_stack(isq @ stack @ isq, "mean_geometric")
    grad = logs.sum(axis=0)
    obj = float(np.sum(logs * logs))
    return sq, grad, obj


def mean_geometric(mats, max_iter: int = 300, tol: float | None = None) -> SymMat:
    """Karcher (Frechet) mean under the affine-invariant metric.

    Fixed-point iteration ``m <- m^1/2 exp(step/n sum_i log(m^-1/2 c_i
    m^-1/2)) m^1/2`` starting from the arithmetic mean, with the step
    halved whenever the summed squared distance increases. Converged
    when the gradient ``sum_i log(m^-1/2 c_i m^-1/2)`` has Frobenius
    norm at most ``tol`` (default ``1e-9 * p``).

    Raises
    ------
    SingularMatrix
        If any input is rank-deficient.
    NoConvergence
        If the gradient norm is still above ``tol`` after ``max_iter``
        iterations.
    """
    stack = _as_stack(mats)
    n, p = stack.shape[0], stack.shape[1]
    if tol is None:
        tol = 1e-9 * p
    m = stack.mean(axis=0)
    sq, grad, obj = _geo_state(m, stack)
    gnorm = float(np.linalg.norm(grad))
    for _ in range(max_iter):
        if gnorm <= tol:
            return SymMat(m)
        step = 1.0
        slack = 1e-12 * (1.0 + abs(obj))
        while True:
            cand = _sym(sq @ _expm_sym((step / n) * grad) @ sq)
            sq2, grad2, obj2 = _geo_state(cand, stack)
            if obj2 <= obj + slack or step <= 1e-4:
                m, sq, grad, obj = cand, sq2, grad2, obj2
                break
            step *= 0.5
        gnorm = float(np.linalg.norm(grad))
    if gnorm <= tol:
        return SymMat(m)
    raise NoConvergence(
        "geometric mean did not converge", gradient_norm=gnorm, iterations=max_iter
    )


def _wass_state(y: np.ndarray, factors: np.ndarray):
    """Log maps from ``y`` to every sample factor: (gradient sum, objective)."""
    u, _, vh = np.linalg.svd(y.T @ factors)
    q = vh.swapaxes(-1, -2) @ u.swapaxes(-1, -2)
    logs = factors @ q - y
    return logs.sum(axis=0), float(np.sum(logs * logs))


def mean_wasserstein(
    mats, r: int, max_iter: int = 300, tol: float | None = None
) -> SymMat:
    """Frechet mean under the Bures-Wasserstein metric, rank ``r``.

    Gradient descent on the factor ``y`` (p x r) minimizing the summed
    squared distances, with the descent direction assembled as the mean
    of the factor-space log maps and an Armijo backtracking line search
    (initial step 1, shrink 0.5, c = 1e-4). Initialized from the top-r
    eigenpairs of the arithmetic mean. Converged when the Riemannian
    gradient ``2 sum_i log_i`` has Frobenius norm at most ``tol``
    (default ``1e-7 * sqrt(p * r)``).

    Raises
    ------
    RankMismatch
        If any input's numerical rank differs from ``r``.
    NoConvergence
        If the gradient norm is still above ``tol`` after ``max_iter``
        iterations.
    """
    stack = _as_stack(mats)
    n, p = stack.shape[0], stack.shape[1]
    if tol is None:
        tol = 1e-7 * np.sqrt(p * r)
    factors = np.stack([factorize(c, r).y for c in mats])
    ep = eigh(SymMat(stack.mean(axis=0)))
    y = ep.vectors[:, :r] * np.sqrt(np.clip(ep.values[:r], 0.0, None))
    grad_sum, obj = _wass_state(y, factors)
    gnorm = 2.0 * float(np.linalg.norm(grad_sum))
    for _ in range(max_iter):
        if gnorm <= tol:
            return SymMat(y @ y.T)
        direction = grad_sum / n
        slope = -2.0 * float(np.sum(grad_sum * grad_sum)) / n
        step = 1.0
        slack = 1e-12 * (1.0 + abs(obj))
        while True:
            cand = y + step * direction
            grad2, obj2 = _wass_state(cand, factors)
            if obj2 <= obj + 1e-4 * step * slope + slack or step <= 1e-6:
                y, grad_sum, obj = cand, grad2, obj2
                break
            step *= 0.5
        gnorm = 2.0 * float(np.linalg.norm(grad_sum))
    if gnorm <= tol:
        return SymMat(y @ y.T)
    raise NoConvergence(
        "Wasserstein mean did not converge", gradient_norm=gnorm, iterations=max_iter
    )


def no_affine_invariance_witness():
    """Numerical witness that no continuous affine-invariant distance
    exists on rank-deficient PSD matrices.

    Returns the fixed rank-1 pair ``a = [[1,0],[0,0]]``,
    ``b = [[1,1],[1,1]]`` and the Wasserstein distances between their
    congruence images under ``diag(1, eps)`` for the epsilons in
    ``WITNESS_EPSILONS``. The distances shrink toward zero while the
    distance between ``a`` and ``b`` themselves stays above 0.1, so an
    affine-invariant continuous distance would have to be zero on a
    distinct pair.
    """
    a = SymMat([[1.0, 0.0], [0.0, 0.0]])
    b = SymMat([[1.0, 1.0], [1.0, 1.0]])
    dists = []
    for eps in WITNESS_EPSILONS:
        w = np.diag([1.0, eps])
        dists.append(
            dist_wasserstein(SymMat(w @ a.data @ w.T), SymMat(w @ b.data @ w.T))
        )
    return a, b, dists


# ---------------------------------------------------------------------------
# Embeddings: fit a reference on a training set, then vectorize samples
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Embedding:
    """Vectorization recipe: a kind plus its fitted reference point.

    ``euclidean`` and ``logdiag`` need no reference. ``geometric``
    carries a full-rank SPD reference; ``wasserstein`` carries a PSD
    reference whose numerical rank equals ``rank``.
    """

    kind: str
    reference: SymMat | None = None
    rank: int | None = None

    def __post_init__(self):
        if self.kind not in EMBEDDING_KINDS:
            raise ValueError(
                f"unknown embedding kind {self.kind!r}; expected one of {EMBEDDING_KINDS}"
            )
        if self.kind == "geometric":
            if self.reference is None:
                raise ValueError("geometric embedding requires a reference matrix")
            if numerical_rank(self.reference) != self.reference.dim:
                raise SingularMatrix("geometric embedding requires a full-rank reference")
        if self.kind == "wasserstein":
            if self.reference is None or self.rank is None:
                raise ValueError("wasserstein embedding requires a reference and a rank")
            nr = numerical_rank(self.reference)
            if nr != self.rank:
                raise RankMismatch(
                    f"reference rank {nr} differs from embedding rank {self.rank}"
                )


@dataclass(frozen=True)
class FeatureMatrix:
    """N x K feature rows plus the embedding that produced them."""

    rows: np.ndarray
    embedding: Embedding

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def k(self) -> int:
        return self.rows.shape[1]


def feature_dim(kind: str, p: int, rank: int | None = None) -> int:
    """Feature-vector length for a given embedding kind and dimension."""
    if kind in ("euclidean", "geometric"):
        return p * (p + 1) // 2
    if kind == "wasserstein":
        if rank is None:
            raise ValueError("wasserstein feature dimension needs a rank")
        return p * rank
    if kind == "logdiag":
        return p
    raise ValueError(f"unknown embedding kind {kind!r}")


def fit_embedding(mats, kind: str, rank: int | None = None) -> Embedding:
    """Compute the reference point of an embedding on a training set.

    The reference is the Frechet mean of ``mats`` under the metric that
    matches ``kind``; ``euclidean`` and ``logdiag`` have no reference.
    For ``wasserstein``, ``rank`` defaults to the numerical rank of the
    first matrix.
    """
    if kind == "geometric":
        return Embedding(kind, reference=mean_geometric(mats))
    if kind == "wasserstein":
        if rank is None:
            rank = numerical_rank(mats[0])
        return Embedding(kind, reference=mean_wasserstein(mats, rank), rank=rank)
    return Embedding(kind)


def embed(embedding: Embedding, mats) -> FeatureMatrix:
    """Vectorize matrices with a fitted embedding."""
    stack = _as_stack(mats)
    p = stack.shape[1]
    if embedding.kind == "euclidean":
        rows = _upper(stack)
    elif embedding.kind == "logdiag":
        d = np.diagonal(stack, axis1=1, axis2=2)
        if np.any(d <= 0):
            raise NonPositiveDiagonal(
                f"diagonal entries must be positive (min {d.min():.3e})"
            )
        rows = np.log(d)
    elif embedding.kind == "geometric":
        if embedding.reference.dim != p:
            raise DimensionMismatch(
                f"reference dim {embedding.reference.dim} vs matrices dim {p}"
            )
        isq, _ = _spd_basis(embedding.reference)
        rows = _upper(_logm_spd_stack(isq @ stack @ isq, "embed"))
    else:  # wasserstein
        if embedding.reference.dim != p:
            raise DimensionMismatch(
                f"reference dim {embedding.reference.dim} vs matrices dim {p}"
            )
        base = factorize(embedding.reference, embedding.rank)
        rows = np.stack(
            [vec_wasserstein(base, factorize(c, embedding.rank)) for c in mats]
        )
    return FeatureMatrix(rows=rows, embedding=embedding)

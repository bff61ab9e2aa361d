"""Gaussian distribution algebra.

Construction and validation of Gaussian laws, optimal affine (linear
least-squares) models for jointly Gaussian input/output pairs, affine
pushforwards, and the two closed-form divergences used throughout:

* ``kl_gaussian(p, q)``     KL(p ‖ q) for nondegenerate reference q,
* ``w2_gaussian_sq(p, q)``  squared Wasserstein-2 (Bures) distance.

Conventions
-----------
* Joint tasks store one (d+l)-dimensional mean and one symmetric
  (d+l)×(d+l) covariance, partitioned as

      mean = (μ_X; μ_Y),   cov = [[Σ_X,  Σ_XY],
                                  [Σ_YX, Σ_Y ]].

* ``AffineModel.weight`` is the applied operator of shape (l, d):
  the model maps x ↦ weight @ x + intercept.  The optimal model for a
  joint task is weight = Σ_YX Σ_X⁻¹, intercept = μ_Y − Σ_YX Σ_X⁻¹ μ_X.

* The Wasserstein divergence returns the *squared* distance (hence the
  ``_sq`` suffix); callers wanting a metric take the square root.

Numerical policy: matrix square roots go through a symmetric
eigendecomposition with eigenvalues clamped at max(0, λ); linear solves
go through Cholesky with a single retry after adding 1e-10·trace/n of
diagonal jitter.  Both choices are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AsymmetricCovariance,
    DimensionMismatch,
    NotPositiveSemidefinite,
    SingularInputCovariance,
    SingularReference,
)

SYMMETRY_TOL = 1e-10
PSD_REL_TOL = 1e-8
PD_MIN_EIG = 1e-10
CHOLESKY_JITTER = 1e-10


def _as_vector(x, name: str = "vector") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-D, got shape {x.shape}")
    return x


def _as_square(m, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")
    return m


def validate_covariance(cov: np.ndarray, name: str = "cov") -> np.ndarray:
    """Check symmetry (within 1e-10) and PSD-ness; return the exactly
    symmetrized copy that all downstream code works with."""
    cov = _as_square(cov, name)
    asym = float(np.max(np.abs(cov - cov.T))) if cov.size else 0.0
    if asym > SYMMETRY_TOL:
        raise AsymmetricCovariance(f"{name}: max abs asymmetry {asym:.3e} > {SYMMETRY_TOL}")
    cov = 0.5 * (cov + cov.T)
    eigs = np.linalg.eigvalsh(cov)
    lo, hi = float(eigs[0]), float(eigs[-1])
    if lo < -PSD_REL_TOL * max(hi, 0.0):
        raise NotPositiveSemidefinite(f"{name}: min eigenvalue {lo:.3e} (max {hi:.3e})")
    return cov


def cholesky_with_jitter(mat: np.ndarray, err: type[Exception] = SingularInputCovariance):
    """Lower Cholesky factor, retried once with 1e-10·trace/n jitter.

    The jitter retry is the documented fallback for near-singular
    symmetric positive-definite solves; a second failure raises ``err``.
    """
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        n = mat.shape[0]
        jitter = CHOLESKY_JITTER * float(np.trace(mat)) / max(n, 1)
        if jitter <= 0.0:
            raise err("matrix is not positive definite") from None
        try:
            return np.linalg.cholesky(mat + jitter * np.eye(n))
        except np.linalg.LinAlgError:
            raise err("matrix is not positive definite, even with jitter") from None


def chol_solve(chol: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve A x = rhs given the lower Cholesky factor of A."""
    from scipy.linalg import solve_triangular

    y = solve_triangular(chol, rhs, lower=True)
    return solve_triangular(chol.T, y, lower=False)


def sqrtm_psd(mat: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues are clamped at max(0, λ) so that a −1e-12 round-off
    eigenvalue does not poison the square root.
    """
    vals, vecs = np.linalg.eigh(0.5 * (mat + mat.T))
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


@dataclass(frozen=True)
class GaussianDist:
    """A Gaussian law N(mean, cov); cov may be rank deficient."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _as_vector(self.mean, "mean")
        cov = validate_covariance(self.cov, "cov")
        if cov.shape[0] != mean.shape[0]:
            raise DimensionMismatch(
                f"mean has dim {mean.shape[0]} but cov is {cov.shape[0]}x{cov.shape[1]}"
            )
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class GaussianJointTask:
    """Joint Gaussian law of an (input, output) pair.

    The first ``dim_x`` coordinates are the input block, the remaining
    ``dim_y`` the output block.  The input block Σ_X must be strictly
    positive definite (smallest eigenvalue > 1e-10) so the optimal
    affine model is well defined; the full covariance only needs PSD.
    """

    dim_x: int
    dim_y: int
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        if self.dim_x < 1 or self.dim_y < 1:
            raise DimensionMismatch("dim_x and dim_y must be positive")
        n = self.dim_x + self.dim_y
        mean = _as_vector(self.mean, "mean")
        cov = validate_covariance(self.cov, "cov")
        if mean.shape[0] != n or cov.shape[0] != n:
            raise DimensionMismatch(
                f"expected dimension {n}, got mean {mean.shape[0]}, cov {cov.shape[0]}"
            )
        sx = cov[: self.dim_x, : self.dim_x]
        min_eig = float(np.linalg.eigvalsh(sx)[0])
        if min_eig <= PD_MIN_EIG:
            raise NotPositiveSemidefinite(
                f"input covariance block must be strictly PD; min eigenvalue {min_eig:.3e}"
            )
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    # partitioned views -------------------------------------------------
    @property
    def mean_x(self) -> np.ndarray:
        return self.mean[: self.dim_x]

    @property
    def mean_y(self) -> np.ndarray:
        return self.mean[self.dim_x:]

    @property
    def cov_x(self) -> np.ndarray:
        return self.cov[: self.dim_x, : self.dim_x]

    @property
    def cov_xy(self) -> np.ndarray:
        return self.cov[: self.dim_x, self.dim_x:]

    @property
    def cov_yx(self) -> np.ndarray:
        return self.cov[self.dim_x:, : self.dim_x]

    @property
    def cov_y(self) -> np.ndarray:
        return self.cov[self.dim_x:, self.dim_x:]

    def input_marginal(self) -> GaussianDist:
        return GaussianDist(self.mean_x, self.cov_x)


@dataclass(frozen=True)
class AffineModel:
    """The affine map x ↦ weight @ x + intercept, weight of shape (l, d)."""

    weight: np.ndarray
    intercept: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=float)
        if w.ndim == 1:
            w = w.reshape(1, -1)
        if w.ndim != 2:
            raise DimensionMismatch(f"weight must be a matrix, got shape {w.shape}")
        b = np.atleast_1d(np.asarray(self.intercept, dtype=float))
        if b.ndim != 1 or b.shape[0] != w.shape[0]:
            raise DimensionMismatch(
                f"intercept of length {b.shape} does not match weight {w.shape}"
            )
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "intercept", b)

    @property
    def dim_in(self) -> int:
        return self.weight.shape[1]

    @property
    def dim_out(self) -> int:
        return self.weight.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Apply to a point (d,) or a batch (n, d)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.weight @ x + self.intercept
        return x @ self.weight.T + self.intercept


def fit_optimal_affine(task: GaussianJointTask) -> AffineModel:
    """Population least-squares model of Y on X for a joint Gaussian task.

    weight = Σ_YX Σ_X⁻¹ and intercept = μ_Y − Σ_YX Σ_X⁻¹ μ_X, which
    minimize E‖Y − W X − b‖² under the task's law.  Σ_X is factorized
    (never inverted explicitly); failure raises SingularInputCovariance.
    """
    chol = cholesky_with_jitter(task.cov_x, SingularInputCovariance)
    weight = chol_solve(chol, task.cov_xy).T          # Σ_YX Σ_X⁻¹, shape (l, d)
    intercept = task.mean_y - weight @ task.mean_x
    return AffineModel(weight, intercept)


def pushforward_affine(model: AffineModel, input_mean, input_cov) -> GaussianDist:
    """Law of model(X) for X ~ N(input_mean, input_cov).

    Returns N(W μ + b, W Σ Wᵀ).  The result may be rank deficient (a
    wide weight matrix collapses directions); that is permitted here and
    only rejected later by divergences that require a density.
    """
    mean = _as_vector(input_mean, "input_mean")
    cov = validate_covariance(input_cov, "input_cov")
    if mean.shape[0] != model.dim_in or cov.shape[0] != model.dim_in:
        raise DimensionMismatch(
            f"model expects inputs of dim {model.dim_in}, got {mean.shape[0]}"
        )
    out_cov = model.weight @ cov @ model.weight.T
    return GaussianDist(model.weight @ mean + model.intercept, 0.5 * (out_cov + out_cov.T))


def compose_affine(outer: AffineModel, inner: AffineModel) -> AffineModel:
    """The map x ↦ outer(inner(x))."""
    if outer.dim_in != inner.dim_out:
        raise DimensionMismatch(
            f"outer expects dim {outer.dim_in}, inner produces {inner.dim_out}"
        )
    return AffineModel(outer.weight @ inner.weight,
                       outer.weight @ inner.intercept + outer.intercept)


def kl_gaussian(p: GaussianDist, q: GaussianDist) -> float:
    """KL(p ‖ q) between Gaussians of the same dimension.

    ½ [ Tr(Σq⁻¹Σp) − log det(Σp)/det(Σq) − n + (μp−μq)ᵀ Σq⁻¹ (μp−μq) ].

    The reference q must have a strictly positive-definite covariance:
    a rank-deficient q (e.g. a degenerate pushforward) has no density,
    absolute continuity fails and SingularReference is raised.  A rank-
    deficient p against a valid reference yields +∞ (p is then singular
    with respect to q), returned as math.inf rather than an error.
    """
    if p.dim != q.dim:
        raise DimensionMismatch(f"dimension mismatch: {p.dim} vs {q.dim}")
    try:
        chol_q = np.linalg.cholesky(q.cov)
    except np.linalg.LinAlgError:
        raise SingularReference("reference covariance is not positive definite") from None
    n = p.dim
    solved = chol_solve(chol_q, p.cov)
    trace_term = float(np.trace(solved))
    sign_p, logdet_p = np.linalg.slogdet(p.cov)
    if sign_p <= 0:
        return math.inf
    logdet_q = 2.0 * float(np.sum(np.log(np.diag(chol_q))))
    diff = p.mean - q.mean
    quad = float(diff @ chol_solve(chol_q, diff))
    kl = 0.5 * (trace_term - (logdet_p - logdet_q) - n + quad)
    return max(kl, 0.0)


def w2_gaussian_sq(p: GaussianDist, q: GaussianDist) -> float:
    """Squared Wasserstein-2 distance between Gaussians (Bures form).

    ‖μp−μq‖² + Tr(Σp + Σq − 2 (Σp^{1/2} Σq Σp^{1/2})^{1/2}).

    Defined for arbitrary PSD covariances; eigenvalue clamping makes the
    boundary (rank-deficient) cases exact rather than NaN.
    """
    if p.dim != q.dim:
        raise DimensionMismatch(f"dimension mismatch: {p.dim} vs {q.dim}")
    root_p = sqrtm_psd(p.cov)
    cross = sqrtm_psd(root_p @ q.cov @ root_p)
    gap = float(np.sum((p.mean - q.mean) ** 2))
    trace_term = float(np.trace(p.cov) + np.trace(q.cov) - 2.0 * np.trace(cross))
    return gap + max(trace_term, 0.0)

"""Sharpe-ratio portfolio optimization on the simplex, with transfer.

The source task maximizes μ'φ / √(φ'Σφ) over the unit simplex; the
transfer task maximizes the same objective minus a quadratic pull
penalty·‖φ − anchor‖² toward a pretrained portfolio.  The solver is
projected gradient ascent with Euclidean simplex projection: base step
1e-2, halving backtracking whenever a step would decrease the
objective, convergence when the step-normalized projected gradient
drops below 1e-8, hard cap of 1e5 iterations.  Multi-start from the
uniform portfolio, every vertex, and (when present) the anchor, keeping
the best objective; since steps never decrease the objective, the
returned portfolio always scores at least the anchor and the uniform.

Sharpe convention: standard deviation in the denominator.  (Dividing by
the variance instead changes the argmax off rays; the square-root form
is the one actually optimized and reported.)  Annualization is the
caller's business; nothing here assumes a data frequency.

The prescreen distance between two return datasets is the squared
Wasserstein-2 distance between their moment-matched Gaussian
approximations: cheap to compute before any optimization, and
correlated (negatively) with the out-of-sample Sharpe a transferred
portfolio achieves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateVariance,
    DimensionMismatch,
    InsufficientHistory,
    NonPSDSigma,
    ValidationError,
    ZeroVariancePortfolio,
)
from .gaussian import GaussianDist, w2_gaussian_sq

VARIANCE_FLOOR = 1e-14
STEP = 1e-2
GRAD_TOL = 1e-8
MAX_ITER = 100_000


@dataclass(frozen=True)
class ReturnsDataset:
    """Per-period asset returns, one row per period, one column per asset."""

    returns: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        if r.ndim != 2:
            raise DimensionMismatch(f"returns must be 2-D, got shape {r.shape}")
        if r.shape[0] < 2:
            raise InsufficientHistory("need at least two return periods")
        if r.shape[1] < 2:
            raise ValidationError("need at least two assets")
        if not np.all(np.isfinite(r)):
            raise ValidationError("returns contain non-finite entries")
        r.setflags(write=False)
        object.__setattr__(self, "returns", r)

    @property
    def n_periods(self) -> int:
        return self.returns.shape[0]

    @property
    def n_assets(self) -> int:
        return self.returns.shape[1]


@dataclass(frozen=True)
class Portfolio:
    """Weights on the unit simplex: nonnegative, summing to one."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.shape[0] < 1:
            raise DimensionMismatch(f"weights must be a vector, got shape {w.shape}")
        if float(w.min()) < -1e-12:
            raise ValidationError(f"weights must be nonnegative, min is {w.min():.3e}")
        if abs(float(w.sum()) - 1.0) > 1e-9:
            raise ValidationError(f"weights sum to {w.sum()!r}, not 1")
        w = np.clip(w, 0.0, None)
        w = w / w.sum()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_assets(self) -> int:
        return self.weights.shape[0]


def estimate_moments(data: ReturnsDataset) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and unbiased sample covariance, symmetrized and
    eigenvalue-clamped at zero so downstream code sees an exact PSD."""
    mu = data.returns.mean(axis=0)
    sigma = np.cov(data.returns, rowvar=False, ddof=1)
    sigma = 0.5 * (sigma + sigma.T)
    vals, vecs = np.linalg.eigh(sigma)
    if vals[0] < 0.0:
        sigma = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
        sigma = 0.5 * (sigma + sigma.T)
    return mu, sigma


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the unit simplex (sorted-threshold rule).

    The threshold scan runs in plain Python: the solver calls this tens
    of thousands of times on vectors of a handful of assets, where numpy
    dispatch overhead would dominate the arithmetic.
    """
    v = np.asarray(v, dtype=float)
    css = 0.0
    theta = 0.0
    for i, ui in enumerate(sorted(v.tolist(), reverse=True), start=1):
        css += ui
        t = (css - 1.0) / i
        if ui - t > 0.0:
            theta = t
    return np.maximum(v - theta, 0.0)


def sharpe_ratio(portfolio: Portfolio, mu: np.ndarray, sigma: np.ndarray) -> float:
    """μ'φ / √(φ'Σφ); raises if the portfolio variance is (near) zero."""
    w = portfolio.weights
    var = float(w @ sigma @ w)
    if var <= VARIANCE_FLOOR:
        raise ZeroVariancePortfolio(f"portfolio variance {var:.3e} below floor")
    return float(mu @ w) / math.sqrt(var)


def _validate_sigma(sigma: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise DimensionMismatch(f"sigma must be square, got {sigma.shape}")
    sigma = 0.5 * (sigma + sigma.T)
    eigs = np.linalg.eigvalsh(sigma)
    if eigs[0] < -1e-8 * max(float(eigs[-1]), 1.0):
        raise NonPSDSigma(f"sigma has eigenvalue {eigs[0]:.3e}")
    return sigma


class _Objective:
    """Sharpe ratio with optional anchoring penalty, and its gradient."""

    def __init__(self, mu, sigma, anchor, penalty):
        self.mu = mu
        self.sigma = sigma
        self.anchor = anchor
        self.penalty = penalty

    def value(self, w: np.ndarray) -> float:
        sig_w = self.sigma @ w
        var = float(w @ sig_w)
        if var <= VARIANCE_FLOOR:
            if float(self.mu @ w) > 0.0:
                raise DegenerateVariance(
                    "a feasible zero-variance portfolio with positive mean exists; "
                    "the Sharpe objective is unbounded")
            return -math.inf
        value = float(self.mu @ w) / math.sqrt(var)
        if self.anchor is not None:
            diff = w - self.anchor
            value -= self.penalty * float(diff @ diff)
        return value

    def value_and_gradient(self, w: np.ndarray) -> tuple[float, np.ndarray]:
        """One fused evaluation; the hot path of the ascent loop."""
        sig_w = self.sigma @ w
        var = float(w @ sig_w)
        if var <= VARIANCE_FLOOR:
            return self.value(w), np.zeros_like(w)
        mean = float(self.mu @ w)
        sd = math.sqrt(var)
        value = mean / sd
        grad = self.mu / sd - (mean / (sd * var)) * sig_w
        if self.anchor is not None:
            diff = w - self.anchor
            value -= self.penalty * float(diff @ diff)
            grad -= (2.0 * self.penalty) * diff
        return value, grad

    def gradient(self, w: np.ndarray) -> np.ndarray:
        return self.value_and_gradient(w)[1]


_STALL_LIMIT = 500  # plateau iterations tolerated without strict improvement


def _ascend(obj: _Objective, start: np.ndarray) -> tuple[np.ndarray, float]:
    w = project_simplex(start)
    value = obj.value(w)
    if not math.isfinite(value):
        return w, value
    prev_key = w.tobytes()
    stalled = 0
    for _ in range(MAX_ITER):
        value, grad = obj.value_and_gradient(w)
        candidate = project_simplex(w + STEP * grad)
        move = candidate - w
        if math.sqrt(float(move @ move)) / STEP <= GRAD_TOL:
            break
        step = STEP
        cand_value = obj.value(candidate)
        while cand_value < value and step > 1e-16:
            step *= 0.5
            candidate = project_simplex(w + step * grad)
            cand_value = obj.value(candidate)
        if cand_value < value:
            break  # no nondecreasing point along the ray at float resolution
        key = candidate.tobytes()
        w_key = w.tobytes()
        if key == w_key or key == prev_key:
            break  # fixed point or two-cycle on the float plateau
        if cand_value == value:
            stalled += 1
            if stalled > _STALL_LIMIT:
                break
        else:
            stalled = 0
        prev_key = w_key
        w = candidate
    return w, obj.value(w)


def sharpe_optimize(mu: np.ndarray, sigma: np.ndarray,
                    anchor: Portfolio | None = None,
                    penalty: float = 0.0) -> Portfolio:
    """Maximize the (optionally anchored) Sharpe objective on the simplex.

    Multi-start projected gradient ascent; see the module docstring for
    the exact solver policy.  The result is feasible, scores at least
    the anchor and the uniform portfolio, and satisfies first-order
    stationarity (projected gradient below 1e-7).
    """
    mu = np.asarray(mu, dtype=float)
    sigma = _validate_sigma(sigma)
    d = mu.shape[0]
    if sigma.shape[0] != d:
        raise DimensionMismatch(f"mu has {d} assets but sigma is {sigma.shape}")
    if penalty < 0.0:
        raise ValidationError(f"penalty must be nonnegative, got {penalty}")
    if anchor is not None and anchor.n_assets != d:
        raise DimensionMismatch("anchor dimension does not match mu")

    # a zero-variance vertex with positive mean makes the ratio unbounded
    diag = np.diag(sigma)
    if np.any((diag <= VARIANCE_FLOOR) & (mu > 0.0)):
        raise DegenerateVariance(
            "an asset with zero variance and positive mean makes the Sharpe "
            "objective unbounded")

    obj = _Objective(mu, sigma, None if anchor is None else anchor.weights, penalty)
    starts = [np.full(d, 1.0 / d)]
    starts.extend(np.eye(d))
    if anchor is not None:
        starts.append(anchor.weights.copy())

    best_w, best_value = None, -math.inf
    for start in starts:
        w, value = _ascend(obj, start)
        if value > best_value:
            best_w, best_value = w, value
    if best_w is None or not math.isfinite(best_value):
        raise DegenerateVariance("no feasible portfolio with positive variance found")
    return Portfolio(best_w)


def prescreen_risk_w2(source: ReturnsDataset, target: ReturnsDataset) -> float:
    """Squared W2 between moment-matched Gaussians of the two datasets.

    Symmetric, zero exactly on matching moments; report writers expose
    the square root alongside.  Computable from returns alone, before
    any portfolio is fitted.
    """
    if source.n_assets != target.n_assets:
        raise DimensionMismatch(
            f"asset counts differ: {source.n_assets} vs {target.n_assets}")
    mu_s, sigma_s = estimate_moments(source)
    mu_t, sigma_t = estimate_moments(target)
    return w2_gaussian_sq(GaussianDist(mu_s, sigma_s), GaussianDist(mu_t, sigma_t))

"""Closed-form output transport risks and regret for Gaussian task pairs.

Setting: source and target tasks are joint Gaussian laws over the same
input space, each solved exactly by its population least-squares affine
model.  Reusing the source model on the target task pushes the target
input law through the *source* model, producing an intermediate output
law that differs from the optimal target output law.  The divergence
between those two laws is the output transport risk; this module
evaluates it in closed form, split into

    total = variance term (covariance mismatch) + bias term (mean mismatch)

for three scenarios:

* basic case          -- same input and output spaces (scalar output);
* feature augmentation -- target inputs extend source inputs by k new
  coordinates, the natural input transport being the projection that
  drops them.  The projection kills the bias term identically.
* output augmentation -- target outputs stack the source outputs with a
  new k-dimensional prediction task, initialized by a caller-chosen
  affine model for the new block.

The basic case also carries the regret identity: the excess target loss
from reusing the source model equals the squared-W2 risk plus an
angular residual, which is nonnegative by Cauchy-Schwarz, so the
Wasserstein risk is always a lower bound on regret and can prescreen
source tasks without fitting anything.

Every closed form here is cross-checked in the test suite against the
generic divergences in ``gaussian`` applied to explicitly constructed
pushforward laws, and against the Monte-Carlo/quadrature oracles in
``mc``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    DegeneratePushforward,
    DimensionMismatch,
    InconsistentAugmentation,
    SingularInputCovariance,
    SingularIntermediateCovariance,
)
from .gaussian import (
    AffineModel,
    GaussianDist,
    GaussianJointTask,
    cholesky_with_jitter,
    chol_solve,
    fit_optimal_affine,
    pushforward_affine,
    sqrtm_psd,
)

DEGENERATE_VARIANCE_TOL = 1e-14

KL = "kl"
WASSERSTEIN = "w"
_VARIANTS = (KL, WASSERSTEIN)


def convex_rate(x: float) -> float:
    """h(x) = ½(x − log x − 1): the KL cost of a variance ratio x.

    Strictly convex on (0, ∞) with minimum 0 at x = 1.  Near x = 1 the
    naive expression cancels catastrophically (x − log x − 1 ≈ u²/2 for
    u = x − 1), exactly where the zero-risk tests concentrate, so
    |u| < 1e-4 switches to the series u²/2 − u³/3 + u⁴/4 (truncation
    error below 1e-21 there) and the direct branch evaluates
    u − log1p(u) rather than lose the leading digits to x − 1.
    """
    if x < 0.0:
        raise ValueError(f"variance ratio must be nonnegative, got {x}")
    if x == 0.0:
        return math.inf
    u = x - 1.0
    if abs(u) < 1e-4:
        return 0.5 * (u * u / 2.0 - u ** 3 / 3.0 + u ** 4 / 4.0)
    return 0.5 * (u - math.log1p(u))


class RiskSplit(NamedTuple):
    total: float
    variance_term: float
    bias_term: float


class RegretSplit(NamedTuple):
    regret: float
    variance_term: float
    bias_term: float


class RegretIdentity(NamedTuple):
    regret: float
    risk_w: float
    residual: float


@dataclass(frozen=True)
class BasicCasePair:
    """Source/target joint tasks on the same input space, scalar output."""

    source: GaussianJointTask
    target: GaussianJointTask

    def __post_init__(self):
        if self.source.dim_y != 1 or self.target.dim_y != 1:
            raise DimensionMismatch("basic case requires scalar outputs")
        if self.source.dim_x != self.target.dim_x:
            raise DimensionMismatch(
                f"input dims differ: {self.source.dim_x} vs {self.target.dim_x}")


def _basic_quadratics(pair: BasicCasePair) -> tuple[float, float, float]:
    """(numerator, denominator, mean gap) shared by all basic-case forms.

    numerator   = Σ_TYX Σ_TX⁻¹ Σ_TXY          (target model output variance)
    denominator = w_Sᵀ Σ_TX w_S               (source model variance on target inputs)
    mean gap    = μ_TY − μ_SY − w_Sᵀ (μ_TX − μ_SX)
    """
    src, tgt = pair.source, pair.target
    chol_s = cholesky_with_jitter(src.cov_x, SingularInputCovariance)
    w_s = chol_solve(chol_s, src.cov_xy)[:, 0]
    chol_t = cholesky_with_jitter(tgt.cov_x, SingularInputCovariance)
    w_t = chol_solve(chol_t, tgt.cov_xy)[:, 0]

    numerator = max(float(tgt.cov_xy[:, 0] @ w_t), 0.0)
    denominator = max(float(w_s @ tgt.cov_x @ w_s), 0.0)
    gap = float(tgt.mean_y[0] - src.mean_y[0] - w_s @ (tgt.mean_x - src.mean_x))
    return numerator, denominator, gap


def basic_output_risk_kl(pair: BasicCasePair) -> RiskSplit:
    """KL output risk of reusing the source model, split variance + bias.

    variance = h(numerator/denominator), bias = gap²/(2·denominator).
    Requires the intermediate output law to have positive variance
    (otherwise the optimal target law has no density against it and the
    KL risk is undefined): denominator ≤ 1e-14 raises
    DegeneratePushforward.  A zero numerator (uncorrelated target)
    yields +∞, matching the point-mass limit.
    """
    numerator, denominator, gap = _basic_quadratics(pair)
    if denominator <= DEGENERATE_VARIANCE_TOL:
        raise DegeneratePushforward(
            "source model output has (near-)zero variance on target inputs; "
            "no density to compare against")
    variance = convex_rate(numerator / denominator)
    bias = gap * gap / (2.0 * denominator)
    return RiskSplit(variance + bias, variance, bias)


def basic_output_risk_w(pair: BasicCasePair) -> RiskSplit:
    """Squared-W2 output risk of reusing the source model.

    variance = (√denominator − √numerator)², bias = gap².  Defined for
    degenerate pushforwards too (W2 needs no densities).
    """
    numerator, denominator, gap = _basic_quadratics(pair)
    variance = (math.sqrt(max(denominator, 0.0)) - math.sqrt(max(numerator, 0.0))) ** 2
    bias = gap * gap
    return RiskSplit(variance + bias, variance, bias)


def regret_closed_form(pair: BasicCasePair) -> RegretSplit:
    """Excess target loss of the source model over the target optimum.

    regret = ‖Σ_TX^{1/2}(w_T − w_S)‖² + gap², always ≥ 0, zero exactly
    when the two optimal weights coincide and the mean gap vanishes.
    """
    src, tgt = pair.source, pair.target
    w_s = fit_optimal_affine(src).weight[0]
    w_t = fit_optimal_affine(tgt).weight[0]
    _, _, gap = _basic_quadratics(pair)
    diff = w_t - w_s
    variance = float(diff @ tgt.cov_x @ diff)
    bias = gap * gap
    return RegretSplit(variance + bias, variance, bias)


def regret_risk_identity(pair: BasicCasePair) -> RegretIdentity:
    """Decompose regret as squared-W2 risk plus an angular residual.

    residual = 2(‖a‖‖b‖ − ⟨a, b⟩) with a = Σ_TX^{1/2} w_T and
    b = Σ_TX^{1/2} w_S, which is ≥ 0 by Cauchy-Schwarz and vanishes
    exactly when a and b are parallel with nonnegative inner product.
    Hence risk_w ≤ regret: the W2 risk prescreens without ever being
    optimistic about regret.
    """
    src, tgt = pair.source, pair.target
    w_s = fit_optimal_affine(src).weight[0]
    w_t = fit_optimal_affine(tgt).weight[0]
    root = sqrtm_psd(tgt.cov_x)
    a = root @ w_t
    b = root @ w_s
    residual = 2.0 * (float(np.linalg.norm(a) * np.linalg.norm(b)) - float(a @ b))
    regret = regret_closed_form(pair).regret
    risk_w = basic_output_risk_w(pair).total
    return RegretIdentity(regret, risk_w, residual)


@dataclass(frozen=True)
class FeatureAugmentedPair:
    """Target inputs extend source inputs by k trailing coordinates.

    The natural input transport is the projection onto the first d
    coordinates, under which the target task restricted to those
    coordinates *is* the source task.  That consistency is checked
    eagerly: the restricted mean/covariance blocks must equal the
    source blocks exactly, since the closed forms silently assume it.
    """

    source: GaussianJointTask
    target: GaussianJointTask

    def __post_init__(self):
        src, tgt = self.source, self.target
        if src.dim_y != 1 or tgt.dim_y != 1:
            raise DimensionMismatch("feature augmentation requires scalar outputs")
        d = src.dim_x
        if tgt.dim_x <= d:
            raise DimensionMismatch(
                f"target input dim {tgt.dim_x} must exceed source input dim {d}")
        ok = (
            np.array_equal(tgt.mean_x[:d], src.mean_x)
            and np.array_equal(tgt.mean_y, src.mean_y)
            and np.array_equal(tgt.cov_x[:d, :d], src.cov_x)
            and np.array_equal(tgt.cov_xy[:d], src.cov_xy)
            and np.array_equal(tgt.cov_y, src.cov_y)
        )
        if not ok:
            raise InconsistentAugmentation(
                "target blocks restricted to the first d input coordinates "
                "must equal the source blocks")

    @property
    def extra_dims(self) -> int:
        return self.target.dim_x - self.source.dim_x


def feature_aug_risk(pair: FeatureAugmentedPair, variant: str = KL) -> RiskSplit:
    """Output risk under feature augmentation; the bias term is 0.

    Projecting the target input reproduces the source input law
    exactly, so only the variance ratio

        ratio = (Σ_TYX Σ_TX⁻¹ Σ_TXY) / (Σ_SYX Σ_SX⁻¹ Σ_SXY)

    survives: KL risk h(ratio), W risk (√num − √den)².  The ratio is
    ≥ 1 whenever the extra coordinates are informative (adding features
    can only grow the explained output variance).
    """
    if variant not in _VARIANTS:
        raise ValueError(f"variant must be one of {_VARIANTS}, got {variant!r}")
    src, tgt = pair.source, pair.target
    chol_s = cholesky_with_jitter(src.cov_x, SingularInputCovariance)
    den = max(float(src.cov_xy[:, 0] @ chol_solve(chol_s, src.cov_xy)[:, 0]), 0.0)
    chol_t = cholesky_with_jitter(tgt.cov_x, SingularInputCovariance)
    num = max(float(tgt.cov_xy[:, 0] @ chol_solve(chol_t, tgt.cov_xy)[:, 0]), 0.0)
    if den <= DEGENERATE_VARIANCE_TOL:
        raise DegeneratePushforward("source model explains no output variance")
    if variant == KL:
        variance = convex_rate(num / den)
    else:
        variance = (math.sqrt(max(num, 0.0)) - math.sqrt(den)) ** 2
    return RiskSplit(variance, variance, 0.0)


def uncorrelated_aug_ratio(base_quadratic: float, aug_cov_x: np.ndarray,
                           aug_cov_xy: np.ndarray) -> float:
    """Variance ratio when the added features are uncorrelated with the old.

    With a block-diagonal input covariance the ratio collapses to

        1 + (Σ_AYX Σ_AX⁻¹ Σ_AXY) / base_quadratic,

    where base_quadratic = Σ_SYX Σ_SX⁻¹ Σ_SXY.  Exposed separately so
    the shortcut can be checked against the full computation.
    """
    if base_quadratic <= 0.0:
        raise DegeneratePushforward("base quadratic form must be positive")
    aug_cov_x = np.asarray(aug_cov_x, dtype=float)
    aug_cov_xy = np.asarray(aug_cov_xy, dtype=float).reshape(-1, 1)
    chol = cholesky_with_jitter(aug_cov_x, SingularInputCovariance)
    extra = float(aug_cov_xy[:, 0] @ chol_solve(chol, aug_cov_xy)[:, 0])
    return 1.0 + extra / base_quadratic


@dataclass(frozen=True)
class OutputAugmentedPair:
    """Target outputs stack the source outputs with k new components.

    The new block needs an initialization model (there is nothing to
    transfer for it); ``init_model`` maps inputs to the k new outputs.
    The target restricted to the first l output coordinates must equal
    the source task exactly, checked eagerly as in feature augmentation.
    """

    source: GaussianJointTask
    target: GaussianJointTask
    init_model: AffineModel

    def __post_init__(self):
        src, tgt = self.source, self.target
        if src.dim_x != tgt.dim_x:
            raise DimensionMismatch("output augmentation keeps the input space fixed")
        l = src.dim_y
        if tgt.dim_y <= l:
            raise DimensionMismatch(
                f"target output dim {tgt.dim_y} must exceed source output dim {l}")
        k = tgt.dim_y - l
        if self.init_model.dim_in != src.dim_x or self.init_model.dim_out != k:
            raise DimensionMismatch(
                f"init model must map {src.dim_x} inputs to {k} new outputs")
        ok = (
            np.array_equal(tgt.mean_x, src.mean_x)
            and np.array_equal(tgt.mean_y[:l], src.mean_y)
            and np.array_equal(tgt.cov_x, src.cov_x)
            and np.array_equal(tgt.cov_xy[:, :l], src.cov_xy)
            and np.array_equal(tgt.cov_y[:l, :l], src.cov_y)
        )
        if not ok:
            raise InconsistentAugmentation(
                "target blocks restricted to the first l output coordinates "
                "must equal the source blocks")

    @property
    def extra_dims(self) -> int:
        return self.target.dim_y - self.source.dim_y


class OutputAugRisk(NamedTuple):
    total: float
    variance_term: float
    bias_term: float
    mean_target: np.ndarray
    cov_target: np.ndarray
    mean_intermediate: np.ndarray
    cov_intermediate: np.ndarray


def output_aug_laws(pair: OutputAugmentedPair) -> tuple[GaussianDist, GaussianDist]:
    """The two output laws compared under output augmentation.

    Target law: target inputs pushed through the optimal target model.
    Intermediate law: target inputs pushed through the stacked model
    (optimal source model on the first l outputs, the caller's
    initialization on the remaining k).
    """
    tgt = pair.target
    optimal = fit_optimal_affine(tgt)
    target_law = pushforward_affine(optimal, tgt.mean_x, tgt.cov_x)

    source_model = fit_optimal_affine(pair.source)
    stacked = AffineModel(
        np.vstack([source_model.weight, pair.init_model.weight]),
        np.concatenate([source_model.intercept, pair.init_model.intercept]),
    )
    intermediate_law = pushforward_affine(stacked, tgt.mean_x, tgt.cov_x)
    return target_law, intermediate_law


def output_aug_risk(pair: OutputAugmentedPair, variant: str = KL) -> OutputAugRisk:
    """Output risk under output augmentation, with the two laws attached.

    KL variant: ½[Tr(Σ₂⁻¹Σ₁) − log det(Σ₁)/det(Σ₂) − (l+k)] as the
    variance term (equal to ½Σᵢ(λᵢ − log λᵢ − 1) over the eigenvalues
    of Σ₂⁻¹Σ₁, hence ≥ 0) plus ½(μ₁−μ₂)ᵀΣ₂⁻¹(μ₁−μ₂) as the bias term,
    where 1 is the target law and 2 the intermediate law.  The mean gap
    is supported entirely on the new output block: the transferred
    block contributes no bias.  W variant: Bures trace term plus
    ‖μ₁−μ₂‖².  The risk vanishes exactly when the initialization
    reproduces the optimal regression of the new outputs on the inputs.
    """
    if variant not in _VARIANTS:
        raise ValueError(f"variant must be one of {_VARIANTS}, got {variant!r}")
    target_law, inter_law = output_aug_laws(pair)
    mu1, sigma1 = target_law.mean, target_law.cov
    mu2, sigma2 = inter_law.mean, inter_law.cov
    diff = mu1 - mu2

    if variant == WASSERSTEIN:
        root = sqrtm_psd(sigma1)
        cross = sqrtm_psd(root @ sigma2 @ root)
        variance = float(np.trace(sigma1) + np.trace(sigma2) - 2.0 * np.trace(cross))
        variance = max(variance, 0.0)
        bias = float(diff @ diff)
        return OutputAugRisk(variance + bias, variance, bias, mu1, sigma1, mu2, sigma2)

    try:
        chol2 = np.linalg.cholesky(sigma2)
    except np.linalg.LinAlgError:
        raise SingularIntermediateCovariance(
            "stacked intermediate covariance is not positive definite; "
            "the initialization must give the new block full rank") from None
    n = mu1.shape[0]
    trace_term = float(np.trace(chol_solve(chol2, sigma1)))
    sign1, logdet1 = np.linalg.slogdet(sigma1)
    if sign1 <= 0:
        # target law singular against a full-rank intermediate: infinite KL
        logdet1 = -math.inf
    logdet2 = 2.0 * float(np.sum(np.log(np.diag(chol2))))
    variance = max(0.5 * (trace_term - (logdet1 - logdet2) - n), 0.0)
    bias = 0.5 * float(diff @ chol_solve(chol2, diff))
    return OutputAugRisk(variance + bias, variance, bias, mu1, sigma1, mu2, sigma2)


def neutralizing_initialization(pair_source: GaussianJointTask,
                                aug_cov_xy: np.ndarray,
                                aug_mean_y: np.ndarray) -> AffineModel:
    """The initialization that makes the output-augmentation risk vanish.

    It is the population regression of the new outputs on the inputs:
    weight = Σ_AYX Σ_SX⁻¹, intercept = μ_AY − weight · μ_SX.  With this
    choice the stacked model equals the optimal target model, the two
    output laws coincide, and both risk variants are exactly zero.
    """
    aug_cov_xy = np.asarray(aug_cov_xy, dtype=float)
    if aug_cov_xy.ndim == 1:
        aug_cov_xy = aug_cov_xy.reshape(-1, 1)
    chol = cholesky_with_jitter(pair_source.cov_x, SingularInputCovariance)
    weight = chol_solve(chol, aug_cov_xy).T
    intercept = np.atleast_1d(np.asarray(aug_mean_y, dtype=float)) - weight @ pair_source.mean_x
    return AffineModel(weight, intercept)

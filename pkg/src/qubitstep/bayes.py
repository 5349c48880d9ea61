"""Grid-based Bayesian estimation of (theta, gamma) from Z-basis counts.

A stage evaluates prior x likelihood on a uniform 2D grid, normalizes it
with the trapezoid rule and reads off the posterior mean and standard
deviation of one parameter. The stepwise protocol chains two stages: the
first-stage estimate becomes a Gaussian prior for that parameter in the
second stage, which spends a fresh batch on the other parameter.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlogy

from .errors import DegeneratePosterior
from .model import ParamPoint, first_param, prob0
from .sampling import BatchRecord, sample_batch

LIKELIHOOD_MODES = ("gaussian", "exact")
HANDOFF_MODES = ("gaussian", "full")

DEFAULT_GRID_RES = 201
# grid half-width in prior standard deviations
GRID_HALF_WIDTH = 6.0
# below this p0 * p1 the normal approximation is abandoned for the binomial
GAUSS_VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class GaussianPrior:
    center: float
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"prior width must be positive, got {self.width}")

    def logpdf(self, x):
        z = (np.asarray(x, dtype=float) - self.center) / self.width
        return -0.5 * z * z - np.log(self.width * np.sqrt(2 * np.pi))

    def axis(self, res: int = DEFAULT_GRID_RES, half_width: float = GRID_HALF_WIDTH) -> np.ndarray:
        return np.linspace(self.center - half_width * self.width, self.center + half_width * self.width, res)


def trapezoid_weights(axis: np.ndarray) -> np.ndarray:
    d = np.diff(axis)
    w = np.zeros_like(axis)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


@dataclass
class PosteriorGrid:
    """Posterior density on a (theta, gamma) grid; weights[i, j] <-> (theta_i, gamma_j)."""

    theta_axis: np.ndarray
    gamma_axis: np.ndarray
    weights: np.ndarray
    log_scale_offset: float = 0.0

    @classmethod
    def from_log(cls, theta_axis, gamma_axis, log_weights) -> "PosteriorGrid":
        top = float(np.max(log_weights))
        if not np.isfinite(top):
            raise DegeneratePosterior("posterior weights vanish or overflow on the grid")
        grid = cls(theta_axis, gamma_axis, np.exp(log_weights - top), top)
        return grid.normalize()

    def quadrature(self) -> np.ndarray:
        return np.outer(trapezoid_weights(self.theta_axis), trapezoid_weights(self.gamma_axis))

    def mass(self) -> float:
        return float(np.sum(self.quadrature() * self.weights))

    def normalize(self) -> "PosteriorGrid":
        z = self.mass()
        if not (np.isfinite(z) and z > 0):
            raise DegeneratePosterior(f"posterior normalizer is {z!r}; grid and prior do not overlap the likelihood")
        self.weights = self.weights / z
        self.log_scale_offset += float(np.log(z))
        return self

    def marginal(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """(axis, density) of one parameter's marginal."""
        if name == "theta":
            return self.theta_axis, self.weights @ trapezoid_weights(self.gamma_axis)
        if name == "gamma":
            return self.gamma_axis, trapezoid_weights(self.theta_axis) @ self.weights
        raise ValueError(f"unknown parameter {name!r}")

    def moments(self, name: str) -> tuple[float, float]:
        axis, dens = self.marginal(name)
        w = trapezoid_weights(axis) * dens
        w = w / w.sum()
        mean = float(w @ axis)
        var = float(w @ (axis - mean) ** 2)
        return mean, float(np.sqrt(var))


@dataclass
class EstimateResult:
    name: str
    mean: float
    std: float
    posterior: PosteriorGrid

    @property
    def var(self) -> float:
        return self.std**2


def log_likelihood(batch: BatchRecord, theta, gamma, mode: str = "gaussian") -> np.ndarray:
    """Log-likelihood of ``batch`` at (theta, gamma), broadcasting.

    ``exact``: n0 log p0 + n1 log p1 (the binomial coefficient is dropped).
    ``gaussian``: log of the normal density with mean N p0 and variance
    N p0 p1 evaluated at n0. Where p0 p1 < GAUSS_VAR_FLOOR it falls back to
    the binomial log-mass, coefficient included so the two pieces share a scale.
    """
    p0 = prob0(theta, gamma)
    p1 = 1.0 - p0
    n = batch.n
    if n == 0:
        return np.zeros_like(p0)
    exact = xlogy(batch.n0, p0) + xlogy(batch.n1, p1)
    if mode == "exact":
        return exact
    if mode != "gaussian":
        raise ValueError(f"likelihood mode must be one of {LIKELIHOOD_MODES}, got {mode!r}")
    v = p0 * p1
    ok = v >= GAUSS_VAR_FLOOR
    var = n * np.where(ok, v, 1.0)
    gauss = -((batch.n0 - n * p0) ** 2) / (2 * var) - 0.5 * np.log(2 * np.pi * var)
    log_binom = gammaln(n + 1) - gammaln(batch.n0 + 1) - gammaln(batch.n1 + 1)
    return np.where(ok, gauss, exact + log_binom)


def likelihood(batch: BatchRecord, p, mode: str = "gaussian") -> float:
    """Log-domain likelihood weight at a single point."""
    theta, gamma = (p.theta, p.gamma) if isinstance(p, ParamPoint) else p
    return float(log_likelihood(batch, theta, gamma, mode))


def posterior_grid(
    batch: BatchRecord,
    theta_axis: np.ndarray,
    gamma_axis: np.ndarray,
    log_prior: np.ndarray,
    mode: str = "gaussian",
) -> PosteriorGrid:
    """Normalized posterior for an arbitrary log-prior sampled on the grid."""
    ll = log_likelihood(batch, theta_axis[:, None], gamma_axis[None, :], mode)
    return PosteriorGrid.from_log(theta_axis, gamma_axis, ll + log_prior)


def estimate_first(
    batch: BatchRecord,
    prior_theta: GaussianPrior,
    prior_gamma: GaussianPrior,
    target: str,
    *,
    mode: str = "gaussian",
    grid_res: int = DEFAULT_GRID_RES,
) -> EstimateResult:
    """First stage: both parameters carry their initial priors, ``target`` is read off."""
    th = prior_theta.axis(grid_res)
    ga = prior_gamma.axis(grid_res)
    log_prior = prior_theta.logpdf(th)[:, None] + prior_gamma.logpdf(ga)[None, :]
    post = posterior_grid(batch, th, ga, log_prior, mode)
    mean, std = post.moments(target)
    return EstimateResult(target, mean, std, post)


def _other(name: str) -> str:
    return {"theta": "gamma", "gamma": "theta"}[name]


def estimate_second(
    batch: BatchRecord,
    prior_target: GaussianPrior,
    handed_off: EstimateResult,
    *,
    mode: str = "gaussian",
    grid_res: int = DEFAULT_GRID_RES,
    handoff: str = "gaussian",
) -> EstimateResult:
    """Second stage: the handed-off parameter gets a prior built from the first stage.

    ``handoff="gaussian"`` uses N(mean, std) of the first-stage estimate;
    ``handoff="full"`` uses its (possibly skewed) marginal posterior instead.
    """
    target = _other(handed_off.name)
    fixed = GaussianPrior(handed_off.mean, handed_off.std)
    target_axis = prior_target.axis(grid_res)
    fixed_axis = fixed.axis(grid_res)
    if handoff == "gaussian":
        fixed_logp = fixed.logpdf(fixed_axis)
    elif handoff == "full":
        axis, dens = handed_off.posterior.marginal(handed_off.name)
        with np.errstate(divide="ignore"):
            fixed_logp = np.log(np.interp(fixed_axis, axis, dens, left=0.0, right=0.0))
    else:
        raise ValueError(f"handoff must be one of {HANDOFF_MODES}, got {handoff!r}")
    target_logp = prior_target.logpdf(target_axis)
    if target == "theta":
        th, ga = target_axis, fixed_axis
        log_prior = target_logp[:, None] + fixed_logp[None, :]
    else:
        th, ga = fixed_axis, target_axis
        log_prior = fixed_logp[:, None] + target_logp[None, :]
    post = posterior_grid(batch, th, ga, log_prior, mode)
    mean, std = post.moments(target)
    return EstimateResult(target, mean, std, post)


def posterior_moments_gamma(batch, prior_theta, prior_gamma, **kw) -> EstimateResult:
    """Posterior mean and std of gamma, theta marginalized over its prior."""
    return estimate_first(batch, prior_theta, prior_gamma, "gamma", **kw)


def posterior_moments_theta(batch2, prior_theta, handed_off_gamma: EstimateResult, **kw) -> EstimateResult:
    """Posterior mean and std of theta with gamma ~ N(gamma_hat, d_gamma)."""
    return estimate_second(batch2, prior_theta, handed_off_gamma, **kw)


@dataclass
class StepwiseOutcome:
    first: EstimateResult
    second: EstimateResult
    batches: tuple[BatchRecord, BatchRecord]

    @property
    def sigma_total(self) -> float:
        return self.first.var + self.second.var

    def estimate(self, name: str) -> EstimateResult:
        return self.first if self.first.name == name else self.second


def stepwise_protocol(
    truth,
    split,
    prior_theta: GaussianPrior,
    prior_gamma: GaussianPrior,
    ordering: str = "gamma-first",
    *,
    mode: str = "gaussian",
    rng=0,
    grid_res: int = DEFAULT_GRID_RES,
    handoff: str = "gaussian",
) -> StepwiseOutcome:
    """Sample two batches at ``truth`` and run the two estimation stages.

    ``split`` is a ResourceSplit; ``rng`` is a seed or a numpy Generator.
    Batch one (beta N shots) is drawn before batch two from the same stream.
    """
    first = first_param(ordering)
    rng = np.random.default_rng(rng)
    b1 = sample_batch(truth, split.n_first, rng)
    b2 = sample_batch(truth, split.n_second, rng)
    est1 = estimate_first(b1, prior_theta, prior_gamma, first, mode=mode, grid_res=grid_res)
    prior_second = prior_theta if first == "gamma" else prior_gamma
    est2 = estimate_second(b2, prior_second, est1, mode=mode, grid_res=grid_res, handoff=handoff)
    return StepwiseOutcome(est1, est2, (b1, b2))

"""Asymptotic and Bayesian precision bounds for the qubit rotation model.

Conventions: matrices are in (theta, gamma) order unless an ``ordering``
names the first-estimated parameter, in which case index 1 is that parameter.
Asymptotic quantities are quoted per unit shot (multiply by 1/N). The Bayesian
joint bound reported for a total budget N is Tr[(N V)^-1], with V the Van
Trees matrix carrying the prior information divided by N.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss
from scipy.special import gammaln, xlogy

from . import model
from .bayes import GaussianPrior
from .errors import DegenerateSplit, QuadratureNotConverged, SingularInformation
from .holevo import DEFAULT_RESTARTS, holevo_qubit
from .model import ORDERINGS, InfoMatrix, ParamPoint, first_param

# relative invertibility threshold: det(Q) > SINGULAR_RTOL * ||Q||_F^2
SINGULAR_RTOL = 1e-12
PINV_RTOL = 1e-10

QUAD_START_NODES = 16
QUAD_MAX_NODES = 256
QUAD_RTOL = 1e-7

# nuisance-integrated (marginal) Van Trees quadrature
NUISANCE_SPAN = 8.0
MARGINAL_OUTER_NODES = 16
MARGINAL_INNER_NODES = 65
MARGINAL_MAX_INNER = 4097
MARGINAL_RTOL = 1e-4
MARGINAL_MAX_OUTER = 64
VAN_TREES_METHODS = ("marginal", "averaged")


@dataclass(frozen=True)
class ResourceSplit:
    beta: float
    n_total: int

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise DegenerateSplit(f"beta must lie in (0, 1), got {self.beta}")
        if int(self.n_total) != self.n_total or self.n_total < 1:
            raise ValueError(f"n_total must be a positive integer, got {self.n_total}")

    @property
    def n_first(self) -> int:
        return int(round(self.beta * self.n_total))

    @property
    def n_second(self) -> int:
        return self.n_total - self.n_first


def _as_point(p) -> ParamPoint:
    return p if isinstance(p, ParamPoint) else ParamPoint(*p)


def check_invertible(q: InfoMatrix) -> None:
    a = q.array
    thresh = SINGULAR_RTOL * float(np.sum(a * a))
    det = q.det
    if not det > thresh:
        raise SingularInformation(det, thresh)


def crb_matrix(q: InfoMatrix, n: int = 1) -> InfoMatrix:
    """(1/N) Q^-1; the diagonal holds the individual parameter bounds."""
    check_invertible(q)
    det = q.det
    return InfoMatrix(q.m22 / det / n, -q.m12 / det / n, q.m11 / det / n, q.order)


def pinv_crb(f: InfoMatrix, n: int = 1) -> InfoMatrix:
    """Moore-Penrose pseudoinverse of F scaled by 1/N."""
    w, v = np.linalg.eigh(f.array)
    cut = PINV_RTOL * max(float(np.abs(w).max()), 0.0)
    keep = np.abs(w) > cut if cut > 0 else np.zeros_like(w, dtype=bool)
    inv = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
    return InfoMatrix.from_array((v * inv) @ v.T / n, f.order)


def _split_terms(q: InfoMatrix, ordering: str) -> tuple[float, float]:
    """(a, b) = ((Q^-1)_11, 1/Q_22) with index 1 the first-estimated parameter."""
    q = q.in_order(first_param(ordering))
    check_invertible(q)
    return q.m22 / q.det, 1.0 / q.m22


def stepwise_trace(q: InfoMatrix, beta: float, ordering: str = "gamma-first") -> float:
    """(1/beta)(Q^-1)_11 + 1/((1 - beta) Q_22), per unit shot."""
    if isinstance(beta, ResourceSplit):
        beta = beta.beta
    if not 0.0 < beta < 1.0:
        raise DegenerateSplit(f"beta must lie in (0, 1), got {beta}")
    a, b = _split_terms(q, ordering)
    return a / beta + b / (1.0 - beta)


def holevo_bound(p, *, restarts: int = DEFAULT_RESTARTS, seed: int = 0) -> float:
    """Holevo scalar bound C_H at ``p`` for the pure probe state U|0>."""
    p = _as_point(p)
    check_invertible(model.qfim(p))
    r, dr_t, dr_g = model.bloch_vector(p.theta, p.gamma)
    return holevo_qubit(r, np.array([dr_t, dr_g]), restarts=restarts, seed=seed).value


def optimal_split(a: float, b: float) -> tuple[float, float]:
    """Minimize a/beta + b/(1 - beta): returns (beta*, minimum)."""
    sa, sb = np.sqrt(a), np.sqrt(b)
    return float(sa / (sa + sb)), float((sa + sb) ** 2)


def ratio_r(p, beta: float = 0.5, ordering: str = "gamma-first", *, c_holevo: float | None = None):
    """Return (r_beta, r_opt, beta_star) for one ordering."""
    p = _as_point(p)
    q = model.qfim(p)
    if c_holevo is None:
        c_holevo = holevo_bound(p)
    a, b = _split_terms(q, ordering)
    r_beta = stepwise_trace(q, beta, ordering) / c_holevo
    beta_star, best = optimal_split(a, b)
    return r_beta, best / c_holevo, beta_star


@dataclass(frozen=True)
class BoundReport:
    theta: float
    gamma: float
    ordering: str
    beta: float
    det_q: float
    crb_trace: float
    stepwise_trace: float
    holevo: float
    r_beta: float
    r_opt: float
    beta_star: float


def bound_report(p, beta: float = 0.5, ordering: str = "gamma-first") -> BoundReport:
    p = _as_point(p)
    q = model.qfim(p)
    c_h = holevo_bound(p)
    r_beta, r_opt, beta_star = ratio_r(p, beta, ordering, c_holevo=c_h)
    return BoundReport(
        theta=p.theta,
        gamma=p.gamma,
        ordering=ordering,
        beta=beta,
        det_q=q.det,
        crb_trace=crb_matrix(q).trace,
        stepwise_trace=stepwise_trace(q, beta, ordering),
        holevo=c_h,
        r_beta=r_beta,
        r_opt=r_opt,
        beta_star=beta_star,
    )


# ---------------------------------------------------------------------------
# Van Trees


def _gauss_expectation(
    func: Callable[[np.ndarray, np.ndarray], np.ndarray],
    prior_theta: GaussianPrior,
    prior_gamma: GaussianPrior,
    nodes: int,
) -> np.ndarray:
    """E[func(theta, gamma)] under independent Gaussians, tensor Gauss-Hermite."""
    x, w = hermegauss(nodes)
    w = w / np.sqrt(2 * np.pi)
    th = prior_theta.center + prior_theta.width * x
    ga = prior_gamma.center + prior_gamma.width * x
    values = func(th[:, None], ga[None, :])
    return np.einsum("i,j,ij...->...", w, w, values)


def prior_expectation(
    func: Callable[[np.ndarray, np.ndarray], np.ndarray],
    prior_theta: GaussianPrior,
    prior_gamma: GaussianPrior,
) -> np.ndarray:
    """Node-doubling Gauss-Hermite expectation, converged to ``QUAD_RTOL``.

    The change between successive levels is measured relative to the largest
    entry of the result, so near-zero off-diagonal entries do not stall it.
    """
    nodes = QUAD_START_NODES
    prev = _gauss_expectation(func, prior_theta, prior_gamma, nodes)
    change = np.inf
    while nodes < QUAD_MAX_NODES:
        nodes *= 2
        cur = _gauss_expectation(func, prior_theta, prior_gamma, nodes)
        scale = max(float(np.abs(cur).max()), np.finfo(float).tiny)
        change = float(np.abs(cur - prev).max()) / scale
        if change <= QUAD_RTOL:
            return cur
        prev = cur
    raise QuadratureNotConverged(f"prior quadrature did not settle by {QUAD_MAX_NODES} nodes", change)


def prior_information(prior_theta: GaussianPrior, prior_gamma: GaussianPrior) -> np.ndarray:
    """E[(d_i log A)(d_j log A)], i.e. the integral of (d_i A)(d_j A)/A, by quadrature."""

    def score_outer(th, ga):
        s_t = -(th - prior_theta.center) / prior_theta.width**2
        s_g = -(ga - prior_gamma.center) / prior_gamma.width**2
        s_t, s_g = np.broadcast_arrays(s_t, s_g)
        return np.stack([np.stack([s_t * s_t, s_t * s_g], -1), np.stack([s_g * s_t, s_g * s_g], -1)], -2)

    return prior_expectation(score_outer, prior_theta, prior_gamma)


def van_trees_matrix(
    info: Callable, prior_theta: GaussianPrior, prior_gamma: GaussianPrior, n: int
) -> InfoMatrix:
    """V = E_A[info] + (1/N) prior information, in (theta, gamma) order."""
    avg = prior_expectation(info, prior_theta, prior_gamma)
    return InfoMatrix.from_array(avg + prior_information(prior_theta, prior_gamma) / n)


def van_trees_quantum(prior_theta: GaussianPrior, prior_gamma: GaussianPrior, n: int) -> InfoMatrix:
    """Quantum Van Trees matrix V for a total of ``n`` shots."""
    return van_trees_matrix(model.qfim_array, prior_theta, prior_gamma, n)


def van_trees_trace(v: InfoMatrix, n: int) -> float:
    """Bayesian joint bound on the total error: Tr[(N V)^-1]."""
    return crb_matrix(v, n).trace


def _dp0(theta, gamma, target: str):
    if target == "gamma":
        return -np.sin(2 * gamma) * np.cos(theta) ** 2
    return np.sin(gamma) ** 2 * np.sin(2 * theta)


def _nuisance_nodes(target: str, value: float, nuisance: GaussianPrior, n: int) -> int:
    """Odd node count resolving the narrowest binomial peak along the nuisance axis."""
    u = nuisance.center + nuisance.width * np.linspace(-NUISANCE_SPAN, NUISANCE_SPAN, 257)
    theta, gamma = (u, value) if target == "gamma" else (value, u)
    p0 = model.prob0(theta, gamma)
    other = "theta" if target == "gamma" else "gamma"
    slope = np.abs(_dp0(theta, gamma, other)) * n
    sd = np.sqrt(np.maximum(n * p0 * (1 - p0), 0.25))
    with np.errstate(divide="ignore"):
        peak = float(np.min(sd / slope))
    step = peak / 1.5
    nodes = int(np.ceil(2 * NUISANCE_SPAN * nuisance.width / step)) if step > 0 else MARGINAL_MAX_INNER
    nodes = min(max(nodes, MARGINAL_INNER_NODES), MARGINAL_MAX_INNER)
    return nodes | 1


def marginal_fisher(target: str, value: float, nuisance: GaussianPrior, n: int, nodes: int) -> float:
    """Fisher information about ``target`` in n0 ~ Binomial(n, p0) after the
    other parameter, fixed across all n shots, is integrated over ``nuisance``.

    The nuisance integral is a trapezoid rule over +-NUISANCE_SPAN widths. The
    sum over n0 is exact within a 12-sigma band around each node's binomial
    mean; bands are accumulated with bincount.
    """
    u = nuisance.center + nuisance.width * np.linspace(-NUISANCE_SPAN, NUISANCE_SPAN, nodes)
    w = np.full(nodes, 2 * NUISANCE_SPAN * nuisance.width / (nodes - 1))
    w[[0, -1]] /= 2
    w *= np.exp(nuisance.logpdf(u))
    theta, gamma = (u, value) if target == "gamma" else (value, u)
    p0 = model.prob0(theta, gamma)
    p1 = 1.0 - p0
    d = np.broadcast_to(_dp0(theta, gamma, target), p0.shape)

    sd = np.sqrt(n * p0 * p1)
    half = int(np.ceil(12 * sd.max())) + 10
    start = np.clip(np.floor(n * p0).astype(int) - half, 0, max(n - 2 * half, 0))
    k0 = start[:, None] + np.arange(min(2 * half, n) + 1)[None, :]
    k0 = np.minimum(k0, n).astype(float)
    k1 = n - k0
    log_coef = gammaln(n + 1) - gammaln(k0 + 1) - gammaln(k1 + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = log_coef + xlogy(k0, p0[:, None]) + xlogy(k1, p1[:, None])
        pmf = np.exp(logp)
        r0 = np.where(k0 > 0, k0 / p0[:, None], 0.0)
        r1 = np.where(k1 > 0, k1 / p1[:, None], 0.0)
        score = np.where(pmf > 0, (r0 - r1) * d[:, None], 0.0)
    # clipping at n can repeat k0 = n within a row; keep the first copy only
    dup = np.zeros_like(k0, dtype=bool)
    dup[:, 1:] = k0[:, 1:] == k0[:, :-1]
    pmf = np.where(dup, 0.0, pmf)
    idx = k0.astype(int).ravel()
    m = np.bincount(idx, weights=(w[:, None] * pmf).ravel(), minlength=n + 1)
    dm = np.bincount(idx, weights=(w[:, None] * pmf * score).ravel(), minlength=n + 1)
    ok = m > 0
    return float(np.sum(dm[ok] ** 2 / m[ok]))


def _outer_rule(prior: GaussianPrior, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for E[f(x)], x ~ prior.

    p1 is even about every multiple of pi/2 in either angle, so the marginal
    Fisher information has a cusp there. Gauss-Hermite is used when no such
    fold lies within +-NUISANCE_SPAN widths; otherwise composite Gauss-Legendre
    on the pieces between folds, each with ``nodes`` points.
    """
    lo = prior.center - NUISANCE_SPAN * prior.width
    hi = prior.center + NUISANCE_SPAN * prior.width
    k = np.arange(np.ceil(lo / (np.pi / 2)), np.floor(hi / (np.pi / 2)) + 1)
    folds = k * np.pi / 2
    if folds.size == 0:
        x, w = hermegauss(nodes)
        return prior.center + prior.width * x, w / np.sqrt(2 * np.pi)
    edges = np.concatenate([[lo], folds, [hi]])
    edges = edges[np.concatenate([[True], np.diff(edges) > 0])]
    t, wt = leggauss(nodes)
    xs, ws = [], []
    for left, right in zip(edges[:-1], edges[1:]):
        half = (right - left) / 2
        x = left + half * (t + 1)
        xs.append(x)
        ws.append(half * wt * np.exp(prior.logpdf(x)))
    return np.concatenate(xs), np.concatenate(ws)


def van_trees_marginal(target: str, prior_target: GaussianPrior, nuisance: GaussianPrior, n: int) -> float:
    """Scalar Van Trees variance bound for ``target`` in the nuisance-integrated model.

    1 / (E_prior[I_marginal] + 1/tau^2). The inner nuisance grid is sized from
    the narrowest binomial peak; the outer rule (see ``_outer_rule``) is
    doubled until the bound moves by at most MARGINAL_RTOL.
    """
    inner = max(
        _nuisance_nodes(target, prior_target.center + prior_target.width * x, nuisance, n)
        for x in (-3.0, 0.0, 3.0)
    )

    def bound(outer):
        x, wq = _outer_rule(prior_target, outer)
        info = sum(wi * marginal_fisher(target, xi, nuisance, n, inner) for xi, wi in zip(x, wq))
        return 1.0 / (info + 1.0 / prior_target.width**2)

    outer = MARGINAL_OUTER_NODES
    prev = bound(outer)
    change = np.inf
    while outer < MARGINAL_MAX_OUTER:
        outer *= 2
        cur = bound(outer)
        change = abs(cur - prev) / cur
        if change <= MARGINAL_RTOL:
            return cur
        prev = cur
    raise QuadratureNotConverged("marginal Van Trees quadrature did not settle", change)


@dataclass(frozen=True)
class StepwiseVanTrees:
    """Classical stepwise Van Trees variances; ``first`` names the first parameter."""

    first: str
    var_first: float
    var_second: float

    @property
    def std_first(self) -> float:
        return float(np.sqrt(self.var_first))

    @property
    def std_second(self) -> float:
        return float(np.sqrt(self.var_second))

    def std(self, name: str) -> float:
        return self.std_first if name == self.first else self.std_second

    @property
    def total(self) -> float:
        return self.var_first + self.var_second


def van_trees_classical_stepwise(
    prior_theta: GaussianPrior,
    prior_gamma: GaussianPrior,
    split: ResourceSplit,
    ordering: str = "gamma-first",
    method: str = "marginal",
) -> StepwiseVanTrees:
    """Classical Van Trees bounds for the two stages of a Z-measurement stepwise run.

    Stage one spends beta*N shots on the first parameter, stage two
    (1 - beta)*N shots on the second, whose partner then has a Gaussian prior
    of the stage-one bound width.

    ``method="averaged"``: stage one keeps the first-parameter entry of the
    inverse two-parameter classical Van Trees matrix; stage two averages the
    second parameter's Fisher information over both priors. Because the
    rank-one Z-measurement FIM turns full rank once averaged, this bound keeps
    falling as 1/N even where the data cannot separate the parameters.

    ``method="marginal"``: each stage uses the scalar Van Trees bound of the
    model the stage estimator actually works with, the other parameter being
    integrated into the likelihood over its prior.
    """
    if method not in VAN_TREES_METHODS:
        raise ValueError(f"method must be one of {VAN_TREES_METHODS}, got {method!r}")
    first = first_param(ordering)
    second = "theta" if first == "gamma" else "gamma"
    n1, n2 = split.n_first, split.n_second
    priors = {"theta": prior_theta, "gamma": prior_gamma}
    idx = {"theta": 0, "gamma": 1}

    if method == "marginal":
        var_first = van_trees_marginal(first, priors[first], priors[second], n1)
        handed = GaussianPrior(priors[first].center, float(np.sqrt(var_first)))
        var_second = van_trees_marginal(second, priors[second], handed, n2)
        return StepwiseVanTrees(first, float(var_first), float(var_second))

    v1 = van_trees_matrix(model.cfim_array, prior_theta, prior_gamma, n1)
    var_first = crb_matrix(v1, n1).array[idx[first], idx[first]]
    handed = GaussianPrior(priors[first].center, float(np.sqrt(var_first)))
    stage2 = dict(priors, **{first: handed})
    j = idx[second]

    def f_second(th, ga):
        return model.cfim_array(th, ga)[..., j, j]

    info = float(prior_expectation(f_second, stage2["theta"], stage2["gamma"]))
    var_second = 1.0 / (n2 * info + 1.0 / priors[second].width ** 2)
    return StepwiseVanTrees(first, float(var_first), float(var_second))

"""Seeded Monte Carlo campaigns of the stepwise protocol.

Every (point, tau, repetition) triple owns a random stream derived from
``SeedSequence(seed, spawn_key=(point, tau, rep))``. Both orderings replay
the same stream, so they see identical truths and counts, and results do not
depend on how tasks are scheduled across threads.
"""
from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import bounds
from .bayes import DEFAULT_GRID_RES, HANDOFF_MODES, LIKELIHOOD_MODES, GaussianPrior, stepwise_protocol
from .errors import QubitStepError
from .model import ORDERINGS, ParamPoint
from .sampling import BatchRecord, sample_batch

__all__ = [
    "BatchRecord",
    "CampaignConfig",
    "CampaignRecord",
    "CampaignResult",
    "ConfigError",
    "run_campaign",
    "sample_batch",
]

log = logging.getLogger(__name__)

PRIOR_POLICIES = ("at-truth", "offset")
# "off" skips the classical stepwise bound (it is the slow one)
CLASSICAL_VT = bounds.VAN_TREES_METHODS + ("off",)


class ConfigError(ValueError):
    """Carries every violated field at once."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass(frozen=True)
class CampaignConfig:
    """A sweep of nominal points, each run for every tau and ordering.

    ``points`` are nominal (theta, gamma) pairs in radians. With the default
    ``at-truth`` policy the priors are centred on the nominal point; ``offset``
    shifts them by ``prior_offset``. When ``truth_from_prior`` is set, each
    repetition draws its true parameters from the prior instead of using the
    nominal point.
    """

    points: tuple[tuple[float, float], ...]
    n_total: int = 20_000
    beta: float = 0.5
    taus: tuple[float, ...] = (np.deg2rad(5.0),)
    orderings: tuple[str, ...] = ("gamma-first",)
    mode: str = "gaussian"
    repetitions: int = 200
    seed: int = 0
    prior_policy: str = "at-truth"
    prior_offset: tuple[float, float] = (0.0, 0.0)
    truth_from_prior: bool = False
    grid_res: int = DEFAULT_GRID_RES
    handoff: str = "gaussian"
    classical_vt: str = "marginal"
    workers: int = field(default=1, compare=False)

    @classmethod
    def theta_sweep(cls, thetas, gamma: float, **kw) -> "CampaignConfig":
        return cls(points=tuple((float(t), float(gamma)) for t in thetas), **kw)

    def problems(self) -> list[str]:
        out = []
        if not self.points:
            out.append("points: sweep must be non-empty")
        if self.repetitions < 1:
            out.append(f"repetitions: must be >= 1, got {self.repetitions}")
        if not self.taus:
            out.append("taus: need at least one prior width")
        elif any(not t > 0 for t in self.taus):
            out.append(f"taus: all widths must be > 0, got {list(self.taus)}")
        if not 0.0 < self.beta < 1.0:
            out.append(f"beta: must lie in (0, 1), got {self.beta}")
        if self.n_total < 2:
            out.append(f"n_total: must be >= 2, got {self.n_total}")
        elif 0.0 < self.beta < 1.0:
            n1 = int(round(self.beta * self.n_total))
            if n1 < 1 or n1 >= self.n_total:
                out.append(f"beta: split of n_total={self.n_total} leaves an empty batch")
        if not self.orderings:
            out.append("orderings: need at least one ordering")
        for o in self.orderings:
            if o not in ORDERINGS:
                out.append(f"orderings: unknown ordering {o!r}, expected one of {ORDERINGS}")
        if self.mode not in LIKELIHOOD_MODES:
            out.append(f"mode: expected one of {LIKELIHOOD_MODES}, got {self.mode!r}")
        if self.prior_policy not in PRIOR_POLICIES:
            out.append(f"prior_policy: expected one of {PRIOR_POLICIES}, got {self.prior_policy!r}")
        if self.handoff not in HANDOFF_MODES:
            out.append(f"handoff: expected one of {HANDOFF_MODES}, got {self.handoff!r}")
        if self.classical_vt not in CLASSICAL_VT:
            out.append(f"classical_vt: expected one of {CLASSICAL_VT}, got {self.classical_vt!r}")
        if self.grid_res < 3:
            out.append(f"grid_res: must be >= 3, got {self.grid_res}")
        if self.workers < 1:
            out.append(f"workers: must be >= 1, got {self.workers}")
        return out

    def validate(self) -> "CampaignConfig":
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self

    def config_hash(self) -> str:
        d = asdict(self)
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, default=float)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def priors(self, point: tuple[float, float], tau: float) -> tuple[GaussianPrior, GaussianPrior]:
        theta, gamma = point
        if self.prior_policy == "offset":
            theta, gamma = theta + self.prior_offset[0], gamma + self.prior_offset[1]
        return GaussianPrior(theta, tau), GaussianPrior(gamma, tau)


@dataclass
class CampaignRecord:
    """Aggregates for one (point, tau, ordering); angles in radians.

    ``*_hat`` are mean posterior means over repetitions, ``d_*`` the RMS of
    the posterior standard deviations, ``*_spread`` the standard deviation of
    the posterior means, ``coverage_*`` the fraction of repetitions with
    |estimate - truth| < 3 posterior std.
    """

    point_index: int
    theta_true: float
    gamma_true: float
    tau: float
    ordering: str
    reps: int
    seed: int
    config_hash: str
    status: str = "ok"
    theta_hat: float = np.nan
    d_theta: float = np.nan
    theta_spread: float = np.nan
    gamma_hat: float = np.nan
    d_gamma: float = np.nan
    gamma_spread: float = np.nan
    sigma_total_mean: float = np.nan
    sigma_total_std: float = np.nan
    coverage_theta: float = np.nan
    coverage_gamma: float = np.nan
    vt_classical_theta: float = np.nan
    vt_classical_gamma: float = np.nan
    vt_quantum_je_trace: float = np.nan

    @property
    def ratio(self) -> float:
        return self.sigma_total_mean / self.vt_quantum_je_trace


@dataclass
class CampaignResult:
    config: CampaignConfig
    records: list[CampaignRecord]

    def select(self, **match) -> list[CampaignRecord]:
        return [r for r in self.records if all(getattr(r, k) == v for k, v in match.items())]


def rep_rng(seed: int, point: int, tau: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(point, tau, rep)))


def _bounds_for(cfg: CampaignConfig, point, tau: float, ordering: str) -> dict:
    prior_theta, prior_gamma = cfg.priors(point, tau)
    vq = bounds.van_trees_quantum(prior_theta, prior_gamma, cfg.n_total)
    out = {"vt_quantum_je_trace": bounds.van_trees_trace(vq, cfg.n_total)}
    if cfg.classical_vt != "off":
        split = bounds.ResourceSplit(cfg.beta, cfg.n_total)
        vt = bounds.van_trees_classical_stepwise(prior_theta, prior_gamma, split, ordering, cfg.classical_vt)
        out["vt_classical_theta"] = vt.std("theta")
        out["vt_classical_gamma"] = vt.std("gamma")
    return out


def _run_cell(cfg: CampaignConfig, config_hash: str, pi: int, ti: int, ordering: str) -> CampaignRecord:
    point = cfg.points[pi]
    tau = cfg.taus[ti]
    rec = CampaignRecord(pi, point[0], point[1], tau, ordering, cfg.repetitions, cfg.seed, config_hash)
    try:
        prior_theta, prior_gamma = cfg.priors(point, tau)
        split = bounds.ResourceSplit(cfg.beta, cfg.n_total)
        est = {"theta": [], "gamma": []}
        var = {"theta": [], "gamma": []}
        hits = {"theta": 0, "gamma": 0}
        sigma = []
        for rep in range(cfg.repetitions):
            rng = rep_rng(cfg.seed, pi, ti, rep)
            if cfg.truth_from_prior:
                truth = (rng.normal(prior_theta.center, tau), rng.normal(prior_gamma.center, tau))
            else:
                truth = point
            out = stepwise_protocol(
                ParamPoint(*truth),
                split,
                prior_theta,
                prior_gamma,
                ordering,
                mode=cfg.mode,
                rng=rng,
                grid_res=cfg.grid_res,
                handoff=cfg.handoff,
            )
            for name, true_value in zip(("theta", "gamma"), truth):
                e = out.estimate(name)
                est[name].append(e.mean)
                var[name].append(e.var)
                hits[name] += abs(e.mean - true_value) < 3 * e.std
            sigma.append(out.sigma_total)
        n = cfg.repetitions
        for name in ("theta", "gamma"):
            setattr(rec, f"{name}_hat", float(np.mean(est[name])))
            setattr(rec, f"d_{name}", float(np.sqrt(np.mean(var[name]))))
            setattr(rec, f"{name}_spread", float(np.std(est[name])))
            setattr(rec, f"coverage_{name}", hits[name] / n)
        rec.sigma_total_mean = float(np.mean(sigma))
        rec.sigma_total_std = float(np.std(sigma))
        for k, v in _bounds_for(cfg, point, tau, ordering).items():
            setattr(rec, k, float(v))
    except QubitStepError as exc:
        log.warning("point %d tau %.4g %s failed: %s", pi, tau, ordering, exc)
        rec.status = type(exc).__name__
    return rec


def run_campaign(cfg: CampaignConfig) -> CampaignResult:
    """Run every (point, tau, ordering) cell; rows come back in config order."""
    cfg.validate()
    h = cfg.config_hash()
    cells = [
        (pi, ti, o)
        for ti in range(len(cfg.taus))
        for o in cfg.orderings
        for pi in range(len(cfg.points))
    ]
    if cfg.workers == 1:
        records = [_run_cell(cfg, h, *c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(lambda c: _run_cell(cfg, h, *c), cells))
    return CampaignResult(cfg, records)

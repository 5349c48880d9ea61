import dataclasses

import numpy as np
import pytest

from qubitstep import bounds, sim
from qubitstep.bayes import GaussianPrior, stepwise_protocol
from qubitstep.errors import QuadratureNotConverged
from qubitstep.model import ParamPoint
from qubitstep.sim import CampaignConfig, ConfigError, rep_rng, run_campaign

TAU = np.deg2rad(5.0)
G0 = np.pi / 9


def small(**kw):
    base = dict(repetitions=3, classical_vt="off", seed=4)
    base.update(kw)
    return CampaignConfig.theta_sweep(np.deg2rad([30, 60]), G0, **base)


def test_config_lists_every_problem():
    cfg = CampaignConfig(points=(), repetitions=0, taus=(-1.0,), beta=1.0, mode="poisson", orderings=("x",))
    with pytest.raises(ConfigError) as info:
        cfg.validate()
    fields = {p.split(":")[0] for p in info.value.problems}
    assert {"points", "repetitions", "taus", "beta", "mode", "orderings"} <= fields


def test_config_hash():
    a = small()
    assert a.config_hash() == dataclasses.replace(a, workers=4).config_hash()
    assert a.config_hash() != dataclasses.replace(a, seed=5).config_hash()


def test_single_rep_equals_direct_protocol():
    cfg = CampaignConfig(points=((0.8, G0),), repetitions=1, seed=21, classical_vt="off")
    rec = run_campaign(cfg).records[0]
    out = stepwise_protocol(
        ParamPoint(0.8, G0),
        bounds.ResourceSplit(cfg.beta, cfg.n_total),
        GaussianPrior(0.8, TAU),
        GaussianPrior(G0, TAU),
        rng=rep_rng(21, 0, 0, 0),
    )
    assert rec.gamma_hat == out.first.mean
    assert rec.d_theta == pytest.approx(out.second.std, rel=1e-15)
    assert rec.sigma_total_mean == out.sigma_total


def test_thread_count_does_not_change_results():
    cfg = small(orderings=("gamma-first", "theta-first"), taus=(TAU, 2 * TAU), truth_from_prior=True)
    a = run_campaign(cfg)
    b = run_campaign(dataclasses.replace(cfg, workers=3))
    assert a.records == b.records


def test_record_order_and_metadata():
    cfg = small(orderings=("gamma-first", "theta-first"), taus=(TAU, 2 * TAU))
    res = run_campaign(cfg)
    keys = [(r.tau, r.ordering, r.point_index) for r in res.records]
    assert keys == [(t, o, p) for t in cfg.taus for o in cfg.orderings for p in range(2)]
    assert all(r.seed == 4 and r.config_hash == cfg.config_hash() for r in res.records)
    assert len(res.select(ordering="theta-first")) == 4


def test_bounds_recomputable_from_row():
    cfg = small(classical_vt="marginal", repetitions=1)
    rec = run_campaign(cfg).records[1]
    pt, pg = GaussianPrior(rec.theta_true, rec.tau), GaussianPrior(rec.gamma_true, rec.tau)
    vq = bounds.van_trees_quantum(pt, pg, cfg.n_total)
    assert rec.vt_quantum_je_trace == bounds.van_trees_trace(vq, cfg.n_total)
    vt = bounds.van_trees_classical_stepwise(pt, pg, bounds.ResourceSplit(cfg.beta, cfg.n_total), rec.ordering)
    assert rec.vt_classical_gamma == vt.std("gamma")


def test_point_failure_is_recorded(monkeypatch):
    real = bounds.van_trees_quantum

    def flaky(pt, pg, n):
        if pt.center > 1.0:
            raise QuadratureNotConverged("forced", 1.0)
        return real(pt, pg, n)

    monkeypatch.setattr(sim.bounds, "van_trees_quantum", flaky)
    res = run_campaign(small())
    assert [r.status for r in res.records] == ["ok", "QuadratureNotConverged"]
    assert np.isnan(res.records[1].vt_quantum_je_trace)


def test_prior_offset_policy():
    cfg = small(prior_policy="offset", prior_offset=(0.01, -0.02))
    pt, pg = cfg.priors((0.5, 0.3), TAU)
    assert (pt.center, pg.center) == (0.51, pytest.approx(0.28))


def test_bayes_risk_respects_quantum_van_trees():
    cfg = CampaignConfig(points=((np.deg2rad(45), G0),), repetitions=500, truth_from_prior=True, classical_vt="off")
    rec = run_campaign(cfg).records[0]
    assert rec.sigma_total_mean >= 0.9 * rec.vt_quantum_je_trace


def test_rep_streams_are_distinct():
    a = rep_rng(0, 0, 0, 0).integers(1 << 62)
    b = rep_rng(0, 0, 0, 1).integers(1 << 62)
    c = rep_rng(0, 1, 0, 0).integers(1 << 62)
    assert len({a, b, c}) == 3
    assert a == rep_rng(0, 0, 0, 0).integers(1 << 62)

import math

import numpy as np
import pytest

from maxstop import (Kind, MCConfig, ModelSpec, UnsupportedModelError,
                     hitting_time_check, make_model, policy_dominance_test,
                     put_reward, russian_reward, simulate_policy)

from conftest import K

# [DERIVED] closed forms for the shared GBM parameters (see test_solver.py)
X_STAR_PUT = 3.576039939453753
V_PUT_5 = 0.6136613504936813
L_STAR_RUSSIAN = 0.2159271382
V_RUSSIAN_1 = 1.1385511789901486


def _cfg(**kw):
    base = dict(n_paths=20_000, dt=1e-3, t_max=40.0, seed=20260823)
    base.update(kw)
    return MCConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        MCConfig(n_paths=0, dt=1e-3, t_max=1.0, seed=1)
    with pytest.raises(ValueError):
        MCConfig(n_paths=10, dt=0.0, t_max=1.0, seed=1)
    with pytest.raises(ValueError):
        MCConfig(n_paths=10, dt=1.0, t_max=0.5, seed=1)
    assert MCConfig(n_paths=10, dt=0.25, t_max=1.0, seed=1).n_steps == 4


def test_estimate_z_score():
    from maxstop import MCEstimate
    e = MCEstimate(mean=1.0, stderr=0.1, n_stopped=100, n_censored=0)
    assert e.z_score(0.8) == pytest.approx(2.0)
    assert e.n_paths == 100


def test_bit_reproducibility(gbm, put):
    cfg = _cfg(n_paths=2_000, t_max=10.0)
    pol = lambda s: max(s - X_STAR_PUT, 0.0)
    e1 = simulate_policy(gbm, put, pol, 5.0, 5.0, cfg)
    e2 = simulate_policy(gbm, put, pol, 5.0, 5.0, cfg)
    assert e1.mean == e2.mean
    assert e1.stderr == e2.stderr
    e3 = simulate_policy(gbm, put, pol, 5.0, 5.0, _cfg(n_paths=2_000,
                                                       t_max=10.0, seed=7))
    assert e3.mean != e1.mean


def test_immediate_stop_is_exact(gbm, put):
    # the start point is already inside the stopping region
    cfg = _cfg(n_paths=100)
    e = simulate_policy(gbm, put, 0.5, 3.0, 5.0, cfg)
    assert e.stderr == 0.0
    assert e.mean == pytest.approx(K - 3.0)
    assert e.n_censored == 0


def test_hitting_time_trivial(gbm):
    cfg = _cfg(n_paths=100)
    e = hitting_time_check(gbm, 5.0, 5.0, cfg)
    assert e.mean == 1.0 and e.stderr == 0.0


def test_hitting_time_matches_psi_ratio(gbm):
    # E^x[e^{-q T_z}] = psi(x)/psi(z) for an upward barrier
    cfg = _cfg(n_paths=40_000, dt=1e-3, t_max=30.0)
    e = hitting_time_check(gbm, 5.0, 7.0, cfg)
    ref = gbm.psi(5.0) / gbm.psi(7.0)
    assert abs(e.z_score(ref)) < 4.0
    assert e.stderr < 0.01 * ref


def test_hitting_time_matches_phi_ratio(gbm):
    cfg = _cfg(n_paths=40_000, dt=1e-3, t_max=30.0)
    e = hitting_time_check(gbm, 7.0, 5.0, cfg)
    ref = gbm.phi(7.0) / gbm.phi(5.0)
    assert abs(e.z_score(ref)) < 4.0


def test_put_policy_matches_analytic(gbm, put):
    # small but honest end-to-end check against the perpetual-put closed form
    cfg = _cfg(n_paths=60_000, dt=1e-3, t_max=45.0)
    pol = lambda s: max(s - X_STAR_PUT, 0.0)
    e = simulate_policy(gbm, put, pol, 5.0, 5.0, cfg)
    assert abs(e.z_score(V_PUT_5)) < 4.0


def test_russian_policy_matches_analytic(gbm, russian):
    cfg = _cfg(n_paths=60_000, dt=1e-3, t_max=45.0)
    pol = lambda s: L_STAR_RUSSIAN / 1.0 * s  # scale-invariant optimal depth
    e = simulate_policy(gbm, russian, pol, 1.0, 1.0, cfg)
    assert abs(e.z_score(V_RUSSIAN_1)) < 4.0


def test_continuity_correction_reduces_bias(gbm):
    # discrete monitoring overestimates discounted hitting functionals; the
    # barrier-shift correction brings the coarse-dt estimate onto the target
    ref = gbm.psi(5.0) / gbm.psi(6.0)
    raw = hitting_time_check(gbm, 5.0, 6.0,
                             _cfg(n_paths=60_000, dt=4e-3, t_max=30.0,
                                  continuity_correction=False))
    fixed = hitting_time_check(gbm, 5.0, 6.0,
                               _cfg(n_paths=60_000, dt=4e-3, t_max=30.0))
    assert abs(fixed.mean - ref) < abs(raw.mean - ref)
    assert abs(fixed.z_score(ref)) < 4.0


def test_dt_halving_consistency(gbm, put):
    # halving dt moves the estimate by no more than a few joint stderr
    pol = lambda s: max(s - X_STAR_PUT, 0.0)
    e1 = simulate_policy(gbm, put, pol, 5.0, 5.0,
                         _cfg(n_paths=30_000, dt=2e-3, t_max=40.0))
    e2 = simulate_policy(gbm, put, pol, 5.0, 5.0,
                         _cfg(n_paths=30_000, dt=1e-3, t_max=40.0))
    joint = math.hypot(e1.stderr, e2.stderr)
    assert abs(e1.mean - e2.mean) < 4.0 * joint


def test_antithetic_reduces_variance(gbm, russian):
    pol = lambda s: L_STAR_RUSSIAN * s
    plain = simulate_policy(gbm, russian, pol, 1.0, 1.0,
                            _cfg(n_paths=20_000, t_max=30.0))
    anti = simulate_policy(gbm, russian, pol, 1.0, 1.0,
                           _cfg(n_paths=20_000, t_max=30.0, antithetic=True))
    assert anti.stderr <= plain.stderr * 1.05
    assert abs(anti.mean - plain.mean) < 5.0 * math.hypot(anti.stderr,
                                                          plain.stderr)


def test_censoring_reported(gbm, put):
    # a tiny horizon leaves most paths censored and flags the estimate
    pol = lambda s: max(s - 1.0, 0.0)
    e = simulate_policy(gbm, put, pol, 5.0, 5.0,
                        _cfg(n_paths=2_000, dt=1e-3, t_max=0.5))
    assert e.n_censored > 0
    assert e.dt_warning


def test_dominance_duplicate_policy_is_tied(gbm, russian):
    pol = lambda s: L_STAR_RUSSIAN * s
    rep = policy_dominance_test(gbm, russian, [pol, pol], 1.0, 1.0,
                                _cfg(n_paths=5_000, t_max=20.0))
    assert rep.diff_means[0] == 0.0
    assert rep.z_scores[0] == 0.0
    assert not rep.reference_dominated


def test_dominance_ranks_optimal_first(gbm, russian):
    # the optimal depth beats clearly shallower and deeper perturbations on
    # common random numbers
    opt = lambda s: L_STAR_RUSSIAN * s
    shallow = lambda s: 0.4 * L_STAR_RUSSIAN * s
    deep = lambda s: 2.5 * L_STAR_RUSSIAN * s
    rep = policy_dominance_test(gbm, russian, [opt, shallow, deep], 1.0, 1.0,
                                _cfg(n_paths=60_000, dt=1e-3, t_max=40.0))
    assert rep.ranking[0] == 0
    assert not rep.reference_dominated
    assert all(z > 0.0 for z in rep.z_scores)


def test_dominance_needs_two_policies(gbm, russian):
    with pytest.raises(ValueError):
        policy_dominance_test(gbm, russian, [lambda s: s * 0.2], 1.0, 1.0,
                              _cfg(n_paths=10))


def test_rejects_bad_start(gbm, put):
    with pytest.raises(ValueError):
        simulate_policy(gbm, put, 1.0, 6.0, 5.0, _cfg(n_paths=10))


def test_custom_model_unsupported(put):
    spec = ModelSpec(Kind.CUSTOM, 0.05, 0.25, 0.15, interval=(0.0, math.inf),
                     anchor=1.0)
    m = make_model(spec, psi=lambda x: x, phi=lambda x: 1.0 / x,
                   psi_p=lambda x: 1.0, phi_p=lambda x: -x**-2,
                   phi_pp=lambda x: 2.0 * x**-3)
    with pytest.raises(UnsupportedModelError):
        simulate_policy(m, put, 1.0, 5.0, 5.0, _cfg(n_paths=10))


def test_abm_simulation_runs():
    m = make_model(ModelSpec(Kind.ABM, 0.0, 0.3, 0.2))
    cfg = _cfg(n_paths=20_000, dt=1e-3, t_max=30.0)
    e = hitting_time_check(m, 0.0, 0.5, cfg)
    ref = m.psi(0.0) / m.psi(0.5)
    assert abs(e.z_score(ref)) < 4.0

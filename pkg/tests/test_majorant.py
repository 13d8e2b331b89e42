import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxstop import (NoTangencyError, RewardError, Side, put_reward,
                     slope_at, tangent_from_point, transform,
                     upper_concave_envelope)
from maxstop.majorant import PiecewiseMajorant

from conftest import K


def test_envelope_of_concave_samples_is_the_function():
    ys = np.linspace(0.0, 4.0, 41)
    ws = -(ys - 2.0) ** 2
    env = upper_concave_envelope(list(zip(ys, ws)))
    assert np.all(env.contact)
    assert env(2.0) == pytest.approx(0.0)


def test_envelope_of_convex_samples_is_a_chord():
    ys = np.linspace(0.0, 4.0, 41)
    ws = (ys - 2.0) ** 2
    env = upper_concave_envelope(list(zip(ys, ws)))
    assert len(env.knot_y) == 2
    assert env(2.0) == pytest.approx(4.0)  # chord between the endpoints
    assert env.contact.sum() == 2


def test_envelope_pin_above_function():
    ys = np.linspace(0.0, 1.0, 11)
    ws = np.zeros(11)
    env = upper_concave_envelope(list(zip(ys, ws)), pins=[(0.0, 1.0), (1.0, 0.0)])
    assert env(0.0) == pytest.approx(1.0)
    assert env(0.5) == pytest.approx(0.5)


def test_envelope_rejects_pin_below_function():
    ys = np.linspace(0.0, 1.0, 11)
    ws = np.ones(11)
    with pytest.raises(RewardError):
        upper_concave_envelope(list(zip(ys, ws)), pins=[(0.5, 0.2)])


def test_envelope_slopes_nonincreasing_random():
    rng = np.random.default_rng(7)
    for _ in range(50):
        ys = np.sort(rng.uniform(0.0, 10.0, 60))
        ys = np.unique(ys)
        ws = rng.normal(size=len(ys))
        env = upper_concave_envelope(list(zip(ys, ws)))
        slopes = env.slopes
        assert np.all(np.diff(slopes) <= 1e-9)
        # majorant dominates the samples
        assert np.all(env(ys) >= ws - 1e-9)


def test_majorant_validation():
    with pytest.raises(ValueError):
        PiecewiseMajorant(knot_y=np.array([0.0]), knot_w=np.array([1.0]),
                          contact=np.array([True]))
    with pytest.raises(ValueError):
        PiecewiseMajorant(knot_y=np.array([1.0, 1.0]),
                          knot_w=np.array([0.0, 0.0]),
                          contact=np.array([True, True]))


def test_tangent_from_diagonal_pin_matches_derivative(gbm, power_sum):
    # tangency from the diagonal pin: the refined point satisfies the
    # tangency identity H'(y*)(y0 - y*) = w0 - H(y*) to high accuracy
    s = 35.0
    from maxstop import v_diag
    d = v_diag(gbm, power_sum, s)
    tr = transform(gbm, power_sum, s)
    y0 = gbm.F(s)
    w0 = d.v / gbm.phi(s)
    y_star, slope, degen = tangent_from_point(
        tr, (y0, w0), side=Side.LEFT, bracket=(gbm.F(1e-6), y0))
    assert not degen
    assert slope == pytest.approx(tr.Hprime(y_star), rel=1e-12)
    resid = tr.Hprime(y_star) * (y0 - y_star) - (w0 - tr.H(y_star))
    assert abs(resid) <= 1e-6 * max(1.0, abs(w0))
    # the tangency state is the optimal stopping boundary s - l*
    assert gbm.Finv(y_star) == pytest.approx(s - d.l_star, rel=1e-5)


def test_no_tangency_raises(gbm, put):
    # the put's transformed reward is flat beyond the strike, so no line
    # from the origin is tangent to it
    tr = transform(gbm, put, 5.0)
    with pytest.raises(NoTangencyError):
        tangent_from_point(tr, (0.0, 0.0), side=Side.RIGHT,
                           bracket=(gbm.F(1e-6), gbm.F(20.0)))


def test_tangent_grid_convergence(gbm, power_sum):
    # discrete envelope contact approaches the refined tangency as the grid
    # refines: the coarse-grid error shrinks roughly linearly
    s = 20.0
    tr = transform(gbm, power_sum, s)
    y_star, _, _ = tangent_from_point(tr, (0.0, 0.0), side=Side.RIGHT,
                                      bracket=(gbm.F(1e-6), gbm.F(4 * s)))
    errs = []
    for n in (2000, 8000, 32000):
        xs = np.geomspace(1e-4, 4 * s, n)
        samples = [(gbm.F(x), tr.H(gbm.F(x))) for x in xs]
        env = upper_concave_envelope(samples, pins=[(0.0, 0.0)])
        contact = env.contact_set
        first = contact[contact > 1e-12][0]
        errs.append(abs(gbm.Finv(first) - gbm.Finv(y_star)))
    assert errs[2] <= errs[0] + 1e-12
    assert errs[2] <= 0.05  # within the local grid spacing


def test_slope_at_kink_uses_right_derivative(gbm, put):
    tr = transform(gbm, put, 8.0)
    slope, kinked = slope_at(tr, K)
    assert kinked
    assert slope == pytest.approx(0.0, abs=1e-9)
    slope_in, kinked_in = slope_at(tr, 4.0)
    assert not kinked_in
    assert slope_in < 0.0


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(5, 80))
def test_envelope_properties(seed, n):
    rng = np.random.default_rng(seed)
    ys = np.unique(np.sort(rng.uniform(0.0, 5.0, n)))
    if len(ys) < 2:
        ys = np.array([0.0, 1.0])
    ws = rng.normal(size=len(ys))
    env = upper_concave_envelope(list(zip(ys, ws)))
    # dominance, concavity, and endpoint contact
    assert np.all(env(ys) >= ws - 1e-9)
    assert np.all(np.diff(env.slopes) <= 1e-9)
    assert env.contact[0] and env.contact[-1]

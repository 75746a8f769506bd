import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import overlap_quadrature, risk_reference
from riskwarn.core import Frame, ObjectState, make_frame
from riskwarn.predict import GaussianBelief2D, UncertaintyParams
from riskwarn.risk import (
    CollisionProfile,
    RiskParams,
    _survival,
    batch_risk,
    collision_probability,
    frame_risks,
    object_collision_profile,
    object_risk,
    risk_warnings,
    survival_profile,
    total_collision_profile,
)


def belief(mean, var):
    return GaussianBelief2D(np.asarray(mean, float), var * np.eye(2))


def test_coincident_means_against_quadrature():
    p = collision_probability(belief([0, 0], 0.5), belief([0, 0], 0.5), 1.0)
    q = overlap_quadrature([0, 0], 0.5 * np.eye(2), [0, 0], 0.5 * np.eye(2))
    assert p == pytest.approx(q, rel=1e-9)
    assert p == pytest.approx(0.15915, abs=1e-5)


def test_offset_means_against_quadrature():
    p = collision_probability(belief([0, 0], 0.5), belief([1, 0], 0.5), 1.0)
    q = overlap_quadrature([0, 0], 0.5 * np.eye(2), [1, 0], 0.5 * np.eye(2))
    assert p == pytest.approx(q, rel=1e-9)
    assert p == pytest.approx(0.09653, abs=1e-5)


def test_far_separation():
    assert collision_probability(belief([0, 0], 0.5), belief([1000, 0], 0.5), 1.0) < 1e-30


def test_probability_capped():
    assert collision_probability(belief([0, 0], 1e-4), belief([0, 0], 1e-4), 1.0) == 1.0


def test_profile_examples():
    params = RiskParams()
    far = object_collision_profile(ObjectState(0, 0, 50, 0, 0), params)
    assert np.all(far.p < 1e-12)
    # with no uncertainty growth the overlap peaks at the contact time
    flat = RiskParams(uncertainty=UncertaintyParams(0.1, 0.0, 0.0))
    prof = object_collision_profile(ObjectState(0, 0, 3, 0, -1), flat)
    assert abs(prof.s[np.argmax(prof.p)] - 3.0) <= flat.interval_ds + 1e-12
    # growing covariance dilutes the density, pulling the peak earlier; compare
    # with a dense scan of the closed-form overlap along the approach line
    prof = object_collision_profile(ObjectState(0, 0, 3, 0, -1), params)
    s = np.linspace(0, 5, 50001)
    var_long = (0.1 + 0.3 * s) ** 2 + (0.1 + 0.1 * s) ** 2
    var_lat = 2 * (0.1 + 0.1 * s) ** 2
    dens = np.exp(-0.5 * (3 - s) ** 2 / var_long) / np.sqrt(var_long * var_lat)
    assert abs(prof.s[np.argmax(prof.p)] - s[np.argmax(dens)]) <= params.interval_ds
    two = object_collision_profile(ObjectState(0, 0, 3, 0, -1), RiskParams(horizon_s_max=5, interval_ds=5))
    assert len(two) == 2 and two.s.tolist() == [0.0, 5.0]


def test_total_profile():
    s = np.arange(5) * 0.1
    a = CollisionProfile(s, np.full(5, 0.3))
    assert np.array_equal(total_collision_profile([a]).p, a.p)
    assert np.allclose(total_collision_profile([a, a]).p, 0.6)
    b = CollisionProfile(s, np.full(5, 0.7))
    assert np.array_equal(total_collision_profile([b, b]).p, np.ones(5))
    with pytest.raises(ValueError):
        total_collision_profile([a, CollisionProfile(s * 2, np.zeros(5))])


def test_profile_validation():
    with pytest.raises(ValueError):
        CollisionProfile([0, 0.1], [0.2, 1.5])
    with pytest.raises(ValueError):
        CollisionProfile([0, 0], [0.2, 0.2])


def test_survival_trivial_and_escape_only():
    params = RiskParams(escape_rate=0.0)
    s = params.grid()
    surv = survival_profile(CollisionProfile(s, np.zeros_like(s)), params)
    assert all(v == 1.0 for _, v in surv)
    params = RiskParams(escape_rate=0.1)
    surv = dict(survival_profile(CollisionProfile(s, np.zeros_like(s)), params))
    assert surv[s[30]] == pytest.approx(math.exp(-0.3), abs=1e-12)


@pytest.mark.parametrize("c", [0.0, 0.05, 0.4, 1.0])
def test_survival_closed_form_constant_profile(c):
    params = RiskParams(escape_rate=0.3)
    s = params.grid()
    surv = np.array([v for _, v in survival_profile(CollisionProfile(s, np.full_like(s, c)), params)])
    assert np.max(np.abs(surv - np.exp(-(params.escape_rate + c / params.event_duration_dt) * s))) <= 1e-12


def test_object_risk_constant_profile():
    params = RiskParams(escape_rate=0.0, interval_ds=0.01)
    s = params.grid()
    c = 0.1
    prof = CollisionProfile(s, np.full_like(s, c))
    surv = survival_profile(prof, params)
    r = object_risk(prof, surv, params).value
    rate = c / params.event_duration_dt
    direct = sum(math.exp(-rate * sk) * rate * params.interval_ds for sk in s)
    assert r == pytest.approx(direct, rel=1e-12)
    # continuum limit, up to first-order grid error
    assert r == pytest.approx(1 - math.exp(-rate * params.horizon_s_max), abs=rate * params.interval_ds * 2)
    zero = CollisionProfile(s, np.zeros_like(s))
    assert object_risk(zero, surv, params).value == 0.0


def test_object_risk_rejects_grid_mismatch():
    params = RiskParams()
    s = params.grid()
    prof = CollisionProfile(s, np.zeros_like(s))
    with pytest.raises(ValueError):
        object_risk(prof, [(0.0, 1.0)], params)


def test_head_on_against_dense_reference():
    params = RiskParams()
    obj = ObjectState(4, 0, 2, 0, -1)
    r = frame_risks(make_frame(0, 15.0, [obj.as_row()]), params)[4].value
    dense = RiskParams(interval_ds=1e-3)
    r_dense = frame_risks(make_frame(0, 15.0, [obj.as_row()]), dense)[4].value
    ref = risk_reference([(0, 2)], [(0, -1)], params, 1e-3)[0]
    assert r_dense == pytest.approx(ref, abs=1e-12)
    assert abs(r - ref) < 1e-3 + 0.02 * ref
    warn = risk_warnings(make_frame(0, 15.0, [obj.as_row()]), RiskParams(risk_threshold=min(r, 0.99)))
    assert warn == {4: True}


def test_receding_lower_than_head_on():
    params = RiskParams()
    head = frame_risks(make_frame(0, 15.0, [[0, 0, 2, 0, -1]]), params)[0].value
    away = frame_risks(make_frame(0, 15.0, [[0, 0, 2, 0, 1.5]]), params)[0].value
    assert away < head


def test_empty_frame():
    assert risk_warnings(Frame(0, 0.0), RiskParams()) == {}


def test_batch_matches_reference_path():
    rng = np.random.default_rng(3)
    params = RiskParams(uncertainty=UncertaintyParams(0.2, 0.5, 0.1))
    frames = []
    for k in range(20):
        n = rng.integers(0, 5)
        rows = [[i, *rng.uniform(-4, 4, 2), *rng.uniform(-2, 2, 2)] for i in range(n)]
        if k == 3:
            rows.append([9, 1.0, 1.0, 0.0, 0.0])
        frames.append(make_frame(k, 15.0, rows))
    states = np.array([o.as_row()[1:] for fr in frames for o in fr.objects])
    labels = np.array([fr.index for fr in frames for _ in fr.objects])
    got = batch_risk(states, labels, params, chunk=7)
    want = [frame_risks(fr, params)[o.id].value for fr in frames for o in fr.objects]
    assert np.allclose(got, want, rtol=1e-10, atol=1e-14)
    ref = []
    for fr in frames:
        if fr.objects:
            ref.extend(risk_reference([o.position for o in fr.objects], [o.velocity for o in fr.objects],
                                      params, params.interval_ds))
    assert np.allclose(got, ref, rtol=1e-9, atol=1e-14)


def test_batch_rejects_unsorted_rows():
    with pytest.raises(ValueError):
        batch_risk(np.zeros((2, 4)), np.array([1, 0]), RiskParams())


def test_params_validation():
    for kw in [dict(risk_threshold=0), dict(horizon_s_max=0), dict(interval_ds=6), dict(escape_rate=-1),
               dict(event_duration_dt=0), dict(cross_section=0)]:
        with pytest.raises(ValueError):
            RiskParams(**kw)


def test_sum_of_risks_can_exceed_one_with_clamped_total():
    # two objects sitting on the user with certain collision at every step
    params = RiskParams(escape_rate=0.0, interval_ds=0.5, horizon_s_max=5.0, event_duration_dt=0.5,
                        uncertainty=UncertaintyParams(0.01, 0.0, 0.0), cross_section=2.0)
    r = frame_risks(make_frame(0, 15.0, [[0, 0, 0, 0, 0], [1, 0, 0, 0, 0]]), params)
    assert r[0].value == 1.0 and r[1].value == 1.0


state = st.tuples(st.floats(-4, 4), st.floats(-4, 4), st.floats(-2, 2), st.floats(-2, 2))


def frame_of(states):
    return make_frame(0, 15.0, [[i, *x] for i, x in enumerate(states)])


@settings(max_examples=40, deadline=None)
@given(st.lists(state, min_size=1, max_size=5), st.floats(0.0, 2.0))
def test_survival_bounds(states, escape):
    params = RiskParams(escape_rate=escape)
    profs = [object_collision_profile(ObjectState(i, *x), params) for i, x in enumerate(states)]
    surv = np.array([v for _, v in survival_profile(total_collision_profile(profs), params)])
    assert surv[0] == 1.0
    assert np.all(np.diff(surv) <= 0)
    assert np.all((surv > 0) & (surv <= 1))


@settings(max_examples=40, deadline=None)
@given(st.lists(state, min_size=1, max_size=5), st.floats(0.0, 2.0), st.sampled_from([0.02, 0.05, 0.1, 0.2]))
def test_risk_mass_bound(states, escape, ds):
    # discrete analog of sum R_i <= 1: the left-Riemann sum is bounded by
    # exp(max step collision mass) * (1 - survival past the horizon), times the
    # factor by which clamping the total undercounts the per-object sum
    params = RiskParams(escape_rate=escape, interval_ds=ds)
    fr = frame_of(states)
    total = sum(r.value for r in frame_risks(fr, params).values())
    profs = [object_collision_profile(o, params) for o in fr.objects]
    raw = np.sum([pr.p for pr in profs], axis=0)
    tp = total_collision_profile(profs).p
    ratio = max(1.0, float(np.max(np.where(tp > 0, raw / np.where(tp > 0, tp, 1.0), 1.0))))
    y = tp / params.event_duration_dt * ds
    s_end = math.exp(-np.sum((escape + tp / params.event_duration_dt) * ds))
    assert total <= ratio * math.exp(y.max()) * (1 - s_end) + 1e-12
    if y.max() < 1e-3 and ratio == 1.0:
        assert total <= 1.0 + 1e-9


@settings(max_examples=40, deadline=None)
@given(state, st.floats(0.0, 1.5), st.floats(0.01, 0.5))
def test_escape_rate_monotone(x, escape, delta):
    lo = RiskParams(escape_rate=escape, risk_threshold=0.5)
    hi = RiskParams(escape_rate=escape + delta, risk_threshold=0.5)
    prof = object_collision_profile(ObjectState(0, *x), lo)
    r_lo = frame_risks(frame_of([x]), lo)[0].value
    r_hi = frame_risks(frame_of([x]), hi)[0].value
    if r_lo == 0.0:
        assert r_hi == 0.0
    elif np.any(prof.p[1:] > 1e-300) and r_lo < 1.0:
        assert r_hi < r_lo
    else:
        assert r_hi <= r_lo


@settings(max_examples=40, deadline=None)
@given(st.lists(state, min_size=1, max_size=4), st.floats(-math.pi, math.pi))
def test_rotation_invariance(states, theta):
    params = RiskParams(uncertainty=UncertaintyParams(0.2, 0.4, 0.1))
    c, s = math.cos(theta), math.sin(theta)
    rot = [(c * px - s * py, s * px + c * py, c * vx - s * vy, s * vx + c * vy) for px, py, vx, vy in states]
    a = frame_risks(frame_of(states), params)
    b = frame_risks(frame_of(rot), params)
    for k in a:
        assert abs(a[k].value - b[k].value) <= 1e-9


def test_survival_helper_broadcasts():
    params = RiskParams()
    p = np.random.default_rng(0).uniform(0, 1, (3, 51))
    out = _survival(p, params)
    for row, o in zip(p, out):
        assert np.allclose(o, _survival(row, params))

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import hysteresis_reference
from riskwarn.postprocess import Hysteresis, HysteresisParams, apply_hysteresis, hysteresis_by_id


def test_examples():
    assert apply_hysteresis([0] * 6, HysteresisParams(3, 5)) == [False] * 6
    assert not any(apply_hysteresis([1, 1, 0, 1, 1, 0, 1, 1, 0], HysteresisParams(3, 1)))
    assert all(apply_hysteresis([1, 1, 1, 1, 0, 1, 1, 1, 1], HysteresisParams(1, 2)))


def test_switch_timing():
    out = apply_hysteresis([1, 1, 1, 0, 0, 0], HysteresisParams(3, 2))
    assert out == [False, False, True, True, False, False]


def test_params_validation():
    with pytest.raises(ValueError):
        HysteresisParams(0, 1)
    with pytest.raises(ValueError):
        HysteresisParams(1, 1.5)


def test_exhaustive_against_reference():
    for n_on, n_off in itertools.product((1, 2, 3), repeat=2):
        params = HysteresisParams(n_on, n_off)
        for n in range(13):
            for seq in itertools.product((False, True), repeat=n):
                assert apply_hysteresis(seq, params) == hysteresis_reference(seq, n_on, n_off)


bools = st.lists(st.booleans(), max_size=60)


@settings(max_examples=300, deadline=None)
@given(bools)
def test_identity_for_unit_counts(raw):
    assert apply_hysteresis(raw, HysteresisParams(1, 1)) == raw


@settings(max_examples=300, deadline=None)
@given(bools, st.integers(1, 6), st.integers(1, 6))
def test_runs_and_gaps(raw, n_on, n_off):
    out = apply_hysteresis(raw, HysteresisParams(n_on, n_off))
    for k in range(len(out)):
        if out[k] and (k == 0 or not out[k - 1]):
            # every switch-on completes a run of n_on raw trues
            assert k + 1 >= n_on and all(raw[k - n_on + 1 : k + 1])
        if not out[k] and k > 0 and out[k - 1]:
            assert k + 1 >= n_off and not any(raw[k - n_off + 1 : k + 1])


@settings(max_examples=300, deadline=None)
@given(bools, st.integers(1, 6))
def test_second_pass_only_extends(raw, n_off):
    p = HysteresisParams(1, n_off)
    once = apply_hysteresis(raw, p)
    twice = apply_hysteresis(once, p)
    assert all(b for a, b in zip(once, twice) if a)
    if n_off == 1:
        assert twice == once


def test_second_pass_not_idempotent_for_long_off_count():
    # a bridged tail shortens the false run seen by the second pass
    p = HysteresisParams(1, 2)
    once = apply_hysteresis([True, False, False], p)
    assert once == [True, True, False]
    assert apply_hysteresis(once, p) == [True, True, True]


def test_by_id_keeps_separate_machines():
    # id 1 warns every frame, id 2 never; interleaved rows
    ids = np.array([1, 2] * 4)
    raw = np.array([True, False] * 4)
    out = hysteresis_by_id(raw, ids, HysteresisParams(2, 2))
    assert out.tolist() == [False, False, True, False, True, False, True, False]


def test_by_id_late_track_starts_off():
    ids = np.array([1, 1, 2, 1, 2])
    raw = np.array([True, True, True, True, True])
    out = hysteresis_by_id(raw, ids, HysteresisParams(2, 1))
    assert out.tolist() == [False, True, False, True, True]


def test_online_class_matches_batch():
    rng = np.random.default_rng(1)
    raw = rng.random(200) < 0.4
    h = Hysteresis(HysteresisParams(2, 3))
    assert [h.update(x) for x in raw] == apply_hysteresis(raw, HysteresisParams(2, 3))

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netorch.errors import InvalidGeometry, InvalidProblem
from netorch.simenv import (
    Geometry,
    SplitMix64,
    Scenario,
    dump_scenario,
    generate_scenario,
    grid_shape,
    load_scenario,
    scenario_to_bandwidth_problem,
    scenario_to_power_problem,
)


def test_splitmix_reference_values():
    # reference: the classic SplitMix64 sequence for state 0 starts 0xE220A8397B1DCDAF
    rng = SplitMix64.__new__(SplitMix64)
    rng.state = 0
    assert rng.next_u64() == 0xE220A8397B1DCDAF
    assert rng.next_u64() == 0x6E789E6AA1B965F4


def test_streams_are_independent_and_reproducible():
    a = [SplitMix64(7, "ue", 3).uniform() for _ in range(3)]
    b = [SplitMix64(7, "ue", 3).uniform() for _ in range(3)]
    assert a == b
    assert SplitMix64(7, "ue", 3).uniform() != SplitMix64(7, "ue", 4).uniform()
    assert SplitMix64(7, "ue", 3).uniform() != SplitMix64(7, "shadow", 3).uniform()
    rng = SplitMix64(1, "x")
    u = [rng.uniform() for _ in range(10_000)]
    assert 0 <= min(u) and max(u) < 1
    assert abs(np.mean(u) - 0.5) < 0.02


def test_same_seed_byte_identical():
    assert dump_scenario(generate_scenario(4, 5, seed=3)) == dump_scenario(generate_scenario(4, 5, seed=3))
    assert dump_scenario(generate_scenario(4, 5, seed=3)) != dump_scenario(generate_scenario(4, 5, seed=4))


def test_closed_form_pathloss_at_min_distance():
    g = Geometry()
    # BS sits at the centre of a 500 m cell: (250, 250)
    s = generate_scenario(1, 1, seed=0, ue_positions=[[250.0 + g.min_distance, 250.0]])
    expected_db = -35.3 - 37.6 * math.log10(35.0) + 94.0
    assert s.large_scale_gain[0, 0] == pytest.approx(10 ** (expected_db / 10), rel=1e-12)


def test_shapes_and_positivity():
    s = generate_scenario(4, 5, seed=0)
    assert s.large_scale_gain.shape == (4, 20)
    assert s.ue_positions.shape == (20, 2)
    assert np.all(s.large_scale_gain > 0)


def test_min_distance_respected():
    s = generate_scenario(9, 10, seed=2)
    serving = s.bs_positions[np.repeat(np.arange(9), 10)]
    assert np.all(np.hypot(*(s.ue_positions - serving).T) >= s.geometry.min_distance)


def test_grid_shape_fallback():
    assert grid_shape(1) == (1, 1)
    assert grid_shape(4) == (2, 2)
    assert grid_shape(16) == (4, 4)
    assert grid_shape(3) == (1, 3)
    s = generate_scenario(3, 2, seed=0)
    assert s.area == (1500.0, 500.0)


def test_power_problem_mapping():
    s = generate_scenario(4, 5, M=96, seed=1)
    P = scenario_to_power_problem(s, 1000.0)
    own = np.array([[s.large_scale_gain[j, j * 5 + k] for k in range(5)] for j in range(4)])
    np.testing.assert_array_equal(P.signal_gain, 96 * own)
    np.testing.assert_array_equal(P.cross_gain, s.large_scale_gain)
    assert P.noise == 1.0
    P1 = scenario_to_power_problem(generate_scenario(4, 5, M=1, seed=1), 1.0)
    np.testing.assert_array_equal(P1.signal_gain, own)


@settings(max_examples=25, deadline=None)
@given(L=st.integers(1, 5), K=st.integers(1, 6), M=st.integers(1, 128), seed=st.integers(0, 2**64 - 1))
def test_power_problem_always_valid(L, K, M, seed):
    scenario_to_power_problem(generate_scenario(L, K, M, seed), 10.0).validate()


def test_bandwidth_problem_mapping():
    s = generate_scenario(1, 20, seed=0)
    bp = scenario_to_bandwidth_problem(s, 0, 100.0, per_ue_power=10.0, n0=2.0)
    assert bp.K == 20 and bp.total_bw == 100.0
    np.testing.assert_array_equal(bp.effective_snr, s.large_scale_gain[0] * 5.0)
    assert list(np.argsort(bp.effective_snr)) == list(np.argsort(s.large_scale_gain[0]))
    with pytest.raises(IndexError):
        scenario_to_bandwidth_problem(s, 1, 100.0)
    with pytest.raises(InvalidProblem):
        scenario_to_bandwidth_problem(s, 0, 100.0, per_ue_power=0.0)


def test_gain_decreases_with_distance():
    s = generate_scenario(1, 1000, seed=11)
    d = np.hypot(*(s.ue_positions - s.bs_positions[0]).T)
    order = np.argsort(d)
    d_sorted, b_sorted = d[order], s.large_scale_gain[0, order]
    distinct = np.diff(d_sorted) > 0
    assert np.all(np.diff(b_sorted)[distinct] < 0)


def test_shadowing_changes_gains_deterministically():
    g = Geometry(shadowing_std_db=8.0)
    a = generate_scenario(4, 3, seed=5, geometry=g)
    b = generate_scenario(4, 3, seed=5, geometry=g)
    plain = generate_scenario(4, 3, seed=5)
    np.testing.assert_array_equal(a.large_scale_gain, b.large_scale_gain)
    np.testing.assert_array_equal(a.ue_positions, plain.ue_positions)
    assert not np.array_equal(a.large_scale_gain, plain.large_scale_gain)


@pytest.mark.parametrize(
    "kwargs",
    [dict(L=0, K=1), dict(L=1, K=0), dict(L=1, K=1, M=0), dict(L=1, K=1, geometry=Geometry(min_distance=300))],
)
def test_invalid_geometry(kwargs):
    with pytest.raises(InvalidGeometry):
        generate_scenario(**kwargs)


def test_scenario_round_trip(tmp_path):
    s = generate_scenario(4, 5, seed=9)
    path = tmp_path / "s.json"
    path.write_bytes(dump_scenario(s))
    back = load_scenario(path)
    assert isinstance(back, Scenario)
    assert dump_scenario(back) == dump_scenario(s)

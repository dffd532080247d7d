from __future__ import annotations

import math
from itertools import combinations

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

import oracles
from fabricsim.composition import FabricComposer
from fabricsim.errors import FabricError, PathError, UnknownNodeError
from fabricsim.perf import (DEFAULT_EFFICIENCY, fit_scaling, fits_in_pool,
                            p2p_bandwidth, p2p_path, predict_runtime,
                            speedup, vram_pool)
from fabricsim.scenario import FIG8_POINTS
from fabricsim.topology import GIB, TIB

from conftest import two_host_reference


@pytest.fixture(scope="module")
def composed(reference):
    composer = FabricComposer(reference)
    state = composer.initial_state()
    return composer.compose(state, "h0", state.pool)


# -- paths -------------------------------------------------------------------


def test_same_drawer_pair_hops_2(reference, composed):
    path = p2p_path(reference, composed, "gpu00", "gpu01")
    assert path.hop_count == 2
    assert path.nearest_common_switch == "drawer0"
    assert path.links == ("link_drawer0_gpu00", "link_drawer0_gpu01")


def test_same_apa_different_drawer_hops_4(reference, composed):
    path = p2p_path(reference, composed, "gpu00", "gpu04")
    assert path.hop_count == 4
    assert path.nearest_common_switch == "apa0"


def test_cross_apa_hops_6_via_top(reference, composed):
    path = p2p_path(reference, composed, "gpu00", "gpu31")
    assert path.hop_count == 6
    assert path.nearest_common_switch == "top0"


def test_self_path_is_degenerate(reference, composed):
    path = p2p_path(reference, composed, "gpu00", "gpu00")
    assert path.hop_count == 0
    assert path.links == ()
    assert path.is_local


def test_path_symmetry(reference, composed):
    fwd = p2p_path(reference, composed, "gpu03", "gpu17")
    rev = p2p_path(reference, composed, "gpu17", "gpu03")
    assert fwd.hop_count == rev.hop_count
    assert fwd.links == tuple(reversed(rev.links))
    assert fwd.nearest_common_switch == rev.nearest_common_switch


def test_path_requires_composition(reference):
    composer = FabricComposer(reference)
    state = composer.initial_state()
    with pytest.raises(PathError) as exc_info:
        p2p_path(reference, state, "gpu00", "gpu01")
    assert exc_info.value.code == "NOT_COMPOSED"


def test_path_rejects_cross_host_pairs():
    topo = two_host_reference()
    composer = FabricComposer(topo)
    state = composer.initial_state()
    state = composer.compose(state, "h0", ["gpu00"])
    state = composer.compose(state, "h1", ["gpu01"])
    with pytest.raises(PathError) as exc_info:
        p2p_path(topo, state, "gpu00", "gpu01")
    assert exc_info.value.code == "DIFFERENT_HOSTS"


def test_path_unknown_endpoint(reference, composed):
    with pytest.raises(UnknownNodeError):
        p2p_path(reference, composed, "gpu00", "ghost")


def test_hop_stratification_counts_and_oracle(reference, composed):
    ids = [e.id for e in reference.endpoints]
    histogram: dict[int, int] = {}
    for a, b in combinations(ids, 2):
        hops = p2p_path(reference, composed, a, b).hop_count
        assert hops == oracles.hop_count_oracle(reference, a, b)
        histogram[hops] = histogram.get(hops, 0) + 1
    assert histogram == {2: 48, 4: 64, 6: 384}
    assert sum(histogram.values()) == 496


# -- bandwidth ------------------------------------------------------------------


def test_default_efficiency_gives_25(reference, composed):
    path = p2p_path(reference, composed, "gpu00", "gpu01")
    est = p2p_bandwidth(reference, path)
    assert est.estimated_bw == pytest.approx(25.0, abs=1e-12)
    assert est.bottleneck_bw == 32.0
    assert DEFAULT_EFFICIENCY == 0.78125


def test_unit_efficiency_gives_theoretical(reference, composed):
    path = p2p_path(reference, composed, "gpu00", "gpu31")
    est = p2p_bandwidth(reference, path, efficiency=1.0)
    assert est.estimated_bw == 32.0


def test_slow_top_uplink_bottlenecks_cross_apa_only(reference, composed):
    slow = reference.with_link_bandwidth({"link_top0_apa0": 16.0})
    cross = p2p_path(slow, composed, "gpu00", "gpu31")
    est = p2p_bandwidth(slow, cross)
    assert est.bottleneck_bw == 16.0
    assert est.estimated_bw == pytest.approx(12.5, abs=1e-12)
    local = p2p_path(slow, composed, "gpu00", "gpu01")
    assert p2p_bandwidth(slow, local).estimated_bw == pytest.approx(25.0)


def test_local_path_reports_infinite_bandwidth(reference, composed):
    path = p2p_path(reference, composed, "gpu05", "gpu05")
    est = p2p_bandwidth(reference, path)
    assert est.is_local
    assert math.isinf(est.estimated_bw)


def test_efficiency_bounds(reference, composed):
    path = p2p_path(reference, composed, "gpu00", "gpu01")
    for bad in (0.0, -0.5, 1.5):
        with pytest.raises(FabricError):
            p2p_bandwidth(reference, path, efficiency=bad)


@given(bw=st.floats(min_value=1.0, max_value=1000.0),
       efficiency=st.floats(min_value=0.01, max_value=1.0))
def test_bandwidth_monotone_and_bounded(reference, composed, bw, efficiency):
    slow = reference.with_link_bandwidth({"link_top0_apa0": bw})
    path = p2p_path(slow, composed, "gpu00", "gpu31")
    est = p2p_bandwidth(slow, path, efficiency)
    assert est.estimated_bw <= est.bottleneck_bw + 1e-12
    assert est.bottleneck_bw == min(32.0, bw)
    faster = p2p_bandwidth(
        reference.with_link_bandwidth({"link_top0_apa0": bw + 1.0}),
        path, efficiency)
    assert faster.estimated_bw >= est.estimated_bw


# -- scaling fit -------------------------------------------------------------------


def test_fig8_fit_matches_closed_form_and_numpy():
    model = fit_scaling(FIG8_POINTS)
    # exact closed-form solution of the 3-point system: a = 28.45,
    # b = 313976/35
    assert model.serial_minutes == pytest.approx(28.45, abs=1e-9)
    assert model.parallel_minutes == pytest.approx(313976 / 35, rel=1e-12)
    np_a, np_b = oracles.lstsq_fit(FIG8_POINTS)
    assert model.serial_minutes == pytest.approx(np_a, abs=1e-6)
    assert model.parallel_minutes == pytest.approx(np_b, rel=1e-9)
    assert model.max_rel_residual <= 0.05
    assert model.max_rel_residual == pytest.approx(0.0320378, abs=1e-6)


def test_fit_reproduces_fig8_points_within_residual():
    model = fit_scaling(FIG8_POINTS)
    for n, t in FIG8_POINTS:
        assert predict_runtime(model, n) == pytest.approx(t, rel=0.05)


def test_two_point_fit_is_exact_interpolation():
    model = fit_scaling([(8, 1145.0), (16, 603.5)])
    assert model.serial_minutes == pytest.approx(62.0, abs=1e-9)
    assert model.parallel_minutes == pytest.approx(8664.0, abs=1e-9)
    assert predict_runtime(model, 32) == pytest.approx(332.75, abs=1e-9)
    assert model.max_rel_residual <= 1e-12


def test_perfectly_linear_data():
    model = fit_scaling([(1, 100.0), (2, 50.0), (4, 25.0)])
    assert model.serial_minutes == pytest.approx(0.0, abs=1e-9)
    assert model.parallel_minutes == pytest.approx(100.0, abs=1e-9)
    assert model.max_rel_residual <= 1e-12


def test_constant_data():
    model = fit_scaling([(1, 50.0), (2, 50.0)])
    assert model.serial_minutes == pytest.approx(50.0, abs=1e-9)
    assert model.parallel_minutes == pytest.approx(0.0, abs=1e-9)


def test_negative_serial_clamped_to_zero():
    # runtime grows slightly steeper than 1/n: unconstrained a goes negative
    points = [(1, 100.0), (2, 45.0), (4, 20.0)]
    model = fit_scaling(points)
    assert model.serial_minutes == 0.0
    assert model.parallel_minutes > 0
    np_a, _ = oracles.lstsq_fit(points)
    assert np_a < 0  # sanity: clamping really engaged


def test_degenerate_input_rejected():
    with pytest.raises(FabricError):
        fit_scaling([(8, 100.0)])
    with pytest.raises(FabricError):
        fit_scaling([(8, 100.0), (8, 90.0)])
    with pytest.raises(FabricError):
        fit_scaling([(8, 100.0), (16, -5.0)])


@given(a=st.one_of(st.just(0.0), st.floats(min_value=0.01, max_value=1e6)),
       b=st.one_of(st.just(0.0), st.floats(min_value=0.01, max_value=1e6)),
       ns=st.sets(st.integers(min_value=1, max_value=128), min_size=2,
                  max_size=10))
def test_fit_recovers_exact_amdahl_data(a, b, ns):
    assume(a > 0 or b > 0)  # all-zero runtimes are not valid measurements
    points = oracles.exact_amdahl(a, b, sorted(ns))
    model = fit_scaling(points)
    scale = max(1.0, a, b)
    assert abs(model.serial_minutes - a) <= 1e-9 * scale
    assert abs(model.parallel_minutes - b) <= 1e-9 * scale


@given(data=st.lists(
    st.tuples(st.integers(min_value=1, max_value=64),
              st.floats(min_value=0.1, max_value=1e4)),
    min_size=2, max_size=8,
    unique_by=lambda p: p[0]))
def test_fit_is_a_local_optimum(data):
    model = fit_scaling(data)
    a, b = model.serial_minutes, model.parallel_minutes
    best = oracles.ssr(data, a, b)
    for fa in (0.99, 1.0, 1.01):
        for fb in (0.99, 1.0, 1.01):
            pa, pb = a * fa, b * fb
            if pa < 0 or pb < 0:
                continue
            assert oracles.ssr(data, pa, pb) >= best - 1e-9 * max(best, 1.0)


@given(b=st.floats(min_value=0.1, max_value=1e5),
       a=st.floats(min_value=0.0, max_value=1e5))
def test_prediction_strictly_decreasing_when_b_positive(a, b):
    model = fit_scaling(oracles.exact_amdahl(a, b, [2, 8, 32]))
    previous = math.inf
    for n in (1, 2, 4, 8, 16, 64, 1024):
        value = predict_runtime(model, n)
        assert value < previous
        previous = value
    assert predict_runtime(model, 10**9) == pytest.approx(
        model.serial_minutes, rel=1e-3, abs=1e-3)


# -- speedup ----------------------------------------------------------------------


def test_fig8_speedups():
    assert speedup(FIG8_POINTS, 8, 32) == pytest.approx(3.827, abs=1e-3)
    assert speedup(FIG8_POINTS, 8, 32) == pytest.approx(1145.0 / 299.2,
                                                        rel=1e-12)
    assert speedup(FIG8_POINTS, 8, 16) == pytest.approx(1.897, abs=1e-3)
    assert speedup(FIG8_POINTS, 16, 16) == 1.0


def test_speedup_missing_n():
    with pytest.raises(FabricError):
        speedup(FIG8_POINTS, 8, 64)


# -- VRAM pooling ------------------------------------------------------------------


def test_pool_of_32_is_2tib(reference, composed):
    pool = vram_pool(reference, composed, "h0")
    assert pool.total_bytes == 2 * TIB == 2_199_023_255_552
    assert len(pool.per_gpu_bytes) == 32
    assert set(pool.per_gpu_bytes) == {64 * GIB}


def test_pool_single_and_empty(reference):
    composer = FabricComposer(reference)
    state = composer.initial_state()
    assert vram_pool(reference, state, "h0").total_bytes == 0
    one = composer.compose(state, "h0", ["gpu09"])
    pool = vram_pool(reference, one, "h0")
    assert pool.total_bytes == 64 * GIB
    assert pool.per_gpu_bytes == (64 * GIB,)


def test_pool_unknown_host(reference, composed):
    with pytest.raises(UnknownNodeError):
        vram_pool(reference, composed, "ghost")


def test_cfd_feasibility_at_50_bytes_per_cell(reference, composed):
    pool = vram_pool(reference, composed, "h0")
    result = fits_in_pool(pool, 40_000_000_000 * 50)
    assert result.feasible
    assert result.margin_bytes == 2 * TIB - 2_000_000_000_000 \
        == 199_023_255_552


def test_cfd_infeasible_at_60_bytes_per_cell(reference, composed):
    pool = vram_pool(reference, composed, "h0")
    result = fits_in_pool(pool, 40_000_000_000 * 60)
    assert not result.feasible
    assert result.margin_bytes == 2 * TIB - 2_400_000_000_000 < 0


def test_zero_requirement_always_feasible(reference, composed):
    pool = vram_pool(reference, composed, "h0")
    result = fits_in_pool(pool, 0)
    assert result.feasible
    assert result.margin_bytes == pool.total_bytes

from __future__ import annotations

import random

import pytest

from conftest import random_topology, two_host_reference
from fabricsim.composition import (ConstraintProfile,
                                   FabricComposer, PlanPolicy, PlanRequest,
                                   ProfileSource)
from fabricsim.errors import CompositionError
from fabricsim.topology import (FabricTopology, GpuEndpoint, Host, Link,
                                Tier, make_switch, reference_topology)


@pytest.fixture(scope="module")
def composer(reference):
    return FabricComposer(reference)


def synthetic_flat_fabric(n_gpus: int) -> FabricTopology:
    top = make_switch("top", Tier.TOP, n_gpus)
    gpus = tuple(GpuEndpoint(id=f"g{i:03d}", model_name="synthetic-gpu",
                             bar_sizes=(4096,), vram_bytes=4096)
                 for i in range(n_gpus))
    links = (Link(id="l_root", endpoints=("h0:root", "top:up")),) + tuple(
        Link(id=f"l{i}", endpoints=(top.downstream_ports[i], g.port))
        for i, g in enumerate(gpus))
    return FabricTopology(hosts=(Host(id="h0", phys_addr_bits=44),),
                          switches=(top,), endpoints=gpus, links=links)


# -- compose ----------------------------------------------------------------------


def test_compose_all_32_succeeds(composer):
    state = composer.initial_state()
    new = composer.compose(state, "h0", state.pool)
    assert len(new.assigned_to("h0")) == 32
    assert new.pool == frozenset()
    assert new.version == state.version + 1
    assert state.pool and state.version == 0  # input untouched


def test_compose_empty_set_bumps_version_only(composer):
    state = composer.initial_state()
    new = composer.compose(state, "h0", [])
    assert new.version == 1
    assert new.pool == state.pool
    assert new.assigned_to("h0") == frozenset()


def test_compose_65_gpus_hits_driver_limit():
    topo = synthetic_flat_fabric(65)
    composer = FabricComposer(topo, profiles=(
        ConstraintProfile("driver-v5.7", 64, ProfileSource.DRIVER),))
    state = composer.initial_state()
    with pytest.raises(CompositionError) as exc_info:
        composer.compose(state, "h0", state.pool)
    assert exc_info.value.code == "DRIVER_LIMIT"
    assert exc_info.value.profile_name == "driver-v5.7"
    # 64 is still fine
    ok = composer.compose(state, "h0", sorted(state.pool)[:64])
    assert len(ok.assigned_to("h0")) == 64


def test_compose_onto_40bit_host_exhausts(reference_40bit):
    composer = FabricComposer(reference_40bit)
    state = composer.initial_state()
    with pytest.raises(CompositionError) as exc_info:
        composer.compose(state, "h0_40bit", state.pool)
    err = exc_info.value
    assert err.code == "ADDRESS_EXHAUSTION"
    assert err.exhaustion.devices_placed == 15
    assert err.exhaustion.devices_total == 32


def test_compose_not_in_pool(composer):
    state = composer.compose(composer.initial_state(), "h0", ["gpu00"])
    with pytest.raises(CompositionError) as exc_info:
        composer.compose(state, "h0", ["gpu00"])
    assert exc_info.value.code == "NOT_IN_POOL"


def test_compose_unknown_host_and_endpoint(composer):
    state = composer.initial_state()
    with pytest.raises(CompositionError) as exc_info:
        composer.compose(state, "nope", ["gpu00"])
    assert exc_info.value.code == "UNKNOWN_HOST"
    with pytest.raises(CompositionError) as exc_info:
        composer.compose(state, "h0", ["ghost"])
    assert exc_info.value.code == "UNKNOWN_ENDPOINT"


def test_failed_compose_leaves_state_identical(composer):
    state = composer.compose(composer.initial_state(), "h0", ["gpu00"])
    snapshot = state
    with pytest.raises(CompositionError):
        composer.compose(state, "h0", ["gpu00"])  # already assigned
    assert state == snapshot


# -- decompose ---------------------------------------------------------------------


def test_decompose_compose_round_trip(composer):
    s0 = composer.initial_state()
    ids = ["gpu00", "gpu01", "gpu02"]
    s1 = composer.compose(s0, "h0", ids)
    s2 = composer.decompose(s1, "h0", ids)
    assert s2.pool == s0.pool
    assert s2.assignment_map == s0.assignment_map
    assert s2.version == s0.version + 2


def test_decompose_partial(composer):
    s1 = composer.compose(composer.initial_state(), "h0",
                          [f"gpu{i:02d}" for i in range(32)])
    s2 = composer.decompose(s1, "h0", ["gpu00", "gpu01", "gpu02", "gpu03"])
    assert len(s2.assigned_to("h0")) == 28
    assert len(s2.pool) == 4


def test_decompose_never_assigned(composer):
    state = composer.initial_state()
    with pytest.raises(CompositionError) as exc_info:
        composer.decompose(state, "h0", ["gpu00"])
    assert exc_info.value.code == "NOT_ASSIGNED"


# -- constraint_check -----------------------------------------------------------------


def test_constraint_check_minimum_rule(composer):
    state = composer.initial_state()  # driver 64 + framework 64
    assert composer.constraint_check(state, "h0", 32) is None
    assert composer.constraint_check(state, "h0", 64) is None
    violated = composer.constraint_check(state, "h0", 65)
    assert violated is not None and violated.source == ProfileSource.DRIVER


def test_constraint_check_names_binding_profile(reference):
    profiles = (ConstraintProfile("driver", 64, ProfileSource.DRIVER),
                ConstraintProfile("tf-build", 8, ProfileSource.FRAMEWORK))
    composer = FabricComposer(reference, profiles=profiles)
    state = composer.initial_state()
    violated = composer.constraint_check(state, "h0", 9)
    assert violated.name == "tf-build"
    assert violated.source == ProfileSource.FRAMEWORK
    with pytest.raises(CompositionError) as exc_info:
        composer.compose(state, "h0", sorted(state.pool)[:9])
    assert exc_info.value.code == "FRAMEWORK_LIMIT"


# -- plan ---------------------------------------------------------------------------


def test_plan_locality_4_takes_first_drawer(composer):
    state = composer.initial_state()
    chosen = composer.plan(state, PlanRequest(gpu_count=4))
    assert chosen == ["gpu00", "gpu01", "gpu02", "gpu03"]


def test_plan_locality_8_takes_first_apa(composer):
    state = composer.initial_state()
    chosen = composer.plan(state, PlanRequest(gpu_count=8))
    assert chosen == [f"gpu{i:02d}" for i in range(8)]


def test_plan_any_32_takes_whole_pool(composer):
    state = composer.initial_state()
    chosen = composer.plan(state, PlanRequest(gpu_count=32,
                                              policy=PlanPolicy.ANY))
    assert chosen == [f"gpu{i:02d}" for i in range(32)]


def test_plan_spread_maximizes_drawers(composer):
    state = composer.initial_state()
    chosen = composer.plan(state, PlanRequest(gpu_count=8,
                                              policy=PlanPolicy.SPREAD))
    drawers = {composer.topo.parent_of(e) for e in chosen}
    assert len(drawers) == 8


def test_plan_locality_prefers_fuller_drawers(composer):
    state = composer.initial_state()
    # drain half of drawer0 so drawer1 is the fullest DFS-first drawer
    state = composer.compose(state, "h0", ["gpu00", "gpu01"])
    chosen = composer.plan(state, PlanRequest(gpu_count=4))
    assert chosen == ["gpu04", "gpu05", "gpu06", "gpu07"]


def test_plan_does_not_mutate_and_feeds_compose(composer):
    state = composer.initial_state()
    before = state
    chosen = composer.plan(state, PlanRequest(gpu_count=12))
    assert state == before
    after = composer.compose(state, "h0", chosen)
    assert len(after.assigned_to("h0")) == 12


def test_plan_insufficient_pool(composer):
    state = composer.compose(composer.initial_state(), "h0",
                             [f"gpu{i:02d}" for i in range(32)])
    with pytest.raises(CompositionError) as exc_info:
        composer.plan(state, PlanRequest(gpu_count=1))
    assert exc_info.value.code == "INSUFFICIENT_POOL"


# -- multi-host and randomized sequences ------------------------------------------------


def test_two_hosts_share_the_fabric():
    composer = FabricComposer(two_host_reference())
    state = composer.initial_state()
    state = composer.compose(state, "h0", ["gpu00", "gpu01"])
    state = composer.compose(state, "h1", ["gpu04", "gpu05"])
    assert state.assigned_to("h0") == frozenset({"gpu00", "gpu01"})
    assert state.assigned_to("h1") == frozenset({"gpu04", "gpu05"})
    assert state.host_of("gpu04") == "h1"
    with pytest.raises(CompositionError) as exc_info:
        composer.compose(state, "h1", ["gpu00"])
    assert exc_info.value.code == "NOT_IN_POOL"


def test_randomized_sequences_keep_partition_and_versioning():
    composer = FabricComposer(two_host_reference())
    state = composer.initial_state()
    everything = state.all_endpoints()
    rng = random.Random(4242)
    hosts = ["h0", "h1"]
    successes = 0
    for _ in range(300):
        host = rng.choice(hosts)
        before = state
        op = rng.random()
        try:
            if op < 0.45:
                k = rng.randint(0, min(6, len(state.pool)))
                ids = rng.sample(sorted(state.pool), k)
                state = composer.compose(state, host, ids)
            elif op < 0.9:
                assigned = sorted(state.assigned_to(host))
                k = rng.randint(0, min(6, len(assigned)))
                state = composer.decompose(state, host,
                                           rng.sample(assigned, k))
            else:  # deliberately invalid op to exercise atomicity
                state = composer.compose(state, host, ["gpu00", "ghost"])
        except CompositionError:
            assert state == before
            continue
        successes += 1
        assert state.version == before.version + 1
        combined = set(state.pool)
        total = len(state.pool)
        for hid, eps in state.assignments:
            assert not (combined & eps), f"{hid} overlaps"
            combined |= eps
            total += len(eps)
        assert combined == everything and total == len(everything)
    assert successes > 100


def test_random_topologies_compose_whole_pool():
    rng = random.Random(11)
    for _ in range(20):
        topo, policy = random_topology(rng)
        if not topo.endpoints:
            continue
        composer = FabricComposer(topo, policy)
        state = composer.initial_state()
        try:
            new = composer.compose(state, "host", state.pool)
        except CompositionError as exc:
            assert exc.code == "ADDRESS_EXHAUSTION"
            continue
        assert new.pool == frozenset()

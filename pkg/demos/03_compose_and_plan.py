#!/usr/bin/env python3
"""Compose GPUs from the shared pool onto hosts and plan placements.

Every mutation re-checks device-count profiles and enumeration feasibility
before committing, and returns a fresh state value with a bumped version.
"""

from fabricsim import (CompositionError, ConstraintProfile, FabricComposer,
                       PlanRequest, ProfileSource, reference_topology)

topo = reference_topology()
composer = FabricComposer(topo)
state = composer.initial_state()
print(f"initial pool: {len(state.pool)} GPUs, version {state.version}\n")

for count, policy in ((4, "locality"), (8, "locality"), (6, "spread")):
    chosen = composer.plan(state, PlanRequest(gpu_count=count, policy=policy))
    drawers = sorted({topo.parent_of(e) for e in chosen})
    print(f"plan {count:>2} GPUs [{policy:8}] -> {', '.join(chosen)}")
    print(f"{'':>25} drawers: {', '.join(drawers)}")

print("\ncompose the locality-planned 8 onto h0")
chosen = composer.plan(state, PlanRequest(gpu_count=8, policy="locality"))
state = composer.compose(state, "h0", chosen)
print(f"  version {state.version}: {sorted(state.assigned_to('h0'))}")

print("\nrelease two of them")
state = composer.decompose(state, "h0", ["gpu00", "gpu01"])
print(f"  version {state.version}: pool back to {len(state.pool)} GPUs")

print("\na tight framework profile rejects the ninth GPU")
tight = FabricComposer(topo, profiles=(
    ConstraintProfile("driver", 64, ProfileSource.DRIVER),
    ConstraintProfile("pinned-framework", 8, ProfileSource.FRAMEWORK)))
s = tight.initial_state()
s = tight.compose(s, "h0", [f"gpu{i:02d}" for i in range(8)])
try:
    tight.compose(s, "h0", ["gpu08"])
except CompositionError as exc:
    print(f"  {exc.code}: {exc}")

print("\nfailed mutations leave the state untouched")
print(f"  version still {s.version}, assigned still "
      f"{len(s.assigned_to('h0'))}")

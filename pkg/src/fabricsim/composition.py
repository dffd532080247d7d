"""Composition state machine for the disaggregated GPU pool.

States are immutable values; every mutation returns a fresh state with the
version bumped, and a failed mutation raises without touching the input.
Compose validates the full outcome before committing: pool membership,
driver/framework device-count profiles, then a real enumeration of the
host's would-be attachment.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .enumeration import EnumerationPolicy, enumerate_host
from .errors import CompositionError, ExhaustionError
from .topology import FabricTopology


class ProfileSource(str, Enum):
    DRIVER = "driver"
    FRAMEWORK = "framework"

    @property
    def limit_code(self) -> str:
        return "DRIVER_LIMIT" if self is ProfileSource.DRIVER \
            else "FRAMEWORK_LIMIT"


@dataclass(frozen=True)
class ConstraintProfile:
    """Upper bound on GPUs per host imposed by a driver or framework build."""

    name: str
    max_gpus_per_host: int
    source: ProfileSource

    def __post_init__(self):
        object.__setattr__(self, "source", ProfileSource(self.source))
        if self.max_gpus_per_host < 1:
            raise ValueError(f"profile {self.name}: max_gpus_per_host >= 1")


# Current vendor stacks cap out at 64 devices per node.
DEFAULT_PROFILES = (
    ConstraintProfile("driver-default", 64, ProfileSource.DRIVER),
    ConstraintProfile("framework-default", 64, ProfileSource.FRAMEWORK),
)


class PlanPolicy(str, Enum):
    LOCALITY = "locality"
    SPREAD = "spread"
    ANY = "any"


@dataclass(frozen=True)
class PlanRequest:
    gpu_count: int
    policy: PlanPolicy = PlanPolicy.LOCALITY
    host_id: str | None = None  # informational; selection is host-agnostic

    def __post_init__(self):
        object.__setattr__(self, "policy", PlanPolicy(self.policy))
        if self.gpu_count < 1:
            raise ValueError("gpu_count must be >= 1")


@dataclass(frozen=True)
class CompositionState:
    """Partition of all endpoints into the free pool and per-host sets."""

    pool: frozenset[str]
    assignments: tuple[tuple[str, frozenset[str]], ...]  # host -> endpoints
    version: int = 0
    active_profiles: tuple[ConstraintProfile, ...] = DEFAULT_PROFILES

    def assigned_to(self, host_id: str) -> frozenset[str]:
        for hid, eps in self.assignments:
            if hid == host_id:
                return eps
        return frozenset()

    @property
    def assignment_map(self) -> dict[str, frozenset[str]]:
        return dict(self.assignments)

    def host_of(self, endpoint_id: str) -> str | None:
        for hid, eps in self.assignments:
            if endpoint_id in eps:
                return hid
        return None

    def all_endpoints(self) -> frozenset[str]:
        out = set(self.pool)
        for _, eps in self.assignments:
            out |= eps
        return frozenset(out)

    def _with(self, pool: frozenset[str],
              assignments: dict[str, frozenset[str]]) -> CompositionState:
        ordered = tuple((hid, assignments[hid])
                        for hid, _ in self.assignments)
        return CompositionState(pool=pool, assignments=ordered,
                                version=self.version + 1,
                                active_profiles=self.active_profiles)


class FabricComposer:
    """Applies compose/decompose/plan against one validated topology."""

    def __init__(self, topo: FabricTopology,
                 policy: EnumerationPolicy | None = None,
                 profiles=DEFAULT_PROFILES):
        topo.require_valid()
        self.topo = topo
        self.policy = policy or EnumerationPolicy()
        self.profiles = tuple(profiles)

    def initial_state(self) -> CompositionState:
        """Everything pooled, nothing assigned, version 0."""
        return CompositionState(
            pool=frozenset(topo_ep.id for topo_ep in self.topo.endpoints),
            assignments=tuple((h.id, frozenset()) for h in self.topo.hosts),
            version=0,
            active_profiles=self.profiles)

    # -- constraint and feasibility checks ------------------------------------

    def constraint_check(self, state: CompositionState, host_id: str,
                         proposed_count: int) -> ConstraintProfile | None:
        """None if the count is allowed, else the binding violated profile."""
        for profile in sorted(state.active_profiles,
                              key=lambda p: p.max_gpus_per_host):
            if proposed_count > profile.max_gpus_per_host:
                return profile
        return None

    def _check_enumerates(self, host_id: str, endpoint_ids: frozenset[str]):
        host = self.topo.host(host_id)
        view = self.topo.restricted_to(endpoint_ids)
        return enumerate_host(host, view, self.policy)

    # -- mutations -------------------------------------------------------------

    def compose(self, state: CompositionState, host_id: str,
                endpoint_ids) -> CompositionState:
        """Move endpoints pool -> host, all-or-nothing."""
        ids = frozenset(endpoint_ids)
        if not any(hid == host_id for hid, _ in state.assignments):
            raise CompositionError("UNKNOWN_HOST",
                                   f"unknown host: {host_id}")
        missing = ids - set(self.topo.endpoints_by_id)
        if missing:
            raise CompositionError(
                "UNKNOWN_ENDPOINT",
                f"unknown endpoints: {', '.join(sorted(missing))}")
        not_pooled = ids - state.pool
        if not_pooled:
            raise CompositionError(
                "NOT_IN_POOL",
                f"not in pool: {', '.join(sorted(not_pooled))}")

        target = state.assigned_to(host_id) | ids
        violated = self.constraint_check(state, host_id, len(target))
        if violated is not None:
            raise CompositionError(
                violated.source.limit_code,
                f"profile {violated.name} allows at most "
                f"{violated.max_gpus_per_host} GPUs per host, requested "
                f"{len(target)}",
                profile_name=violated.name)
        try:
            self._check_enumerates(host_id, target)
        except ExhaustionError as exc:
            raise CompositionError("ADDRESS_EXHAUSTION", str(exc),
                                   exhaustion=exc) from exc

        assignments = state.assignment_map
        assignments[host_id] = target
        return state._with(state.pool - ids, assignments)

    def decompose(self, state: CompositionState, host_id: str,
                  endpoint_ids) -> CompositionState:
        """Move endpoints host -> pool."""
        ids = frozenset(endpoint_ids)
        if not any(hid == host_id for hid, _ in state.assignments):
            raise CompositionError("UNKNOWN_HOST",
                                   f"unknown host: {host_id}")
        current = state.assigned_to(host_id)
        stray = ids - current
        if stray:
            raise CompositionError(
                "NOT_ASSIGNED",
                f"not assigned to {host_id}: {', '.join(sorted(stray))}")
        remaining = current - ids
        # removal can never break feasibility of what stays behind
        self._check_enumerates(host_id, remaining)
        assignments = state.assignment_map
        assignments[host_id] = remaining
        return state._with(state.pool | ids, assignments)

    # -- planning ---------------------------------------------------------------

    def plan(self, state: CompositionState,
             request: PlanRequest) -> list[str]:
        """Pick pooled GPUs per the placement policy; never mutates state."""
        if request.gpu_count > len(state.pool):
            raise CompositionError(
                "INSUFFICIENT_POOL",
                f"requested {request.gpu_count} GPUs, pool has "
                f"{len(state.pool)}")
        dfs = self.topo.dfs_index
        pool = sorted(state.pool, key=lambda e: dfs[e])
        if request.policy is PlanPolicy.ANY:
            chosen = pool[:request.gpu_count]
        elif request.policy is PlanPolicy.SPREAD:
            chosen = self._plan_spread(pool, request.gpu_count)
        else:
            chosen = self._plan_locality(pool, request.gpu_count)
        return sorted(chosen, key=lambda e: dfs[e])

    def _pool_by_drawer(self, pool: list[str]) -> dict[str, list[str]]:
        """Group pooled endpoints by immediate parent, DFS-ordered groups."""
        groups: dict[str, list[str]] = {}
        for eid in pool:  # pool is DFS-ordered already
            parent = self.topo.parent_of(eid) or "_unattached"
            groups.setdefault(parent, []).append(eid)
        return groups

    def _plan_locality(self, pool: list[str], count: int) -> list[str]:
        # Greedy: repeatedly drain the drawer with the most pooled GPUs to
        # minimize distinct drawers, DFS order breaking ties. Heuristic, not
        # optimal packing.
        groups = self._pool_by_drawer(pool)
        dfs = self.topo.dfs_index
        order = sorted(groups, key=lambda g: min(dfs[e] for e in groups[g]))
        chosen: list[str] = []
        need = count
        while need > 0:
            drawer = max(order,
                         key=lambda g: (len(groups[g]), -order.index(g)))
            take = groups[drawer][:need]
            groups[drawer] = groups[drawer][len(take):]
            chosen.extend(take)
            need -= len(take)
        return chosen

    def _plan_spread(self, pool: list[str], count: int) -> list[str]:
        # Round-robin one GPU per drawer to maximize distinct drawers.
        groups = self._pool_by_drawer(pool)
        dfs = self.topo.dfs_index
        order = sorted(groups, key=lambda g: min(dfs[e] for e in groups[g]))
        chosen: list[str] = []
        while len(chosen) < count:
            for drawer in order:
                if groups[drawer] and len(chosen) < count:
                    chosen.append(groups[drawer].pop(0))
        return chosen

"""BIOS-style enumeration of a host's fabric subtree.

Buses are numbered by preorder DFS in downstream-port order. BAR apertures
are placed with a descending-size first-fit allocator over the host's high
MMIO window: each BAR goes to the lowest size-aligned free address, and its
reserved footprint (size scaled by the policy multiplier, small BARs rounded
up to the bridge-window granularity) is what the allocator actually carves.
Enumeration is a pure function of (host, topology, policy).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from functools import cached_property

from .errors import BusNumberExhaustion, ExhaustionError, FabricError
from .topology import (DEFAULT_WINDOW_BASE, MAX_ADDR_BITS, MIB, MIN_ADDR_BITS,
                       FabricTopology, Host, subtree_endpoints)

MAX_BUSES = 256


def align_up(value: int, alignment: int) -> int:
    return -(-value // alignment) * alignment


def align_down(value: int, alignment: int) -> int:
    return value // alignment * alignment


@dataclass(frozen=True)
class EnumerationPolicy:
    """Knobs of the firmware model.

    ``reservation_multiplier`` scales every BAR's reserved footprint without
    changing its placed size; 2 reproduces the vendor behaviour of doubling
    the memory set aside per device.
    """

    reservation_multiplier: float = 1.0
    window_base_override: int | None = None
    bridge_window_alignment: int = MIB

    def __post_init__(self):
        if not 1 <= self.reservation_multiplier <= 8:
            raise ValueError("reservation_multiplier must be in [1, 8]")
        a = self.bridge_window_alignment
        if a < MIB or (a & (a - 1)) != 0:
            raise ValueError(
                "bridge_window_alignment must be a power of two >= 1 MiB")
        if self.window_base_override is not None \
                and self.window_base_override < 2**32:
            raise ValueError("window_base_override must be >= 4 GiB")

    def window_base(self, host: Host) -> int:
        if self.window_base_override is not None:
            return self.window_base_override
        return host.mmio_window_base

    def reserved_footprint(self, size: int) -> int:
        # Fraction keeps the ceil exact for sizes beyond float precision.
        m = Fraction(self.reservation_multiplier)
        reserved = -(-size * m.numerator // m.denominator)
        if size < self.bridge_window_alignment:
            reserved = align_up(reserved, self.bridge_window_alignment)
        return reserved


@dataclass(frozen=True)
class BarPlacement:
    endpoint_id: str
    bar_index: int
    base: int
    size: int

    @property
    def end(self) -> int:
        return self.base + self.size


@dataclass(frozen=True)
class BridgeWindow:
    base: int
    limit: int  # exclusive


@dataclass(frozen=True)
class AddressMap:
    """Result of enumerating one host: buses, BAR placements, windows."""

    host_id: str
    bus_assignments: dict[str, int]       # node id -> bus (endpoints: parent bus)
    device_slots: dict[str, int]          # endpoint id -> device number on bus
    bar_placements: tuple[BarPlacement, ...]
    bridge_windows: dict[str, BridgeWindow]
    highest_address: int                  # first byte past all reservations
    window_base: int
    address_limit: int                    # 2 ** host.phys_addr_bits

    @cached_property
    def placement_bytes_total(self) -> int:
        return sum(p.size for p in self.bar_placements)

    def placements_for(self, endpoint_id: str) -> tuple[BarPlacement, ...]:
        return tuple(p for p in self.bar_placements
                     if p.endpoint_id == endpoint_id)


def _walk_buses(host: Host, topo: FabricTopology):
    """Preorder walk yielding (node_id, depth, bus, slot|None); switches get
    fresh bus numbers, endpoints sit on their parent's bus."""
    next_bus = 1
    out = []

    def visit(node_id: str, depth: int, bus: int):
        nonlocal next_bus
        out.append((node_id, depth, bus, None))
        slot = 0
        for kid in topo.children_of(node_id):
            if kid in topo.endpoints_by_id:
                out.append((kid, depth + 1, bus, slot))
                slot += 1
            else:
                kid_bus = next_bus
                next_bus += 1
                if next_bus > MAX_BUSES:
                    raise BusNumberExhaustion(
                        f"host {host.id}: topology needs more than "
                        f"{MAX_BUSES} bus numbers")
                visit(kid, depth + 1, kid_bus)

    visit(host.id, 0, 0)
    return out


def assign_bus_numbers(host: Host, topo: FabricTopology) -> dict[str, int]:
    """Bus number per node under the host; root complex is bus 0."""
    topo.require_valid()
    topo.host(host.id)
    return {nid: bus for nid, _, bus, _ in _walk_buses(host, topo)}


class _FreeList:
    """Ordered free byte intervals [start, end) over the MMIO window."""

    def __init__(self, start: int, end: int):
        self.gaps: list[list[int]] = [[start, end]] if start < end else []

    def take(self, size: int, footprint: int) -> int | None:
        """Carve ``footprint`` bytes at the lowest size-aligned base; the
        base alignment uses the placed ``size``, not the footprint."""
        for i, (start, end) in enumerate(self.gaps):
            base = align_up(start, size)
            if base + footprint <= end:
                new = []
                if start < base:
                    new.append([start, base])
                if base + footprint < end:
                    new.append([base + footprint, end])
                self.gaps[i:i + 1] = new
                return base
        return None

    def largest_fit(self, size: int) -> int:
        """Largest span any gap offers at this size's alignment."""
        best = 0
        for start, end in self.gaps:
            best = max(best, end - align_up(start, size))
        return best


def enumerate_host(host: Host, topo: FabricTopology,
                   policy: EnumerationPolicy | None = None) -> AddressMap:
    """Enumerate the host's attached subtree into a complete address map.

    Raises ExhaustionError if any reserved footprint cannot be carved below
    2**phys_addr_bits, and BusNumberExhaustion past 256 buses.
    """
    policy = policy or EnumerationPolicy()
    topo.require_valid()
    host = topo.host(host.id)

    walk = _walk_buses(host, topo)
    bus_assignments = {nid: bus for nid, _, bus, _ in walk}
    device_slots = {nid: slot for nid, _, _, slot in walk if slot is not None}

    window_base = policy.window_base(host)
    limit = host.address_limit
    if window_base > limit:
        raise ExhaustionError(required_bytes=window_base - limit,
                              available_bytes=0, devices_placed=0,
                              devices_total=len(device_slots))

    dfs_order = [nid for nid, _, _, slot in walk if slot is not None]
    dfs_rank = {nid: i for i, nid in enumerate(dfs_order)}
    bars = [(topo.endpoints_by_id[eid], idx, size)
            for eid in dfs_order
            for idx, size in enumerate(topo.endpoints_by_id[eid].bar_sizes)]
    bars.sort(key=lambda b: (-b[2], dfs_rank[b[0].id], b[1]))

    freelist = _FreeList(window_base, limit)
    placements: list[BarPlacement] = []
    placed_bars: dict[str, int] = {eid: 0 for eid in dfs_order}
    highest = window_base

    for endpoint, bar_index, size in bars:
        footprint = policy.reserved_footprint(size)
        base = freelist.take(size, footprint)
        if base is None:
            done = sum(
                1 for eid in dfs_order
                if placed_bars[eid] == len(topo.endpoints_by_id[eid].bar_sizes))
            raise ExhaustionError(
                required_bytes=footprint,
                available_bytes=freelist.largest_fit(size),
                devices_placed=done,
                devices_total=len(dfs_order))
        placements.append(BarPlacement(endpoint.id, bar_index, base, size))
        placed_bars[endpoint.id] += 1
        highest = max(highest, base + footprint)

    placements.sort(key=lambda p: (dfs_rank[p.endpoint_id], p.bar_index))

    by_endpoint: dict[str, list[BarPlacement]] = {}
    for p in placements:
        by_endpoint.setdefault(p.endpoint_id, []).append(p)

    align = policy.bridge_window_alignment
    bridge_windows: dict[str, BridgeWindow] = {}
    for nid, _, _, slot in walk:
        if slot is not None or nid == host.id:
            continue
        spans = [p for eid in subtree_endpoints(topo, nid)
                 for p in by_endpoint.get(eid, ())]
        if not spans:
            continue
        lo = max(window_base, align_down(min(p.base for p in spans), align))
        hi = align_up(max(p.end for p in spans), align)
        bridge_windows[nid] = BridgeWindow(base=lo, limit=hi)

    return AddressMap(host_id=host.id,
                      bus_assignments=bus_assignments,
                      device_slots=device_slots,
                      bar_placements=tuple(placements),
                      bridge_windows=bridge_windows,
                      highest_address=highest,
                      window_base=window_base,
                      address_limit=limit)


def min_addr_bits(topo: FabricTopology,
                  policy: EnumerationPolicy | None = None,
                  host_id: str | None = None) -> int | None:
    """Smallest phys_addr_bits (32..57) at which enumeration succeeds with
    the default window base; None if even 57 bits is not enough."""
    policy = policy or EnumerationPolicy()
    topo.require_valid()
    if host_id is None:
        if not topo.hosts:
            raise FabricError("topology has no hosts", "UNKNOWN_NODE")
        host_id = topo.hosts[0].id
    template = topo.host(host_id)
    base = policy.window_base_override or DEFAULT_WINDOW_BASE

    def feasible(bits: int) -> bool:
        try:
            candidate = replace(template, phys_addr_bits=bits,
                                mmio_window_base=base)
        except ValueError:  # window base itself does not fit
            return False
        try:
            enumerate_host(candidate, topo.with_host(candidate), policy)
            return True
        except ExhaustionError:
            return False

    lo, hi = MIN_ADDR_BITS, MAX_ADDR_BITS
    if not feasible(hi):
        return None
    while lo < hi:  # enumeration success is monotone in address bits
        mid = (lo + hi) // 2
        if feasible(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def render_lspci_tree(addr_map: AddressMap, topo: FabricTopology) -> str:
    """Stable indented device-tree text for an enumerated host.

    One line per node: ``bus:dev.fn  model`` for endpoints, the tier label
    for switches. Output is byte-identical for identical inputs.
    """
    host = topo.host(addr_map.host_id)
    walk = _walk_buses(host, topo)
    if len(addr_map.bus_assignments) != len({nid for nid, *_ in walk}):
        raise FabricError("address map does not match topology node set",
                          "MAP_TOPOLOGY_MISMATCH")
    lines = []
    for nid, depth, bus, slot in walk:
        mapped_bus = addr_map.bus_assignments.get(nid)
        if mapped_bus is None or mapped_bus != bus:
            raise FabricError(
                f"address map does not match topology at node {nid}",
                "MAP_TOPOLOGY_MISMATCH")
        indent = "  " * depth
        if nid == host.id:
            lines.append(f"{indent}{bus:02x}: [root] {nid}")
        elif slot is None:
            tier = topo.switches_by_id[nid].tier.value
            lines.append(f"{indent}{bus:02x}: [{tier}] {nid}")
        else:
            if addr_map.device_slots.get(nid) != slot:
                raise FabricError(
                    f"address map does not match topology at node {nid}",
                    "MAP_TOPOLOGY_MISMATCH")
            model = topo.endpoints_by_id[nid].model_name
            lines.append(f"{indent}{bus:02x}:{slot:02x}.0 {model}")
    return "\n".join(lines) + "\n"

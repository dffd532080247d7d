"""Domain model for a PCIe-style composable GPU fabric.

A fabric is a forest of switches hanging under host root ports. Hierarchy is
carried by links: a link from a switch downstream port to another node's
upstream port makes that node a child; a link from a host root port attaches
the target subtree to that host. Several hosts may attach to the same switch
(multi-host fabric), and each host sees its own tree.

Topologies are immutable after construction; all traversal indexes are cached
and the declaration order of downstream ports is the single source of
enumeration determinism.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property

from .errors import TopologyError, UnknownNodeError

KIB = 1024
MIB = 1024 * KIB
GIB = 1024 * MIB
TIB = 1024 * GIB

# All large GPU BARs live above 32-bit space, so the high MMIO window starts
# at 4 GiB unless a host says otherwise.
DEFAULT_WINDOW_BASE = 4 * GIB

MIN_ADDR_BITS = 32
MAX_ADDR_BITS = 57

VALID_LANES = (1, 2, 4, 8, 16)


class Tier(str, Enum):
    """Switch tiers, outermost first; nesting must follow this order."""

    TOP = "top"
    APA = "apa"
    DRAWER = "drawer"

    @property
    def depth(self) -> int:
        return _TIER_DEPTH[self]


_TIER_DEPTH = {Tier.TOP: 0, Tier.APA: 1, Tier.DRAWER: 2}


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Host:
    """A CPU node with a bounded physical address space and one root port."""

    id: str
    phys_addr_bits: int = 44
    mmio_window_base: int = DEFAULT_WINDOW_BASE
    root_port: str = ""  # defaults to "<id>:root"

    def __post_init__(self):
        if not self.root_port:
            object.__setattr__(self, "root_port", f"{self.id}:root")
        if not MIN_ADDR_BITS <= self.phys_addr_bits <= MAX_ADDR_BITS:
            raise ValueError(
                f"host {self.id}: phys_addr_bits must be in "
                f"[{MIN_ADDR_BITS}, {MAX_ADDR_BITS}], got {self.phys_addr_bits}")
        if self.mmio_window_base < 2**32:
            raise ValueError(
                f"host {self.id}: mmio_window_base must be >= 4 GiB")
        if self.mmio_window_base >= 2**self.phys_addr_bits:
            raise ValueError(
                f"host {self.id}: mmio_window_base does not fit in "
                f"{self.phys_addr_bits}-bit address space")

    @property
    def address_limit(self) -> int:
        """One past the last addressable byte."""
        return 2**self.phys_addr_bits


@dataclass(frozen=True)
class SwitchNode:
    """A fabric switch with one upstream port and ordered downstream ports."""

    id: str
    tier: Tier
    upstream_port: str = ""  # defaults to "<id>:up"
    downstream_ports: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.upstream_port:
            object.__setattr__(self, "upstream_port", f"{self.id}:up")
        object.__setattr__(self, "tier", Tier(self.tier))
        object.__setattr__(self, "downstream_ports",
                           tuple(self.downstream_ports))


def make_switch(id: str, tier: Tier, n_downstream: int) -> SwitchNode:
    """Switch with auto-named ports ``<id>:dn0`` .. ``<id>:dn{n-1}``."""
    return SwitchNode(id=id, tier=tier,
                      downstream_ports=tuple(f"{id}:dn{i}"
                                             for i in range(n_downstream)))


@dataclass(frozen=True)
class GpuEndpoint:
    """A GPU with its BAR apertures and on-board memory."""

    id: str
    model_name: str
    bar_sizes: tuple[int, ...]
    vram_bytes: int
    vendor: str = ""

    def __post_init__(self):
        object.__setattr__(self, "bar_sizes", tuple(self.bar_sizes))
        for size in self.bar_sizes:
            if not _is_power_of_two(size) or size < 4 * KIB:
                raise ValueError(
                    f"endpoint {self.id}: bar size {size} must be a power of "
                    f"two >= 4 KiB")
        if self.vram_bytes <= 0:
            raise ValueError(f"endpoint {self.id}: vram_bytes must be > 0")

    @property
    def port(self) -> str:
        """Endpoints are single-port; the port id is ``<id>:up``."""
        return f"{self.id}:up"


@dataclass(frozen=True)
class Link:
    """A cable between two ports. Bandwidth is decimal GB/s, unidirectional."""

    id: str
    endpoints: tuple[str, str]
    lanes: int = 8
    theoretical_bw: float = 32.0

    def __post_init__(self):
        object.__setattr__(self, "endpoints", tuple(self.endpoints))
        if len(self.endpoints) != 2:
            raise ValueError(f"link {self.id}: needs exactly two port refs")
        if self.lanes not in VALID_LANES:
            raise ValueError(f"link {self.id}: lanes must be one of "
                             f"{VALID_LANES}, got {self.lanes}")
        if self.theoretical_bw <= 0:
            raise ValueError(f"link {self.id}: theoretical_bw must be > 0")


@dataclass(frozen=True)
class Violation:
    kind: str      # cycle | dangling-port | duplicate-id | tier-inversion | ...
    subject: str   # id of the offending node/port/link
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class FabricTopology:
    """Hosts, switches, GPU endpoints and the links between their ports."""

    hosts: tuple[Host, ...] = ()
    switches: tuple[SwitchNode, ...] = ()
    endpoints: tuple[GpuEndpoint, ...] = ()
    links: tuple[Link, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "hosts", tuple(self.hosts))
        object.__setattr__(self, "switches", tuple(self.switches))
        object.__setattr__(self, "endpoints", tuple(self.endpoints))
        object.__setattr__(self, "links", tuple(self.links))

    # -- id lookups --------------------------------------------------------

    @cached_property
    def hosts_by_id(self) -> dict[str, Host]:
        return {h.id: h for h in self.hosts}

    @cached_property
    def switches_by_id(self) -> dict[str, SwitchNode]:
        return {s.id: s for s in self.switches}

    @cached_property
    def endpoints_by_id(self) -> dict[str, GpuEndpoint]:
        return {e.id: e for e in self.endpoints}

    @cached_property
    def links_by_id(self) -> dict[str, Link]:
        return {l.id: l for l in self.links}

    def node(self, node_id: str) -> Host | SwitchNode | GpuEndpoint:
        for table in (self.hosts_by_id, self.switches_by_id,
                      self.endpoints_by_id):
            if node_id in table:
                return table[node_id]
        raise UnknownNodeError(f"unknown node id: {node_id}")

    def host(self, host_id: str) -> Host:
        try:
            return self.hosts_by_id[host_id]
        except KeyError:
            raise UnknownNodeError(f"unknown host id: {host_id}") from None

    # -- port wiring ---------------------------------------------------------

    @cached_property
    def port_owner(self) -> dict[str, str]:
        """port id -> owning node id (hosts, switches and endpoints)."""
        owners: dict[str, str] = {}
        for h in self.hosts:
            owners[h.root_port] = h.id
        for s in self.switches:
            owners[s.upstream_port] = s.id
            for p in s.downstream_ports:
                owners[p] = s.id
        for e in self.endpoints:
            owners[e.port] = e.id
        return owners

    @cached_property
    def links_at_port(self) -> dict[str, tuple[Link, ...]]:
        at: dict[str, list[Link]] = {}
        for link in self.links:
            for port in link.endpoints:
                at.setdefault(port, []).append(link)
        return {p: tuple(ls) for p, ls in at.items()}

    def _port_kind(self, port: str) -> str:
        owner = self.port_owner.get(port)
        if owner is None:
            return "dangling"
        if owner in self.hosts_by_id:
            return "root"
        if owner in self.endpoints_by_id:
            return "endpoint"
        sw = self.switches_by_id[owner]
        return "up" if port == sw.upstream_port else "down"

    # -- hierarchy -----------------------------------------------------------

    @cached_property
    def parent_info(self) -> dict[str, tuple[str, Link]]:
        """child node id -> (parent switch id, connecting link).

        Host attachments are not parents; they are per-host entry points.
        """
        parents: dict[str, tuple[str, Link]] = {}
        for link in self.links:
            a, b = link.endpoints
            ka, kb = self._port_kind(a), self._port_kind(b)
            if ka == "down" and kb in ("up", "endpoint"):
                parents[self.port_owner[b]] = (self.port_owner[a], link)
            elif kb == "down" and ka in ("up", "endpoint"):
                parents[self.port_owner[a]] = (self.port_owner[b], link)
        return parents

    def parent_of(self, node_id: str) -> str | None:
        info = self.parent_info.get(node_id)
        return info[0] if info else None

    def uplink_of(self, node_id: str) -> Link | None:
        info = self.parent_info.get(node_id)
        return info[1] if info else None

    @cached_property
    def host_attachments(self) -> dict[str, tuple[tuple[str, Link], ...]]:
        """host id -> ((attached node id, link), ...) in link declaration order."""
        att: dict[str, list[tuple[str, Link]]] = {h.id: [] for h in self.hosts}
        for link in self.links:
            a, b = link.endpoints
            ka, kb = self._port_kind(a), self._port_kind(b)
            if ka == "root" and kb in ("up", "endpoint"):
                att[self.port_owner[a]].append((self.port_owner[b], link))
            elif kb == "root" and ka in ("up", "endpoint"):
                att[self.port_owner[b]].append((self.port_owner[a], link))
        return {h: tuple(v) for h, v in att.items()}

    def children_of(self, node_id: str) -> tuple[str, ...]:
        """Downstream children in port order (host: attachment order)."""
        if node_id in self.hosts_by_id:
            return tuple(n for n, _ in self.host_attachments[node_id])
        if node_id in self.endpoints_by_id:
            return ()
        sw = self.switches_by_id.get(node_id)
        if sw is None:
            raise UnknownNodeError(f"unknown node id: {node_id}")
        kids = []
        for port in sw.downstream_ports:
            for link in self.links_at_port.get(port, ()):
                other = link.endpoints[1] if link.endpoints[0] == port \
                    else link.endpoints[0]
                owner = self.port_owner.get(other)
                if owner is not None and owner not in self.hosts_by_id:
                    kids.append(owner)
        return tuple(kids)

    def walk(self, node_id: str):
        """Preorder DFS over (node id, depth), children in port order."""
        stack = [(node_id, 0)]
        seen: set[str] = set()
        while stack:
            nid, depth = stack.pop()
            if nid in seen:  # only possible on invalid (cyclic) topologies
                continue
            seen.add(nid)
            yield nid, depth
            kids = self.children_of(nid)
            for kid in reversed(kids):
                stack.append((kid, depth + 1))

    @cached_property
    def dfs_index(self) -> dict[str, int]:
        """Global DFS order: hosts in declaration order, then their subtrees."""
        order: dict[str, int] = {}
        for h in self.hosts:
            for nid, _ in self.walk(h.id):
                if nid not in order:
                    order[nid] = len(order)
        # orphan subtrees (not attached to any host) come last, stable
        for s in self.switches:
            if s.id not in order:
                for nid, _ in self.walk(s.id):
                    if nid not in order:
                        order[nid] = len(order)
        for e in self.endpoints:
            order.setdefault(e.id, len(order))
        return order

    # -- derived views -------------------------------------------------------

    def restricted_to(self, endpoint_ids) -> FabricTopology:
        """Copy with only the given endpoints (and their links) retained."""
        keep = set(endpoint_ids)
        unknown = keep - set(self.endpoints_by_id)
        if unknown:
            raise UnknownNodeError(f"unknown endpoint ids: {sorted(unknown)}")
        dropped_ports = {e.port for e in self.endpoints if e.id not in keep}
        return FabricTopology(
            hosts=self.hosts,
            switches=self.switches,
            endpoints=tuple(e for e in self.endpoints if e.id in keep),
            links=tuple(l for l in self.links
                        if not (set(l.endpoints) & dropped_ports)),
        )

    def with_host(self, host: Host) -> FabricTopology:
        """Copy with the host of the same id replaced."""
        if host.id not in self.hosts_by_id:
            raise UnknownNodeError(f"unknown host id: {host.id}")
        old = self.hosts_by_id[host.id]
        if host.root_port != old.root_port:
            raise TopologyError("replacement host must keep its root port")
        return replace(self, hosts=tuple(host if h.id == host.id else h
                                         for h in self.hosts))

    def with_link_bandwidth(self, overrides: dict[str, float]) -> FabricTopology:
        unknown = set(overrides) - set(self.links_by_id)
        if unknown:
            raise UnknownNodeError(f"unknown link ids: {sorted(unknown)}")
        if not overrides:
            return self
        return replace(self, links=tuple(
            replace(l, theoretical_bw=overrides[l.id]) if l.id in overrides
            else l for l in self.links))

    def require_valid(self) -> None:
        report = validate_topology(self)
        if not report.ok:
            details = "; ".join(f"{v.kind}({v.subject}): {v.message}"
                                for v in report.violations)
            raise TopologyError(f"invalid topology: {details}")


def validate_topology(topo: FabricTopology) -> ValidationReport:
    """Check well-formedness; a topology that validates is accepted everywhere.

    Violation kinds: duplicate-id, dangling-port, port-conflict, bad-link,
    multi-parent, cycle, tier-inversion.
    """
    violations: list[Violation] = []

    seen: set[str] = set()
    for group in (topo.hosts, topo.switches, topo.endpoints, topo.links):
        for item in group:
            if item.id in seen:
                violations.append(Violation(
                    "duplicate-id", item.id, f"id {item.id} declared twice"))
            seen.add(item.id)

    seen_ports: set[str] = set()
    all_ports = ([h.root_port for h in topo.hosts]
                 + [p for s in topo.switches
                    for p in (s.upstream_port, *s.downstream_ports)]
                 + [e.port for e in topo.endpoints])
    for port in all_ports:
        if port in seen_ports:
            violations.append(Violation(
                "duplicate-id", port, f"port {port} declared twice"))
        seen_ports.add(port)

    # port sanity: every link resolves, and no port is double-wired except a
    # switch upstream port, which may carry one parent link plus host links
    port_links: dict[str, list[Link]] = {}
    for link in topo.links:
        for port in link.endpoints:
            port_links.setdefault(port, []).append(link)
            if port not in topo.port_owner:
                violations.append(Violation(
                    "dangling-port", link.id,
                    f"link {link.id} references unknown port {port}"))
    if violations:
        return ValidationReport(tuple(violations))

    for link in topo.links:
        kinds = frozenset(topo._port_kind(p) for p in link.endpoints)
        if kinds not in ({"root", "up"}, {"root", "endpoint"},
                         {"down", "up"}, {"down", "endpoint"}):
            violations.append(Violation(
                "bad-link", link.id,
                f"link {link.id} joins {sorted(kinds)} ports; expected "
                f"root/down to up/endpoint"))

    for port, links in port_links.items():
        kind = topo._port_kind(port)
        if kind == "up":
            n_parent = sum(1 for l in links
                           if "down" in {topo._port_kind(p)
                                         for p in l.endpoints})
            if n_parent > 1:
                violations.append(Violation(
                    "multi-parent", topo.port_owner[port],
                    f"port {port} has {n_parent} parent links"))
        elif kind in ("down", "endpoint") and len(links) > 1:
            violations.append(Violation(
                "port-conflict", port,
                f"port {port} carries {len(links)} links; at most one allowed"))

    # tier nesting (same-tier cascades are allowed; reversals are not)
    # and parent cycles
    for child, (parent, link) in topo.parent_info.items():
        child_sw = topo.switches_by_id.get(child)
        parent_sw = topo.switches_by_id.get(parent)
        if child_sw is not None and parent_sw is not None:
            if parent_sw.tier.depth > child_sw.tier.depth:
                violations.append(Violation(
                    "tier-inversion", link.id,
                    f"{parent_sw.tier.value} switch {parent} cannot be above "
                    f"{child_sw.tier.value} switch {child}"))

    state: dict[str, int] = {}  # 0 visiting, 1 done
    for start in topo.parent_info:
        if state.get(start) == 1:
            continue
        chain = []
        node = start
        while node is not None and state.get(node) is None:
            state[node] = 0
            chain.append(node)
            node = topo.parent_of(node)
        if node is not None and state[node] == 0:
            violations.append(Violation(
                "cycle", node, f"parent chain through {node} forms a cycle"))
        for n in chain:
            state[n] = 1

    return ValidationReport(tuple(violations))


def subtree_endpoints(topo: FabricTopology, node_id: str) -> list[str]:
    """Endpoint ids under ``node_id`` in deterministic port-order DFS."""
    topo.node(node_id)  # raises UnknownNodeError
    return [nid for nid, _ in topo.walk(node_id)
            if nid in topo.endpoints_by_id]


# -- reference scenario ------------------------------------------------------

# GPU BAR profiles. The single 64 GiB aperture keeps totals at exactly 2 TiB
# for 32 GPUs; the mi210 profile adds the small control BARs real devices
# expose, to exercise mixed-size allocation.
GPU_BAR_PROFILES: dict[str, tuple[int, ...]] = {
    "test": (64 * GIB,),
    "mi210": (64 * GIB, 2 * MIB, 512 * KIB),
}

MI210_MODEL_NAME = "AMD Instinct MI210"
MI210_VRAM_BYTES = 64 * GIB

REFERENCE_LINK_BW = 32.0  # GB/s per link, x8 connectivity
REFERENCE_TOPS = 1
REFERENCE_APAS = 4
REFERENCE_DRAWERS_PER_APA = 2
REFERENCE_GPUS_PER_DRAWER = 4


def reference_topology(phys_addr_bits: int = 44, host_id: str = "h0",
                       bar_profile: str = "test") -> FabricTopology:
    """The 32-GPU single-node layout: 1 host, 1 top switch, 4 APAs, 8
    drawers, 4 GPUs per drawer, every link at 32 GB/s."""
    bars = GPU_BAR_PROFILES[bar_profile]
    host = Host(id=host_id, phys_addr_bits=phys_addr_bits)
    top = make_switch("top0", Tier.TOP, REFERENCE_APAS)
    switches = [top]
    endpoints: list[GpuEndpoint] = []
    links = [Link(id=f"link_{host_id}_top0",
                  endpoints=(host.root_port, top.upstream_port))]

    drawer_no = 0
    gpu_no = 0
    for a in range(REFERENCE_APAS):
        apa = make_switch(f"apa{a}", Tier.APA, REFERENCE_DRAWERS_PER_APA)
        switches.append(apa)
        links.append(Link(id=f"link_top0_{apa.id}",
                          endpoints=(top.downstream_ports[a],
                                     apa.upstream_port)))
        for d in range(REFERENCE_DRAWERS_PER_APA):
            drawer = make_switch(f"drawer{drawer_no}", Tier.DRAWER,
                                 REFERENCE_GPUS_PER_DRAWER)
            drawer_no += 1
            switches.append(drawer)
            links.append(Link(id=f"link_{apa.id}_{drawer.id}",
                              endpoints=(apa.downstream_ports[d],
                                         drawer.upstream_port)))
            for g in range(REFERENCE_GPUS_PER_DRAWER):
                gpu = GpuEndpoint(id=f"gpu{gpu_no:02d}",
                                  model_name=MI210_MODEL_NAME,
                                  bar_sizes=bars,
                                  vram_bytes=MI210_VRAM_BYTES,
                                  vendor="AMD")
                gpu_no += 1
                endpoints.append(gpu)
                links.append(Link(id=f"link_{drawer.id}_{gpu.id}",
                                  endpoints=(drawer.downstream_ports[g],
                                             gpu.port)))

    return FabricTopology(hosts=(host,), switches=tuple(switches),
                          endpoints=tuple(endpoints), links=tuple(links))

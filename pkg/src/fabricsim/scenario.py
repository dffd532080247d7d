"""Scenario files: parsing, canonical serialization, bundled scenarios.

All documents are JSON. Byte sizes are plain integers in canonical form
(human suffixes like "64GiB" or "2TB" are accepted on input only) and link
bandwidths are fixed 3-decimal strings so output is byte-stable across
platforms. Addresses in exports are lowercase 0x-prefixed hex.
"""

from __future__ import annotations

import json
import os
import re
from fractions import Fraction
from dataclasses import dataclass, field
from importlib import resources

from .composition import (DEFAULT_PROFILES, CompositionState,
                          ConstraintProfile, ProfileSource)
from .enumeration import AddressMap, EnumerationPolicy, render_lspci_tree
from .errors import ScenarioError
from .topology import (FabricTopology, GpuEndpoint, Host, Link, SwitchNode,
                       Tier, reference_topology, validate_topology)

SCENARIO_VERSION = 1

BUILTIN_SCENARIOS = ("reference_32gpu", "reference_32gpu_40bit",
                     "fig8_measurements")

SCENARIO_PATH_ENV = "FABRICSIM_SCENARIO_PATH"

_SIZE_SUFFIXES = {
    "b": 1,
    "kb": 10**3, "mb": 10**6, "gb": 10**9, "tb": 10**12,
    "kib": 2**10, "mib": 2**20, "gib": 2**30, "tib": 2**40,
}


def parse_size(value) -> int:
    """Byte size from an int or a human string like '64GiB' or '2.4TB'.

    Fractions are accepted only when the resulting byte count is integral.
    """
    if isinstance(value, bool):
        raise ValueError(f"not a byte size: {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if value.is_integer():
            return int(value)
        raise ValueError(f"byte size must be integral: {value!r}")
    if isinstance(value, str):
        m = re.fullmatch(r"\s*(\d+(?:\.\d+)?)\s*([A-Za-z]*)\s*", value)
        if m:
            number, suffix = m.groups()
            factor = _SIZE_SUFFIXES.get(suffix.lower() or "b")
            if factor is not None:
                total = Fraction(number) * factor
                if total.denominator == 1:
                    return int(total)
                raise ValueError(f"byte size must be integral: {value!r}")
    raise ValueError(f"not a byte size: {value!r}")


def _parse_bw(value) -> float:
    # quantized to the canonical 3-decimal precision so parse/serialize
    # round-trips are exact
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return round(float(value), 3)
    if isinstance(value, str):
        return round(float(value), 3)
    raise ValueError(f"not a bandwidth: {value!r}")


def _format_bw(bw: float) -> str:
    return f"{bw:.3f}"


@dataclass(frozen=True)
class Measurements:
    scaling_points: tuple[tuple[int, float], ...] = ()
    link_bw_overrides: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class ScenarioFile:
    """A parsed scenario: topology plus named policies and profiles."""

    topology: FabricTopology
    policies: dict[str, EnumerationPolicy]
    profiles: dict[str, ConstraintProfile]
    measurements: Measurements | None = None
    version: int = SCENARIO_VERSION

    def effective_topology(self) -> FabricTopology:
        """Topology with measurement link-bandwidth overrides applied."""
        if self.measurements and self.measurements.link_bw_overrides:
            return self.topology.with_link_bandwidth(
                self.measurements.link_bw_overrides)
        return self.topology

    def policy(self, name: str = "default") -> EnumerationPolicy:
        if name in self.policies:
            return self.policies[name]
        if name == "default":
            return EnumerationPolicy()
        raise ScenarioError([{"path": f"policies.{name}",
                              "message": "no such policy"}])

    def profile_set(self) -> tuple[ConstraintProfile, ...]:
        return tuple(self.profiles[name] for name in sorted(self.profiles))


def default_scenario_sections() -> tuple[dict[str, EnumerationPolicy],
                                         dict[str, ConstraintProfile]]:
    policies = {"default": EnumerationPolicy(),
                "doubling": EnumerationPolicy(reservation_multiplier=2.0)}
    profiles = {p.name: p for p in DEFAULT_PROFILES}
    return policies, profiles


class _Issues:
    def __init__(self):
        self.items: list[dict] = []

    def add(self, path: str, message: str):
        self.items.append({"path": path, "message": message})

    def raise_if_any(self):
        if self.items:
            raise ScenarioError(self.items)


def _req(obj: dict, key: str, path: str, issues: _Issues, default=None):
    if key not in obj:
        issues.add(path, f"missing {key}")
        return default
    return obj[key]


def _parse_topology(doc: dict, issues: _Issues) -> FabricTopology:
    hosts, switches, endpoints, links = [], [], [], []
    for i, h in enumerate(doc.get("hosts", [])):
        path = f"topology.hosts[{i}]"
        try:
            hosts.append(Host(
                id=_req(h, "id", path, issues, f"?host{i}"),
                phys_addr_bits=int(_req(h, "phys_addr_bits", path, issues, 44)),
                mmio_window_base=parse_size(h.get("mmio_window_base",
                                                  4 * 2**30)),
                root_port=h.get("root_port", "")))
        except (ValueError, TypeError) as exc:
            issues.add(path, str(exc))
    for i, s in enumerate(doc.get("switches", [])):
        path = f"topology.switches[{i}]"
        try:
            switches.append(SwitchNode(
                id=_req(s, "id", path, issues, f"?switch{i}"),
                tier=Tier(_req(s, "tier", path, issues, "top")),
                upstream_port=s.get("upstream_port", ""),
                downstream_ports=tuple(s.get("downstream_ports", ()))))
        except (ValueError, TypeError) as exc:
            issues.add(path, str(exc))
    for i, e in enumerate(doc.get("endpoints", [])):
        path = f"topology.endpoints[{i}]"
        try:
            endpoints.append(GpuEndpoint(
                id=_req(e, "id", path, issues, f"?ep{i}"),
                model_name=e.get("model_name", ""),
                bar_sizes=tuple(parse_size(b) for b in e.get("bar_sizes", ())),
                vram_bytes=parse_size(_req(e, "vram_bytes", path, issues, 1)),
                vendor=e.get("vendor", "")))
        except (ValueError, TypeError) as exc:
            issues.add(path, str(exc))
    for i, l in enumerate(doc.get("links", [])):
        path = f"topology.links[{i}]"
        try:
            ends = _req(l, "endpoints", path, issues, ())
            links.append(Link(
                id=_req(l, "id", path, issues, f"?link{i}"),
                endpoints=tuple(ends),
                lanes=int(l.get("lanes", 8)),
                theoretical_bw=_parse_bw(l.get("theoretical_bw", 32.0))))
        except (ValueError, TypeError) as exc:
            issues.add(path, str(exc))
    return FabricTopology(hosts=tuple(hosts), switches=tuple(switches),
                          endpoints=tuple(endpoints), links=tuple(links))


def parse_scenario(data: bytes | str) -> ScenarioFile:
    """Parse and fully validate a scenario document.

    Raises ScenarioError carrying every collected issue; syntax errors
    include the line and column reported by the JSON parser.
    """
    issues = _Issues()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        issues.add(f"line {exc.lineno}, column {exc.colno}", exc.msg)
        issues.raise_if_any()
    if not isinstance(doc, dict):
        issues.add("$", "scenario must be a JSON object")
        issues.raise_if_any()

    version = doc.get("version")
    if version is None:
        issues.add("version", "missing version")
    elif version != SCENARIO_VERSION:
        issues.add("version", f"unknown version {version!r}; expected "
                              f"{SCENARIO_VERSION}")
    issues.raise_if_any()

    topo = _parse_topology(doc.get("topology", {}), issues)
    issues.raise_if_any()

    report = validate_topology(topo)
    for v in report.violations:
        issues.add(f"topology({v.subject})", f"{v.kind}: {v.message}")

    default_policies, default_profiles = default_scenario_sections()
    policies: dict[str, EnumerationPolicy] = {}
    for name, p in doc.get("policies", {}).items():
        path = f"policies.{name}"
        try:
            override = p.get("window_base_override")
            policies[name] = EnumerationPolicy(
                reservation_multiplier=float(
                    p.get("reservation_multiplier", 1.0)),
                window_base_override=None if override is None
                else parse_size(override),
                bridge_window_alignment=parse_size(
                    p.get("bridge_window_alignment", 2**20)))
        except (ValueError, TypeError) as exc:
            issues.add(path, str(exc))
    if "policies" not in doc:
        policies = default_policies

    profiles: dict[str, ConstraintProfile] = {}
    for name, p in doc.get("profiles", {}).items():
        path = f"profiles.{name}"
        try:
            profiles[name] = ConstraintProfile(
                name=name,
                max_gpus_per_host=int(_req(p, "max_gpus_per_host", path,
                                           issues, 1)),
                source=ProfileSource(_req(p, "source", path, issues,
                                          "driver")))
        except (ValueError, TypeError) as exc:
            issues.add(path, str(exc))
    if "profiles" not in doc:
        profiles = default_profiles

    measurements = None
    if "measurements" in doc:
        m = doc["measurements"]
        path = "measurements"
        try:
            points = tuple((int(n), float(t))
                           for n, t in m.get("scaling_points", ()))
            overrides = {str(k): _parse_bw(v)
                         for k, v in m.get("link_bw_overrides", {}).items()}
            unknown = set(overrides) - set(topo.links_by_id)
            if unknown:
                issues.add(path, "link_bw_overrides reference unknown links: "
                                 + ", ".join(sorted(unknown)))
            measurements = Measurements(scaling_points=points,
                                        link_bw_overrides=overrides)
        except (ValueError, TypeError) as exc:
            issues.add(path, str(exc))

    issues.raise_if_any()
    return ScenarioFile(topology=topo, policies=policies, profiles=profiles,
                        measurements=measurements, version=version)


# -- canonical serialization ---------------------------------------------------


def _canonical_bytes(doc: dict) -> bytes:
    return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode("utf-8")


def topology_to_doc(topo: FabricTopology) -> dict:
    return {
        "hosts": [{"id": h.id, "phys_addr_bits": h.phys_addr_bits,
                   "mmio_window_base": h.mmio_window_base,
                   "root_port": h.root_port} for h in topo.hosts],
        "switches": [{"id": s.id, "tier": s.tier.value,
                      "upstream_port": s.upstream_port,
                      "downstream_ports": list(s.downstream_ports)}
                     for s in topo.switches],
        "endpoints": [{"id": e.id, "model_name": e.model_name,
                       "bar_sizes": list(e.bar_sizes),
                       "vram_bytes": e.vram_bytes, "vendor": e.vendor}
                      for e in topo.endpoints],
        "links": [{"id": l.id, "endpoints": list(l.endpoints),
                   "lanes": l.lanes,
                   "theoretical_bw": _format_bw(l.theoretical_bw)}
                  for l in topo.links],
    }


def serialize_scenario(scenario: ScenarioFile) -> bytes:
    """Canonical bytes: sorted keys, declaration-order lists, fixed number
    formats. parse(serialize(s)) is structurally equal to s."""
    doc: dict = {
        "version": scenario.version,
        "topology": topology_to_doc(scenario.topology),
        "policies": {
            name: {"reservation_multiplier": p.reservation_multiplier,
                   "window_base_override": p.window_base_override,
                   "bridge_window_alignment": p.bridge_window_alignment}
            for name, p in scenario.policies.items()},
        "profiles": {
            name: {"max_gpus_per_host": p.max_gpus_per_host,
                   "source": p.source.value}
            for name, p in scenario.profiles.items()},
    }
    if scenario.measurements is not None:
        m = scenario.measurements
        doc["measurements"] = {
            "scaling_points": [[n, t] for n, t in m.scaling_points],
            "link_bw_overrides": {k: _format_bw(v)
                                  for k, v in m.link_bw_overrides.items()},
        }
    return _canonical_bytes(doc)


def export_address_map(addr_map: AddressMap,
                       topo: FabricTopology) -> bytes:
    """addressmap.v1 export with hex addresses and the rendered tree."""
    hx = hex  # lowercase, 0x-prefixed, no padding
    doc = {
        "version": 1,
        "host_id": addr_map.host_id,
        "window_base": hx(addr_map.window_base),
        "address_limit": hx(addr_map.address_limit),
        "highest_address": hx(addr_map.highest_address),
        "bus_assignments": dict(sorted(addr_map.bus_assignments.items())),
        "device_slots": dict(sorted(addr_map.device_slots.items())),
        "bar_placements": [
            {"endpoint_id": p.endpoint_id, "bar_index": p.bar_index,
             "base": hx(p.base), "size": p.size}
            for p in addr_map.bar_placements],
        "bridge_windows": {
            nid: {"base": hx(w.base), "limit": hx(w.limit)}
            for nid, w in sorted(addr_map.bridge_windows.items())},
        "placement_bytes_total": addr_map.placement_bytes_total,
        "lspci_tree": render_lspci_tree(addr_map, topo),
    }
    return _canonical_bytes(doc)


# -- wire payload shapes (shared by the CLI and the gateway) ---------------------


def bandwidth_estimate_to_doc(est) -> dict:
    path = est.path
    return {
        "src": path.src,
        "dst": path.dst,
        "links": list(path.links),
        "hop_count": path.hop_count,
        "nearest_common_switch": path.nearest_common_switch,
        "local": est.is_local,
        "bottleneck_bw": None if est.is_local else est.bottleneck_bw,
        "efficiency": est.efficiency,
        "estimated_bw": None if est.is_local else est.estimated_bw,
    }


def scaling_model_to_doc(model) -> dict:
    return {
        "serial_minutes": model.serial_minutes,
        "parallel_minutes": model.parallel_minutes,
        "fit_points": [[n, t] for n, t in model.fit_points],
        "max_rel_residual": model.max_rel_residual,
    }


def scaling_model_from_doc(doc: dict):
    from .perf import ScalingModel
    try:
        return ScalingModel(
            serial_minutes=float(doc["serial_minutes"]),
            parallel_minutes=float(doc["parallel_minutes"]),
            fit_points=tuple((int(n), float(t))
                             for n, t in doc.get("fit_points", ())),
            max_rel_residual=float(doc.get("max_rel_residual", 0.0)))
    except (KeyError, ValueError, TypeError) as exc:
        raise ScenarioError([{"path": "model", "message": str(exc)}]) from exc


def feasibility_to_doc(host_id: str, pool, required_bytes: int,
                       result) -> dict:
    return {
        "host": host_id,
        "total_bytes": pool.total_bytes,
        "per_gpu_bytes": list(pool.per_gpu_bytes),
        "gpu_count": len(pool.per_gpu_bytes),
        "required_bytes": required_bytes,
        "feasible": result.feasible,
        "margin_bytes": result.margin_bytes,
    }


# -- composition state files -----------------------------------------------------


def composition_to_doc(state: CompositionState,
                       topo: FabricTopology) -> dict:
    dfs = topo.dfs_index
    order = lambda ids: sorted(ids, key=lambda e: dfs.get(e, len(dfs)))
    return {
        "pool": order(state.pool),
        "assignments": {hid: order(eps) for hid, eps in state.assignments},
        "version": state.version,
        "profiles": [{"name": p.name,
                      "max_gpus_per_host": p.max_gpus_per_host,
                      "source": p.source.value}
                     for p in state.active_profiles],
    }


def serialize_composition(state: CompositionState, topo: FabricTopology,
                          scenario_ref: str | None = None) -> bytes:
    doc = {"version": 1, "composition": composition_to_doc(state, topo)}
    if scenario_ref is not None:
        doc["scenario"] = scenario_ref
    return _canonical_bytes(doc)


def parse_composition(data: bytes | str,
                      topo: FabricTopology) -> CompositionState:
    issues = _Issues()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        issues.add(f"line {exc.lineno}, column {exc.colno}", exc.msg)
        issues.raise_if_any()
    if doc.get("version") != 1:
        issues.add("version", "composition file must have version 1")
        issues.raise_if_any()
    comp = doc.get("composition", {})
    known = set(topo.endpoints_by_id)
    pool = frozenset(comp.get("pool", ()))
    assignments = {hid: frozenset(eps)
                   for hid, eps in comp.get("assignments", {}).items()}
    listed = set(pool)
    for hid, eps in assignments.items():
        if hid not in topo.hosts_by_id:
            issues.add(f"composition.assignments.{hid}", "unknown host")
        overlap = listed & eps
        if overlap:
            issues.add(f"composition.assignments.{hid}",
                       f"endpoints listed twice: {sorted(overlap)}")
        listed |= eps
    if listed != known:
        extra, missing = sorted(listed - known), sorted(known - listed)
        if extra:
            issues.add("composition", f"unknown endpoints: {extra}")
        if missing:
            issues.add("composition", f"missing endpoints: {missing}")
    profiles = []
    for i, p in enumerate(doc.get("composition", {}).get("profiles", ())):
        try:
            profiles.append(ConstraintProfile(
                name=p["name"], max_gpus_per_host=int(p["max_gpus_per_host"]),
                source=ProfileSource(p["source"])))
        except (KeyError, ValueError, TypeError) as exc:
            issues.add(f"composition.profiles[{i}]", str(exc))
    issues.raise_if_any()
    full_assignments = tuple(
        (h.id, assignments.get(h.id, frozenset())) for h in topo.hosts)
    return CompositionState(pool=pool, assignments=full_assignments,
                            version=int(comp.get("version", 0)),
                            active_profiles=tuple(profiles) or DEFAULT_PROFILES)


# -- bundled scenarios -------------------------------------------------------------


def build_reference_scenario() -> ScenarioFile:
    policies, profiles = default_scenario_sections()
    return ScenarioFile(topology=reference_topology(phys_addr_bits=44,
                                                    host_id="h0"),
                        policies=policies, profiles=profiles)


def build_reference_40bit_scenario() -> ScenarioFile:
    policies, profiles = default_scenario_sections()
    return ScenarioFile(topology=reference_topology(phys_addr_bits=40,
                                                    host_id="h0_40bit"),
                        policies=policies, profiles=profiles)


FIG8_POINTS = ((8, 1145.0), (16, 603.5), (32, 299.2))


def build_fig8_scenario() -> ScenarioFile:
    policies, profiles = default_scenario_sections()
    return ScenarioFile(topology=FabricTopology(),
                        policies=policies, profiles=profiles,
                        measurements=Measurements(scaling_points=FIG8_POINTS))


_BUILDERS = {
    "reference_32gpu": build_reference_scenario,
    "reference_32gpu_40bit": build_reference_40bit_scenario,
    "fig8_measurements": build_fig8_scenario,
}


def bundled_scenario_bytes(name: str) -> bytes:
    return resources.files("fabricsim.data").joinpath(f"{name}.json") \
        .read_bytes()


def load_scenario(ref: str) -> ScenarioFile:
    """Resolve a scenario reference: explicit path, then any directory on
    FABRICSIM_SCENARIO_PATH, then the bundled scenarios."""
    if os.path.isfile(ref):
        with open(ref, "rb") as fh:
            return parse_scenario(fh.read())
    search = os.environ.get(SCENARIO_PATH_ENV, "")
    for directory in filter(None, search.split(os.pathsep)):
        for candidate in (os.path.join(directory, ref),
                          os.path.join(directory, f"{ref}.json")):
            if os.path.isfile(candidate):
                with open(candidate, "rb") as fh:
                    return parse_scenario(fh.read())
    if ref in BUILTIN_SCENARIOS:
        return parse_scenario(bundled_scenario_bytes(ref))
    raise ScenarioError([{"path": ref,
                          "message": "scenario not found (no such file, not "
                                     "on the search path, not bundled)"}])

#!/usr/bin/env python3
"""Walk through enumerating the 32-GPU reference system.

Builds the bundled topology, validates it, runs BIOS-style enumeration on
the 44-bit host and prints the resulting device tree and address map
summary.
"""

from fabricsim import (enumerate_host, reference_topology,
                       render_lspci_tree, validate_topology)
from fabricsim.topology import GIB

topo = reference_topology()
report = validate_topology(topo)
print(f"validation: {'ok' if report.ok else report.violations}")
print(f"{len(topo.hosts)} host, {len(topo.switches)} switches, "
      f"{len(topo.endpoints)} GPUs, {len(topo.links)} links\n")

host = topo.hosts[0]
addr_map = enumerate_host(host, topo)

print(render_lspci_tree(addr_map, topo))

total = addr_map.placement_bytes_total
print(f"BAR placements: {len(addr_map.bar_placements)}")
print(f"total MMIO placed: {total} bytes = {total / GIB:.0f} GiB")
print(f"window base:      {addr_map.window_base:#x}")
print(f"highest address:  {addr_map.highest_address:#x} "
      f"({addr_map.highest_address / GIB:.0f} GiB)")
print(f"host limit:       {addr_map.address_limit:#x} "
      f"(2^{host.phys_addr_bits})")

print("\nfirst three placements:")
for p in addr_map.bar_placements[:3]:
    print(f"  {p.endpoint_id} BAR{p.bar_index}: base {p.base:#x}, "
          f"size {p.size // GIB} GiB")

top_window = addr_map.bridge_windows["top0"]
print(f"\ntop switch window: [{top_window.base:#x}, {top_window.limit:#x})")

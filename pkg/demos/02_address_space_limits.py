#!/usr/bin/env python3
"""Show how CPU address-space width limits device enumeration.

The 32 x 64 GiB apertures need 2 TiB of aligned MMIO space. A 40-bit host
(1 TiB) places only 15 devices; conservative firmware that reserves twice
each BAR's footprint pushes the requirement from 42 to 43 bits.
"""

from fabricsim import (EnumerationPolicy, ExhaustionError, enumerate_host,
                       min_addr_bits, reference_topology)

print("exhaustion on a 40-bit host")
small = reference_topology(phys_addr_bits=40, host_id="h0_40bit")
try:
    enumerate_host(small.hosts[0], small)
except ExhaustionError as exc:
    print(f"  placed {exc.devices_placed} of {exc.devices_total} devices")
    print(f"  next BAR needed {exc.required_bytes} bytes, "
          f"{exc.available_bytes} were free\n")

print("minimum address width per reservation multiplier")
reference = reference_topology()
for multiplier in (1.0, 1.5, 2.0, 4.0, 8.0):
    policy = EnumerationPolicy(reservation_multiplier=multiplier)
    bits = min_addr_bits(reference, policy)
    print(f"  multiplier {multiplier}: {bits} bits")

print("\ndevices placed as the host width grows (multiplier 1)")
for bits in range(38, 45):
    topo = reference_topology(phys_addr_bits=bits)
    try:
        addr_map = enumerate_host(topo.hosts[0], topo)
        print(f"  {bits} bits: all 32 placed, "
              f"highest address {addr_map.highest_address:#x}")
    except ExhaustionError as exc:
        print(f"  {bits} bits: exhausted at "
              f"{exc.devices_placed}/{exc.devices_total}")

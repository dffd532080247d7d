#!/usr/bin/env python3
"""Check whether a large working set fits the pooled VRAM of one node.

With 32 x 64 GiB GPUs composed onto a single host, 2 TiB of device memory
is directly addressable, enough for a 40-billion-cell fluid simulation at
50 bytes per cell.
"""

from fabricsim import (FabricComposer, fits_in_pool, reference_topology,
                       vram_pool)
from fabricsim.topology import GIB

topo = reference_topology()
composer = FabricComposer(topo)
state = composer.compose(composer.initial_state(), "h0",
                         [e.id for e in topo.endpoints])

pool = vram_pool(topo, state, "h0")
print(f"pooled VRAM on h0: {pool.total_bytes} bytes "
      f"({pool.total_bytes / GIB:.0f} GiB over "
      f"{len(pool.per_gpu_bytes)} GPUs)\n")

cells = 40_000_000_000
print(f"working set: {cells:,} cells")
for bytes_per_cell in (40, 50, 55, 60):
    required = cells * bytes_per_cell
    result = fits_in_pool(pool, required)
    verdict = "fits" if result.feasible else "does NOT fit"
    print(f"  {bytes_per_cell} B/cell -> {required / 1e12:.1f} TB: "
          f"{verdict} (margin {result.margin_bytes / 1e9:+.1f} GB)")

print("\nlargest cell count per bytes-per-cell budget:")
for bytes_per_cell in (50, 60, 100):
    print(f"  {bytes_per_cell:>3} B/cell: "
          f"{pool.total_bytes // bytes_per_cell:,} cells")

print("\nhalf the GPUs, half the pool:")
state = composer.decompose(state, "h0", [f"gpu{i:02d}" for i in range(16)])
half = vram_pool(topo, state, "h0")
result = fits_in_pool(half, cells * 50)
print(f"  16 GPUs pool {half.total_bytes / GIB:.0f} GiB; 50 B/cell "
      f"{'fits' if result.feasible else 'does NOT fit'} "
      f"(margin {result.margin_bytes / 1e9:+.1f} GB)")

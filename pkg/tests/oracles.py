"""Independent oracles the test suite checks the implementation against.

Each oracle takes a deliberately different route from the production code:
the allocator scans aligned candidate addresses against an explicit placed
set instead of carving a free list; the path oracle derives parenthood from
raw link/port data; the fit oracle solves the least-squares system with
numpy. Expected values frozen into tests were computed with these.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def reserved_footprint(size: int, multiplier: float, alignment: int) -> int:
    m = Fraction(multiplier)
    reserved = -(-size * m.numerator // m.denominator)
    if size < alignment:
        reserved = -(-reserved // alignment) * alignment
    return reserved


def brute_force_placements(bars, window_base: int, limit: int,
                           multiplier: float = 1.0,
                           alignment: int = 2**20):
    """Place each (key, size) at the lowest size-aligned address whose
    reserved footprint overlaps nothing already placed and stays below the
    limit. ``bars`` must already be in allocation order (descending size).

    Returns (placements: {key: base}, failed_key | None, highest_address).
    """
    placed: list[tuple[int, int]] = []  # (base, end-of-reservation)
    out: dict = {}
    highest = window_base
    for key, size in bars:
        footprint = reserved_footprint(size, multiplier, alignment)
        base = -(-window_base // size) * size
        while True:
            if base + footprint > limit:
                return out, key, highest
            hit = next((e for s, e in placed
                        if s < base + footprint and base < e), None)
            if hit is None:
                break
            base = -(-hit // size) * size  # jump past the blocker, realign
        placed.append((base, base + footprint))
        out[key] = base
        highest = max(highest, base + footprint)
    return out, None, highest


def parent_map_from_raw(topo) -> dict[str, str]:
    """child -> parent derived straight from dataclass fields."""
    down_ports = {}
    for sw in topo.switches:
        for port in sw.downstream_ports:
            down_ports[port] = sw.id
    up_ports = {sw.upstream_port: sw.id for sw in topo.switches}
    up_ports.update({ep.port: ep.id for ep in topo.endpoints})
    parents: dict[str, str] = {}
    for link in topo.links:
        a, b = link.endpoints
        if a in down_ports and b in up_ports:
            parents[up_ports[b]] = down_ports[a]
        elif b in down_ports and a in up_ports:
            parents[up_ports[a]] = down_ports[b]
    return parents


def hop_count_oracle(topo, gpu_a: str, gpu_b: str) -> int:
    """Hops to the nearest common ancestor and back down."""
    parents = parent_map_from_raw(topo)

    def chain(node):
        out = [node]
        while out[-1] in parents:
            out.append(parents[out[-1]])
        return out

    ca, cb = chain(gpu_a), chain(gpu_b)
    ranks_b = {nid: i for i, nid in enumerate(cb)}
    for up_a, nid in enumerate(ca):
        if nid in ranks_b:
            return up_a + ranks_b[nid]
    raise AssertionError(f"no common ancestor for {gpu_a}, {gpu_b}")


def lstsq_fit(points):
    """(a, b) for t = a + b/n by numpy least squares."""
    a_matrix = np.array([[1.0, 1.0 / n] for n, _ in points])
    t = np.array([t for _, t in points])
    coeffs, *_ = np.linalg.lstsq(a_matrix, t, rcond=None)
    return float(coeffs[0]), float(coeffs[1])


def linear_scan_min_bits(topo, policy, lo: int = 32, hi: int = 57):
    """Smallest feasible bit width by exhaustive scan (no binary search)."""
    from dataclasses import replace

    from fabricsim.enumeration import enumerate_host
    from fabricsim.errors import ExhaustionError
    from fabricsim.topology import DEFAULT_WINDOW_BASE

    host = topo.hosts[0]
    base = policy.window_base_override or DEFAULT_WINDOW_BASE
    for bits in range(lo, hi + 1):
        if base >= 2**bits:
            continue
        candidate = replace(host, phys_addr_bits=bits, mmio_window_base=base)
        try:
            enumerate_host(candidate, topo.with_host(candidate), policy)
            return bits
        except ExhaustionError:
            continue
    return None


def exact_amdahl(a: float, b: float, ns):
    """Noise-free T(n) samples for fit-recovery tests."""
    return [(n, a + b / n) for n in ns]


def ssr(points, a: float, b: float) -> float:
    return math.fsum((a + b / n - t) ** 2 for n, t in points)

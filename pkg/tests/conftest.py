from __future__ import annotations

import random

import pytest

from fabricsim.enumeration import EnumerationPolicy
from fabricsim.topology import (GIB, KIB, FabricTopology, GpuEndpoint, Host,
                                Link, Tier, make_switch, reference_topology)


@pytest.fixture(scope="session")
def reference():
    return reference_topology()


@pytest.fixture(scope="session")
def reference_40bit():
    return reference_topology(phys_addr_bits=40, host_id="h0_40bit")


def two_host_reference() -> FabricTopology:
    """Reference fabric with a second 44-bit host attached to the top switch."""
    topo = reference_topology()
    h1 = Host(id="h1", phys_addr_bits=44)
    link = Link(id="link_h1_top0", endpoints=(h1.root_port, "top0:up"))
    return FabricTopology(hosts=topo.hosts + (h1,), switches=topo.switches,
                          endpoints=topo.endpoints,
                          links=topo.links + (link,))


@pytest.fixture(scope="session")
def dual_host():
    return two_host_reference()


_BAR_CHOICES = [4 * KIB, 64 * KIB, 512 * KIB, 2**21, 2**23, 2**27,
                1 * GIB, 4 * GIB, 16 * GIB]


def random_topology(rng: random.Random) -> tuple[FabricTopology,
                                                 EnumerationPolicy]:
    """Small random tier-correct fabric plus a random enumeration policy."""
    bits = rng.randint(34, 46)
    host = Host(id="host", phys_addr_bits=bits)
    switches = []
    endpoints = []
    links = []
    gpu_no = 0

    def add_gpu(parent_port: str):
        nonlocal gpu_no
        bars = tuple(rng.choice(_BAR_CHOICES)
                     for _ in range(rng.randint(1, 3)))
        gpu = GpuEndpoint(id=f"g{gpu_no:02d}", model_name="synthetic-gpu",
                          bar_sizes=bars, vram_bytes=rng.choice(bars),
                          vendor="test")
        gpu_no += 1
        endpoints.append(gpu)
        links.append(Link(id=f"l_{parent_port}_{gpu.id}",
                          endpoints=(parent_port, gpu.port)))

    if rng.random() < 0.9:  # occasionally a bare host
        n_apas = rng.randint(0, 3)
        n_top_gpus = rng.randint(0, 2)
        top = make_switch("top", Tier.TOP, n_apas + n_top_gpus)
        switches.append(top)
        links.append(Link(id="l_root_top",
                          endpoints=(host.root_port, top.upstream_port)))
        port_no = 0
        for a in range(n_apas):
            n_drawers = rng.randint(0, 2)
            n_apa_gpus = rng.randint(0, 1)
            apa = make_switch(f"apa{a}", Tier.APA, n_drawers + n_apa_gpus)
            switches.append(apa)
            links.append(Link(id=f"l_top_apa{a}",
                              endpoints=(top.downstream_ports[port_no],
                                         apa.upstream_port)))
            port_no += 1
            apa_port = 0
            for d in range(n_drawers):
                n_gpus = rng.randint(0, 4)
                drawer = make_switch(f"apa{a}_d{d}", Tier.DRAWER, n_gpus)
                switches.append(drawer)
                links.append(Link(id=f"l_apa{a}_d{d}",
                                  endpoints=(apa.downstream_ports[apa_port],
                                             drawer.upstream_port)))
                apa_port += 1
                for g in range(n_gpus):
                    add_gpu(drawer.downstream_ports[g])
            for _ in range(n_apa_gpus):
                add_gpu(apa.downstream_ports[apa_port])
                apa_port += 1
        for _ in range(n_top_gpus):
            add_gpu(top.downstream_ports[port_no])
            port_no += 1

    policy = EnumerationPolicy(
        reservation_multiplier=rng.choice([1.0, 1.0, 1.5, 2.0, 4.0]),
        bridge_window_alignment=rng.choice([2**20, 2**20, 2**21]))
    topo = FabricTopology(hosts=(host,), switches=tuple(switches),
                          endpoints=tuple(endpoints), links=tuple(links))
    return topo, policy

"""Performance analytics over a composed fabric.

Peer-to-peer traffic between GPUs on the same host rides the switch
hierarchy up to their nearest common switch and back down, bypassing the
root complex. Bandwidth is modeled as the bottleneck link scaled by one
calibrated efficiency factor; strong-scaling runtime as T(n) = a + b/n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .composition import CompositionState
from .errors import FabricError, PathError, UnknownNodeError
from .topology import FabricTopology

# Calibrated protocol efficiency: measured ~25 GB/s against a 32 GB/s
# theoretical link maximum.
DEFAULT_EFFICIENCY = 25 / 32


@dataclass(frozen=True)
class Path:
    """Switch-fabric route between two endpoints on one host."""

    src: str
    dst: str
    links: tuple[str, ...]
    nearest_common_switch: str | None

    @property
    def hop_count(self) -> int:
        return len(self.links)

    @property
    def is_local(self) -> bool:
        return self.src == self.dst


@dataclass(frozen=True)
class BandwidthEstimate:
    path: Path
    bottleneck_bw: float  # GB/s; inf for the self-path
    efficiency: float
    estimated_bw: float

    @property
    def is_local(self) -> bool:
        return self.path.is_local


@dataclass(frozen=True)
class ScalingModel:
    """T(n) = serial + parallel / n, fitted to measured (n, minutes)."""

    serial_minutes: float
    parallel_minutes: float
    fit_points: tuple[tuple[int, float], ...]
    max_rel_residual: float


@dataclass(frozen=True)
class VramPool:
    """Directly addressable GPU memory composed onto one host."""

    total_bytes: int
    per_gpu_bytes: tuple[int, ...]


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    margin_bytes: int  # negative when the requirement exceeds the pool


def _ancestry(topo: FabricTopology, endpoint_id: str):
    """(node ids from the endpoint up to its tree root, uplink ids)."""
    chain = [endpoint_id]
    uplinks = []
    node = endpoint_id
    while True:
        link = topo.uplink_of(node)
        parent = topo.parent_of(node)
        if parent is None:
            return chain, uplinks
        uplinks.append(link.id)
        chain.append(parent)
        node = parent


def p2p_path(topo: FabricTopology, state: CompositionState,
             gpu_a: str, gpu_b: str) -> Path:
    """Route between two composed GPUs via their nearest common switch.

    Both GPUs must be assigned to the same host; the root complex is only
    crossed when the pair shares no switch ancestor.
    """
    for gpu in (gpu_a, gpu_b):
        if gpu not in topo.endpoints_by_id:
            raise UnknownNodeError(f"unknown endpoint id: {gpu}")
    host_a = state.host_of(gpu_a)
    host_b = state.host_of(gpu_b)
    if host_a is None or host_b is None:
        missing = [g for g, h in ((gpu_a, host_a), (gpu_b, host_b))
                   if h is None]
        raise PathError(f"not composed to any host: {', '.join(missing)}",
                        "NOT_COMPOSED")
    if host_a != host_b:
        raise PathError(
            f"{gpu_a} is on {host_a} but {gpu_b} is on {host_b}",
            "DIFFERENT_HOSTS")
    if gpu_a == gpu_b:
        return Path(src=gpu_a, dst=gpu_b, links=(),
                    nearest_common_switch=None)

    chain_a, up_a = _ancestry(topo, gpu_a)
    chain_b, up_b = _ancestry(topo, gpu_b)
    rank_b = {nid: i for i, nid in enumerate(chain_b)}
    lca = None
    for i, nid in enumerate(chain_a):
        if nid in rank_b:
            lca = nid
            links = tuple(up_a[:i]) + tuple(reversed(up_b[:rank_b[nid]]))
            return Path(src=gpu_a, dst=gpu_b, links=links,
                        nearest_common_switch=lca)

    # No shared switch ancestor: the route crosses the host root complex.
    attach = {nid: link for nid, link in
              topo.host_attachments.get(host_a, ())}
    links = list(up_a)
    for root, side in ((chain_a[-1], "src"), (chain_b[-1], "dst")):
        link = attach.get(root)
        if link is None:
            raise PathError(
                f"{side} tree root {root} is not attached to host {host_a}",
                "NOT_COMPOSED")
    links.append(attach[chain_a[-1]].id)
    links.append(attach[chain_b[-1]].id)
    links.extend(reversed(up_b))
    return Path(src=gpu_a, dst=gpu_b, links=tuple(links),
                nearest_common_switch=host_a)


def p2p_bandwidth(topo: FabricTopology, path: Path,
                  efficiency: float = DEFAULT_EFFICIENCY) -> BandwidthEstimate:
    """Bottleneck link bandwidth scaled by the protocol efficiency."""
    if not 0 < efficiency <= 1:
        raise FabricError(f"efficiency must be in (0, 1], got {efficiency}",
                          "BAD_EFFICIENCY")
    if path.is_local:
        return BandwidthEstimate(path=path, bottleneck_bw=math.inf,
                                 efficiency=efficiency,
                                 estimated_bw=math.inf)
    if not path.links:
        raise PathError("path between distinct endpoints has no links",
                        "EMPTY_PATH")
    bottleneck = min(topo.links_by_id[lid].theoretical_bw
                     for lid in path.links)
    return BandwidthEstimate(path=path, bottleneck_bw=bottleneck,
                             efficiency=efficiency,
                             estimated_bw=efficiency * bottleneck)


def _validate_points(points) -> list[tuple[int, float]]:
    pts = [(int(n), float(t)) for n, t in points]
    for n, t in pts:
        if n < 1:
            raise FabricError(f"gpu count must be >= 1, got {n}",
                              "BAD_MEASUREMENTS")
        if t <= 0:
            raise FabricError(f"minutes must be > 0, got {t}",
                              "BAD_MEASUREMENTS")
    return pts


def fit_scaling(points) -> ScalingModel:
    """Least-squares fit of t = a + b/n over measured points.

    A negative coefficient is unphysical; it is clamped to zero and the
    other coefficient refitted alone.
    """
    pts = _validate_points(points)
    if len({n for n, _ in pts}) < 2:
        raise FabricError("need at least 2 points with distinct GPU counts",
                          "BAD_MEASUREMENTS")
    xs = [1.0 / n for n, _ in pts]
    ts = [t for _, t in pts]
    m = len(pts)
    x_mean = math.fsum(xs) / m
    t_mean = math.fsum(ts) / m
    # centered form stays accurate when the 1/n values cluster
    var_x = math.fsum((x - x_mean) ** 2 for x in xs)
    cov_xt = math.fsum((x - x_mean) * (t - t_mean)
                       for x, t in zip(xs, ts))
    b = cov_xt / var_x
    a = t_mean - b * x_mean

    def ssr(a_: float, b_: float) -> float:
        return math.fsum((a_ + b_ * x - t) ** 2 for x, t in zip(xs, ts))

    if a < 0 or b < 0:
        through_origin = math.fsum(x * t for x, t in zip(xs, ts)) \
            / math.fsum(x * x for x in xs)
        candidates = [(0.0, max(0.0, through_origin)),
                      (max(0.0, t_mean), 0.0)]
        a, b = min(candidates, key=lambda ab: ssr(*ab))

    residual = max(abs(a + b * x - t) / t for x, t in zip(xs, ts))
    return ScalingModel(serial_minutes=a, parallel_minutes=b,
                        fit_points=tuple(pts), max_rel_residual=residual)


def predict_runtime(model: ScalingModel, n: int) -> float:
    """Minutes at n GPUs under the fitted model."""
    if n < 1:
        raise FabricError(f"gpu count must be >= 1, got {n}", "BAD_REQUEST")
    return model.serial_minutes + model.parallel_minutes / n


def speedup(points, n_base: int, n_target: int) -> float:
    """Measured runtime ratio t(n_base) / t(n_target)."""
    pts = _validate_points(points)
    at: dict[int, list[float]] = {}
    for n, t in pts:
        at.setdefault(n, []).append(t)
    for n in (n_base, n_target):
        if n not in at:
            raise FabricError(f"no measurement at n={n}", "BAD_MEASUREMENTS")
    mean = lambda v: math.fsum(v) / len(v)
    return mean(at[n_base]) / mean(at[n_target])


def vram_pool(topo: FabricTopology, state: CompositionState,
              host_id: str) -> VramPool:
    """Sum of VRAM over the GPUs currently composed onto the host."""
    if host_id not in topo.hosts_by_id:
        raise UnknownNodeError(f"unknown host id: {host_id}")
    dfs = topo.dfs_index
    assigned = sorted(state.assigned_to(host_id), key=lambda e: dfs[e])
    sizes = tuple(topo.endpoints_by_id[e].vram_bytes for e in assigned)
    return VramPool(total_bytes=sum(sizes), per_gpu_bytes=sizes)


def fits_in_pool(pool: VramPool, required_bytes: int) -> FeasibilityResult:
    """Whether a working set fits in the composed VRAM pool."""
    if required_bytes < 0:
        raise FabricError("required_bytes must be >= 0", "BAD_REQUEST")
    margin = pool.total_bytes - required_bytes
    return FeasibilityResult(feasible=required_bytes <= pool.total_bytes,
                             margin_bytes=margin)

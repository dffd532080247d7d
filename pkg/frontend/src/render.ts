/** Pure HTML renderers for the console. Every figure shown is taken
 * verbatim from a gateway response held in the view state. */

import type { ViewState } from "./state.js";
import type { CompositionDoc, TopologyDoc } from "./types.js";

export function escapeHtml(raw: string): string {
  return raw
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

interface TreeIndex {
  childrenOf: Map<string, string[]>;
  roots: string[]; // hosts in declaration order
  endpointIds: Set<string>;
  tierOf: Map<string, string>;
}

/** Parent/child structure straight from the topology document's links;
 * used only to lay out the diagram. */
export function indexTopology(topology: TopologyDoc): TreeIndex {
  const portOwner = new Map<string, string>();
  const downPorts = new Set<string>();
  for (const host of topology.hosts) portOwner.set(host.root_port, host.id);
  for (const sw of topology.switches) {
    portOwner.set(sw.upstream_port, sw.id);
    for (const port of sw.downstream_ports) {
      portOwner.set(port, sw.id);
      downPorts.add(port);
    }
  }
  const endpointIds = new Set(topology.endpoints.map((e) => e.id));
  for (const ep of topology.endpoints) portOwner.set(`${ep.id}:up`, ep.id);

  const rootPorts = new Set(topology.hosts.map((h) => h.root_port));
  const childrenOf = new Map<string, string[]>();
  const add = (parent: string, child: string) => {
    const kids = childrenOf.get(parent) ?? [];
    kids.push(child);
    childrenOf.set(parent, kids);
  };
  for (const link of topology.links) {
    const [a, b] = link.endpoints;
    const ownerA = portOwner.get(a);
    const ownerB = portOwner.get(b);
    if (ownerA === undefined || ownerB === undefined) continue;
    if (downPorts.has(a) || rootPorts.has(a)) add(ownerA, ownerB);
    else if (downPorts.has(b) || rootPorts.has(b)) add(ownerB, ownerA);
  }

  const tierOf = new Map<string, string>();
  for (const sw of topology.switches) tierOf.set(sw.id, sw.tier);
  return {
    childrenOf,
    roots: topology.hosts.map((h) => h.id),
    endpointIds,
    tierOf,
  };
}

function assignedHostOf(
  composition: CompositionDoc | null,
): Map<string, string> {
  const out = new Map<string, string>();
  if (!composition) return out;
  for (const [host, ids] of Object.entries(composition.assignments)) {
    for (const id of ids) out.set(id, host);
  }
  return out;
}

export function renderTopologyTree(view: ViewState): string {
  const topology = view.topology;
  if (!topology) return `<p class="empty">no topology loaded</p>`;
  if (topology.endpoints.length === 0 && topology.hosts.length === 0) {
    return `<p class="empty">scenario is empty: no hosts, no devices</p>`;
  }
  const index = indexTopology(topology);
  const assignedTo = assignedHostOf(view.composition);
  const selected = new Set(view.selection);

  const renderNode = (id: string): string => {
    if (index.endpointIds.has(id)) {
      const host = assignedTo.get(id);
      const classes = ["gpu", host ? "assigned" : "pooled"];
      if (selected.has(id)) classes.push("selected");
      const badge = host ? ` → ${escapeHtml(host)}` : "";
      return (
        `<li><button class="${classes.join(" ")}" data-gpu="${escapeHtml(id)}">` +
        `${escapeHtml(id)}${badge}</button></li>`
      );
    }
    const tier = index.tierOf.get(id) ?? "host";
    const kids = (index.childrenOf.get(id) ?? [])
      .map(renderNode)
      .join("");
    return (
      `<li class="node tier-${tier}"><span class="label">` +
      `[${tier}] ${escapeHtml(id)}</span><ul>${kids}</ul></li>`
    );
  };

  const roots = index.roots.map(renderNode).join("");
  const orphanSwitches = topology.switches
    .filter((sw) => !isReachable(index, sw.id))
    .map((sw) => renderNode(sw.id))
    .join("");
  return `<ul class="tree">${roots}${orphanSwitches}</ul>`;
}

function isReachable(index: TreeIndex, id: string): boolean {
  const stack = [...index.roots];
  while (stack.length) {
    const node = stack.pop()!;
    if (node === id) return true;
    stack.push(...(index.childrenOf.get(node) ?? []));
  }
  return false;
}

export function renderBanner(view: ViewState): string {
  if (!view.banner) return "";
  return (
    `<div class="banner ${view.banner.kind}">` +
    `${escapeHtml(view.banner.text)}</div>`
  );
}

export function renderComposition(view: ViewState): string {
  const composition = view.composition;
  if (!composition) return "";
  const hosts = Object.entries(composition.assignments)
    .map(
      ([host, ids]) =>
        `<li>${escapeHtml(host)}: ${ids.length} assigned</li>`,
    )
    .join("");
  const limits = composition.profiles
    .map(
      (p) =>
        `${escapeHtml(p.name)} (${p.source}) ≤ ${p.max_gpus_per_host}`,
    )
    .join(", ");
  return (
    `<div class="composition" data-version="${composition.version}">` +
    `<p>state version <b>${composition.version}</b>, ` +
    `pool ${composition.pool.length} GPUs</p>` +
    `<ul>${hosts}</ul>` +
    `<p class="limits">limits: ${limits}</p></div>`
  );
}

export function renderExhaustionPanel(view: ViewState): string {
  const detail = view.exhaustion;
  if (!detail) return "";
  return (
    `<div class="exhaustion">` +
    `<h3>address space exhausted</h3>` +
    `<p>placed <b>${detail.devices_placed} of ${detail.devices_total}</b> ` +
    `devices</p>` +
    `<p>next BAR required ${detail.required_bytes} bytes, ` +
    `${detail.available_bytes} available — shrink the selection or pick a ` +
    `wider host</p></div>`
  );
}

export function renderAddressMap(view: ViewState): string {
  const map = view.addressMap;
  if (!map) return "";
  return (
    `<div class="addressmap">` +
    `<h3>address map: ${escapeHtml(map.host_id)}</h3>` +
    `<p>${map.bar_placements.length} BARs, ` +
    `<b>${map.placement_bytes_total}</b> bytes placed, highest address ` +
    `${escapeHtml(map.highest_address)}</p>` +
    `<pre class="lspci">${escapeHtml(map.lspci_tree)}</pre></div>`
  );
}

export function renderWhatIf(view: ViewState): string {
  const parts: string[] = [];
  if (view.p2p) {
    const p2p = view.p2p;
    parts.push(
      p2p.local
        ? `<p class="p2p">${escapeHtml(p2p.src)} ↔ ${escapeHtml(p2p.dst)}: ` +
            `local (same device)</p>`
        : `<p class="p2p">${escapeHtml(p2p.src)} ↔ ${escapeHtml(p2p.dst)}: ` +
            `<b>${p2p.estimated_bw} GB/s</b> (hop count ${p2p.hop_count}, ` +
            `bottleneck ${p2p.bottleneck_bw} GB/s, efficiency ` +
            `${p2p.efficiency})</p>`,
    );
  }
  if (view.feasibility) {
    const f = view.feasibility;
    parts.push(
      `<p class="pool">pooled VRAM on ${escapeHtml(f.host)}: ` +
        `<b>${f.total_bytes}</b> bytes over ${f.gpu_count} GPUs; ` +
        `required ${f.required_bytes}: ` +
        `<b class="${f.feasible ? "ok" : "bad"}">` +
        `${f.feasible ? "feasible" : "infeasible"}</b> ` +
        `(margin ${f.margin_bytes})</p>`,
    );
  }
  if (view.model) {
    const m = view.model;
    parts.push(
      `<p class="model">runtime model: T(n) = ${m.serial_minutes} + ` +
        `${m.parallel_minutes}/n minutes (max residual ` +
        `${m.max_rel_residual})</p>`,
    );
  }
  if (view.prediction) {
    parts.push(
      `<p class="predict">predicted runtime at n=${view.prediction.n}: ` +
        `<b>${view.prediction.minutes}</b> minutes</p>`,
    );
  }
  if (!parts.length) return "";
  return `<div class="whatif"><h3>what-if</h3>${parts.join("")}</div>`;
}

export function renderApp(view: ViewState): string {
  return (
    renderBanner(view) +
    `<section id="topology"><h2>fabric</h2>` +
    renderTopologyTree(view) +
    `</section>` +
    `<section id="composition"><h2>composition</h2>` +
    renderComposition(view) +
    renderExhaustionPanel(view) +
    renderAddressMap(view) +
    `</section>` +
    `<section id="whatif">` +
    renderWhatIf(view) +
    `</section>`
  );
}

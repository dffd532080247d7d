/** Mocked gateway for contract tests: canned routes + full request log. */

import type { CompositionDoc, TopologyDoc } from "../src/types.js";

export interface RecordedRequest {
  method: string;
  path: string;
  body: unknown;
}

export interface Route {
  method: string;
  path: string; // exact path including query, or prefix ending with '*'
  status: number;
  body: unknown;
}

export function installMockGateway(routes: Route[]): RecordedRequest[] {
  const log: RecordedRequest[] = [];
  globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = new URL(String(input));
    const path = url.pathname + url.search;
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    log.push({ method, path, body });
    const route = routes.find(
      (r) =>
        r.method === method &&
        (r.path.endsWith("*")
          ? path.startsWith(r.path.slice(0, -1))
          : r.path === path),
    );
    if (!route) {
      return new Response(
        JSON.stringify({
          error: { code: "NOT_FOUND", message: `no mock for ${method} ${path}` },
        }),
        { status: 404 },
      );
    }
    const payload =
      typeof route.body === "function" ? (route.body as () => unknown)() : route.body;
    return new Response(JSON.stringify(payload), { status: route.status });
  }) as typeof fetch;
  return log;
}

/** Two drawers under one APA, four GPUs, matching the gateway's schema. */
export function smallTopology(): TopologyDoc {
  return {
    hosts: [
      {
        id: "h0",
        phys_addr_bits: 44,
        mmio_window_base: 4294967296,
        root_port: "h0:root",
      },
    ],
    switches: [
      {
        id: "top0",
        tier: "top",
        upstream_port: "top0:up",
        downstream_ports: ["top0:dn0"],
      },
      {
        id: "apa0",
        tier: "apa",
        upstream_port: "apa0:up",
        downstream_ports: ["apa0:dn0", "apa0:dn1"],
      },
      {
        id: "drawer0",
        tier: "drawer",
        upstream_port: "drawer0:up",
        downstream_ports: ["drawer0:dn0", "drawer0:dn1"],
      },
      {
        id: "drawer1",
        tier: "drawer",
        upstream_port: "drawer1:up",
        downstream_ports: ["drawer1:dn0", "drawer1:dn1"],
      },
    ],
    endpoints: ["g0", "g1", "g2", "g3"].map((id) => ({
      id,
      model_name: "Test GPU 64G",
      bar_sizes: [68719476736],
      vram_bytes: 68719476736,
      vendor: "test",
    })),
    links: [
      { id: "l_root", endpoints: ["h0:root", "top0:up"], lanes: 8, theoretical_bw: "32.000" },
      { id: "l_apa", endpoints: ["top0:dn0", "apa0:up"], lanes: 8, theoretical_bw: "32.000" },
      { id: "l_d0", endpoints: ["apa0:dn0", "drawer0:up"], lanes: 8, theoretical_bw: "32.000" },
      { id: "l_d1", endpoints: ["apa0:dn1", "drawer1:up"], lanes: 8, theoretical_bw: "32.000" },
      { id: "l_g0", endpoints: ["drawer0:dn0", "g0:up"], lanes: 8, theoretical_bw: "32.000" },
      { id: "l_g1", endpoints: ["drawer0:dn1", "g1:up"], lanes: 8, theoretical_bw: "32.000" },
      { id: "l_g2", endpoints: ["drawer1:dn0", "g2:up"], lanes: 8, theoretical_bw: "32.000" },
      { id: "l_g3", endpoints: ["drawer1:dn1", "g3:up"], lanes: 8, theoretical_bw: "32.000" },
    ],
  };
}

export function pooledState(version = 0): CompositionDoc {
  return {
    pool: ["g0", "g1", "g2", "g3"],
    assignments: { h0: [] },
    version,
    profiles: [
      { name: "driver-default", max_gpus_per_host: 64, source: "driver" },
    ],
  };
}

/** Wire types mirroring the gateway's JSON schemas. */

export interface HostDoc {
  id: string;
  phys_addr_bits: number;
  mmio_window_base: number;
  root_port: string;
}

export interface SwitchDoc {
  id: string;
  tier: "top" | "apa" | "drawer";
  upstream_port: string;
  downstream_ports: string[];
}

export interface EndpointDoc {
  id: string;
  model_name: string;
  bar_sizes: number[];
  vram_bytes: number;
  vendor: string;
}

export interface LinkDoc {
  id: string;
  endpoints: [string, string];
  lanes: number;
  theoretical_bw: string | number;
}

export interface TopologyDoc {
  hosts: HostDoc[];
  switches: SwitchDoc[];
  endpoints: EndpointDoc[];
  links: LinkDoc[];
}

export interface ProfileDoc {
  name: string;
  max_gpus_per_host: number;
  source: "driver" | "framework";
}

export interface CompositionDoc {
  pool: string[];
  assignments: Record<string, string[]>;
  version: number;
  profiles: ProfileDoc[];
}

export interface BandwidthDoc {
  src: string;
  dst: string;
  links: string[];
  hop_count: number;
  nearest_common_switch: string | null;
  local: boolean;
  bottleneck_bw: number | null;
  efficiency: number;
  estimated_bw: number | null;
}

export interface PlacementDoc {
  endpoint_id: string;
  bar_index: number;
  base: string;
  size: number;
}

export interface AddressMapDoc {
  version: number;
  host_id: string;
  window_base: string;
  address_limit: string;
  highest_address: string;
  bus_assignments: Record<string, number>;
  device_slots: Record<string, number>;
  bar_placements: PlacementDoc[];
  bridge_windows: Record<string, { base: string; limit: string }>;
  placement_bytes_total: number;
  lspci_tree: string;
}

export interface ScalingModelDoc {
  serial_minutes: number;
  parallel_minutes: number;
  fit_points: [number, number][];
  max_rel_residual: number;
}

export interface PredictionDoc {
  n: number;
  minutes: number;
}

export interface FeasibilityDoc {
  host: string;
  total_bytes: number;
  per_gpu_bytes: number[];
  gpu_count: number;
  required_bytes: number;
  feasible: boolean;
  margin_bytes: number;
}

export interface PlanDoc {
  endpoints: string[];
  policy: string;
}

export interface ExhaustionDetail {
  code: "ADDRESS_EXHAUSTION";
  message: string;
  required_bytes: number;
  available_bytes: number;
  devices_placed: number;
  devices_total: number;
}

export interface ErrorBody {
  code: string;
  message: string;
  profile?: string;
  exhaustion?: ExhaustionDetail;
  expected_version?: number;
  actual_version?: number;
  [extra: string]: unknown;
}

/** Console view state and actions.
 *
 * Invariants: every mutation sends the version currently displayed; a
 * stale-version response surfaces a conflict banner and triggers a
 * refresh, never a silent retry. What-if values are stored exactly as the
 * gateway returned them.
 */

import { ApiError, GatewayClient } from "./api.js";
import type {
  AddressMapDoc,
  BandwidthDoc,
  CompositionDoc,
  ExhaustionDetail,
  FeasibilityDoc,
  PredictionDoc,
  ScalingModelDoc,
  TopologyDoc,
} from "./types.js";

export interface Banner {
  kind: "error" | "conflict" | "info";
  text: string;
}

export interface ViewState {
  topology: TopologyDoc | null;
  composition: CompositionDoc | null;
  selection: string[];
  banner: Banner | null;
  exhaustion: ExhaustionDetail | null;
  addressMap: AddressMapDoc | null;
  p2p: BandwidthDoc | null;
  feasibility: FeasibilityDoc | null;
  model: ScalingModelDoc | null;
  prediction: PredictionDoc | null;
  busy: boolean;
}

export function emptyView(): ViewState {
  return {
    topology: null,
    composition: null,
    selection: [],
    banner: null,
    exhaustion: null,
    addressMap: null,
    p2p: null,
    feasibility: null,
    model: null,
    prediction: null,
    busy: false,
  };
}

type Listener = (view: ViewState) => void;

export class ConsoleStore {
  view: ViewState = emptyView();
  private listeners: Listener[] = [];

  constructor(readonly client: GatewayClient) {}

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  private commit(patch: Partial<ViewState>): void {
    this.view = { ...this.view, ...patch };
    for (const listener of this.listeners) listener(this.view);
  }

  /** Version shown to the operator; all mutations must carry it. */
  get displayedVersion(): number {
    return this.view.composition?.version ?? 0;
  }

  async load(): Promise<void> {
    this.commit({ busy: true });
    try {
      const [topology, composition] = await Promise.all([
        this.client.getTopology(),
        this.client.getState(),
      ]);
      this.commit({ topology, composition, banner: null, busy: false });
    } catch (err) {
      this.commit({ banner: toBanner(err), busy: false });
    }
  }

  async refreshState(): Promise<void> {
    try {
      const composition = await this.client.getState();
      const keep = composition.pool.concat(
        Object.values(composition.assignments).flat(),
      );
      this.commit({
        composition,
        selection: this.view.selection.filter((id) => keep.includes(id)),
      });
    } catch (err) {
      this.commit({ banner: toBanner(err) });
    }
  }

  toggleSelect(endpointId: string): void {
    const selection = this.view.selection.includes(endpointId)
      ? this.view.selection.filter((id) => id !== endpointId)
      : [...this.view.selection, endpointId];
    this.commit({ selection });
  }

  clearSelection(): void {
    this.commit({ selection: [] });
  }

  /** POST /v1/compose with the displayed version; on success show the new
   * address map, on exhaustion show the structured detail so the operator
   * can shrink the selection. */
  async composeSelection(host: string): Promise<void> {
    await this.mutate(host, "compose");
  }

  async decomposeSelection(host: string): Promise<void> {
    await this.mutate(host, "decompose");
  }

  private async mutate(host: string, action: "compose" | "decompose") {
    const endpoints = [...this.view.selection];
    const version = this.displayedVersion;
    this.commit({ busy: true, exhaustion: null, banner: null });
    try {
      const composition =
        action === "compose"
          ? await this.client.compose(host, endpoints, version)
          : await this.client.decompose(host, endpoints, version);
      this.commit({ composition, selection: [], busy: false });
      if (action === "compose") {
        await this.showAddressMap(host);
      }
    } catch (err) {
      if (err instanceof ApiError && err.code === "VERSION_CONFLICT") {
        // someone else moved the state: surface it and re-sync, do not retry
        this.commit({
          banner: {
            kind: "conflict",
            text:
              `state changed underneath you (expected version ${version}, ` +
              `gateway is at ${err.body.actual_version}); view refreshed`,
          },
          busy: false,
        });
        await this.refreshState();
        return;
      }
      if (err instanceof ApiError && err.body.exhaustion) {
        this.commit({
          exhaustion: err.body.exhaustion,
          banner: toBanner(err),
          busy: false,
        });
        return;
      }
      this.commit({ banner: toBanner(err), busy: false });
    }
  }

  async showAddressMap(host: string): Promise<void> {
    try {
      this.commit({ addressMap: await this.client.addressMap(host) });
    } catch (err) {
      this.commit({ banner: toBanner(err) });
    }
  }

  /** P2P estimate for the first two selected GPUs. */
  async whatIfP2p(efficiency?: number): Promise<void> {
    const [a, b] = this.view.selection;
    if (!a || !b) {
      this.commit({
        banner: { kind: "info", text: "select two GPUs for a P2P estimate" },
      });
      return;
    }
    try {
      this.commit({ p2p: await this.client.p2p(a, b, efficiency) });
    } catch (err) {
      this.commit({ banner: toBanner(err) });
    }
  }

  async whatIfPool(host: string, requiredBytes: number): Promise<void> {
    try {
      this.commit({
        feasibility: await this.client.poolCheck(host, requiredBytes),
      });
    } catch (err) {
      this.commit({ banner: toBanner(err) });
    }
  }

  async fitModel(points: [number, number][]): Promise<void> {
    try {
      this.commit({ model: await this.client.fitScaling(points) });
    } catch (err) {
      this.commit({ banner: toBanner(err) });
    }
  }

  async whatIfPredict(n: number): Promise<void> {
    try {
      this.commit({ prediction: await this.client.predict(n) });
    } catch (err) {
      this.commit({ banner: toBanner(err) });
    }
  }
}

function toBanner(err: unknown): Banner {
  if (err instanceof ApiError) {
    return { kind: "error", text: `${err.code}: ${err.message}` };
  }
  return {
    kind: "error",
    text: `gateway unreachable: ${err instanceof Error ? err.message : err}`,
  };
}

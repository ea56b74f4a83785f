// Application state and the flows behind every button: deploy, provision,
// fail a link, poll. Pure logic; rendering subscribes to `onChange`.

import type { ApiClient } from './api.js';
import {
  ApiRequestError,
  type StatsResponse,
  type TopologyDoc,
  type TopologyResponse,
  type VllDescriptor,
  type VllEndpoint,
} from './types.js';

export interface Banner {
  kind: 'error' | 'info';
  text: string;
}

const SPARKLINE_POINTS = 30;

export class AppStore {
  topology: TopologyResponse | null = null;
  vlls: VllDescriptor[] = [];
  highlight: string[] = [];
  banner: Banner | null = null;
  deployed = false;
  busy = false;  // mutations are disabled while one is in flight
  loadHistory = new Map<string, number[]>();
  onChange: () => void = () => {};

  private lastStats: StatsResponse | null = null;

  constructor(private readonly api: ApiClient) {}

  private changed(): void {
    this.onChange();
  }

  private fail(error: unknown): void {
    // server messages surface verbatim; the operator decides what is next
    if (error instanceof ApiRequestError) {
      this.banner = { kind: 'error', text: `${error.code}: ${error.message}` };
    } else {
      this.banner = { kind: 'error', text: String(error) };
    }
    this.changed();
  }

  async deploy(doc: TopologyDoc): Promise<boolean> {
    if (this.busy) return false;
    this.busy = true;
    this.changed();
    try {
      const result = await this.api.postTopology(doc);
      this.deployed = result.deployed;
      this.banner = {
        kind: 'info',
        text: `deployed ${result.nodes} nodes, ${result.links} links; `
          + `reachability ${(result.reachability * 100).toFixed(0)}%`,
      };
      this.highlight = [];
      await this.refresh();
      return true;
    } catch (error) {
      this.fail(error);
      return false;
    } finally {
      this.busy = false;
      this.changed();
    }
  }

  async provisionVll(endA: VllEndpoint, endB: VllEndpoint): Promise<boolean> {
    if (this.busy) return false;
    this.busy = true;
    this.changed();
    try {
      const route = await this.api.getRoute(endA.node, endB.node);
      this.highlight = [...route.path];
      this.changed();
      const vll = await this.api.postVll(endA, endB);
      this.banner = { kind: 'info',
                      text: `${vll.id} active along ${vll.path.join(' - ')}` };
      this.vlls = await this.api.getVlls();
      return true;
    } catch (error) {
      this.highlight = [];
      this.fail(error);
      return false;
    } finally {
      this.busy = false;
      this.changed();
    }
  }

  async removeVll(id: string): Promise<void> {
    if (this.busy) return;
    this.busy = true;
    try {
      await this.api.deleteVll(id);
      this.vlls = await this.api.getVlls();
      this.highlight = [];
    } catch (error) {
      this.fail(error);
    } finally {
      this.busy = false;
      this.changed();
    }
  }

  async toggleLink(id: string): Promise<void> {
    if (this.busy || this.topology === null) return;
    const link = this.topology.links.find((l) => l.id === id);
    if (link === undefined) return;
    this.busy = true;
    this.changed();
    try {
      const result = await this.api.setLink(id, !link.up);
      if (!result.up && result.reachability < 1.0) {
        this.banner = {
          kind: 'error',
          text: `partition: reachability fell to `
            + `${(result.reachability * 100).toFixed(0)}%`,
        };
      } else {
        this.banner = { kind: 'info',
                        text: `${id} ${result.up ? 'up' : 'down'}` };
      }
    } catch (error) {
      this.fail(error);
    } finally {
      this.busy = false;
      this.changed();
    }
  }

  /** One poll cycle: topology, services and loads. Runs every second. */
  async poll(): Promise<void> {
    try {
      await this.refresh();
    } catch {
      // a missed poll is fine; the next one repaints
    }
  }

  private async refresh(): Promise<void> {
    const [topology, vlls, stats] = await Promise.all([
      this.api.getTopology(),
      this.api.getVlls(),
      this.api.getStats(),
    ]);
    this.topology = topology;
    this.vlls = vlls;
    this.pushStats(stats);
    this.changed();
  }

  private pushStats(stats: StatsResponse): void {
    if (this.lastStats !== null) {
      const dt = stats.t - this.lastStats.t;
      for (const [node, entry] of Object.entries(stats.nodes)) {
        const prev = this.lastStats.nodes[node];
        const rate = dt > 0 && prev
          ? (entry.units_total - prev.units_total) / dt : 0;
        const history = this.loadHistory.get(node) ?? [];
        history.push(rate);
        while (history.length > SPARKLINE_POINTS) history.shift();
        this.loadHistory.set(node, history);
      }
    }
    this.lastStats = stats;
  }

  failedVlls(): VllDescriptor[] {
    return this.vlls.filter((v) => v.state === 'Failed');
  }

  downLinks(): string[] {
    return (this.topology?.links ?? []).filter((l) => !l.up).map((l) => l.id);
  }
}

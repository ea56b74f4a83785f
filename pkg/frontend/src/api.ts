// Thin typed client over the controller's HTTP API. Every state change in
// the UI goes through these calls; there is no client-only network state.

import {
  ApiRequestError,
  type DeployResponse,
  type RouteResponse,
  type StatsResponse,
  type TopologyDoc,
  type TopologyResponse,
  type VllDescriptor,
  type VllEndpoint,
} from './types.js';

export interface LinkToggleResult {
  id: string;
  up: boolean;
  reachability: number;
}

export interface ApiClient {
  getTopology(): Promise<TopologyResponse>;
  postTopology(doc: TopologyDoc): Promise<DeployResponse>;
  getRoute(src: string, dst: string): Promise<RouteResponse>;
  getVlls(): Promise<VllDescriptor[]>;
  postVll(endA: VllEndpoint, endB: VllEndpoint): Promise<VllDescriptor>;
  deleteVll(id: string): Promise<void>;
  setLink(id: string, up: boolean): Promise<LinkToggleResult>;
  getStats(): Promise<StatsResponse>;
}

async function call<T>(method: string, path: string,
                       body?: unknown): Promise<T> {
  const response = await fetch(path, {
    method,
    headers: body !== undefined
      ? { 'Content-Type': 'application/json' } : undefined,
    body: body !== undefined ? JSON.stringify(body) : undefined,
  });
  const doc = await response.json();
  if (!response.ok) {
    throw new ApiRequestError(doc.error ?? 'Error',
                              doc.message ?? response.statusText,
                              response.status);
  }
  return doc as T;
}

export class HttpApiClient implements ApiClient {
  // base stays '' in the browser (same origin); tests point it elsewhere
  constructor(private readonly base: string = '') {}

  getTopology(): Promise<TopologyResponse> {
    return call('GET', `${this.base}/topology`);
  }

  postTopology(doc: TopologyDoc): Promise<DeployResponse> {
    return call('POST', `${this.base}/topology`, doc);
  }

  getRoute(src: string, dst: string): Promise<RouteResponse> {
    const q = new URLSearchParams({ src, dst });
    return call('GET', `${this.base}/route?${q}`);
  }

  async getVlls(): Promise<VllDescriptor[]> {
    const doc = await call<{ vlls: VllDescriptor[] }>(
      'GET', `${this.base}/vll`);
    return doc.vlls;
  }

  postVll(endA: VllEndpoint, endB: VllEndpoint): Promise<VllDescriptor> {
    return call('POST', `${this.base}/vll`, { end_a: endA, end_b: endB });
  }

  async deleteVll(id: string): Promise<void> {
    await call('DELETE', `${this.base}/vll/${id}`);
  }

  setLink(id: string, up: boolean): Promise<LinkToggleResult> {
    return call('POST', `${this.base}/link`, { id, up });
  }

  getStats(): Promise<StatsResponse> {
    return call('GET', `${this.base}/stats`);
  }
}

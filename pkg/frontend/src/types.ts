// Wire shapes shared with the controller API and the topology file schema.

export type Role = 'pe' | 'cr' | 'router' | 'ce';

export interface EndpointRef {
  node: string;
  port: number;
}

export interface LinkDecl {
  id: string;
  a: EndpointRef;
  b: EndpointRef;
  cost: number;
  delay: number;
  overlay: 'none' | 'vxlan' | 'vpn';
}

export interface NodeDecl {
  id: string;
  role: Role;
  reserved_vids?: number[];
}

export interface VllEndpoint {
  node: string;
  port: number;
  vid?: number;
}

export interface VllDecl {
  id: string;
  end_a: VllEndpoint;
  end_b: VllEndpoint;
}

export interface TopologyDoc {
  version: 1;
  coexistence: { mode: 'untagged' } | { mode: 'tagged'; ip_vid: number };
  nodes: NodeDecl[];
  links: LinkDecl[];
  vlls: VllDecl[];
  'x-ui'?: Record<string, { x: number; y: number }>;
}

// -- API responses ----------------------------------------------------------

export interface ApiNode {
  id: string;
  role: Role;
  loopback: string;
  dpid: number | null;
}

export interface ApiLink {
  id: string;
  a: EndpointRef;
  b: EndpointRef;
  cost: number;
  overlay: string;
  up: boolean;
}

export interface TopologyResponse {
  nodes: ApiNode[];
  links: ApiLink[];
  discovered?: unknown;
}

export interface RouteResponse {
  src: string;
  dst: string;
  path: string[];
}

export interface VllDescriptor {
  id: string;
  end_a: VllEndpoint;
  end_b: VllEndpoint;
  path: string[];
  link_vids: number[];
  cookie: number;
  state: 'Pending' | 'Active' | 'Failed';
  error: string | null;
}

export interface StatsResponse {
  t: number;
  nodes: Record<string, { units_total: number; counters: Record<string, unknown> }>;
}

export interface DeployResponse {
  deployed: boolean;
  nodes: number;
  links: number;
  converged_at: number;
  reachability: number;
  vlls: VllDescriptor[];
}

export interface ApiFailure {
  error: string;
  message: string;
}

export class ApiRequestError extends Error {
  constructor(public readonly code: string, message: string,
              public readonly status: number) {
    super(message);
  }
}

// The designer's canvas: nodes with positions, links, draw-time validation,
// and lossless export to the deployable document format.

import type { LinkDecl, NodeDecl, Role, TopologyDoc, VllDecl } from './types.js';

export interface CanvasNode {
  id: string;
  role: Role;
  x: number;
  y: number;
}

export interface CanvasLink {
  id: string;
  a: { node: string; port: number };
  b: { node: string; port: number };
  overlay: 'none' | 'vxlan' | 'vpn';
  cost: number;
}

export interface Violation {
  path: string;
  message: string;
}

export type DrawResult<T> = { ok: true; value: T } | { ok: false; error: string };

const ROLE_PREFIX: Record<Role, string> = {
  pe: 'pe', cr: 'cr', router: 'r', ce: 'ce',
};

export class CanvasModel {
  nodes = new Map<string, CanvasNode>();
  links = new Map<string, CanvasLink>();
  vlls: VllDecl[] = [];
  coexistence: TopologyDoc['coexistence'] = { mode: 'untagged' };
  selection: string | null = null;
  dirty = false;

  private nextPort(nodeId: string): number {
    const used = new Set<number>();
    for (const link of this.links.values()) {
      if (link.a.node === nodeId) used.add(link.a.port);
      if (link.b.node === nodeId) used.add(link.b.port);
    }
    for (const vll of this.vlls) {
      if (vll.end_a.node === nodeId) used.add(vll.end_a.port);
      if (vll.end_b.node === nodeId) used.add(vll.end_b.port);
    }
    for (let p = 1; p < 100; p++) {
      if (!used.has(p)) return p;
    }
    throw new Error(`node ${nodeId} has no free ports`);
  }

  private freshId(prefix: string, taken: (id: string) => boolean): string {
    for (let i = 1; ; i++) {
      const id = `${prefix}${i}`;
      if (!taken(id)) return id;
    }
  }

  addNode(role: Role, x: number, y: number, id?: string): CanvasNode {
    const nodeId = id ?? this.freshId(ROLE_PREFIX[role],
                                      (candidate) => this.nodes.has(candidate));
    if (this.nodes.has(nodeId)) throw new Error(`duplicate node ${nodeId}`);
    const node = { id: nodeId, role, x, y };
    this.nodes.set(nodeId, node);
    this.dirty = true;
    return node;
  }

  // Draw-time validation: the invalid cases never make it onto the canvas.
  addLink(aId: string, bId: string,
          overlay: CanvasLink['overlay'] = 'none'): DrawResult<CanvasLink> {
    const a = this.nodes.get(aId);
    const b = this.nodes.get(bId);
    if (!a || !b) return { ok: false, error: `unknown node ${a ? bId : aId}` };
    if (aId === bId) return { ok: false, error: 'a link needs two distinct nodes' };
    if (a.role === 'ce' && b.role === 'ce') {
      return { ok: false, error: 'CE-CE links are not allowed' };
    }
    for (const [ce, other] of [[a, b], [b, a]] as const) {
      if (ce.role === 'ce' && other.role !== 'pe') {
        return { ok: false, error: `CE ${ce.id} must attach to a PE` };
      }
    }
    const id = this.freshId('l', (candidate) => this.links.has(candidate));
    const link: CanvasLink = {
      id,
      a: { node: aId, port: this.nextPort(aId) },
      b: { node: bId, port: this.nextPort(bId) },
      overlay,
      cost: 1,
    };
    this.links.set(id, link);
    this.dirty = true;
    return { ok: true, value: link };
  }

  addVll(aId: string, bId: string): DrawResult<VllDecl> {
    for (const id of [aId, bId]) {
      const node = this.nodes.get(id);
      if (!node) return { ok: false, error: `unknown node ${id}` };
      if (node.role !== 'pe') {
        return { ok: false, error: `vll endpoint ${id} must be a PE` };
      }
    }
    const vll: VllDecl = {
      id: this.freshId('v', (candidate) =>
        this.vlls.some((v) => v.id === candidate)),
      end_a: { node: aId, port: this.nextPort(aId) },
      end_b: { node: bId, port: this.nextPort(bId) },
    };
    this.vlls.push(vll);
    this.dirty = true;
    return { ok: true, value: vll };
  }

  removeNode(id: string): void {
    this.nodes.delete(id);
    for (const [lid, link] of [...this.links]) {
      if (link.a.node === id || link.b.node === id) this.links.delete(lid);
    }
    this.vlls = this.vlls.filter(
      (v) => v.end_a.node !== id && v.end_b.node !== id);
    this.dirty = true;
  }

  removeLink(id: string): void {
    this.links.delete(id);
    this.dirty = true;
  }

  validate(): Violation[] {
    const out: Violation[] = [];
    if (this.nodes.size === 0) {
      out.push({ path: 'nodes', message: 'canvas is empty' });
    }
    for (const link of this.links.values()) {
      for (const end of [link.a, link.b]) {
        if (!this.nodes.has(end.node)) {
          out.push({ path: `links.${link.id}`,
                     message: `dangling endpoint ${end.node}` });
        }
      }
    }
    for (const vll of this.vlls) {
      for (const end of [vll.end_a, vll.end_b]) {
        const node = this.nodes.get(end.node);
        if (!node) {
          out.push({ path: `vlls.${vll.id}`,
                     message: `dangling endpoint ${end.node}` });
        } else if (node.role !== 'pe') {
          out.push({ path: `vlls.${vll.id}`,
                     message: `endpoint ${end.node} is not a PE` });
        }
      }
    }
    return out;
  }

  exportDoc(): TopologyDoc {
    const violations = this.validate();
    if (violations.length > 0) {
      throw new Error(`cannot export: ${violations[0].path}: `
                      + violations[0].message);
    }
    const nodes: NodeDecl[] = [...this.nodes.values()]
      .sort((m, n) => m.id.localeCompare(n.id))
      .map((n) => ({ id: n.id, role: n.role }));
    const links: LinkDecl[] = [...this.links.values()]
      .sort((m, n) => m.id.localeCompare(n.id))
      .map((l) => ({ id: l.id, a: { ...l.a }, b: { ...l.b },
                     cost: l.cost, delay: 0.001, overlay: l.overlay }));
    const positions: Record<string, { x: number; y: number }> = {};
    for (const node of [...this.nodes.values()]
        .sort((m, n) => m.id.localeCompare(n.id))) {
      positions[node.id] = { x: node.x, y: node.y };
    }
    return {
      version: 1,
      coexistence: this.coexistence,
      nodes,
      links,
      vlls: this.vlls.map((v) => ({ id: v.id, end_a: { ...v.end_a },
                                    end_b: { ...v.end_b } })),
      'x-ui': positions,
    };
  }

  static importDoc(doc: TopologyDoc): CanvasModel {
    const model = new CanvasModel();
    model.coexistence = doc.coexistence;
    const positions = doc['x-ui'] ?? {};
    doc.nodes.forEach((n, i) => {
      const pos = positions[n.id] ?? { x: 80 + (i % 6) * 120,
                                       y: 80 + Math.floor(i / 6) * 120 };
      model.addNode(n.role, pos.x, pos.y, n.id);
    });
    for (const l of doc.links) {
      model.links.set(l.id, { id: l.id, a: { ...l.a }, b: { ...l.b },
                              overlay: l.overlay ?? 'none',
                              cost: l.cost ?? 1 });
    }
    model.vlls = doc.vlls.map((v) => ({ id: v.id, end_a: { ...v.end_a },
                                        end_b: { ...v.end_b } }));
    model.dirty = false;
    return model;
  }
}

// Graph-shape equality, ignoring selection and dirtiness.
export function isomorphic(a: CanvasModel, b: CanvasModel): boolean {
  const shape = (m: CanvasModel) => JSON.stringify(m.exportDoc());
  return shape(a) === shape(b);
}

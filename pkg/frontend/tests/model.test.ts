import { mkdirSync, readFileSync, writeFileSync, existsSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';
import { describe, expect, it } from 'vitest';

import { CanvasModel, isomorphic } from '../src/model.js';
import type { TopologyDoc } from '../src/types.js';

const HERE = dirname(fileURLToPath(import.meta.url));

function buildDesign(): CanvasModel {
  const model = new CanvasModel();
  model.addNode('pe', 100, 100, 'pe1');
  model.addNode('cr', 250, 100, 'cr1');
  model.addNode('cr', 250, 250, 'cr2');
  model.addNode('pe', 400, 100, 'pe2');
  model.addNode('ce', 40, 180, 'ce1');
  model.addNode('ce', 470, 180, 'ce2');
  expect(model.addLink('pe1', 'cr1').ok).toBe(true);
  expect(model.addLink('cr1', 'pe2').ok).toBe(true);
  expect(model.addLink('pe1', 'cr2').ok).toBe(true);
  expect(model.addLink('cr2', 'pe2').ok).toBe(true);
  expect(model.addLink('pe1', 'ce1').ok).toBe(true);
  expect(model.addLink('pe2', 'ce2').ok).toBe(true);
  expect(model.addVll('pe1', 'pe2').ok).toBe(true);
  return model;
}

describe('canvas export', () => {
  it('produces a schema-shaped version 1 document', () => {
    const doc = buildDesign().exportDoc();
    expect(doc.version).toBe(1);
    expect(doc.coexistence).toEqual({ mode: 'untagged' });
    expect(doc.nodes.map((n) => n.id)).toEqual(
      ['ce1', 'ce2', 'cr1', 'cr2', 'pe1', 'pe2']);
    expect(doc.links).toHaveLength(6);
    for (const link of doc.links) {
      expect(link.a.port).toBeGreaterThanOrEqual(1);
      expect(link.a.port).toBeLessThan(100);
      expect(link.overlay).toBe('none');
    }
    expect(doc.vlls).toHaveLength(1);
    expect(doc['x-ui']?.pe1).toEqual({ x: 100, y: 100 });
  });

  it('ports never collide on one node', () => {
    const doc = buildDesign().exportDoc();
    const used = new Map<string, Set<number>>();
    const claim = (node: string, port: number) => {
      const set = used.get(node) ?? new Set();
      expect(set.has(port)).toBe(false);
      set.add(port);
      used.set(node, set);
    };
    for (const link of doc.links) {
      claim(link.a.node, link.a.port);
      claim(link.b.node, link.b.port);
    }
    for (const vll of doc.vlls) {
      claim(vll.end_a.node, vll.end_a.port);
      claim(vll.end_b.node, vll.end_b.port);
    }
  });

  it('round-trips to an isomorphic canvas with positions intact', () => {
    const original = buildDesign();
    const imported = CanvasModel.importDoc(
      JSON.parse(JSON.stringify(original.exportDoc())) as TopologyDoc);
    expect(isomorphic(original, imported)).toBe(true);
    expect(imported.nodes.get('cr2')).toMatchObject({ x: 250, y: 250 });
  });

  it('refuses to export an empty canvas', () => {
    expect(() => new CanvasModel().exportDoc()).toThrow(/empty/);
  });

  it('writes the committed fixture byte-for-byte', () => {
    const text = JSON.stringify(buildDesign().exportDoc(), null, 2) + '\n';
    const path = join(HERE, '..', 'testdata', 'ui-export.json');
    mkdirSync(dirname(path), { recursive: true });
    if (existsSync(path)) {
      expect(readFileSync(path, 'utf-8')).toBe(text);
    } else {
      writeFileSync(path, text);
    }
  });
});

describe('draw-time validation', () => {
  it('rejects CE-CE links before they reach the canvas', () => {
    const model = new CanvasModel();
    model.addNode('ce', 0, 0, 'ce1');
    model.addNode('ce', 10, 0, 'ce2');
    const result = model.addLink('ce1', 'ce2');
    expect(result.ok).toBe(false);
    if (!result.ok) expect(result.error).toMatch(/CE-CE/);
    expect(model.links.size).toBe(0);
  });

  it('rejects CE attachment to anything but a PE', () => {
    const model = new CanvasModel();
    model.addNode('ce', 0, 0, 'ce1');
    model.addNode('cr', 10, 0, 'cr1');
    const result = model.addLink('ce1', 'cr1');
    expect(result.ok).toBe(false);
    if (!result.ok) expect(result.error).toMatch(/must attach to a PE/);
  });

  it('rejects vll endpoints that are not PEs', () => {
    const model = new CanvasModel();
    model.addNode('pe', 0, 0, 'pe1');
    model.addNode('cr', 10, 0, 'cr1');
    const result = model.addVll('pe1', 'cr1');
    expect(result.ok).toBe(false);
  });

  it('flags dangling references in validate()', () => {
    const model = buildDesign();
    model.nodes.delete('cr1');
    const violations = model.validate();
    expect(violations.some((v) => v.message.includes('cr1'))).toBe(true);
  });

  it('removing a node removes its links and services', () => {
    const model = buildDesign();
    model.removeNode('pe1');
    expect(model.validate()).toEqual([]);
    expect([...model.links.values()]
      .every((l) => l.a.node !== 'pe1' && l.b.node !== 'pe1')).toBe(true);
    expect(model.vlls).toHaveLength(0);
  });
});

// SVG painting of the canvas plus the live panel. Thin: all decisions are
// made in the model and store; this file only draws what they hold.

import type { CanvasModel } from './model.js';
import type { AppStore } from './store.js';

const ROLE_COLOR: Record<string, string> = {
  pe: '#2b6cb0', cr: '#4a5568', router: '#805ad5', ce: '#38a169',
};

const SVG_NS = 'http://www.w3.org/2000/svg';

function el(name: string, attrs: Record<string, string>,
            text?: string): SVGElement {
  const node = document.createElementNS(SVG_NS, name);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderCanvas(svg: SVGSVGElement, model: CanvasModel,
                             store: AppStore,
                             onNodeClick: (id: string) => void,
                             onLinkClick: (id: string) => void): void {
  svg.replaceChildren();
  const downLinks = new Set(store.downLinks());
  const highlight = new Set<string>();
  for (let i = 0; i + 1 < store.highlight.length; i++) {
    highlight.add(`${store.highlight[i]}|${store.highlight[i + 1]}`);
    highlight.add(`${store.highlight[i + 1]}|${store.highlight[i]}`);
  }

  for (const link of model.links.values()) {
    const a = model.nodes.get(link.a.node);
    const b = model.nodes.get(link.b.node);
    if (!a || !b) continue;
    const onPath = highlight.has(`${a.id}|${b.id}`);
    const line = el('line', {
      x1: String(a.x), y1: String(a.y), x2: String(b.x), y2: String(b.y),
      stroke: onPath ? '#dd6b20' : downLinks.has(link.id) ? '#e53e3e'
        : '#a0aec0',
      'stroke-width': onPath ? '5' : '2.5',
      'stroke-dasharray': downLinks.has(link.id) ? '6,6' : '',
      class: 'link',
      'data-id': link.id,
    });
    line.addEventListener('click', () => onLinkClick(link.id));
    svg.appendChild(line);
    if (link.overlay !== 'none') {
      svg.appendChild(el('text', {
        x: String((a.x + b.x) / 2), y: String((a.y + b.y) / 2 - 6),
        class: 'overlay-tag',
      }, link.overlay));
    }
  }

  const vllEndpoints = new Set<string>();
  for (const vll of store.vlls) {
    vllEndpoints.add(vll.end_a.node);
    vllEndpoints.add(vll.end_b.node);
  }

  for (const node of model.nodes.values()) {
    const group = el('g', { class: 'node', 'data-id': node.id });
    const selected = model.selection === node.id;
    group.appendChild(el('circle', {
      cx: String(node.x), cy: String(node.y), r: '18',
      fill: ROLE_COLOR[node.role] ?? '#000',
      stroke: selected ? '#dd6b20' : vllEndpoints.has(node.id)
        ? '#2c7a7b' : '#1a202c',
      'stroke-width': selected ? '4' : '1.5',
    }));
    group.appendChild(el('text', {
      x: String(node.x), y: String(node.y + 32), class: 'node-label',
    }, node.id));
    group.addEventListener('click', (event) => {
      event.stopPropagation();
      onNodeClick(node.id);
    });
    svg.appendChild(group);
  }
}

export function renderPanel(store: AppStore): void {
  const banner = document.getElementById('banner')!;
  if (store.banner) {
    banner.textContent = store.banner.text;
    banner.className = `banner ${store.banner.kind}`;
  } else {
    banner.textContent = '';
    banner.className = 'banner';
  }

  const list = document.getElementById('vll-list')!;
  list.replaceChildren();
  for (const vll of store.vlls) {
    const item = document.createElement('li');
    item.className = `vll vll-${vll.state.toLowerCase()}`;
    item.textContent = `${vll.id} ${vll.end_a.node}:${vll.end_a.port} - `
      + `${vll.end_b.node}:${vll.end_b.port} [${vll.state}]`
      + (vll.error ? ` ${vll.error}` : '');
    const remove = document.createElement('button');
    remove.textContent = 'x';
    remove.addEventListener('click', () =>
      void (window as unknown as { appRemoveVll(id: string): void })
        .appRemoveVll(vll.id));
    item.appendChild(remove);
    list.appendChild(item);
  }

  const loads = document.getElementById('loads')!;
  loads.replaceChildren();
  for (const [node, history] of [...store.loadHistory.entries()].sort()) {
    const row = document.createElement('div');
    row.className = 'load-row';
    const label = document.createElement('span');
    label.textContent = node;
    row.appendChild(label);
    row.appendChild(sparkline(history));
    loads.appendChild(row);
  }
}

function sparkline(history: number[]): SVGElement {
  const width = 120;
  const height = 18;
  const svg = el('svg', { width: String(width), height: String(height),
                          class: 'sparkline' });
  if (history.length > 1) {
    const peak = Math.max(...history, 1e-9);
    const step = width / (history.length - 1);
    const points = history.map((value, i) =>
      `${(i * step).toFixed(1)},`
      + `${(height - 2 - (value / peak) * (height - 4)).toFixed(1)}`);
    svg.appendChild(el('polyline', {
      points: points.join(' '), fill: 'none', stroke: '#2b6cb0',
      'stroke-width': '1.5',
    }));
  }
  return svg;
}

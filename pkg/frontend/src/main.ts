// Entry point: tools, canvas events, the deploy/provision/toggle flows and
// the one-second poll loop.

import { HttpApiClient } from './api.js';
import { CanvasModel, type Violation } from './model.js';
import { renderCanvas, renderPanel } from './render.js';
import { AppStore } from './store.js';
import type { Role, TopologyDoc } from './types.js';

type Tool = 'select' | 'node' | 'link' | 'vll' | 'delete' | 'toggle';

const api = new HttpApiClient();
const store = new AppStore(api);
let model = new CanvasModel();
let tool: Tool = 'node';
let role: Role = 'pe';
let pendingEndpoint: string | null = null;

const svg = document.getElementById('canvas') as unknown as SVGSVGElement;

function paint(): void {
  renderCanvas(svg, model, store, onNodeClick, onLinkClick);
  renderPanel(store);
  const deployButton = document.getElementById('deploy') as HTMLButtonElement;
  deployButton.disabled = store.busy;
  document.getElementById('tool-state')!.textContent =
    `${tool}${tool === 'node' ? `:${role}` : ''}`
    + (pendingEndpoint ? ` from ${pendingEndpoint}` : '');
}

store.onChange = paint;

function showViolations(violations: Violation[]): void {
  store.banner = {
    kind: 'error',
    text: violations.map((v) => `${v.path}: ${v.message}`).join('; '),
  };
  paint();
}

function onNodeClick(id: string): void {
  if (tool === 'delete') {
    model.removeNode(id);
  } else if (tool === 'link' || tool === 'vll') {
    if (pendingEndpoint === null) {
      pendingEndpoint = id;
    } else {
      const result = tool === 'link'
        ? model.addLink(pendingEndpoint, id)
        : model.addVll(pendingEndpoint, id);
      if (!result.ok) {
        store.banner = { kind: 'error', text: result.error };
      }
      pendingEndpoint = null;
    }
  } else if (tool === 'select') {
    model.selection = id;
  }
  paint();
}

function onLinkClick(id: string): void {
  if (tool === 'delete') {
    model.removeLink(id);
    paint();
  } else if (tool === 'toggle') {
    void store.toggleLink(id);
  }
}

svg.addEventListener('click', (event) => {
  if (tool !== 'node') return;
  const rect = svg.getBoundingClientRect();
  model.addNode(role, event.clientX - rect.left, event.clientY - rect.top);
  paint();
});

function bindToolbar(): void {
  for (const button of document.querySelectorAll<HTMLButtonElement>(
      '[data-tool]')) {
    button.addEventListener('click', () => {
      tool = button.dataset.tool as Tool;
      if (button.dataset.role) role = button.dataset.role as Role;
      pendingEndpoint = null;
      paint();
    });
  }

  document.getElementById('deploy')!.addEventListener('click', () => {
    const violations = model.validate();
    if (violations.length > 0) {
      showViolations(violations);
      return;
    }
    void store.deploy(model.exportDoc());
  });

  document.getElementById('export')!.addEventListener('click', () => {
    const violations = model.validate();
    if (violations.length > 0) {
      showViolations(violations);
      return;
    }
    const text = JSON.stringify(model.exportDoc(), null, 2);
    const blob = new Blob([text], { type: 'application/json' });
    const anchor = document.createElement('a');
    anchor.href = URL.createObjectURL(blob);
    anchor.download = 'topology.json';
    anchor.click();
    URL.revokeObjectURL(anchor.href);
  });

  const importInput = document.getElementById('import') as HTMLInputElement;
  importInput.addEventListener('change', async () => {
    const file = importInput.files?.[0];
    if (!file) return;
    try {
      const doc = JSON.parse(await file.text()) as TopologyDoc;
      model = CanvasModel.importDoc(doc);
      store.banner = { kind: 'info', text: `imported ${file.name}` };
    } catch (error) {
      store.banner = { kind: 'error', text: `import failed: ${error}` };
    }
    paint();
  });

  document.getElementById('provision')!.addEventListener('click', () => {
    const ends = model.vlls.filter(
      (v) => !store.vlls.some((live) => samePorts(live, v)));
    const next = ends[0];
    if (next === undefined) {
      store.banner = { kind: 'info',
                       text: 'draw a vll first (vll tool, two PEs)' };
      paint();
      return;
    }
    void store.provisionVll(next.end_a, next.end_b);
  });
}

function samePorts(a: { end_a: { node: string; port: number } },
                   b: { end_a: { node: string; port: number } }): boolean {
  return a.end_a.node === b.end_a.node && a.end_a.port === b.end_a.port;
}

(window as unknown as { appRemoveVll(id: string): void }).appRemoveVll =
  (id: string) => void store.removeVll(id);

bindToolbar();
paint();
window.setInterval(() => {
  if (store.deployed) void store.poll();
}, 1000);

// Pure view -> HTML-string rendering; snapshot tests pin the output.

import { PlanView, TurnView, dependentsOfFailed } from './state.js';

function esc(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

/** Left-to-right DAG layout: column index = longest path from a root. */
export function layoutColumns(plan: PlanView): number[][] {
  const depth = new Map<number, number>();
  for (const step of plan.steps) depth.set(step.id, 0);
  let changed = true;
  while (changed) {
    changed = false;
    for (const [src, dst] of plan.edges) {
      const want = (depth.get(src) ?? 0) + 1;
      if ((depth.get(dst) ?? 0) < want) {
        depth.set(dst, want);
        changed = true;
      }
    }
  }
  const columns: number[][] = [];
  for (const step of plan.steps) {
    const d = depth.get(step.id) ?? 0;
    while (columns.length <= d) columns.push([]);
    columns[d].push(step.id);
  }
  return columns;
}

export function renderPlan(plan: PlanView): string {
  const effectiveFailed = dependentsOfFailed(plan);
  const columns = layoutColumns(plan)
    .map((column) => {
      const nodes = column
        .map((id) => {
          const step = plan.steps.find((s) => s.id === id)!;
          let status = plan.statuses.get(id) ?? 'pending';
          if (effectiveFailed.has(id)) status = 'failed';
          return `<div class="node status-${status}" data-step="${id}"><span class="badge">${status}</span>${esc(step.tool)}</div>`;
        })
        .join('');
      return `<div class="column">${nodes}</div>`;
    })
    .join('');
  const edges = plan.edges.map(([a, b]) => `${a}-&gt;${b}`).join(', ');
  return `<div class="plan plan-${plan.shape}"><div class="shape">${esc(plan.shape)}</div><div class="dag">${columns}</div><div class="edges">${edges}</div></div>`;
}

function measurementRows(rendering: string): string[] {
  const body = rendering.replace(/^Estimated measurements\s*.\s*/u, '');
  return body.split(', ').map((part) => part.trim()).filter(Boolean);
}

export function renderTransform(kind: string, rendering: string): string {
  if (kind === 'contact') {
    if (rendering.startsWith('Contact detected on: ')) {
      const items = rendering
        .slice('Contact detected on: '.length)
        .split(', ')
        .map((part) => `<li>${esc(part)}</li>`)
        .join('');
      return `<div class="card contact"><ul>${items}</ul></div>`;
    }
    return `<div class="card contact"><p>${esc(rendering)}</p></div>`;
  }
  if (kind === 'shape' || kind === 'measurement') {
    const rows = measurementRows(rendering)
      .map((row) => {
        const [name, value] = row.split(': ');
        return `<tr><td>${esc(name ?? row)}</td><td>${esc(value ?? '')}</td></tr>`;
      })
      .join('');
    return `<div class="card measurements"><table>${rows}</table></div>`;
  }
  if (kind === 'pose_render') {
    return `<div class="card image"><figure data-ref="${esc(rendering)}">${esc(rendering)}</figure></div>`;
  }
  return `<div class="card text"><p>${esc(rendering)}</p></div>`;
}

export function renderArtifact(tool: string, artifact: { kind: string; value: unknown }): string {
  const kind = artifact.kind;
  if (kind === 'text') {
    return `<div class="card text"><span class="tool">${esc(tool)}</span><p>${esc(String(artifact.value))}</p></div>`;
  }
  if (kind === 'image_ref' || kind === 'motion_ref') {
    return `<div class="card image"><span class="tool">${esc(tool)}</span><figure data-ref="${esc(String(artifact.value))}">${esc(String(artifact.value))}</figure></div>`;
  }
  // Vector artifacts stay opaque in the transcript; transforms render them.
  const length = Array.isArray(artifact.value) ? artifact.value.length : 0;
  return `<div class="card vector"><span class="tool">${esc(tool)}</span><code>${esc(kind)}[${length}]</code></div>`;
}

export function renderChoice(choice: {
  options: { label: string; rendering: string }[];
  resolvedLabel: string | null;
  fallback: boolean;
}): string {
  const options = choice.options
    .map((option) => {
      const selected = option.label === choice.resolvedLabel ? ' selected' : '';
      return `<li class="option${selected}" data-label="${option.label}"><b>${option.label}.</b> ${esc(option.rendering)}</li>`;
    })
    .join('');
  const note = choice.fallback ? '<div class="note">fallback to A</div>' : '';
  return `<div class="choice-panel"><ol>${options}</ol>${note}</div>`;
}

/** One rendered block per received event, in sequence order. */
export function renderTurn(view: TurnView): string {
  const sections: string[] = [`<div class="bubble user">${esc(view.userText)}</div>`];
  for (const block of view.blocks) {
    let body: string;
    switch (block.kind) {
      case 'plan':
        body = view.plan ? renderPlan(view.plan) : esc(block.summary);
        break;
      case 'step_finished': {
        const artifact = block.ref !== undefined ? view.artifacts[block.ref] : undefined;
        body = artifact
          ? renderArtifact(artifact.tool, artifact.artifact)
          : `<span class="status">${esc(block.summary)}</span>`;
        break;
      }
      case 'transform': {
        const transform = block.ref !== undefined ? view.transforms[block.ref] : undefined;
        body = transform
          ? renderTransform(transform.kind, transform.rendering)
          : esc(block.summary);
        break;
      }
      case 'choice_presented':
      case 'choice_resolved':
        body = view.choice ? renderChoice(view.choice) : esc(block.summary);
        break;
      case 'pipeline_error':
        body = `<div class="error">${esc(block.summary)}</div>`;
        break;
      case 'answer':
        body = `<div class="bubble answer">${esc(view.answer ?? '')}</div>`;
        break;
      default:
        body = `<span class="status">${esc(block.summary)}</span>`;
    }
    sections.push(`<section class="event event-${block.kind}" data-seq="${block.seq}">${body}</section>`);
  }
  return `<article class="turn">${sections.join('\n')}</article>`;
}

export function renderBanner(connectionLost: boolean): string {
  return connectionLost
    ? '<div class="banner reconnect">connection lost; reconnecting…</div>'
    : '';
}

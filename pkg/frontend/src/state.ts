// Turn state: folds the event stream into a view model, one block per event.
//
// The mirror invariant the snapshot tests pin down: every accepted event
// appends exactly one block, in sequence order. Plan-node status badges and
// the choice panel are derived state updated by later events; the block list
// itself is append-only.

import { Artifact, ChoiceOption, PlanStep, StepStatus, TurnEvent, isTurnEvent } from './types.js';

export interface PlanView {
  shape: string;
  kind: string;
  steps: PlanStep[];
  edges: [number, number][];
  statuses: Map<number, StepStatus>;
}

export interface Block {
  seq: number;
  kind: string;
  summary: string;
  /** Index into artifacts (step_finished) or transforms (transform). */
  ref?: number;
}

export interface ChoicePanel {
  options: ChoiceOption[];
  resolvedLabel: string | null;
  fallback: boolean;
}

export interface TurnView {
  userText: string;
  blocks: Block[];
  plan: PlanView | null;
  artifacts: { step: number; artifact: Artifact; tool: string }[];
  transforms: { step: number; kind: string; rendering: string }[];
  choice: ChoicePanel | null;
  errors: { stage: string; cause: string }[];
  answer: string | null;
  nextSeq: number;
}

export function newTurn(userText: string): TurnView {
  return {
    userText,
    blocks: [],
    plan: null,
    artifacts: [],
    transforms: [],
    choice: null,
    errors: [],
    answer: null,
    nextSeq: 0,
  };
}

function describe(event: TurnEvent): string {
  const p = event.payload as Record<string, any>;
  switch (event.kind) {
    case 'plan':
      return p.kind === 'direct' ? 'direct answer' : `${p.shape} plan: ${p.graph ?? ''}`;
    case 'step_started':
      return `step ${p.step} ${p.tool} running`;
    case 'step_finished':
      return p.status === 'ok'
        ? `step ${p.step} ${p.tool} ok (${p.artifact?.kind})`
        : `step ${p.step} ${p.tool} failed: ${p.error}`;
    case 'transform':
      return `${p.kind}: ${p.rendering}`;
    case 'choice_presented':
      return `choices: ${(p.options ?? []).map((o: any) => o.label).join(', ')}`;
    case 'choice_resolved':
      return `chose ${p.label}${p.fallback ? ' (fallback)' : ''}`;
    case 'pipeline_error':
      return `${p.stage} error: ${p.cause}`;
    case 'answer':
      return String(p.text ?? '');
  }
}

/**
 * Fold one event into the view. Returns true when the event was accepted.
 * Malformed or out-of-order events are dropped with a console warning and
 * leave the view unchanged.
 */
export function applyEvent(view: TurnView, raw: unknown): boolean {
  if (!isTurnEvent(raw)) {
    console.warn('dropping malformed event:', raw);
    return false;
  }
  const event = raw;
  if (event.seq !== view.nextSeq) {
    console.warn(`dropping out-of-order event seq=${event.seq}, expected ${view.nextSeq}`);
    return false;
  }
  const p = event.payload as Record<string, any>;
  let ref: number | undefined;
  switch (event.kind) {
    case 'plan': {
      const steps: PlanStep[] = Array.isArray(p.steps) ? p.steps : [];
      const statuses = new Map<number, StepStatus>();
      for (const step of steps) statuses.set(step.id, 'pending');
      view.plan = {
        shape: String(p.shape ?? 'node'),
        kind: String(p.kind ?? 'direct'),
        steps,
        edges: Array.isArray(p.edges) ? p.edges : [],
        statuses,
      };
      break;
    }
    case 'step_started':
      view.plan?.statuses.set(p.step, 'running');
      break;
    case 'step_finished': {
      const status: StepStatus = p.status === 'ok' ? 'ok' : 'failed';
      view.plan?.statuses.set(p.step, status);
      if (status === 'ok' && p.artifact) {
        ref = view.artifacts.length;
        view.artifacts.push({ step: p.step, artifact: p.artifact, tool: String(p.tool) });
      }
      break;
    }
    case 'transform':
      ref = view.transforms.length;
      view.transforms.push({
        step: Number(p.step),
        kind: String(p.kind),
        rendering: String(p.rendering),
      });
      break;
    case 'choice_presented':
      view.choice = {
        options: Array.isArray(p.options) ? p.options : [],
        resolvedLabel: null,
        fallback: false,
      };
      break;
    case 'choice_resolved':
      if (view.choice) {
        view.choice.resolvedLabel = String(p.label);
        view.choice.fallback = Boolean(p.fallback);
      }
      break;
    case 'pipeline_error':
      view.errors.push({ stage: String(p.stage), cause: String(p.cause) });
      break;
    case 'answer':
      view.answer = String(p.text ?? '');
      break;
  }
  view.blocks.push({ seq: event.seq, kind: event.kind, summary: describe(event), ref });
  view.nextSeq += 1;
  return true;
}

/** Failed steps poison their dependents; mirror that on the badges. */
export function dependentsOfFailed(plan: PlanView): Set<number> {
  const failed = new Set<number>();
  for (const [id, status] of plan.statuses) if (status === 'failed') failed.add(id);
  let grew = true;
  while (grew) {
    grew = false;
    for (const [src, dst] of plan.edges) {
      if (failed.has(src) && !failed.has(dst)) {
        failed.add(dst);
        grew = true;
      }
    }
  }
  return failed;
}

/**
 * Transcript and input gating: the send control is disabled from sendMessage
 * until the turn's answer event arrives (or the connection drops).
 */
export class TranscriptState {
  turns: TurnView[] = [];
  inputEnabled = true;
  connectionLost = false;

  beginTurn(userText: string): TurnView {
    const turn = newTurn(userText);
    this.turns.push(turn);
    this.inputEnabled = false;
    this.connectionLost = false;
    return turn;
  }

  handleEvent(raw: unknown): void {
    const turn = this.turns[this.turns.length - 1];
    if (!turn) return;
    if (applyEvent(turn, raw) && turn.answer !== null) {
      this.inputEnabled = true;
    }
  }

  handleConnectionLost(): void {
    this.connectionLost = true;
    this.inputEnabled = true;
  }
}

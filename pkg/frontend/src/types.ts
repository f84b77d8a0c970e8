// Wire types for the chat service: one JSON TurnEvent per SSE data line.

export type EventKind =
  | 'plan'
  | 'step_started'
  | 'step_finished'
  | 'transform'
  | 'choice_presented'
  | 'choice_resolved'
  | 'pipeline_error'
  | 'answer';

export const EVENT_KINDS: readonly EventKind[] = [
  'plan',
  'step_started',
  'step_finished',
  'transform',
  'choice_presented',
  'choice_resolved',
  'pipeline_error',
  'answer',
];

export interface TurnEvent {
  seq: number;
  kind: EventKind;
  payload: Record<string, unknown>;
}

export interface PlanStep {
  id: number;
  tool: string;
}

export type StepStatus = 'pending' | 'running' | 'ok' | 'failed';

export interface Artifact {
  kind: string;
  value: unknown;
}

export interface ChoiceOption {
  label: string;
  rendering: string;
}

/** Shape-check a decoded SSE payload; malformed events are dropped upstream. */
export function isTurnEvent(value: unknown): value is TurnEvent {
  if (typeof value !== 'object' || value === null) return false;
  const event = value as Record<string, unknown>;
  return (
    typeof event.seq === 'number' &&
    Number.isInteger(event.seq) &&
    typeof event.kind === 'string' &&
    (EVENT_KINDS as readonly string[]).includes(event.kind) &&
    typeof event.payload === 'object' &&
    event.payload !== null
  );
}

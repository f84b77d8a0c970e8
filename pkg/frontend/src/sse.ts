// Server-sent-event framing over fetch streaming, plus the service client.

import { TurnEvent, isTurnEvent } from './types.js';

/**
 * Incremental SSE frame parser. Feed it raw text chunks in any split; it
 * yields the JSON payload of each complete `data:` frame. Malformed frames
 * are dropped with a console warning so one bad event cannot wedge the UI.
 */
export class SseFrameParser {
  private buffer = '';

  push(chunk: string): unknown[] {
    this.buffer += chunk;
    const frames = this.buffer.split(/\r?\n\r?\n/);
    this.buffer = frames.pop() ?? '';
    const out: unknown[] = [];
    for (const frame of frames) {
      const dataLines: string[] = [];
      for (const line of frame.split(/\r?\n/)) {
        if (line.startsWith('data:')) {
          dataLines.push(line.slice(5).trimStart());
        }
      }
      if (dataLines.length === 0) continue;
      try {
        out.push(JSON.parse(dataLines.join('\n')));
      } catch (e) {
        console.warn('dropping malformed SSE frame:', frame, e);
      }
    }
    return out;
  }
}

export interface ClientCallbacks {
  onEvent: (event: TurnEvent) => void;
  onDone: () => void;
  onConnectionLost: (reason: string) => void;
}

export class ChatClient {
  constructor(private baseUrl: string) {}

  async createSession(): Promise<string> {
    const response = await fetch(`${this.baseUrl}/v1/sessions`, { method: 'POST' });
    if (!response.ok) throw new Error(`HTTP ${response.status}`);
    const body = (await response.json()) as { id: string };
    return body.id;
  }

  async uploadImage(file: Blob, name: string): Promise<string> {
    const response = await fetch(`${this.baseUrl}/v1/artifacts`, {
      method: 'POST',
      headers: { 'X-Filename': name },
      body: file,
    });
    if (!response.ok) throw new Error(`HTTP ${response.status}`);
    const body = (await response.json()) as { image_id: string };
    return body.image_id;
  }

  /** POST a message and stream TurnEvents; resolves when the stream ends. */
  async sendMessage(
    sessionId: string,
    text: string,
    imageIds: string[],
    callbacks: ClientCallbacks,
  ): Promise<void> {
    let response: Response;
    try {
      response = await fetch(`${this.baseUrl}/v1/sessions/${sessionId}/messages`, {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ text, image_ids: imageIds }),
      });
    } catch (e) {
      callbacks.onConnectionLost(String(e));
      return;
    }
    if (!response.ok || !response.body) {
      callbacks.onConnectionLost(`HTTP ${response.status}`);
      return;
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder('utf-8');
    const parser = new SseFrameParser();
    try {
      for (;;) {
        const { value, done } = await reader.read();
        if (done) break;
        for (const decoded of parser.push(decoder.decode(value, { stream: true }))) {
          if (isTurnEvent(decoded)) {
            callbacks.onEvent(decoded);
          } else {
            console.warn('dropping malformed event:', decoded);
          }
        }
      }
      callbacks.onDone();
    } catch (e) {
      callbacks.onConnectionLost(String(e));
    }
  }
}

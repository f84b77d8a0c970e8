// Browser wiring: one session per tab, transcript above, composer below.

import { ChatClient } from './sse.js';
import { TranscriptState } from './state.js';
import { renderBanner, renderTurn } from './render.js';

const baseUrl = (window as any).TOOLCHAT_URL ?? '';

export async function startApp(root: HTMLElement): Promise<void> {
  const client = new ChatClient(baseUrl);
  const state = new TranscriptState();
  const pendingImages: string[] = [];

  root.innerHTML = `
    <div id="banner"></div>
    <main id="transcript"></main>
    <form id="composer">
      <input id="file" type="file" accept="image/*" />
      <span id="attachments"></span>
      <input id="text" type="text" placeholder="Ask about the people in your images" autocomplete="off" />
      <button id="send" type="submit">Send</button>
    </form>`;

  const transcript = root.querySelector<HTMLElement>('#transcript')!;
  const banner = root.querySelector<HTMLElement>('#banner')!;
  const textInput = root.querySelector<HTMLInputElement>('#text')!;
  const fileInput = root.querySelector<HTMLInputElement>('#file')!;
  const sendButton = root.querySelector<HTMLButtonElement>('#send')!;
  const attachments = root.querySelector<HTMLElement>('#attachments')!;
  const form = root.querySelector<HTMLFormElement>('#composer')!;

  const sessionId = await client.createSession();

  function redraw(): void {
    transcript.innerHTML = state.turns.map(renderTurn).join('\n');
    banner.innerHTML = renderBanner(state.connectionLost);
    textInput.disabled = !state.inputEnabled;
    sendButton.disabled = !state.inputEnabled;
    transcript.scrollTop = transcript.scrollHeight;
  }

  fileInput.addEventListener('change', async () => {
    const file = fileInput.files?.[0];
    if (!file) return;
    const imageId = await client.uploadImage(file, file.name);
    pendingImages.push(imageId);
    attachments.textContent = pendingImages.join(', ');
    fileInput.value = '';
  });

  form.addEventListener('submit', async (event) => {
    event.preventDefault();
    const text = textInput.value.trim();
    if (!text || !state.inputEnabled) return;
    textInput.value = '';
    state.beginTurn(text);
    const images = pendingImages.splice(0, pendingImages.length);
    attachments.textContent = '';
    redraw();
    await client.sendMessage(sessionId, text, images, {
      onEvent: (e) => {
        state.handleEvent(e);
        redraw();
      },
      onDone: () => redraw(),
      onConnectionLost: () => {
        state.handleConnectionLost();
        redraw();
      },
    });
  });

  redraw();
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  void startApp(document.getElementById('app')!);
}

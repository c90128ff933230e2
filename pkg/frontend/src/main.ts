import { ApiClient } from './api.js';
import { AppElements, DemoApp } from './app.js';

function requireElement<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
}

window.addEventListener('DOMContentLoaded', async () => {
  const elements: AppElements = {
    screen: requireElement('screen'),
    history: requireElement('history'),
    transcript: requireElement('transcript'),
    form: requireElement<HTMLFormElement>('composer'),
    input: requireElement<HTMLInputElement>('utterance'),
    status: requireElement('status'),
    debugToggle: requireElement<HTMLInputElement>('debug-toggle'),
  };
  const app = new DemoApp(new ApiClient(''), elements);
  await app.init();
});

// Demo application: owns the ViewState, talks to the service, re-renders.
// One in-flight request per session; input is disabled while waiting.

import { ApiClient, ApiError } from './api.js';
import {
  groundingScoreMap,
  renderHistoryStrip,
  renderScreen,
  renderTranscript,
  topTwoEntityIds,
} from './render.js';
import type { AgentResponse, ViewState } from './types.js';

export interface AppElements {
  screen: HTMLElement;
  history: HTMLElement;
  transcript: HTMLElement;
  form: HTMLFormElement;
  input: HTMLInputElement;
  status: HTMLElement;
  debugToggle: HTMLInputElement;
}

export class DemoApp {
  readonly state: ViewState = {
    sessionId: null,
    screen: null,
    transcript: [],
    lastGrounding: [],
    history: [],
    debugScores: false,
    busy: false,
    error: null,
  };

  private lastClarification = false;

  constructor(
    private readonly api: ApiClient,
    private readonly el: AppElements,
  ) {}

  async init(seed?: number): Promise<void> {
    const created = await this.api.createSession(seed);
    this.state.sessionId = created.session_id;
    this.state.screen = created.screen;
    this.state.transcript = [];
    this.state.history = [];
    this.render();
    this.el.form.addEventListener('submit', (event) => {
      event.preventDefault();
      const text = this.el.input.value.trim();
      if (text) void this.submit(text);
    });
    this.el.debugToggle.addEventListener('change', () => {
      this.state.debugScores = this.el.debugToggle.checked;
      this.render();
    });
  }

  async submit(text: string): Promise<AgentResponse | null> {
    if (this.state.busy || !this.state.sessionId) return null;
    this.state.busy = true;
    this.state.error = null;
    this.render();
    try {
      const response = await this.api.sendUtterance(this.state.sessionId, text);
      if (this.state.screen && response.screen.turn_index !== this.state.screen.turn_index) {
        this.state.history = [...this.state.history, this.state.screen];
      }
      this.state.transcript = [
        ...this.state.transcript,
        { speaker: 'user', text },
        { speaker: 'agent', text: response.text },
      ];
      this.state.screen = response.screen;
      this.state.lastGrounding = response.grounded;
      this.lastClarification = response.clarification;
      this.el.input.value = '';
      return response;
    } catch (err) {
      // keep state unchanged; show a retry banner
      this.state.error =
        err instanceof ApiError ? `Request failed: ${err.message}` : 'Network error, try again';
      return null;
    } finally {
      this.state.busy = false;
      this.render();
    }
  }

  render(): void {
    const { screen, debugScores, busy, error } = this.state;
    this.el.input.disabled = busy;
    this.el.status.textContent = error ?? (busy ? 'Thinking…' : '');
    this.el.status.classList.toggle('error', error !== null);

    if (screen) {
      const options = {
        scores: debugScores ? groundingScoreMap(this.state.lastGrounding) : undefined,
        pulse: this.lastClarification ? topTwoEntityIds(this.state.lastGrounding) : undefined,
      };
      this.el.screen.replaceChildren(renderScreen(screen, options));
    }
    this.el.history.replaceChildren(renderHistoryStrip(this.state.history));
    this.el.transcript.replaceChildren(renderTranscript(this.state.transcript));
    this.el.transcript.scrollTop = this.el.transcript.scrollHeight;
  }
}

// Pure-DOM rendering tests (no service).

import { describe, expect, it } from 'vitest';

import {
  groundingScoreMap,
  renderHistoryStrip,
  renderScreen,
  renderTranscript,
  topTwoEntityIds,
} from '../src/render.js';
import { DemoApp, type AppElements } from '../src/app.js';
import type { AgentResponse, GroundedArg, ScreenView, SessionCreated } from '../src/types.js';

function card(id: string, x: number, overrides: Record<string, unknown> = {}) {
  return {
    entity_id: id,
    kind: 'product_card' as const,
    x_position: x,
    visibility: 1.0,
    highlighted: false,
    name: 'oak desk',
    price: '129.99',
    rating: '4.5',
    prime: true,
    swatch: { color: 'blue', pattern: 'striped', shape: 'square' },
    ...overrides,
  };
}

function screen(turn = 0): ScreenView {
  return {
    turn_index: turn,
    schema_id: 'search_results',
    entities: [
      card('e1', 0),
      card('e2', 1, { highlighted: true, prime: false }),
      card('e3', 2),
      { entity_id: 'next', kind: 'next_page_button', x_position: 3, visibility: 1, highlighted: false },
      { entity_id: 'back', kind: 'back_button', x_position: 4, visibility: 1, highlighted: false },
    ],
  };
}

describe('renderScreen', () => {
  it('renders three cards and two buttons in x order', () => {
    const root = renderScreen(screen());
    const cards = root.querySelectorAll('.product-card');
    const buttons = root.querySelectorAll('.nav-button');
    expect(cards.length).toBe(3);
    expect(buttons.length).toBe(2);
    const ids = [...root.children].map((el) => (el as HTMLElement).dataset.entityId);
    expect(ids).toEqual(['e1', 'e2', 'e3', 'next', 'back']);
  });

  it('outlines the highlighted entity', () => {
    const root = renderScreen(screen());
    const highlighted = root.querySelectorAll('.product-card.highlighted');
    expect(highlighted.length).toBe(1);
    expect((highlighted[0] as HTMLElement).dataset.entityId).toBe('e2');
  });

  it('shows metadata caption and prime badge', () => {
    const root = renderScreen(screen());
    const first = root.querySelector('[data-entity-id="e1"]')!;
    expect(first.querySelector('.name')!.textContent).toBe('oak desk');
    expect(first.querySelector('.price')!.textContent).toBe('$129.99');
    expect(first.querySelector('.prime-badge')).not.toBeNull();
    const second = root.querySelector('[data-entity-id="e2"]')!;
    expect(second.querySelector('.prime-badge')).toBeNull();
  });

  it('overlays probabilities when scores are provided', () => {
    const scores = new Map([
      ['e1', 0.7],
      ['e3', 0.2],
    ]);
    const root = renderScreen(screen(), { scores });
    expect(root.querySelector('[data-entity-id="e1"] .score-badge')!.textContent).toBe('70.0%');
    expect(root.querySelector('[data-entity-id="e2"] .score-badge')).toBeNull();
  });

  it('pulses requested entities', () => {
    const root = renderScreen(screen(), { pulse: new Set(['e1', 'e3']) });
    const pulsing = [...root.querySelectorAll('.pulse')].map(
      (el) => (el as HTMLElement).dataset.entityId,
    );
    expect(pulsing).toEqual(['e1', 'e3']);
  });
});

describe('history strip', () => {
  it('shows the last three screens as swatch chips', () => {
    const history = [screen(0), screen(1), screen(2), screen(3)];
    const strip = renderHistoryStrip(history, 3);
    const minis = strip.querySelectorAll('.mini-screen');
    expect(minis.length).toBe(3);
    expect((minis[0] as HTMLElement).dataset.turnIndex).toBe('1');
    expect(minis[0].querySelectorAll('.swatch.mini').length).toBe(3);
  });
});

describe('transcript', () => {
  it('keeps speaker order', () => {
    const el = renderTranscript([
      { speaker: 'user', text: 'hello' },
      { speaker: 'agent', text: 'hi there' },
    ]);
    const lines = [...el.querySelectorAll('p')].map((p) => p.textContent);
    expect(lines).toEqual(['You: hello', 'Agent: hi there']);
  });
});

describe('grounding helpers', () => {
  const grounded: GroundedArg[] = [
    {
      arg_name: 'item',
      entity_id: 'e2',
      score: 3.4,
      runner_up_margin: 0.02,
      candidate_scores: [
        { entity_id: 'e1', score: 1.0, prob: 0.3 },
        { entity_id: 'e2', score: 3.4, prob: 0.45 },
        { entity_id: 'e3', score: 0.2, prob: 0.25 },
      ],
    },
  ];

  it('collects per-entity probabilities', () => {
    const map = groundingScoreMap(grounded);
    expect(map.get('e2')).toBeCloseTo(0.45);
    expect(map.size).toBe(3);
  });

  it('selects the top-2 for clarification pulses', () => {
    expect([...topTwoEntityIds(grounded)].sort()).toEqual(['e1', 'e2']);
  });
});

describe('DemoApp state machine', () => {
  function harness() {
    document.body.innerHTML = `
      <div id="screen"></div><div id="history"></div><div id="transcript"></div>
      <form id="composer"><input id="utterance"></form>
      <div id="status"></div><input type="checkbox" id="debug-toggle">`;
    const el: AppElements = {
      screen: document.getElementById('screen')!,
      history: document.getElementById('history')!,
      transcript: document.getElementById('transcript')!,
      form: document.getElementById('composer') as HTMLFormElement,
      input: document.getElementById('utterance') as HTMLInputElement,
      status: document.getElementById('status')!,
      debugToggle: document.getElementById('debug-toggle') as HTMLInputElement,
    };
    return el;
  }

  function fakeApi(responses: { screen: ScreenView; reply?: Partial<AgentResponse> }) {
    return {
      async createSession(): Promise<SessionCreated> {
        return { session_id: 's1', seed: 1, screen: responses.screen };
      },
      async sendUtterance(_sid: string, text: string): Promise<AgentResponse> {
        if (responses.reply === undefined) throw new Error('boom');
        return {
          text: `echo ${text}`,
          clarification: false,
          action: { api: 'SELECT', args: [] },
          grounded: [],
          screen: { ...responses.screen, turn_index: responses.screen.turn_index + 1 },
          transcript_length: 2,
          ...responses.reply,
        };
      },
      async getScreen(): Promise<ScreenView> {
        return responses.screen;
      },
    };
  }

  it('renders the initial screen and appends turns', async () => {
    const el = harness();
    const app = new DemoApp(fakeApi({ screen: screen(), reply: {} }) as never, el);
    await app.init();
    expect(el.screen.querySelectorAll('.product-card').length).toBe(3);
    const response = await app.submit('select the middle one');
    expect(response).not.toBeNull();
    expect(el.transcript.querySelectorAll('p').length).toBe(2);
    expect(app.state.history.length).toBe(1);
  });

  it('keeps state and shows a banner on network failure', async () => {
    const el = harness();
    const app = new DemoApp(fakeApi({ screen: screen() }) as never, el);
    await app.init();
    const before = app.state.screen;
    const result = await app.submit('hello');
    expect(result).toBeNull();
    expect(app.state.screen).toBe(before);
    expect(app.state.transcript.length).toBe(0);
    expect(el.status.textContent).toContain('Network error');
  });
});

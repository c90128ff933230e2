// Pure DOM construction for screens, transcript, and the history strip.
// Product "images" are procedural swatches: color fill, pattern overlay,
// shape silhouette.

import type { GroundedArg, ScreenEntity, ScreenView, TranscriptEntry } from './types.js';

const SWATCH_COLORS: Record<string, string> = {
  red: '#c0392b', blue: '#2d6cdf', green: '#27ae60', black: '#1c1c1c',
  white: '#f4f4f4', grey: '#95a5a6', brown: '#8d6e63', yellow: '#f1c40f',
  orange: '#e67e22', purple: '#8e44ad', pink: '#e91e63', beige: '#d9c7a7',
};

function starString(rating: string | undefined): string {
  const value = rating ? parseFloat(rating) : 0;
  const full = Math.round(value);
  return '★'.repeat(full) + '☆'.repeat(Math.max(0, 5 - full));
}

export function renderSwatch(entity: ScreenEntity): HTMLElement {
  const swatch = document.createElement('div');
  swatch.className = 'swatch';
  const s = entity.swatch;
  if (s) {
    swatch.style.backgroundColor = SWATCH_COLORS[s.color] ?? '#ccc';
    swatch.classList.add(`pattern-${s.pattern ?? 'plain'}`);
    swatch.classList.add(`shape-${s.shape ?? 'default'}`);
    swatch.title = [s.color, s.pattern, s.shape].filter(Boolean).join(' / ');
  }
  return swatch;
}

function scoreBadge(prob: number): HTMLElement {
  const badge = document.createElement('div');
  badge.className = 'score-badge';
  badge.textContent = `${(prob * 100).toFixed(1)}%`;
  return badge;
}

export interface RenderOptions {
  scores?: Map<string, number>;   // entity_id -> probability (debug overlay)
  pulse?: Set<string>;            // entities to pulse (clarification)
}

export function renderEntityCard(entity: ScreenEntity, options: RenderOptions = {}): HTMLElement {
  const card = document.createElement('div');
  card.dataset.entityId = entity.entity_id;
  card.dataset.kind = entity.kind;

  if (entity.kind !== 'product_card') {
    card.className = 'nav-button';
    card.textContent = entity.kind === 'next_page_button' ? 'Next page ›' : '‹ Back';
    return card;
  }

  card.className = 'product-card';
  if (entity.highlighted) card.classList.add('highlighted');
  if (options.pulse?.has(entity.entity_id)) card.classList.add('pulse');

  card.appendChild(renderSwatch(entity));

  const caption = document.createElement('div');
  caption.className = 'caption';
  const name = document.createElement('div');
  name.className = 'name';
  name.textContent = entity.name ?? '';
  const price = document.createElement('div');
  price.className = 'price';
  price.textContent = entity.price ? `$${entity.price}` : '';
  const rating = document.createElement('div');
  rating.className = 'rating';
  rating.textContent = `${starString(entity.rating)} (${entity.rating ?? '?'})`;
  caption.append(name, price, rating);
  if (entity.prime) {
    const badge = document.createElement('span');
    badge.className = 'prime-badge';
    badge.textContent = 'prime';
    caption.appendChild(badge);
  }
  card.appendChild(caption);

  const prob = options.scores?.get(entity.entity_id);
  if (prob !== undefined) card.appendChild(scoreBadge(prob));
  return card;
}

export function renderScreen(screen: ScreenView, options: RenderOptions = {}): HTMLElement {
  const root = document.createElement('div');
  root.className = 'screen';
  root.dataset.turnIndex = String(screen.turn_index);
  const sorted = [...screen.entities].sort((a, b) => a.x_position - b.x_position);
  for (const entity of sorted) {
    root.appendChild(renderEntityCard(entity, options));
  }
  return root;
}

export function renderHistoryStrip(history: ScreenView[], maxScreens = 3): HTMLElement {
  const strip = document.createElement('div');
  strip.className = 'history-strip';
  for (const screen of history.slice(-maxScreens)) {
    const mini = document.createElement('div');
    mini.className = 'mini-screen';
    mini.dataset.turnIndex = String(screen.turn_index);
    for (const entity of screen.entities) {
      if (entity.kind !== 'product_card') continue;
      const chip = renderSwatch(entity);
      chip.classList.add('mini');
      chip.dataset.entityId = entity.entity_id;
      mini.appendChild(chip);
    }
    strip.appendChild(mini);
  }
  return strip;
}

export function renderTranscript(entries: TranscriptEntry[]): HTMLElement {
  const list = document.createElement('div');
  list.className = 'transcript';
  for (const entry of entries) {
    const line = document.createElement('p');
    line.className = `turn ${entry.speaker}`;
    line.textContent = `${entry.speaker === 'user' ? 'You' : 'Agent'}: ${entry.text}`;
    list.appendChild(line);
  }
  return list;
}

export function groundingScoreMap(grounded: GroundedArg[]): Map<string, number> {
  const map = new Map<string, number>();
  for (const arg of grounded) {
    for (const cand of arg.candidate_scores) {
      const prev = map.get(cand.entity_id);
      if (prev === undefined || cand.prob > prev) map.set(cand.entity_id, cand.prob);
    }
  }
  return map;
}

export function topTwoEntityIds(grounded: GroundedArg[]): Set<string> {
  const out = new Set<string>();
  for (const arg of grounded) {
    const ranked = [...arg.candidate_scores].sort((a, b) => b.prob - a.prob).slice(0, 2);
    for (const cand of ranked) out.add(cand.entity_id);
  }
  return out;
}

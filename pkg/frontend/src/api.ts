// Thin client over the session-service HTTP protocol. All grounding happens
// server-side; this module only moves JSON.

import type { AgentResponse, ScreenView, SessionCreated } from './types.js';

export class ApiError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (body && typeof body.detail === 'string') detail = body.detail;
    } catch {
      // keep statusText
    }
    throw new ApiError(detail, response.status);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(private readonly baseUrl: string = '') {}

  async health(): Promise<{ status: string }> {
    return asJson(await fetch(`${this.baseUrl}/healthz`));
  }

  async createSession(seed?: number): Promise<SessionCreated> {
    return asJson(
      await fetch(`${this.baseUrl}/sessions`, {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify(seed === undefined ? {} : { seed }),
      }),
    );
  }

  async sendUtterance(sessionId: string, text: string): Promise<AgentResponse> {
    return asJson(
      await fetch(`${this.baseUrl}/sessions/${sessionId}/utterance`, {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ text }),
      }),
    );
  }

  async getScreen(sessionId: string): Promise<ScreenView> {
    return asJson(await fetch(`${this.baseUrl}/sessions/${sessionId}/screen`));
  }
}

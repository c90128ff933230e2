// Protocol types for the session service (mirrors the server JSON).

export interface Swatch {
  color: string;
  pattern: string | null;
  shape: string | null;
}

export interface ScreenEntity {
  entity_id: string;
  kind: 'product_card' | 'next_page_button' | 'back_button';
  x_position: number;
  visibility: number;
  highlighted: boolean;
  name?: string;
  price?: string;
  rating?: string;
  prime?: boolean;
  swatch?: Swatch;
}

export interface ScreenView {
  turn_index: number;
  schema_id: string;
  entities: ScreenEntity[];
}

export interface CandidateScore {
  entity_id: string;
  score: number;
  prob: number;
}

export interface GroundedArg {
  arg_name: string;
  entity_id: string;
  score: number;
  runner_up_margin: number;
  candidate_scores: CandidateScore[];
}

export interface ActionArg {
  arg_name: string;
  arg_type: string;
  binding: string | null;
}

export interface AgentAction {
  api: string;
  args: ActionArg[];
}

export interface AgentResponse {
  text: string;
  clarification: boolean;
  action: AgentAction | null;
  grounded: GroundedArg[];
  screen: ScreenView;
  transcript_length: number;
}

export interface SessionCreated {
  session_id: string;
  seed: number;
  screen: ScreenView;
}

export interface TranscriptEntry {
  speaker: 'user' | 'agent';
  text: string;
}

export interface ViewState {
  sessionId: string | null;
  screen: ScreenView | null;
  transcript: TranscriptEntry[];
  lastGrounding: GroundedArg[];
  history: ScreenView[];
  debugScores: boolean;
  busy: boolean;
  error: string | null;
}
